import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from osmprobe.problems import curved_advection, custom_strip, laplace_strip
from osmprobe.schur import SolveCounter, monolithic_interface_trace, neumann_data


def test_laplace_eigenvalues_approach_k_pi(laplace50):
    S = laplace50.problem.sigma1.materialize()
    lam = np.sort(np.linalg.eigvalsh(S))
    k = np.arange(1, 6)
    np.testing.assert_allclose(lam[:5], k * np.pi, rtol=0.02)


def test_laplace_sine_modes_are_eigenvectors(laplace16):
    p = laplace16.problem
    n = p.dim
    t = np.arange(1, n + 1) / (n + 1)
    S = p.sigma1.materialize()
    for k in (1, 4, 16):
        v = np.sin(k * np.pi * t)
        w = S @ v
        lam = v @ w / (v @ v)
        assert np.linalg.norm(w - lam * v) < 1e-10 * np.linalg.norm(w)


def test_apply_matches_dense(curved_coarse, rng):
    for op in (curved_coarse.problem.sigma1, curved_coarse.problem.sigma2):
        x = rng.standard_normal(op.dim)
        np.testing.assert_allclose(op.apply(x), op.materialize() @ x, rtol=1e-10, atol=1e-10)
        np.testing.assert_array_equal(op.apply(np.zeros(op.dim)), 0.0)


def test_symmetric_problem_has_equal_sides(laplace16):
    p = laplace16.problem
    S1, S2 = p.sigma1.materialize(), p.sigma2.materialize()
    np.testing.assert_allclose(S1, S2, atol=1e-12 * np.abs(S1).max())
    np.testing.assert_allclose(S1, S1.T, atol=1e-12 * np.abs(S1).max())
    assert np.linalg.eigvalsh(S1).min() > 0


def test_advection_materialize_nonsymmetric(curved_coarse):
    S = curved_coarse.problem.sigma1.materialize()
    assert np.abs(S - S.T).max() > 1e-6 * np.abs(S).max()
    assert not S.flags.writeable


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), side=st.sampled_from([1, 2]))
def test_inverse_round_trip(curved_coarse, seed, side):
    op = curved_coarse.problem.sigma(side)
    x = np.random.default_rng(seed).standard_normal(op.dim)
    assert np.linalg.norm(op.apply_inverse(op.apply(x)) - x) <= 1e-9 * np.linalg.norm(x)
    assert np.linalg.norm(op.apply(op.apply_inverse(x)) - x) <= 1e-9 * np.linalg.norm(x)


def test_zero_forcing_gives_zero_mu(laplace16):
    np.testing.assert_array_equal(laplace16.problem.mu, 0.0)


@pytest.mark.parametrize("make", [lambda: laplace_strip(20, f=lambda x, y: np.sin(3 * x) + y),
                                  lambda: curved_advection(n_h=25, nx=8)])
def test_steklov_identity(make):
    s = make()
    p = s.problem
    u = p.reference_interface()
    res = p.sigma1.apply(u) + p.sigma2.apply(u) - p.mu
    assert np.linalg.norm(res) <= 1e-9 * np.linalg.norm(p.mu)
    # the direct solve of the unsplit matrix gives the same trace
    np.testing.assert_allclose(monolithic_interface_trace(p, s.coeffs), u, rtol=1e-10, atol=1e-14)


def test_solve_counter():
    s = laplace_strip(8)
    p = s.problem
    c = p.counter.count
    assert c == 2                      # building mu costs one interior solve per side
    x = np.ones(p.dim)
    p.sigma1.apply(x)
    p.sigma2.apply_inverse(x)
    assert p.counter.count == c + 2
    p.sigma1.materialize()
    p.sigma1.materialize()             # cached
    assert p.counter.count == c + 2 + p.dim
    p.monolithic_solution()            # reference solves are not counted
    assert p.counter.count == c + 2 + p.dim


def test_counter_thread_safe():
    from concurrent.futures import ThreadPoolExecutor
    c = SolveCounter()
    with ThreadPoolExecutor(8) as ex:
        list(ex.map(lambda _: [c.add() for _ in range(1000)], range(8)))
    assert c.count == 8000


def test_custom_scale():
    s = laplace_strip(8)
    p1 = neumann_data(s.system, scale=1.0)
    S1 = p1.sigma1.materialize()
    np.testing.assert_allclose(s.problem.sigma1.materialize(), S1 / s.h, rtol=1e-12)


def test_length_check(laplace16):
    with pytest.raises(ValueError):
        laplace16.problem.sigma1.apply(np.ones(3))


def test_custom_strip_steklov():
    s = custom_strip(15, 6, {"nu": 2.0, "a": (1.0, 0.0), "eta": 0.5, "f": 1.0}, {"nu": 0.5, "f": 2.0}, r=0.2, k_hat=2)
    p = s.problem
    u = p.reference_interface()
    res = p.sigma1.apply(u) + p.sigma2.apply(u) - p.mu
    assert np.linalg.norm(res) <= 1e-9 * np.linalg.norm(p.mu)


def test_inverse_on_eigenvectors(laplace16):
    op = laplace16.problem.sigma1
    n = op.dim
    t = np.arange(1, n + 1) / (n + 1)
    lam = np.linalg.eigvalsh(op.materialize())
    for k in (1, 7, 16):
        v = np.sin(k * np.pi * t)
        w = op.apply_inverse(v)
        lam_k = v @ op.apply(v) / (v @ v)
        assert lam_k == pytest.approx(lam[k - 1], rel=1e-10)
        np.testing.assert_allclose(w, v / lam_k, atol=1e-12)
    np.testing.assert_array_equal(op.apply_inverse(np.zeros(n)), 0.0)


def test_toy_materialize_spd():
    S = laplace_strip(3).problem.sigma2.materialize()
    assert S.shape == (3, 3)
    np.testing.assert_allclose(S, S.T, atol=1e-14)
    assert np.linalg.eigvalsh(S).min() > 0


def test_mu_refinement():
    """The interface load (integrated against 1) settles under refinement."""
    totals = []
    for n_h, nx in ((25, 5), (50, 10), (100, 20), (200, 40)):
        s = curved_advection(n_h=n_h, nx=nx)
        assert np.all(np.isfinite(s.problem.mu))
        totals.append(np.sum(s.problem.mu) * s.h)
    diffs = np.abs(np.diff(totals))
    assert np.all(diffs[1:] < diffs[:-1])
    assert diffs[-1] < 0.02 * abs(totals[-1])
