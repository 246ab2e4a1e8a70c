import numpy as np
import pytest
import scipy.sparse as sp

from osmprobe.assembly import (AssemblyError, PdeCoefficients, SideBlocks, SideCoefficients,
                               SingularSubdomainError, SubdomainOperator, assemble_blocks,
                               assemble_monolithic, assemble_neumann_variant)
from osmprobe.linalg import write_triplets
from osmprobe.mesh import InterfaceGeometry, NodeClass, build_strip_mesh
from osmprobe.problems import curved_advection, curved_coefficients


def _straight(n_h, nx):
    return build_strip_mesh(-1.0, 1.0, InterfaceGeometry.straight(n_h), nx, n_h + 1)


def _loop_assembly(mesh, coeffs):
    """Element-by-element reference with the same quadrature rules."""
    n = mesh.nodes.shape[0]
    K = np.zeros((n, n))
    b = np.zeros(n)
    for cell, side in zip(mesh.cells, mesh.cell_side):
        c = coeffs.side(int(side))
        P = mesh.nodes[cell]
        M = np.array([[1.0, P[0, 0], P[0, 1]], [1.0, P[1, 0], P[1, 1]], [1.0, P[2, 0], P[2, 1]]])
        area = 0.5 * np.linalg.det(M)
        G = np.linalg.inv(M)[1:, :]          # column j: gradient of phi_j
        xc, yc = P.mean(axis=0)
        nu = float(c.nu_at(np.array([xc]), np.array([yc]))[0])
        ax, ay = (float(v[0]) for v in c.a_at(np.array([xc]), np.array([yc])))
        for i in range(3):
            for j in range(3):
                K[cell[i], cell[j]] += nu * area * G[:, i] @ G[:, j]
                K[cell[i], cell[j]] += area / 3 * (ax * G[0, j] + ay * G[1, j])
            xi, yi = P[i]
            K[cell[i], cell[i]] += area / 3 * float(c.eta_at(np.array([xi]), np.array([yi]))[0])
            b[cell[i]] += area / 3 * float(c.f_at(np.array([xi]), np.array([yi]))[0])
    free = np.flatnonzero(mesh.node_class != NodeClass.DIRICHLET)
    return K[np.ix_(free, free)], b[free]


def test_five_point_stencil():
    mesh = _straight(3, 4)               # square cells
    A, _, free = assemble_monolithic(mesh, PdeCoefficients.uniform())
    A = A.toarray()
    ncol = mesh.shape[0]
    pos = {g: k for k, g in enumerate(free)}
    # every free node whose four neighbours are all free
    for g in free:
        j, i = divmod(g, ncol)
        nbrs = [g - 1, g + 1, g - ncol, g + ncol]
        if all(nb in pos for nb in nbrs):
            row = A[pos[g]]
            assert row[pos[g]] == pytest.approx(4.0)
            for nb in nbrs:
                assert row[pos[nb]] == pytest.approx(-1.0)
            assert np.count_nonzero(np.abs(row) > 1e-14) == 5
    np.testing.assert_allclose(A.diagonal(), 4.0)


def test_reaction_adds_lumped_mass():
    mesh = _straight(3, 4)
    A0, _, _ = assemble_monolithic(mesh, PdeCoefficients.uniform())
    A1, _, _ = assemble_monolithic(mesh, PdeCoefficients.uniform(eta=2.0))
    D = (A1 - A0).toarray()
    np.testing.assert_allclose(D, np.diag(np.diag(D)), atol=1e-15)
    h2 = (1 / 4) ** 2
    # interior vertex belongs to 6 triangles of area h^2/2
    np.testing.assert_allclose(np.diag(D), 2.0 * h2, rtol=1e-12)


def test_diffusion_ratio_between_sides():
    mesh = _straight(5, 6)
    coeffs = PdeCoefficients(SideCoefficients(nu=1.0), SideCoefficients(nu=100.0))
    sys = assemble_blocks(mesh, coeffs)
    assert sys.side2.A_II.diagonal().mean() / sys.side1.A_II.diagonal().mean() == pytest.approx(100.0)
    np.testing.assert_allclose(sys.side2.A_GG.toarray(), 100 * sys.side1.A_GG.toarray(), rtol=1e-12)


@pytest.mark.parametrize("r", [0.0, 0.3])
def test_blocks_match_loop_reference(r):
    geom = InterfaceGeometry.sine(r, 2, 7) if r else InterfaceGeometry.straight(7)
    mesh = build_strip_mesh(-1.0, 1.0, geom, 5, 8)
    coeffs = curved_coefficients()
    K_ref, b_ref = _loop_assembly(mesh, coeffs)
    A, b, free = assemble_monolithic(mesh, coeffs)
    np.testing.assert_allclose(A.toarray(), K_ref, atol=1e-12 * np.abs(K_ref).max())
    np.testing.assert_allclose(b, b_ref, atol=1e-14)
    # block split reorders the same matrix
    sys = assemble_blocks(mesh, coeffs)
    order = np.concatenate([sys.side1.interior, sys.side2.interior, sys.side1.interface])
    P = np.searchsorted(free, order)
    np.testing.assert_allclose(sys.full_matrix().toarray(), K_ref[np.ix_(P, P)], atol=1e-12 * np.abs(K_ref).max())
    np.testing.assert_allclose(sys.full_rhs(), b_ref[P], atol=1e-14)


def test_symmetric_without_advection():
    mesh = build_strip_mesh(-1.0, 1.0, InterfaceGeometry.sine(0.3, 3, 9), 4, 10)
    A, _, _ = assemble_monolithic(mesh, PdeCoefficients.uniform(nu=lambda x, y: 1 + x**2, eta=0.5))
    assert abs(A - A.T).max() < 1e-13


def test_advection_is_nonsymmetric():
    sys = curved_advection(n_h=9, nx=4).system
    assert abs(sys.side1.A_II - sys.side1.A_II.T).max() > 1e-3


def test_invalid_coefficients():
    mesh = _straight(3, 4)
    with pytest.raises(AssemblyError, match="diffusivity"):
        assemble_blocks(mesh, PdeCoefficients.uniform(nu=-1.0))
    with pytest.raises(AssemblyError, match="reaction"):
        assemble_blocks(mesh, PdeCoefficients.uniform(eta=lambda x, y: x))


def test_singular_neumann_detected():
    # a lone triangle with one interior node and a free (Neumann) interface: rows sum to zero
    K = sp.csr_matrix(np.array([[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]]))
    blocks = SideBlocks(side=1, A_II=K[:1, :1], A_IG=K[:1, 1:], A_GI=K[1:, :1], A_GG=K[1:, 1:],
                        f_I=np.zeros(1), f_G=np.zeros(2), interior=np.array([0]), interface=np.array([1, 2]))
    with pytest.raises(SingularSubdomainError):
        SubdomainOperator.from_blocks(blocks)


@pytest.mark.parametrize("eta", [0.0, 1.0, 1e6])
def test_neumann_variant_round_trip(eta, rng):
    mesh = build_strip_mesh(-1.0, 1.0, InterfaceGeometry.sine(0.4, 6, 19), 6, 20)
    coeffs = PdeCoefficients.uniform(eta=eta)
    op = assemble_neumann_variant(mesh, coeffs, 2)
    b = op.blocks
    x = rng.standard_normal(b.A_GG.shape[0])
    sx = b.A_GG @ x - b.A_GI @ op.fact_II.solve(b.A_IG @ x)
    rhs = np.concatenate([np.zeros(b.n_interior), sx])
    y = op.fact_neumann.solve(rhs)[b.n_interior:]
    assert np.linalg.norm(y - x) <= 1e-9 * np.linalg.norm(x)


def test_scatter_places_values():
    mesh = _straight(3, 4)
    sys = assemble_blocks(mesh, PdeCoefficients.uniform())
    u = sys.scatter(np.full(sys.side1.n_interior, 1.0), np.full(sys.side2.n_interior, 2.0),
                    np.full(sys.n_interface, 3.0))
    assert set(u[mesh.nodes_of(NodeClass.DIRICHLET)]) == {0.0}
    assert set(u[mesh.nodes_of(NodeClass.INTERFACE)]) == {3.0}
    assert set(u[mesh.nodes_of(NodeClass.INTERIOR2)]) == {2.0}


def test_triplet_dump_round_trip(tmp_path):
    A, _, _ = assemble_monolithic(_straight(3, 4), PdeCoefficients.uniform())
    path = tmp_path / "A.txt"
    write_triplets(A, path)
    data = np.loadtxt(path)
    B = sp.coo_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=A.shape)
    assert abs(B - A).max() == 0.0
