"""Admissible transmission matrices and the Fourier-symbol baseline.

A family maps a short parameter vector to the pair of interface matrices
``(T_1, T_2)`` used in the two half-steps of the interface iteration;
``T_1`` should mimic ``Sigma_2`` and ``T_2`` should mimic ``Sigma_1``.
Positive parameters are optimized through their logarithm.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .linalg import nelder_mead, to_csr


class TransmissionError(ValueError):
    pass


def tridiagonal_H(n: int, h: float) -> sp.csr_matrix:
    """Second difference matrix ``diag(2/h^2) - offdiag(1/h^2)`` of size ``n``."""
    main = np.full(n, 2.0 / h**2)
    off = np.full(n - 1, -1.0 / h**2)
    return to_csr(sp.diags([off, main, off], [-1, 0, 1]))


def _geo(lo, hi):
    return np.sqrt(lo * hi)


class TransmissionFamily:
    name = "abstract"
    param_count = 0
    param_names: tuple = ()

    def check(self, params) -> np.ndarray:
        params = np.atleast_1d(np.asarray(params, dtype=float))
        if params.size != self.param_count:
            raise TransmissionError(f"{self.name} takes {self.param_count} parameters, got {params.size}")
        return params

    def to_theta(self, params) -> np.ndarray:
        params = self.check(params)
        if np.any(params <= 0):
            raise TransmissionError(f"{self.name} parameters must be positive, got {params.tolist()}")
        return np.log(params)

    def from_theta(self, theta) -> np.ndarray:
        return np.exp(np.asarray(theta, dtype=float))

    def realize(self, params, side: int, n: int):
        raise NotImplementedError

    def apply(self, params, side: int, X: np.ndarray) -> np.ndarray:
        return self.realize(params, side, X.shape[0]) @ X

    def symbol(self, params, side: int, k: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def initial_guess(self, bounds) -> np.ndarray:
        """Starting parameters from spectral bounds ``((lo1, hi1), (lo2, hi2))`` of Sigma_1, Sigma_2."""
        raise NotImplementedError

    def describe(self, params) -> dict:
        return dict(zip(self.param_names, map(float, self.check(params))))


class _ScalarFamily(TransmissionFamily):
    def _value(self, params, side):
        raise NotImplementedError

    def realize(self, params, side, n):
        return to_csr(self._value(self.check(params), side) * sp.identity(n))

    def apply(self, params, side, X):
        return self._value(self.check(params), side) * X

    def symbol(self, params, side, k):
        return np.full_like(np.asarray(k, dtype=float), self._value(self.check(params), side))


class RobinSingle(_ScalarFamily):
    """``T_1 = T_2 = s I``."""

    name = "robin"
    param_count = 1
    param_names = ("s",)

    def _value(self, params, side):
        return params[0]

    def initial_guess(self, bounds):
        lo = min(b[0] for b in bounds)
        hi = max(b[1] for b in bounds)
        return np.array([_geo(lo, hi)])


class RobinDouble(_ScalarFamily):
    """``T_1 = s1 I``, ``T_2 = s2 I``."""

    name = "robin2"
    param_count = 2
    param_names = ("s1", "s2")

    def _value(self, params, side):
        return params[side - 1]

    def initial_guess(self, bounds):
        (lo1, hi1), (lo2, hi2) = bounds
        # start off the diagonal: the two-sided optimum splits low and high frequencies
        return np.array([lo2 ** 0.75 * hi2 ** 0.25, lo1 ** 0.25 * hi1 ** 0.75])


class SecondOrder(TransmissionFamily):
    """``T_i = p I + q H`` with ``H`` the interface second difference."""

    name = "second_order"
    param_count = 2
    param_names = ("p", "q")

    def __init__(self, h: float):
        self.h = float(h)

    def realize(self, params, side, n):
        p, q = self.check(params)
        return to_csr(p * sp.identity(n) + q * tridiagonal_H(n, self.h))

    def symbol(self, params, side, k):
        p, q = self.check(params)
        return p + q * np.asarray(k, dtype=float) ** 2

    def initial_guess(self, bounds):
        lo = min(b[0] for b in bounds)
        hi = max(b[1] for b in bounds)
        return np.array([(lo**3 * hi) ** 0.25 / np.sqrt(2), 1.0 / (np.sqrt(2) * (lo * hi**3) ** 0.25)])


@dataclass(frozen=True)
class PhysicsConstants:
    """Frozen coefficients of one subdomain near the interface.

    ``a_n`` is the advection component pointing from the interface into the
    subdomain, ``a_t`` the tangential one.
    """

    nu: float
    a_n: float = 0.0
    a_t: float = 0.0
    eta: float = 0.0

    def _shift(self):
        return (self.a_n**2 + self.a_t**2) / (4 * self.nu**2) + self.eta / self.nu

    def f(self, s):
        s = np.asarray(s, dtype=float)
        return self.nu * np.sqrt(s**2 + self._shift()) - self.a_n / 2

    def inverse(self, value: float, floor: float = 1e-8) -> float:
        r = ((value + self.a_n / 2) / self.nu) ** 2 - self._shift()
        return float(np.sqrt(max(r, floor**2)))


class PhysicsRescaled(TransmissionFamily):
    """One parameter ``s``; ``T_1 = f_2(s) I`` and ``T_2 = f_1(s) I``.

    ``f_i(s) = nu_i sqrt(s^2 + (a_n^2 + a_t^2)/(4 nu_i^2) + eta_i/nu_i) - a_n/2``
    is the half-plane Steklov-Poincare symbol of subdomain i at frequency s,
    so each half-step is matched with the neighbour's physics.
    """

    name = "physics"
    param_count = 1
    param_names = ("s",)

    def __init__(self, side1: PhysicsConstants, side2: PhysicsConstants):
        self.constants = (side1, side2)

    def value(self, s, side):
        return float(self.constants[2 - side].f(s))

    def realize(self, params, side, n):
        return to_csr(self.value(self.check(params)[0], side) * sp.identity(n))

    def apply(self, params, side, X):
        return self.value(self.check(params)[0], side) * X

    def symbol(self, params, side, k):
        return np.full_like(np.asarray(k, dtype=float), self.value(self.check(params)[0], side))

    def initial_guess(self, bounds):
        s = [self.constants[i].inverse(_geo(*bounds[i])) for i in (0, 1)]
        return np.array([_geo(*s)])

    def half_plane_symbol(self, side: int) -> Callable[[np.ndarray], np.ndarray]:
        return self.constants[side - 1].f


class FixedMatrices(TransmissionFamily):
    """No parameters; returns the given matrices.  Used for exact-operator checks."""

    name = "fixed"
    param_count = 0

    def __init__(self, tm1, tm2):
        self.tm = (np.asarray(tm1, dtype=float), np.asarray(tm2, dtype=float))

    def to_theta(self, params):
        return np.zeros(0)

    def from_theta(self, theta):
        return np.zeros(0)

    def realize(self, params, side, n):
        return self.tm[side - 1]

    def initial_guess(self, bounds):
        return np.zeros(0)


def physics_constants(coeffs, mesh, side: int, at: str = "midpoint") -> PhysicsConstants:
    """Evaluate one side's coefficients at the interface midpoint or average them over it."""
    if at == "midpoint":
        t = np.array([0.5])
        x = mesh.geometry.x_of(t)
    elif at == "mean":
        t = mesh.interface_t
        x = mesh.nodes[mesh.interface_order, 0]
    else:
        raise TransmissionError(f"unknown evaluation point {at!r} (use 'midpoint' or 'mean')")
    c = coeffs.side(side)
    ax, ay = c.a_at(x, t)
    sign = -1.0 if side == 1 else 1.0
    return PhysicsConstants(
        nu=float(np.mean(c.nu_at(x, t))),
        a_n=float(sign * np.mean(ax)),
        a_t=float(np.mean(ay)),
        eta=float(np.mean(c.eta_at(x, t))),
    )


def make_family(name: str, *, h: float = None, constants: Sequence[PhysicsConstants] = None) -> TransmissionFamily:
    if name == "robin":
        return RobinSingle()
    if name == "robin2":
        return RobinDouble()
    if name == "second_order":
        if h is None:
            raise TransmissionError("second_order family needs the interface spacing h")
        return SecondOrder(h)
    if name == "physics":
        if constants is None:
            raise TransmissionError("physics family needs per-side coefficient constants")
        return PhysicsRescaled(*constants)
    raise TransmissionError(f"unknown transmission family {name!r}; choose robin, robin2, second_order or physics")


def fourier_factor(family: TransmissionFamily, params, symbols, k) -> np.ndarray:
    """Convergence factor of the interface iteration for each frequency in ``k``."""
    s1, s2 = (np.asarray(sym(k), dtype=float) for sym in symbols)
    g1 = family.symbol(params, 1, k)
    g2 = family.symbol(params, 2, k)
    return np.abs((g1 - s2) * (g2 - s1) / ((g1 + s1) * (g2 + s2)))


@dataclass
class FourierEstimate:
    params: np.ndarray
    value: float
    nfev: int


def fourier_estimate(symbols, family: TransmissionFamily, k_min: float, k_max: float,
                     n_samples: int = 200, start=None, tol: float = 1e-10) -> FourierEstimate:
    """Min-max of the sampled Fourier convergence factor over the family."""
    if not 0 < k_min < k_max:
        raise TransmissionError(f"need 0 < k_min < k_max, got {k_min}, {k_max}")
    k = np.geomspace(k_min, k_max, n_samples)
    sig = [np.asarray(s(k), dtype=float) for s in symbols]
    if np.any(sig[0] <= 0) or np.any(sig[1] <= 0):
        raise TransmissionError("symbols must be positive on [k_min, k_max]")
    if start is None:
        start = family.initial_guess([(s.min(), s.max()) for s in sig])

    def objective(theta):
        return float(np.max(fourier_factor(family, family.from_theta(theta), symbols, k)))

    res = nelder_mead(objective, family.to_theta(start), scale=0.3, tol=tol, max_eval=4000)
    return FourierEstimate(family.from_theta(res.x), res.fun, res.nfev)
