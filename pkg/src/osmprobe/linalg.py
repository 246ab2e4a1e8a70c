"""Sparse storage helpers, reusable LU solves, eigenvalue estimates and a
restarted Nelder-Mead minimizer (on top of scipy's simplex search)."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import optimize

log = logging.getLogger(__name__)


class SingularMatrixError(np.linalg.LinAlgError):
    pass


def to_csr(A) -> sp.csr_matrix:
    """Canonical CSR: duplicates summed, column indices sorted per row."""
    A = sp.csr_matrix(A, dtype=float)
    A.sum_duplicates()
    A.sort_indices()
    return A


def write_triplets(A, path) -> None:
    """Dump ``A`` as ``row col value`` lines."""
    C = sp.coo_matrix(A)
    with open(path, "w") as fh:
        for i, j, v in zip(C.row, C.col, C.data):
            fh.write(f"{i} {j} {v:.17g}\n")


class Factorization:
    """Sparse LU of a square matrix, reused across right-hand sides."""

    # pivots below this fraction of the largest one are treated as zero
    pivot_rtol = 1e-13

    def __init__(self, A):
        A = sp.csc_matrix(A, dtype=float)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"matrix must be square, got {A.shape}")
        self.shape = A.shape
        try:
            self._lu = spla.splu(A)
        except RuntimeError as exc:
            raise SingularMatrixError(f"singular matrix: {exc}") from None
        d = np.abs(self._lu.U.diagonal())
        if d.size and (not np.all(np.isfinite(d)) or d.min() <= self.pivot_rtol * d.max()):
            raise SingularMatrixError(
                f"numerically singular matrix (pivot ratio {d.min() / max(d.max(), 1e-300):.2e})")

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.shape[0]:
            raise ValueError(f"rhs has {b.shape[0]} rows, expected {self.shape[0]}")
        if b.ndim == 2 and b.shape[1] == 0:
            return b.copy()
        return self._lu.solve(b)


def factorize(A) -> Factorization:
    return Factorization(A)


@dataclass
class SpectralRadiusResult:
    rho: float
    converged: bool
    iterations: int
    variation: float  # relative change of the estimate over the last window

    def __float__(self):
        return self.rho


def spectral_radius(apply: Callable[[np.ndarray], np.ndarray], dim: int, tol: float = 1e-8,
                    max_it: int = 2000, window: int = 10, seed: int = 0) -> SpectralRadiusResult:
    """Power-iteration estimate of the spectral radius of a linear operator.

    The growth factor is the geometric mean of the last ``window`` norm
    ratios, which averages out the rotation caused by complex eigenpairs.
    Convergence is declared when that mean changes by less than ``tol``
    (relative) over one window.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(dim)
    x /= np.linalg.norm(x)
    logs: list[float] = []
    history: list[float] = []
    for it in range(1, max_it + 1):
        y = np.asarray(apply(x), dtype=float)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return SpectralRadiusResult(0.0, True, it, 0.0)
        logs.append(np.log(ny))
        x = y / ny
        if len(logs) >= window:
            est = float(np.exp(np.mean(logs[-window:])))
            history.append(est)
            if len(history) > window:
                old = history[-window - 1]
                var = abs(est - old) / max(est, 1e-300)
                if var < tol:
                    return SpectralRadiusResult(est, True, it, var)
    est = history[-1] if history else float(np.exp(np.mean(logs)))
    var = abs(history[-1] - history[-window - 1]) / est if len(history) > window else np.inf
    log.warning("spectral_radius: no convergence after %d iterations (variation %.2e)", max_it, var)
    return SpectralRadiusResult(est, False, max_it, var)


@dataclass
class OptimizeResult:
    x: np.ndarray
    fun: float
    nfev: int
    converged: bool


class OptimizationError(RuntimeError):
    pass


def _nm_run(f, x0, scale, tol, budget):
    simplex = np.vstack([x0] + [x0 + scale * e for e in np.eye(x0.size)])
    # fatol=inf leaves the simplex size (max vertex distance from the best one) as the only stop test
    with np.errstate(invalid="ignore"):   # inf - inf in scipy's stop test when vertices are infeasible
        res = optimize.minimize(f, x0, method="Nelder-Mead",
                                options={"initial_simplex": simplex, "xatol": tol, "fatol": np.inf,
                                         "maxfev": budget, "maxiter": np.iinfo(np.int32).max,
                                         "adaptive": False})
    if not np.isfinite(res.fun):
        raise OptimizationError("objective is not finite at any simplex vertex")
    return res.x, float(res.fun), int(res.nfev), res.status == 0


def nelder_mead(objective: Callable[[np.ndarray], float], x0, scale: float = 0.1,
                tol: float = 1e-8, max_eval: int = 2000) -> OptimizeResult:
    """Minimize ``objective`` with the Nelder-Mead simplex method.

    Coefficients: reflection 1, expansion 2, contraction 1/2, shrink 1/2.
    The initial simplex is ``x0`` plus ``scale`` along each unit vector.
    The search stops when every vertex is within ``tol`` (max-norm) of the
    best one or the evaluation budget is spent, and is then restarted once
    from the best vertex with a fresh simplex of the same size.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))

    def f(v):
        val = float(objective(v))
        return val if np.isfinite(val) else np.inf

    x, fx, n1, ok1 = _nm_run(f, x0, scale, tol, max_eval)
    x2, fx2, n2, ok2 = _nm_run(f, x, scale, tol, max(max_eval - n1, 2 * x0.size + 2))
    if fx2 <= fx:
        x, fx = x2, fx2
    return OptimizeResult(x=x, fun=fx, nfev=n1 + n2, converged=ok1 and ok2)
