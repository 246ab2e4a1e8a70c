"""Matrix-free Steklov-Poincare (Schur complement) operators.

``Sigma_i = c (A_GG^i - A_GI^i (A_II^i)^{-1} A_IG^i)`` where ``c`` is an
interface scaling.  With the default ``c = 1/h`` (h the interface node
spacing) the Galerkin Schur complement, which behaves like ``h`` times the
Dirichlet-to-Neumann map, is brought back to the units of the continuous
operator; on the Laplace strip the eigenvalues then approach ``k pi``.
Every quantity built from it (``mu``, transmission parameters) lives in
the same units, and ``Sigma u_G = mu`` is unaffected.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .assembly import BlockSystem, SideBlocks, SubdomainOperator, assemble_monolithic
from .linalg import factorize

MATERIALIZE_LIMIT = 2000


class SolveCounter:
    """Thread-safe tally of subdomain solves."""

    def __init__(self):
        self._lock = threading.Lock()
        self._count = 0

    def add(self, n: int = 1) -> None:
        with self._lock:
            self._count += n

    @property
    def count(self) -> int:
        with self._lock:
            return self._count


class SchurOperator:
    """Action of ``Sigma_i``, its inverse and a dense copy of it."""

    def __init__(self, blocks: SideBlocks, scale: float = 1.0, counter: Optional[SolveCounter] = None):
        self.sub = SubdomainOperator.from_blocks(blocks)
        self.blocks = blocks
        self.side = blocks.side
        self.scale = float(scale)
        self.counter = counter if counter is not None else SolveCounter()
        self.dim = blocks.A_GG.shape[0]
        self._dense = None

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.dim:
            raise ValueError(f"interface vector has length {x.shape[0]}, expected {self.dim}")
        return x

    def apply(self, x) -> np.ndarray:
        x = self._check(x)
        b = self.blocks
        self.counter.add()
        return self.scale * (b.A_GG @ x - b.A_GI @ self.sub.fact_II.solve(b.A_IG @ x))

    def apply_inverse(self, y) -> np.ndarray:
        """Neumann solve with interface data ``y``; returns the interface trace."""
        y = self._check(y)
        n_I = self.blocks.n_interior
        rhs = np.concatenate([np.zeros(n_I), y / self.scale])
        self.counter.add()
        return self.sub.fact_neumann.solve(rhs)[n_I:]

    def materialize(self) -> np.ndarray:
        """Dense ``Sigma_i``; column j is ``apply(e_j)`` (counted as ``dim`` solves)."""
        if self.dim > MATERIALIZE_LIMIT:
            raise ValueError(f"refusing to materialize a {self.dim}x{self.dim} Schur complement")
        if self._dense is None:
            b = self.blocks
            X = self.sub.fact_II.solve(b.A_IG.toarray())
            S = self.scale * (b.A_GG.toarray() - b.A_GI @ X)
            S.setflags(write=False)
            self._dense = S
            self.counter.add(self.dim)
        return self._dense

    def interior_response(self, f_I: np.ndarray) -> np.ndarray:
        """``A_GI (A_II)^{-1} f_I``, one Dirichlet solve."""
        self.counter.add()
        return self.blocks.A_GI @ self.sub.fact_II.solve(f_I)


@dataclass
class InterfaceProblem:
    system: BlockSystem
    sigma1: SchurOperator
    sigma2: SchurOperator
    mu1: np.ndarray
    mu2: np.ndarray
    counter: SolveCounter
    _reference: Optional[tuple] = field(default=None, repr=False)

    @property
    def mu(self) -> np.ndarray:
        return self.mu1 + self.mu2

    @property
    def dim(self) -> int:
        return self.sigma1.dim

    @property
    def scale(self) -> float:
        return self.sigma1.scale

    def sigma(self, side: int) -> SchurOperator:
        return self.sigma1 if side == 1 else self.sigma2

    def monolithic_solution(self) -> np.ndarray:
        """Direct solve of the whole system, ordered ``[u_1, u_2, u_G]``; not counted."""
        if self._reference is None:
            u = factorize(self.system.full_matrix()).solve(self.system.full_rhs())
            self._reference = (u,)
        return self._reference[0]

    def reference_interface(self) -> np.ndarray:
        return self.system.split(self.monolithic_solution())[2]


def neumann_data(system: BlockSystem, scale: Optional[float] = None,
                 counter: Optional[SolveCounter] = None) -> InterfaceProblem:
    """Build ``Sigma_1``, ``Sigma_2`` and ``mu_i = c (f_G^i - A_GI^i (A_II^i)^{-1} f_i)``."""
    if scale is None:
        scale = 1.0 / system.mesh.interface_spacing
    counter = counter if counter is not None else SolveCounter()
    s1 = SchurOperator(system.side1, scale, counter)
    s2 = SchurOperator(system.side2, scale, counter)
    mu = [scale * (s.blocks.f_G - s.interior_response(s.blocks.f_I)) for s in (s1, s2)]
    return InterfaceProblem(system, s1, s2, mu[0], mu[1], counter)


def monolithic_interface_trace(problem: InterfaceProblem, coeffs) -> np.ndarray:
    """Interface values of a direct solve assembled without the block split."""
    A, b, free = assemble_monolithic(problem.system.mesh, coeffs)
    u = factorize(A).solve(b)
    pos = np.searchsorted(free, problem.system.side1.interface)
    return u[pos]
