"""P1 Galerkin assembly of

    -div(nu grad u) + a . grad u + eta u = f,   u = 0 on the outer boundary,

split into interior/interface blocks for each subdomain.

Diffusion uses the centroid value of ``nu`` (exact for piecewise constant
nu), advection a one-point centroid rule, reaction and load the vertex
(lumped) rule.  Dirichlet nodes are eliminated.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
import scipy.sparse as sp

from .linalg import Factorization, SingularMatrixError, factorize, to_csr
from .mesh import NodeClass, StructuredMesh

Field = Union[float, Callable[[np.ndarray, np.ndarray], np.ndarray]]


class AssemblyError(ValueError):
    pass


class SingularSubdomainError(SingularMatrixError):
    """A subdomain operator with Neumann interface has no unique solution."""


def _as_field(value, x) -> np.ndarray:
    return np.broadcast_to(np.asarray(value, dtype=float), x.shape).copy()


def _evaluate(fn: Field, x, y) -> np.ndarray:
    return _as_field(fn(x, y) if callable(fn) else fn, x)


@dataclass(frozen=True)
class SideCoefficients:
    """Coefficient closures on one subdomain.  ``a`` returns ``(a_x, a_y)``."""

    nu: Field = 1.0
    a: Union[tuple, Callable] = (0.0, 0.0)
    eta: Field = 0.0
    f: Field = 0.0

    def nu_at(self, x, y):
        return _evaluate(self.nu, x, y)

    def eta_at(self, x, y):
        return _evaluate(self.eta, x, y)

    def f_at(self, x, y):
        return _evaluate(self.f, x, y)

    def a_at(self, x, y):
        comps = self.a(x, y) if callable(self.a) else self.a
        return _as_field(comps[0], x), _as_field(comps[1], x)

    @property
    def has_advection(self) -> bool:
        return callable(self.a) or any(float(c) != 0.0 for c in self.a)


@dataclass(frozen=True)
class PdeCoefficients:
    side1: SideCoefficients
    side2: SideCoefficients

    @classmethod
    def uniform(cls, nu=1.0, a=(0.0, 0.0), eta=0.0, f=0.0) -> "PdeCoefficients":
        c = SideCoefficients(nu=nu, a=a, eta=eta, f=f)
        return cls(c, c)

    def side(self, i: int) -> SideCoefficients:
        if i not in (1, 2):
            raise ValueError(f"side must be 1 or 2, got {i}")
        return self.side1 if i == 1 else self.side2

    @property
    def symmetric(self) -> bool:
        return not (self.side1.has_advection or self.side2.has_advection)


@dataclass(frozen=True)
class SideBlocks:
    """Blocks of one subdomain; ``interior`` and ``interface`` are global node ids."""

    side: int
    A_II: sp.csr_matrix
    A_IG: sp.csr_matrix
    A_GI: sp.csr_matrix
    A_GG: sp.csr_matrix
    f_I: np.ndarray
    f_G: np.ndarray
    interior: np.ndarray
    interface: np.ndarray

    @property
    def n_interior(self) -> int:
        return self.A_II.shape[0]

    def neumann_matrix(self) -> sp.csr_matrix:
        """``[[A_II, A_IG], [A_GI, A_GG]]`` with only this side's interface rows."""
        return to_csr(sp.bmat([[self.A_II, self.A_IG], [self.A_GI, self.A_GG]]))


@dataclass(frozen=True)
class BlockSystem:
    mesh: StructuredMesh
    side1: SideBlocks
    side2: SideBlocks

    def side(self, i: int) -> SideBlocks:
        return self.side1 if i == 1 else self.side2

    @property
    def A_GG(self) -> sp.csr_matrix:
        return to_csr(self.side1.A_GG + self.side2.A_GG)

    @property
    def f_G(self) -> np.ndarray:
        return self.side1.f_G + self.side2.f_G

    @property
    def n_interface(self) -> int:
        return self.side1.A_GG.shape[0]

    def full_matrix(self) -> sp.csr_matrix:
        """Block matrix in the unknown ordering ``[u_1, u_2, u_G]``."""
        s1, s2 = self.side1, self.side2
        return to_csr(sp.bmat([
            [s1.A_II, None, s1.A_IG],
            [None, s2.A_II, s2.A_IG],
            [s1.A_GI, s2.A_GI, self.A_GG],
        ]))

    def full_rhs(self) -> np.ndarray:
        return np.concatenate([self.side1.f_I, self.side2.f_I, self.f_G])

    def split(self, u: np.ndarray):
        n1, n2 = self.side1.n_interior, self.side2.n_interior
        return u[:n1], u[n1:n1 + n2], u[n1 + n2:]

    def scatter(self, u1, u2, u_G) -> np.ndarray:
        """Nodal field on the whole mesh, zero on the Dirichlet boundary."""
        u = np.zeros(self.mesh.nodes.shape[0])
        u[self.side1.interior] = u1
        u[self.side2.interior] = u2
        u[self.side1.interface] = u_G
        return u


def _side_matrix(mesh: StructuredMesh, coeffs: SideCoefficients, cell_mask: np.ndarray):
    n = mesh.nodes.shape[0]
    cells = mesh.cells[cell_mask]
    if cells.shape[0] == 0:
        raise AssemblyError("empty subdomain")
    p = mesh.nodes[cells]                      # (m, 3, 2)
    x, y = p[..., 0], p[..., 1]
    area = 0.5 * ((x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0]))
    # gradients of the barycentric functions, (m, 3, 2)
    grad = np.empty_like(p)
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        grad[:, i, 0] = (y[:, j] - y[:, k]) / (2 * area)
        grad[:, i, 1] = (x[:, k] - x[:, j]) / (2 * area)
    xc, yc = x.mean(axis=1), y.mean(axis=1)

    nu = coeffs.nu_at(xc, yc)
    if np.any(nu <= 0):
        c = int(np.flatnonzero(nu <= 0)[0])
        raise AssemblyError(f"non-positive diffusivity {nu[c]:.3g} at ({xc[c]:.4g}, {yc[c]:.4g})")
    ke = (nu * area)[:, None, None] * np.einsum("mid,mjd->mij", grad, grad)

    if coeffs.has_advection:
        ax, ay = coeffs.a_at(xc, yc)
        adv = ax[:, None] * grad[..., 0] + ay[:, None] * grad[..., 1]   # a . grad(phi_j)
        ke += (area / 3.0)[:, None, None] * np.broadcast_to(adv[:, None, :], ke.shape)

    eta = coeffs.eta_at(x, y)
    if np.any(eta < 0):
        m, i = np.argwhere(eta < 0)[0]
        raise AssemblyError(f"negative reaction {eta[m, i]:.3g} at ({x[m, i]:.4g}, {y[m, i]:.4g})")
    ke[:, [0, 1, 2], [0, 1, 2]] += (area / 3.0)[:, None] * eta
    fe = (area / 3.0)[:, None] * coeffs.f_at(x, y)

    rows = np.repeat(cells, 3, axis=1).ravel()
    cols = np.tile(cells, (1, 3)).ravel()
    K = sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(n, n))
    b = np.bincount(cells.ravel(), weights=fe.ravel(), minlength=n)
    return to_csr(K), b


def _global_matrices(mesh, coeffs):
    K1, b1 = _side_matrix(mesh, coeffs.side1, mesh.cell_side == 1)
    K2, b2 = _side_matrix(mesh, coeffs.side2, mesh.cell_side == 2)
    return K1, b1, K2, b2


def _blocks(side, K, b, interior, interface) -> SideBlocks:
    return SideBlocks(
        side=side,
        A_II=to_csr(K[interior][:, interior]),
        A_IG=to_csr(K[interior][:, interface]),
        A_GI=to_csr(K[interface][:, interior]),
        A_GG=to_csr(K[interface][:, interface]),
        f_I=b[interior].copy(),
        f_G=b[interface].copy(),
        interior=interior,
        interface=interface,
    )


def assemble_blocks(mesh: StructuredMesh, coeffs: PdeCoefficients) -> BlockSystem:
    """Assemble each subdomain separately and cut out the interface blocks."""
    K1, b1, K2, b2 = _global_matrices(mesh, coeffs)
    gamma = np.asarray(mesh.interface_order)
    return BlockSystem(
        mesh=mesh,
        side1=_blocks(1, K1, b1, mesh.nodes_of(NodeClass.INTERIOR1), gamma),
        side2=_blocks(2, K2, b2, mesh.nodes_of(NodeClass.INTERIOR2), gamma),
    )


def assemble_monolithic(mesh: StructuredMesh, coeffs: PdeCoefficients):
    """Whole-domain matrix and load restricted to the free nodes.

    Returns ``(A, b, free)`` with ``free`` the global ids of the unknowns.
    """
    K1, b1, K2, b2 = _global_matrices(mesh, coeffs)
    free = np.flatnonzero(mesh.node_class != NodeClass.DIRICHLET)
    K = to_csr(K1 + K2)
    return to_csr(K[free][:, free]), (b1 + b2)[free], free


@dataclass
class SubdomainOperator:
    """Dirichlet (interior) and Neumann factorizations of one subdomain."""

    blocks: SideBlocks
    fact_II: Factorization
    fact_neumann: Factorization

    @classmethod
    def from_blocks(cls, blocks: SideBlocks) -> "SubdomainOperator":
        fact_II = factorize(blocks.A_II)
        try:
            fact_N = factorize(blocks.neumann_matrix())
        except SingularMatrixError as exc:
            raise SingularSubdomainError(f"Neumann problem on subdomain {blocks.side} is singular: {exc}") from None
        return cls(blocks, fact_II, fact_N)


def assemble_neumann_variant(mesh: StructuredMesh, coeffs: PdeCoefficients, side: int) -> SubdomainOperator:
    return SubdomainOperator.from_blocks(assemble_blocks(mesh, coeffs).side(side))
