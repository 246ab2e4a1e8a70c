"""Ready-made test problems."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .assembly import BlockSystem, PdeCoefficients, SideCoefficients, assemble_blocks
from .mesh import InterfaceGeometry, StructuredMesh, build_strip_mesh
from .schur import InterfaceProblem, neumann_data
from .transmission import PhysicsConstants, physics_constants


@dataclass
class Setup:
    """A meshed, assembled problem together with the data used by the baselines."""

    name: str
    mesh: StructuredMesh
    coeffs: PdeCoefficients
    system: BlockSystem
    problem: InterfaceProblem
    symbols: tuple                    # half-plane Steklov-Poincare symbols sigma_1(k), sigma_2(k)
    physics: tuple                    # PhysicsConstants per side
    k_min: float
    k_max: float

    @property
    def n_h(self) -> int:
        return self.mesh.n_interface

    @property
    def h(self) -> float:
        return self.mesh.interface_spacing


def _laplace_symbol(k):
    return np.asarray(k, dtype=float)


def build(name: str, mesh: StructuredMesh, coeffs: PdeCoefficients, symbols=None,
          physics_at: str = "midpoint", k_min: Optional[float] = None) -> Setup:
    system = assemble_blocks(mesh, coeffs)
    problem = neumann_data(system)
    physics = tuple(physics_constants(coeffs, mesh, i, physics_at) for i in (1, 2))
    if symbols is None:
        symbols = (physics[0].f, physics[1].f)
    h = mesh.interface_spacing
    return Setup(name, mesh, coeffs, system, problem, symbols, physics,
                 k_min=np.pi if k_min is None else k_min, k_max=np.pi / h)


def laplace_strip(n_h: int = 50, nx: Optional[int] = None, f: Callable | float = 0.0) -> Setup:
    """Laplace on (-1, 1) x (0, 1) with the interface x = 0.

    ``nx`` defaults to N_h + 1 so the cells are square.
    """
    nx = n_h + 1 if nx is None else nx
    mesh = build_strip_mesh(-1.0, 1.0, InterfaceGeometry.straight(n_h), nx, n_h + 1)
    coeffs = PdeCoefficients.uniform(nu=1.0, f=f)
    return build("laplace_strip", mesh, coeffs, symbols=(_laplace_symbol, _laplace_symbol))


def curved_coefficients(f: Callable | float | None = None) -> PdeCoefficients:
    """Heterogeneous advection-diffusion-reaction coefficients of the curved benchmark."""
    if f is None:
        def f(x, y):
            return x**2 + y**2
    side1 = SideCoefficients(
        nu=1.0,
        a=lambda x, y: (10.0 * (y + x**2), 0.0),
        eta=lambda x, y: 0.1 * (x**2 + y**2),
        f=f,
    )
    side2 = SideCoefficients(
        nu=100.0,
        a=lambda x, y: (10.0 * (1.0 - x), x),
        eta=0.0,
        f=f,
    )
    return PdeCoefficients(side1, side2)


def curved_advection(n_h: int = 100, nx: int = 20, r: float = 0.4, k_hat: int = 6,
                     physics_at: str = "midpoint", f=None) -> Setup:
    """Advection-diffusion on (-1, 1) x (0, 1) cut by x = r sin(k_hat pi y)."""
    mesh = build_strip_mesh(-1.0, 1.0, InterfaceGeometry.sine(r, k_hat, n_h), nx, n_h + 1)
    return build("curved_advection", mesh, curved_coefficients(f), physics_at=physics_at)


PRESETS = {"laplace_strip": laplace_strip, "curved_advection": curved_advection}


def custom_strip(n_h: int, nx: int, side1: dict, side2: dict, r: float = 0.0, k_hat: int = 1) -> Setup:
    """Constant coefficients per side, given as ``{"nu", "a", "eta", "f"}`` dicts."""
    geom = InterfaceGeometry.sine(r, k_hat, n_h) if r else InterfaceGeometry.straight(n_h)
    mesh = build_strip_mesh(-1.0, 1.0, geom, nx, n_h + 1)
    sides = [SideCoefficients(nu=float(d.get("nu", 1.0)), a=tuple(map(float, d.get("a", (0.0, 0.0)))),
                              eta=float(d.get("eta", 0.0)), f=float(d.get("f", 0.0))) for d in (side1, side2)]
    return build("custom", mesh, PdeCoefficients(*sides))


__all__ = ["Setup", "laplace_strip", "curved_advection", "curved_coefficients", "custom_strip",
           "PRESETS", "PhysicsConstants"]
