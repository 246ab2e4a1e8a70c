"""Structured triangular meshes of a two-subdomain strip.

The domain is ``(x_left, x_right) x (0, 1)`` split by an interface curve
``x = g(t), y = t``.  Every horizontal mesh line is stretched linearly
between the outer boundary and the interface (transfinite blending), so
the index space stays structured and both halves share the interface
nodes.  Quads are split along the same diagonal everywhere; on a uniform
straight mesh the P1 Laplace stiffness then equals the 5-point stencil.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class MeshError(ValueError):
    """Raised for geometries that cannot be meshed."""


class NodeClass(enum.IntEnum):
    INTERIOR1 = 0
    INTERIOR2 = 1
    INTERFACE = 2
    DIRICHLET = 3
    NEUMANN = 4


class InterfaceKind(enum.Enum):
    STRAIGHT = "straight"
    SINE_CURVE = "sine"
    CUSTOM = "custom"


@dataclass(frozen=True)
class InterfaceGeometry:
    """Shape of the interface and the number of interface unknowns.

    ``samples`` is N_h, the number of interface nodes strictly inside
    (0, 1); the interface endpoints sit on the Dirichlet boundary.
    """

    kind: InterfaceKind = InterfaceKind.STRAIGHT
    r: float = 0.0
    k_hat: int = 1
    samples: int = 3
    curve: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)

    def __post_init__(self):
        if self.samples < 3:
            raise MeshError(f"need at least 3 interface nodes, got {self.samples}")
        if self.kind is InterfaceKind.SINE_CURVE and (int(self.k_hat) != self.k_hat or self.k_hat < 1):
            raise MeshError(f"k_hat must be a positive integer, got {self.k_hat}")
        if self.kind is InterfaceKind.CUSTOM and self.curve is None:
            raise MeshError("custom interface needs a curve callable")

    @classmethod
    def straight(cls, samples: int) -> "InterfaceGeometry":
        return cls(InterfaceKind.STRAIGHT, samples=samples)

    @classmethod
    def sine(cls, r: float, k_hat: int, samples: int) -> "InterfaceGeometry":
        return cls(InterfaceKind.SINE_CURVE, r=r, k_hat=k_hat, samples=samples)

    def x_of(self, t: np.ndarray) -> np.ndarray:
        """Horizontal position of the interface at height ``t``."""
        t = np.asarray(t, dtype=float)
        if self.kind is InterfaceKind.STRAIGHT:
            return np.zeros_like(t)
        if self.kind is InterfaceKind.SINE_CURVE:
            return self.r * np.sin(self.k_hat * np.pi * t)
        return np.asarray(self.curve(t), dtype=float) * np.ones_like(t)

    def speed(self, t: np.ndarray):
        """``|gamma'(t)|`` for the analytic kinds, ``None`` for custom curves."""
        t = np.asarray(t, dtype=float)
        if self.kind is InterfaceKind.STRAIGHT:
            return np.ones_like(t)
        if self.kind is InterfaceKind.SINE_CURVE:
            return np.hypot(1.0, self.r * self.k_hat * np.pi * np.cos(self.k_hat * np.pi * t))
        return None


@dataclass(frozen=True)
class StructuredMesh:
    nodes: np.ndarray            # (n_nodes, 2)
    cells: np.ndarray            # (n_cells, 3), counter-clockwise
    cell_side: np.ndarray        # 1 or 2 per cell
    node_class: np.ndarray       # NodeClass per node
    interface_order: np.ndarray  # interface nodes, bottom to top
    gamma_polyline: np.ndarray   # interface nodes including the two endpoints on the boundary
    shape: tuple                 # (n_columns, n_rows) of the node grid
    geometry: InterfaceGeometry

    @property
    def n_interface(self) -> int:
        return len(self.interface_order)

    @property
    def interface_spacing(self) -> float:
        """Parametric spacing of the interface nodes (1 / (N_h + 1))."""
        return 1.0 / (self.n_interface + 1)

    @property
    def interface_t(self) -> np.ndarray:
        return self.nodes[self.interface_order, 1]

    def nodes_of(self, cls: NodeClass) -> np.ndarray:
        return np.flatnonzero(self.node_class == cls)

    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.cells]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def to_text(self) -> str:
        """Plain node/cell listing for debugging; not a stable format."""
        lines = [f"# nodes {len(self.nodes)}"]
        for k, ((x, y), tag) in enumerate(zip(self.nodes, self.node_class)):
            lines.append(f"{k} {x:.17g} {y:.17g} {NodeClass(tag).name}")
        lines.append(f"# cells {len(self.cells)}")
        for k, (c, s) in enumerate(zip(self.cells, self.cell_side)):
            lines.append(f"{k} {c[0]} {c[1]} {c[2]} {s}")
        return "\n".join(lines) + "\n"


def build_strip_mesh(x_left: float, x_right: float, geometry: InterfaceGeometry,
                     nx_per_side: int, ny: int) -> StructuredMesh:
    """Conforming mesh of the strip with ``ny`` intervals in y.

    ``ny`` must equal ``geometry.samples + 1``.
    """
    if nx_per_side < 2:
        raise MeshError(f"nx_per_side must be >= 2, got {nx_per_side}")
    if ny != geometry.samples + 1:
        raise MeshError(f"ny={ny} inconsistent with {geometry.samples} interface nodes (need ny = N_h + 1)")
    if not x_left < x_right:
        raise MeshError("x_left must be smaller than x_right")

    t = np.arange(ny + 1) / ny
    xg = geometry.x_of(t)
    if np.any(xg <= x_left) or np.any(xg >= x_right):
        raise MeshError(
            f"interface leaves the strip: x range [{xg.min():.4g}, {xg.max():.4g}] "
            f"not inside ({x_left}, {x_right}); amplitude too large")

    ncol = 2 * nx_per_side + 1
    frac = np.arange(nx_per_side + 1) / nx_per_side
    X = np.empty((ny + 1, ncol))
    # left half: x_left -> interface, right half: interface -> x_right
    X[:, :nx_per_side + 1] = x_left + frac[None, :] * (xg[:, None] - x_left)
    X[:, nx_per_side:] = xg[:, None] + frac[None, :] * (x_right - xg[:, None])
    Y = np.repeat(t[:, None], ncol, axis=1)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    idx = np.arange((ny + 1) * ncol).reshape(ny + 1, ncol)
    i0 = idx[:-1, :-1].ravel()
    i1 = idx[:-1, 1:].ravel()
    i2 = idx[1:, 1:].ravel()
    i3 = idx[1:, :-1].ravel()
    cells = np.empty((2 * i0.size, 3), dtype=np.int64)
    cells[0::2] = np.column_stack([i0, i1, i2])
    cells[1::2] = np.column_stack([i0, i2, i3])
    col = np.repeat(np.tile(np.arange(ncol - 1), ny), 2)
    cell_side = np.where(col < nx_per_side, 1, 2)

    jj, ii = np.divmod(np.arange(nodes.shape[0]), ncol)
    node_class = np.where(ii < nx_per_side, NodeClass.INTERIOR1, NodeClass.INTERIOR2)
    node_class[ii == nx_per_side] = NodeClass.INTERFACE
    boundary = (ii == 0) | (ii == ncol - 1) | (jj == 0) | (jj == ny)
    node_class[boundary] = NodeClass.DIRICHLET

    mesh = StructuredMesh(
        nodes=nodes,
        cells=cells,
        cell_side=cell_side,
        node_class=node_class.astype(np.int8),
        interface_order=idx[1:-1, nx_per_side].copy(),
        gamma_polyline=idx[:, nx_per_side].copy(),
        shape=(ncol, ny + 1),
        geometry=geometry,
    )
    area = mesh.signed_areas()
    bad = np.flatnonzero(area <= 0)
    if bad.size:
        c = bad[0]
        raise MeshError(f"degenerate mapping: cell {c} with vertices {cells[c].tolist()} has area {area[c]:.3e}")
    for arr in (nodes, cells, cell_side, mesh.node_class, mesh.interface_order, mesh.gamma_polyline):
        arr.setflags(write=False)
    return mesh


def interface_arclength(mesh: StructuredMesh, method: str = "auto") -> float:
    """Length of the interface, endpoints included.

    ``"quadrature"`` integrates ``|gamma'|`` with the trapezoid rule on the
    interface nodes (spectrally accurate for the periodic sine curve);
    ``"polyline"`` sums the chords and is used for custom curves.
    """
    p = mesh.nodes[mesh.gamma_polyline]
    t = p[:, 1]
    speed = mesh.geometry.speed(t)
    if method == "auto":
        method = "polyline" if speed is None else "quadrature"
    if method == "polyline":
        return float(np.sum(np.hypot(*np.diff(p, axis=0).T)))
    if method == "quadrature":
        if speed is None:
            raise MeshError("quadrature needs an analytic interface")
        return float(np.trapezoid(speed, t))
    raise ValueError(f"unknown method {method!r}")
