import numpy as np
import pytest

from osmprobe.mesh import (InterfaceGeometry, InterfaceKind, MeshError, NodeClass, build_strip_mesh,
                           interface_arclength)


def test_straight_small_mesh():
    mesh = build_strip_mesh(-1, 1, InterfaceGeometry.straight(3), 2, 4)
    gamma = mesh.nodes[mesh.interface_order]
    np.testing.assert_array_equal(gamma[:, 0], 0.0)
    np.testing.assert_allclose(gamma[:, 1], [0.25, 0.5, 0.75])
    assert mesh.n_interface == 3
    assert np.all(mesh.signed_areas() > 0)


def test_zero_amplitude_sine_is_identity():
    straight = build_strip_mesh(-1, 1, InterfaceGeometry.straight(99), 20, 100)
    sine = build_strip_mesh(-1, 1, InterfaceGeometry.sine(0.0, 6, 99), 20, 100)
    assert np.array_equal(straight.nodes, sine.nodes)
    assert np.array_equal(straight.cells, sine.cells)


def test_curved_mesh_follows_interface():
    mesh = build_strip_mesh(-1, 1, InterfaceGeometry.sine(0.4, 6, 99), 20, 100)
    assert np.all(mesh.signed_areas() > 0)
    t = mesh.interface_t
    np.testing.assert_allclose(mesh.nodes[mesh.interface_order, 0], 0.4 * np.sin(6 * np.pi * t), atol=1e-15)
    assert np.all(np.diff(t) > 0)


def test_conformity():
    mesh = build_strip_mesh(-1, 1, InterfaceGeometry.sine(0.3, 3, 19), 6, 20)
    gamma = set(mesh.interface_order.tolist())
    touched = [set(mesh.cells[mesh.cell_side == s].ravel().tolist()) & gamma for s in (1, 2)]
    assert touched[0] == touched[1] == gamma


def test_node_classes():
    mesh = build_strip_mesh(-1, 1, InterfaceGeometry.straight(5), 3, 6)
    x, y = mesh.nodes.T
    cls = mesh.node_class
    boundary = (np.isclose(x, -1) | np.isclose(x, 1) | np.isclose(y, 0) | np.isclose(y, 1))
    assert np.all(cls[boundary] == NodeClass.DIRICHLET)
    assert np.all(x[cls == NodeClass.INTERIOR1] < 0)
    assert np.all(x[cls == NodeClass.INTERIOR2] > 0)


def test_amplitude_too_large():
    with pytest.raises(MeshError, match="amplitude"):
        build_strip_mesh(-0.3, 1, InterfaceGeometry.sine(0.4, 6, 9), 4, 10)


def test_bad_parameters():
    with pytest.raises(MeshError):
        InterfaceGeometry.straight(2)
    with pytest.raises(MeshError):
        build_strip_mesh(-1, 1, InterfaceGeometry.straight(5), 4, 5)
    with pytest.raises(MeshError):
        build_strip_mesh(-1, 1, InterfaceGeometry.straight(5), 1, 6)


def test_custom_curve_degenerate_cell_reported():
    # a curve sitting exactly on x_left at one height collapses the cells next to it
    geom = InterfaceGeometry(kind=InterfaceKind.CUSTOM, samples=5, curve=lambda t: -1.0 + 0 * t)
    with pytest.raises(MeshError):
        build_strip_mesh(-1, 1, geom, 3, 6)


def test_arclength_straight():
    mesh = build_strip_mesh(-1, 1, InterfaceGeometry.straight(9), 3, 10)
    assert interface_arclength(mesh) == pytest.approx(1.0, abs=1e-14)


def test_arclength_sine_fine():
    mesh = build_strip_mesh(-1, 1, InterfaceGeometry.sine(0.4, 6, 3999), 2, 4000)
    # adaptive quadrature of sqrt(1 + (2.4 pi cos(6 pi t))^2) over [0, 1]
    assert interface_arclength(mesh) == pytest.approx(4.9646759039022, rel=1e-5)
    assert round(interface_arclength(mesh), 2) == 4.96


def test_arclength_refinement():
    coarse = interface_arclength(build_strip_mesh(-1, 1, InterfaceGeometry.sine(0.4, 6, 24), 2, 25))
    fine = interface_arclength(build_strip_mesh(-1, 1, InterfaceGeometry.sine(0.4, 6, 399), 2, 400))
    assert abs(coarse - fine) / fine < 0.02


def test_polyline_second_order_convergence():
    exact = 4.9646759039022
    errs = [exact - interface_arclength(build_strip_mesh(-1, 1, InterfaceGeometry.sine(0.4, 6, n - 1), 2, n),
                                        method="polyline")
            for n in (200, 400)]
    assert 0 < errs[1] < errs[0] / 3.5


def test_polyline_matches_quadrature_when_fine():
    mesh = build_strip_mesh(-1, 1, InterfaceGeometry.sine(0.4, 6, 3999), 2, 4000)
    assert interface_arclength(mesh, "polyline") == pytest.approx(interface_arclength(mesh, "quadrature"), rel=1e-5)


def test_custom_curve_uses_polyline():
    geom = InterfaceGeometry(kind=InterfaceKind.CUSTOM, samples=9, curve=lambda t: 0.5 * t)
    mesh = build_strip_mesh(-1, 1, geom, 3, 10)
    assert interface_arclength(mesh) == pytest.approx(np.hypot(1.0, 0.5), rel=1e-12)


def test_mesh_is_read_only():
    mesh = build_strip_mesh(-1, 1, InterfaceGeometry.straight(3), 2, 4)
    with pytest.raises(ValueError):
        mesh.nodes[0, 0] = 5.0


def test_text_export():
    mesh = build_strip_mesh(-1, 1, InterfaceGeometry.straight(3), 2, 4)
    text = mesh.to_text().splitlines()
    assert text[0] == f"# nodes {len(mesh.nodes)}"
    k = int(mesh.interface_order[0])
    idx, x, y, tag = text[1 + k].split()
    assert (int(idx), float(x), float(y), tag) == (k, 0.0, 0.25, "INTERFACE")
