import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from whomog.errors import GeometryError, MeshGenerationFailure, TopologyError
from whomog.geometry import (
    DYADIC_GRID,
    INTERFACE,
    Y1,
    Y2,
    UnitCellGeometry,
    build_cell_mesh,
    build_epsilon_tiling,
    connected_components,
    extract_surface_mesh,
    parse_epsilon,
    unit_square_mesh,
)


def test_cell_areas_partition_the_unit_square(cell):
    assert cell.area(Y1) + cell.area(Y2) == pytest.approx(1.0, abs=1e-13)
    assert np.all(cell.signed_areas() > 0)


def test_inscribed_polygon_converges_to_disc():
    # an inscribed polygon has area below pi r^2 and the gap shrinks like h^2
    gaps = []
    for h in (0.1, 0.05, 0.025):
        c = build_cell_mesh(UnitCellGeometry(), h)
        gap = math.pi / 16 - c.area(Y2)
        assert gap > 0
        gaps.append(gap)
    assert gaps[0] / gaps[1] > 3.0 and gaps[1] / gaps[2] > 3.0


def test_interface_is_a_closed_counterclockwise_loop(cell):
    sub, _ = cell.side(Y1)
    s = extract_surface_mesh(sub)
    assert s.n_nodes == len(s.edges)
    assert s.signed_area() == pytest.approx(cell.area(Y2), rel=1e-12)
    assert s.length < 2 * math.pi * 0.25
    assert s.length == pytest.approx(2 * math.pi * 0.25, rel=2e-3)
    assert np.allclose(np.linalg.norm(s.normals, axis=1), 1.0)
    assert np.allclose(np.einsum("ij,ij->i", s.normals, s.tangents), 0.0)


def test_interface_edges_separate_the_two_sides(cell):
    cell.validate()
    assert len(cell.boundary_edges[cell.boundary_tags == INTERFACE]) > 0


def test_periodic_pairs_are_lattice_translates(cell):
    p = cell.periodic_pairs
    d = cell.vertices[p[:, 1]] - cell.vertices[p[:, 0]]
    assert np.array_equal(d, np.round(d))
    # every vertex on x=1 or y=1 is a slave
    on_far = np.nonzero((cell.vertices[:, 0] == 1.0) | (cell.vertices[:, 1] == 1.0))[0]
    assert set(on_far) == set(p[:, 1])


def test_vertices_on_dyadic_grid(cell):
    v = cell.vertices / DYADIC_GRID
    assert np.array_equal(v, np.round(v))


def test_centered_mesh_is_mirror_symmetric(cell):
    key = lambda a: set(map(tuple, np.round(a, 12)))
    v = cell.vertices
    assert key(v) == key(np.column_stack([1 - v[:, 0], v[:, 1]]))
    assert key(v) == key(v[:, ::-1])


def test_clearance_is_enforced():
    with pytest.raises(GeometryError):
        UnitCellGeometry(center=(0.5, 0.5), radius=0.49, clearance=0.02)
    with pytest.raises(GeometryError):
        UnitCellGeometry(center=(1.2, 0.5))


def test_mesh_budget():
    with pytest.raises(MeshGenerationFailure):
        build_cell_mesh(UnitCellGeometry(), 1e-5)
    with pytest.raises(MeshGenerationFailure):
        build_cell_mesh(UnitCellGeometry(), -1.0)


def test_validate_detects_inverted_triangle(coarse_cell):
    m = unit_square_mesh(2)
    m.triangles[0] = m.triangles[0][::-1]
    with pytest.raises(TopologyError):
        m.validate()


@pytest.mark.parametrize("eps,n", [(0.5, 2), (0.25, 4), (1 / 8, 8), (8, 8)])
def test_parse_epsilon(eps, n):
    e, N = parse_epsilon(eps)
    assert N == n and e == 1.0 / n


@pytest.mark.parametrize("bad", [0.3, 0.0, -0.25, 2.0])
def test_parse_epsilon_rejects(bad):
    with pytest.raises(GeometryError):
        parse_epsilon(bad)


@pytest.mark.parametrize("eps", [0.5, 0.25])
def test_tiling_topology(coarse_cell, eps):
    t = build_epsilon_tiling(coarse_cell, eps)
    assert connected_components(t.meshes[Y1]) == 1
    assert connected_components(t.meshes[Y2]) == t.n_cells
    assert t.meshes[Y1].area() == pytest.approx(coarse_cell.area(Y1), rel=1e-13)
    assert t.meshes[Y2].area() == pytest.approx(coarse_cell.area(Y2), rel=1e-13)
    assert t.surfaces[Y1].length == pytest.approx(t.n * coarse_cell_interface(coarse_cell), rel=1e-13)
    t.meshes[Y1].validate()


def coarse_cell_interface(cell):
    return extract_surface_mesh(cell.side(Y1)[0]).length


def test_tiling_copies_are_exact(coarse_cell):
    t = build_epsilon_tiling(coarse_cell, 0.125)
    ref = t.cell_sides[Y1].vertices
    for k, (i, j) in enumerate(t.cell_index):
        x = t.meshes[Y1].vertices[t.cell_nodes[Y1][k]]
        assert np.array_equal(x, t.epsilon * (np.array([i, j]) + ref))


def test_unit_square_mesh():
    m = unit_square_mesh(5)
    assert m.n_vertices == 36 and m.n_triangles == 50
    assert m.area() == pytest.approx(1.0)
    with pytest.raises(GeometryError):
        unit_square_mesh(0)


@settings(max_examples=8, deadline=None)
@given(cx=st.floats(0.35, 0.65), cy=st.floats(0.35, 0.65), r=st.floats(0.1, 0.25))
def test_off_center_cells_are_valid(cx, cy, r):
    geom = UnitCellGeometry(center=(cx, cy), radius=r, clearance=0.02)
    if geom.boundary_distance < 0.02:
        return
    c = build_cell_mesh(geom, 0.05)
    c.validate()
    assert c.area(Y1) + c.area(Y2) == pytest.approx(1.0, abs=1e-12)
    # the interface is an inscribed regular polygon
    n = extract_surface_mesh(c.side(Y1)[0]).n_nodes
    assert c.area(Y2) == pytest.approx(0.5 * n * r * r * math.sin(2 * math.pi / n), rel=1e-9)


def test_tiny_inclusion_is_refused():
    with pytest.raises(MeshGenerationFailure):
        build_cell_mesh(UnitCellGeometry(center=(0.5, 0.6), radius=0.09), 0.1)
