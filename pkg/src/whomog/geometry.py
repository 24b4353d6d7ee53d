"""Unit-cell geometry, fitted cell meshes, interface curves and epsilon tilings.

The reference cell is Y = (0, 1)^2 with a disc inclusion Y2; Y1 = Y minus the
closed disc is the connected matrix and Gamma = boundary of Y2 the interface.
Cell meshes are fitted: interface nodes lie exactly on the circle and every
interface segment is a mesh edge, so traces are plain nodal restrictions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import triangle

from .errors import GeometryError, MeshGenerationFailure, TopologyError

Y1, Y2 = 1, 2
OUTER, INTERFACE = 0, 1

# Guard against meshes that cannot be built on a workstation.
MAX_TRIANGLES = 4_000_000


@dataclass(frozen=True)
class UnitCellGeometry:
    center: tuple = (0.5, 0.5)
    radius: float = 0.25
    clearance: float = 0.02
    inclusion_kind: str = "disc"

    def __post_init__(self):
        if self.inclusion_kind != "disc":
            raise GeometryError(f"unsupported inclusion kind {self.inclusion_kind!r}")
        cx, cy = self.center
        if not (0.0 < cx < 1.0 and 0.0 < cy < 1.0):
            raise GeometryError("inclusion center must lie in (0,1)^2")
        if self.radius <= 0.0 or self.clearance <= 0.0:
            raise GeometryError("radius and clearance must be positive")
        if self.boundary_distance < self.clearance:
            raise GeometryError(
                f"inclusion too close to the cell boundary: distance "
                f"{self.boundary_distance:.3g} < clearance {self.clearance:.3g}"
            )

    @property
    def boundary_distance(self):
        cx, cy = self.center
        return min(cx, 1.0 - cx, cy, 1.0 - cy) - self.radius

    @property
    def is_centered(self):
        return self.center == (0.5, 0.5)

    @property
    def inclusion_area(self):
        return math.pi * self.radius**2

    @property
    def interface_length(self):
        return 2.0 * math.pi * self.radius


@dataclass(eq=False)
class TriangleMesh:
    """Triangulation with subdomain tags and boundary/periodic bookkeeping.

    ``boundary_edges`` holds vertex pairs tagged OUTER (on the outer boundary)
    or INTERFACE; ``periodic_pairs`` holds (master, slave) rows where the
    slave sits on the x=1 or y=1 face and master = slave - lattice vector.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    tags: np.ndarray
    boundary_edges: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), int))
    boundary_tags: np.ndarray = field(default_factory=lambda: np.zeros(0, int))
    periodic_pairs: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), int))

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def interface_edges(self):
        return self.boundary_edges[self.boundary_tags == INTERFACE]

    @property
    def outer_edges(self):
        return self.boundary_edges[self.boundary_tags == OUTER]

    def signed_areas(self):
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def edges(self):
        """Unique undirected edges, each row sorted."""
        e = self.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
        return np.unique(np.sort(e, axis=1), axis=0)

    @property
    def h(self):
        e = self.edges()
        return float(np.max(np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)))

    def area(self, side=None):
        a = self.signed_areas()
        if side is not None:
            a = a[self.tags == side]
        return float(a.sum())

    def master_map(self):
        """Vertex -> periodic master vertex (identity where unpaired)."""
        master = np.arange(self.n_vertices)
        if len(self.periodic_pairs):
            master[self.periodic_pairs[:, 1]] = self.periodic_pairs[:, 0]
        return master

    def side(self, j):
        """Submesh of the triangles tagged ``j`` and its parent vertex ids."""
        keep = self.tags == j
        tris = self.triangles[keep]
        parent = np.unique(tris)
        local = -np.ones(self.n_vertices, dtype=int)
        local[parent] = np.arange(len(parent))
        bmask = np.all(local[self.boundary_edges] >= 0, axis=1) if len(self.boundary_edges) else np.zeros(0, bool)
        # outer edges belong to whichever side owns both endpoints and a triangle on the edge
        bedges = local[self.boundary_edges[bmask]]
        btags = self.boundary_tags[bmask]
        if len(bedges):
            own = _edge_set(local[tris])
            ok = np.array([tuple(sorted(e)) in own for e in bedges], dtype=bool)
            bedges, btags = bedges[ok], btags[ok]
        pairs = self.periodic_pairs
        if len(pairs):
            pmask = np.all(local[pairs] >= 0, axis=1)
            pairs = local[pairs[pmask]]
        sub = TriangleMesh(
            vertices=self.vertices[parent].copy(),
            triangles=np.searchsorted(parent, tris),
            tags=np.full(len(tris), j, dtype=int),
            boundary_edges=bedges.reshape(-1, 2),
            boundary_tags=btags,
            periodic_pairs=np.asarray(pairs, dtype=int).reshape(-1, 2),
        )
        return sub, parent

    def validate(self):
        a = self.signed_areas()
        h = self.h
        if np.any(a <= 1e-14 * h * h):
            raise TopologyError("mesh has inverted or degenerate triangles")
        if len(self.periodic_pairs):
            d = self.vertices[self.periodic_pairs[:, 1]] - self.vertices[self.periodic_pairs[:, 0]]
            if np.max(np.abs(d - np.round(d))) > 1e-12 or np.any(np.all(np.round(d) == 0, axis=1)):
                raise TopologyError("periodic pairs are not unit lattice translates")
            if len(np.unique(self.periodic_pairs[:, 1])) != len(self.periodic_pairs):
                raise TopologyError("a slave vertex is paired twice")
            if np.intersect1d(self.periodic_pairs[:, 0], self.periodic_pairs[:, 1]).size:
                raise TopologyError("periodic map is not a master/slave reduction")
        ie = self.interface_edges
        if len(ie) and np.any(self.tags == Y1) and np.any(self.tags == Y2):
            counts = _edge_tag_counts(self)
            for e in map(tuple, np.sort(ie, axis=1)):
                if counts.get(e) != {Y1, Y2}:
                    raise TopologyError(f"interface edge {e} does not separate Y1 from Y2")
        return self


def _edge_set(tris):
    e = tris[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
    return set(map(tuple, np.sort(e, axis=1)))


def _edge_tag_counts(mesh):
    out = {}
    e = np.sort(mesh.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    t = np.repeat(mesh.tags, 3)
    for (a, b), tag in zip(map(tuple, e), t):
        out.setdefault((a, b), set()).add(int(tag))
    return out


@dataclass(eq=False)
class SurfaceMesh:
    """Polygonal interface: P1 line elements with per-edge frame.

    ``node_ids`` index the owning bulk mesh; ``normals`` point out of Y2.
    """

    nodes: np.ndarray
    edges: np.ndarray
    normals: np.ndarray
    tangents: np.ndarray
    lengths: np.ndarray
    node_ids: np.ndarray

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def length(self):
        return float(self.lengths.sum())

    def midpoints(self):
        return 0.5 * (self.nodes[self.edges[:, 0]] + self.nodes[self.edges[:, 1]])

    def signed_area(self):
        """Shoelace area enclosed by the edges (positive for outward normals)."""
        p, q = self.nodes[self.edges[:, 0]], self.nodes[self.edges[:, 1]]
        return 0.5 * float(np.sum(p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]))

    def reversed(self):
        """Same curve with opposite orientation (tangents and normals flipped)."""
        return _surface_from_edges(self.nodes, self.edges[:, ::-1].copy(), self.node_ids)


def _surface_from_edges(nodes, edges, node_ids):
    d = nodes[edges[:, 1]] - nodes[edges[:, 0]]
    lengths = np.linalg.norm(d, axis=1)
    tangents = d / lengths[:, None]
    normals = np.column_stack([tangents[:, 1], -tangents[:, 0]])
    return SurfaceMesh(nodes=nodes, edges=edges, normals=normals, tangents=tangents,
                       lengths=lengths, node_ids=np.asarray(node_ids))


# --------------------------------------------------------------------------
# cell meshing


def _check_budget(target_h):
    if not target_h > 0:
        raise MeshGenerationFailure("target_h must be positive")
    est = 1.0 / (math.sqrt(3) / 4 * target_h**2)
    if est > MAX_TRIANGLES:
        raise MeshGenerationFailure(
            f"target_h={target_h:g} needs about {est:.2e} triangles (limit {MAX_TRIANGLES:.0e})"
        )


def _segment_points(p, q, n):
    t = np.arange(n + 1)[:, None] / n
    return (1 - t) * np.asarray(p, float) + t * np.asarray(q, float)


def _triangulate(points, segments, regions, target_h):
    area = math.sqrt(3) / 4 * target_h**2
    # YY: no Steiner points on segments, so boundary and interface nodes stay as placed
    out = triangle.triangulate(
        {"vertices": points, "segments": segments, "regions": regions}, f"pq28YYAa{area:.20f}"
    )
    if not np.array_equal(out["vertices"][: len(points)], points):
        raise MeshGenerationFailure("constrained triangulation moved input vertices")
    tags = np.rint(out["triangle_attributes"][:, 0]).astype(int)
    return out["vertices"], out["triangles"].astype(int), tags


def _chain(points_list):
    """Concatenate polyline pieces sharing endpoints into a closed polygon."""
    pts = [points_list[0][0]]
    for piece in points_list:
        pts.extend(piece[1:])
    pts = np.array(pts[:-1])
    n = len(pts)
    segs = np.column_stack([np.arange(n), (np.arange(n) + 1) % n])
    return pts, segs


def _wedge(geom, target_h):
    """Mesh the fundamental wedge 0 <= v <= u <= 1/2 (coordinates relative to the center)."""
    r = geom.radius
    n_arc = int(round(math.pi / 4 * r / target_h))
    if n_arc < 1:
        raise MeshGenerationFailure(
            f"target_h={target_h:g} resolves the inclusion with fewer than 8 interface nodes"
        )
    d_arc = r / math.sqrt(2.0)
    h2 = 0.5

    def n_of(length):
        return max(1, math.ceil(length / target_h - 1e-9))

    theta = np.linspace(0.0, math.pi / 4, n_arc + 1)
    arc = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    arc[0] = (r, 0.0)
    arc[-1] = (d_arc, d_arc)
    diag_in = np.linspace(d_arc, 0.0, n_of(r) + 1)
    diag_out = np.linspace(h2, d_arc, n_of(math.sqrt(2) * h2 - r) + 1)
    # inclusion sector: O -> A along v=0, arc A -> E, E -> O along the diagonal
    sector = [
        _segment_points((0, 0), (r, 0), n_of(r)),
        arc,
        np.column_stack([diag_in, diag_in]),
    ]
    # matrix part: A -> B -> C -> E -> reversed arc
    matrix = [
        _segment_points((r, 0), (h2, 0), n_of(h2 - r)),
        _segment_points((h2, 0), (h2, h2), n_of(h2)),
        np.column_stack([diag_out, diag_out]),
        arc[::-1],
    ]
    p_in, s_in = _chain(sector)
    p_out, s_out = _chain(matrix)
    pts, inv = _merge_points(np.vstack([p_in, p_out]))
    segs = np.vstack([inv[s_in], inv[len(p_in) + s_out]])
    segs = np.unique(np.sort(segs, axis=1), axis=0)
    rho_in, rho_out = 0.5 * r, 0.5 * (r + h2)
    c, s = math.cos(math.pi / 8), math.sin(math.pi / 8)
    regions = [[rho_in * c, rho_in * s, Y2, 0], [rho_out * c, rho_out * s, Y1, 0]]
    return _triangulate(pts, segs, regions, target_h)


def _merge_points(points, decimals=12):
    keys = np.round(points, decimals) + 0.0  # +0.0 folds -0.0 into 0.0
    _, first, inv = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    return points[first], inv.ravel()


def _symmetric_cell(geom, target_h):
    v, t, tags = _wedge(geom, target_h)
    maps = [
        lambda p: p,
        lambda p: p[:, ::-1],
    ]
    images_v, images_t, images_tag = [], [], []
    offset = 0
    for swap in maps:
        for sx in (1.0, -1.0):
            for sy in (1.0, -1.0):
                q = swap(v) * np.array([sx, sy])
                images_v.append(q)
                images_t.append(t + offset)
                images_tag.append(tags)
                offset += len(q)
    allv = np.vstack(images_v) + 0.5
    pts, inv = _merge_points(allv)
    tris = inv[np.vstack(images_t)]
    return pts, tris, np.concatenate(images_tag)


def _general_cell(geom, target_h):
    r = geom.radius
    cx, cy = geom.center
    n_c = int(round(2 * math.pi * r / target_h))
    if n_c < 8:
        raise MeshGenerationFailure(
            f"target_h={target_h:g} resolves the inclusion with fewer than 8 interface nodes"
        )
    n_s = max(1, math.ceil(1.0 / target_h - 1e-9))
    corners = [(0, 0), (1, 0), (1, 1), (0, 1)]
    square = np.vstack([_segment_points(corners[i], corners[(i + 1) % 4], n_s)[:-1] for i in range(4)])
    th = 2 * math.pi * np.arange(n_c) / n_c
    circle = np.column_stack([cx + r * np.cos(th), cy + r * np.sin(th)])
    pts = np.vstack([square, circle])
    ns = len(square)
    segs = np.vstack([
        np.column_stack([np.arange(ns), (np.arange(ns) + 1) % ns]),
        ns + np.column_stack([np.arange(n_c), (np.arange(n_c) + 1) % n_c]),
    ])
    y1_point = (0.5 * (cx - r), cy)
    regions = [[cx, cy, Y2, 0], [y1_point[0], y1_point[1], Y1, 0]]
    return _triangulate(pts, segs, regions, target_h)


# Cell vertices are snapped to multiples of 2^-44.  Then eps * (k + y) is exact in
# binary floating point for eps = 2^-m and k < 2^8, so tiled copies are bit-exact
# scalings of the cell and the unfolding identities hold to round-off.
DYADIC_GRID = 2.0**-44


def _finish_cell_mesh(pts, tris, tags):
    pts = np.round(pts / DYADIC_GRID) * DYADIC_GRID
    p = pts[tris]
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    neg = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0] < 0
    tris = tris.copy()
    tris[neg] = tris[neg][:, [0, 2, 1]]
    # boundary bookkeeping
    e = np.sort(tris[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    et = np.repeat(tags, 3)
    uniq, inv, counts = np.unique(e, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    tag_sum = np.zeros(len(uniq), int)
    np.add.at(tag_sum, inv, et)
    outer = uniq[counts == 1]
    interface = uniq[(counts == 2) & (tag_sum == Y1 + Y2)]
    bedges = np.vstack([outer, interface])
    btags = np.concatenate([np.full(len(outer), OUTER), np.full(len(interface), INTERFACE)])
    mesh = TriangleMesh(vertices=pts, triangles=tris, tags=tags, boundary_edges=bedges,
                        boundary_tags=btags)
    mesh.periodic_pairs = _periodic_pairs(pts)
    return mesh


def _periodic_pairs(pts, tol=1e-12):
    on_right = np.abs(pts[:, 0] - 1.0) < tol
    on_top = np.abs(pts[:, 1] - 1.0) < tol
    slaves = np.flatnonzero(on_right | on_top)
    target = pts[slaves].copy()
    target[on_right[slaves], 0] = 0.0
    target[on_top[slaves], 1] = 0.0
    lookup = {tuple(k): i for i, k in enumerate(np.round(pts, 12) + 0.0)}
    masters = []
    for s, q in zip(slaves, np.round(target, 12) + 0.0):
        m = lookup.get(tuple(q))
        if m is None:
            raise MeshGenerationFailure(f"boundary vertex {pts[s]} has no periodic partner")
        masters.append(m)
    return np.column_stack([np.array(masters, dtype=int), slaves]).reshape(-1, 2)


def build_cell_mesh(geom: UnitCellGeometry, target_h: float, symmetric=None) -> TriangleMesh:
    """Fitted triangulation of the unit cell resolving the disc inclusion.

    Centered discs are meshed on one eighth of the cell and reflected, so the
    mesh carries the full symmetry group of the square; other placements use a
    direct constrained triangulation with matching nodes on opposite faces.
    """
    _check_budget(target_h)
    if symmetric is None:
        symmetric = geom.is_centered
    if symmetric and not geom.is_centered:
        raise GeometryError("symmetric meshing requires a centered inclusion")
    pts, tris, tags = (_symmetric_cell if symmetric else _general_cell)(geom, target_h)
    mesh = _finish_cell_mesh(pts, tris, tags)
    if len(mesh.interface_edges) < 8:
        raise MeshGenerationFailure("fewer than 8 interface edges")
    return mesh.validate()


def extract_surface_mesh(mesh: TriangleMesh) -> SurfaceMesh:
    """Order the interface edges of ``mesh`` into one closed counter-clockwise loop."""
    ie = mesh.interface_edges
    if len(ie) < 3:
        raise TopologyError("interface has fewer than three edges")
    nbrs = {}
    for a, b in ie:
        nbrs.setdefault(int(a), []).append(int(b))
        nbrs.setdefault(int(b), []).append(int(a))
    if any(len(v) != 2 for v in nbrs.values()):
        raise TopologyError("interface edges do not form a closed loop")
    start = min(nbrs)
    order = [start]
    prev, cur = None, start
    while True:
        a, b = nbrs[cur]
        nxt = a if a != prev else b
        if nxt == start:
            break
        order.append(nxt)
        prev, cur = cur, nxt
        if len(order) > len(nbrs):
            raise TopologyError("interface edges do not form a closed loop")
    if len(order) != len(nbrs):
        raise TopologyError("interface edges form more than one loop")
    ids = np.array(order)
    nodes = mesh.vertices[ids]
    n = len(ids)
    edges = np.column_stack([np.arange(n), (np.arange(n) + 1) % n])
    s = _surface_from_edges(nodes, edges, ids)
    if s.signed_area() < 0:
        ids = ids[::-1].copy()
        s = _surface_from_edges(mesh.vertices[ids], edges, ids)
    return s


def unit_square_mesh(n: int, diagonal="alternating") -> TriangleMesh:
    """Structured n x n triangulation of (0,1)^2 used for the macroscopic problem."""
    if n < 1:
        raise GeometryError("unit_square_mesh needs n >= 1")
    x = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(x, x, indexing="xy")
    verts = np.column_stack([X.ravel(), Y.ravel()])
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    i, j = i.ravel(), j.ravel()
    v00 = j * (n + 1) + i
    v10, v01, v11 = v00 + 1, v00 + n + 1, v00 + n + 2
    if diagonal == "alternating":
        flip = (i + j) % 2 == 1
    else:
        flip = np.zeros_like(i, dtype=bool)
    t1 = np.where(flip[:, None], np.column_stack([v00, v10, v01]), np.column_stack([v00, v10, v11]))
    t2 = np.where(flip[:, None], np.column_stack([v10, v11, v01]), np.column_stack([v00, v11, v01]))
    tris = np.vstack([t1, t2])
    mesh = TriangleMesh(vertices=verts, triangles=tris, tags=np.full(len(tris), Y1))
    e = np.sort(tris[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    u, c = np.unique(e, axis=0, return_counts=True)
    mesh.boundary_edges = u[c == 1]
    mesh.boundary_tags = np.full(len(mesh.boundary_edges), OUTER)
    return mesh


# --------------------------------------------------------------------------
# epsilon tilings


@dataclass(eq=False)
class EpsilonTiling:
    """N x N tiling of Omega = (0,1)^2 by epsilon-scaled copies of the cell.

    ``cell_nodes[j][k]`` lists the micro vertex ids of the copy in cell ``k``
    in the order of the cell side mesh; unfolding is a gather with it.
    ``cell_index[k]`` is the lattice vector of cell ``k``.
    """

    epsilon: float
    n: int
    cell: TriangleMesh
    cell_sides: dict
    cell_parent: dict
    cell_surfaces: dict
    meshes: dict
    surfaces: dict
    cell_nodes: dict
    cell_index: np.ndarray

    @property
    def n_cells(self):
        return self.n * self.n


def _tile_side(sub, n, eps, index, lattice_identify=True):
    nv = sub.n_vertices
    master = sub.master_map() if lattice_identify else np.arange(nv)
    shift = np.rint(sub.vertices - sub.vertices[master]).astype(int)
    K1 = index[:, 0:1] + shift[None, :, 0]
    K2 = index[:, 1:2] + shift[None, :, 1]
    keys = (K1 * (n + 1) + K2) * nv + master[None, :]
    _, first, inv = np.unique(keys.ravel(), return_index=True, return_inverse=True)
    ids = inv.reshape(len(index), nv)
    k_of = first // nv
    v_of = first % nv
    verts = eps * (index[k_of] + sub.vertices[v_of])
    tris = ids[:, sub.triangles].reshape(-1, 3)
    mesh = TriangleMesh(vertices=verts, triangles=tris,
                        tags=np.tile(sub.tags, len(index)))
    return mesh, ids


def _tile_surface(cs, ids, eps, index):
    ncell, ns = len(index), cs.n_nodes
    nodes = eps * (index[:, None, :] + cs.nodes[None, :, :]).reshape(-1, 2)
    edges = (cs.edges[None, :, :] + ns * np.arange(ncell)[:, None, None]).reshape(-1, 2)
    node_ids = ids[:, cs.node_ids].ravel()
    return SurfaceMesh(
        nodes=nodes, edges=edges,
        normals=np.tile(cs.normals, (ncell, 1)), tangents=np.tile(cs.tangents, (ncell, 1)),
        lengths=eps * np.tile(cs.lengths, ncell), node_ids=node_ids,
    )


def parse_epsilon(epsilon):
    """Return (epsilon, N) with N = 1/epsilon a positive integer."""
    if isinstance(epsilon, (int, np.integer)) and epsilon >= 1 and not isinstance(epsilon, bool):
        n = int(epsilon)
        return 1.0 / n, n
    e = float(epsilon)
    if not (math.isfinite(e) and 0.0 < e <= 1.0):
        raise GeometryError(f"epsilon must lie in (0, 1], got {epsilon!r}")
    inv = 1.0 / e
    n = int(round(inv))
    if n < 1 or abs(inv - n) > 1e-9 * n:
        raise GeometryError(f"1/epsilon must be a positive integer, got epsilon={epsilon!r}")
    return 1.0 / n, n


def build_epsilon_tiling(cell: TriangleMesh, epsilon) -> EpsilonTiling:
    """Scale and translate ``cell`` into the perforated micro meshes of (0,1)^2.

    ``epsilon`` is either 1/N as a float or the integer N.
    """
    eps, n = parse_epsilon(epsilon)
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    index = np.column_stack([i.ravel(), j.ravel()])
    sides, parents, csurf, meshes, surfs, nodes = {}, {}, {}, {}, {}, {}
    for s in (Y1, Y2):
        sub, parent = cell.side(s)
        sides[s], parents[s] = sub, parent
        cs = extract_surface_mesh(sub)
        csurf[s] = cs
        m, ids = _tile_side(sub, n, eps, index, lattice_identify=(s == Y1))
        meshes[s], nodes[s] = m, ids
        surfs[s] = _tile_surface(cs, ids, eps, index)
    # surface loops of the two sides must enumerate the same geometric nodes
    if not np.array_equal(parents[Y1][csurf[Y1].node_ids], parents[Y2][csurf[Y2].node_ids]):
        raise TopologyError("interface ordering differs between the two sides")
    full, ids = _tile_side(cell, n, eps, index)
    meshes[0], nodes[0] = full, ids
    sides[0], parents[0] = cell, np.arange(cell.n_vertices)
    return EpsilonTiling(epsilon=eps, n=n, cell=cell, cell_sides=sides, cell_parent=parents,
                         cell_surfaces=csurf, meshes=meshes, surfaces=surfs, cell_nodes=nodes,
                         cell_index=index)


def connected_components(mesh: TriangleMesh) -> int:
    """Number of connected components of the vertex graph of ``mesh``."""
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components as cc

    e = mesh.edges()
    g = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(mesh.n_vertices,) * 2)
    return int(cc(g, directed=False)[0])
