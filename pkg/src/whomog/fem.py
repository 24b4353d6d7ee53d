"""P1 finite elements on triangles and on interface polygons.

Operators are returned as ``scipy.sparse.csr_matrix``.  Surface operators live
on the local node numbering of a :class:`SurfaceMesh`; ``embed`` lifts them to
the owning bulk mesh through ``SurfaceMesh.node_ids`` (trace = restriction).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg

from .errors import ConsistencyError, EvaluationError, SolverDivergence
from .geometry import SurfaceMesh, TriangleMesh

_MASS_REF = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


def _as_tensor_field(value, n):
    if callable(value):
        return value
    a = np.asarray(value, dtype=float)
    if a.ndim == 0:
        a = a * np.eye(2)
    return lambda y: np.broadcast_to(a, (len(y), 2, 2))


def _as_scalar_field(value):
    if callable(value):
        return value
    a = float(value)
    return lambda y: np.full(len(y), a)


@dataclass
class DiffusionSpec:
    """Bulk tensors ``D1, D2`` and tangential surface diffusivities ``DG1, DG2``.

    Each entry is a constant (scalar or 2x2) or a callable of reference-cell
    points ``y`` of shape (m, 2) returning (m, 2, 2) resp. (m,) arrays.
    """

    D1: object = 1.0
    D2: object = 1.0
    DG1: object = 1.0
    DG2: object = 1.0
    c0: float = 1.0

    def bulk(self, j, y):
        f = _as_tensor_field(self.D1 if j == 1 else self.D2, 2)
        d = np.asarray(f(np.asarray(y)), dtype=float)
        if d.shape != (len(y), 2, 2):
            d = np.broadcast_to(d, (len(y), 2, 2))
        if not np.all(np.isfinite(d)):
            raise EvaluationError(f"bulk diffusion D{j} returned non-finite values")
        return d

    def surface(self, j, y):
        f = _as_scalar_field(self.DG1 if j == 1 else self.DG2)
        d = np.asarray(f(np.asarray(y)), dtype=float)
        d = np.broadcast_to(d, (len(y),))
        if not np.all(np.isfinite(d)):
            raise EvaluationError(f"surface diffusion DG{j} returned non-finite values")
        return d

    def scaled(self, alpha):
        def mul(v):
            if callable(v):
                return lambda y: alpha * np.asarray(v(y))
            return alpha * np.asarray(v, dtype=float)

        return DiffusionSpec(mul(self.D1), mul(self.D2), mul(self.DG1), mul(self.DG2), alpha * self.c0)

    def check(self, n=32):
        """Spot-check symmetry and coercivity on an n x n grid of the cell."""
        g = (np.arange(n) + 0.5) / n
        y = np.column_stack([a.ravel() for a in np.meshgrid(g, g)])
        for j in (1, 2):
            d = self.bulk(j, y)
            if np.max(np.abs(d - d.transpose(0, 2, 1))) > 1e-12 * max(1.0, np.max(np.abs(d))):
                raise EvaluationError(f"D{j} is not symmetric")
            if np.min(np.linalg.eigvalsh(d)) < self.c0 * (1 - 1e-12):
                raise EvaluationError(f"D{j} violates coercivity with c0={self.c0}")
            if np.min(self.surface(j, y)) < self.c0 * (1 - 1e-12):
                raise EvaluationError(f"DG{j} violates coercivity with c0={self.c0}")
        return True


def gradients(mesh: TriangleMesh, side=None):
    """Areas (m,) and barycentric gradients (m, 3, 2) of the selected triangles."""
    tris = mesh.triangles if side is None else mesh.triangles[mesh.tags == side]
    p = mesh.vertices[tris]
    e0 = p[:, 2] - p[:, 1]
    e1 = p[:, 0] - p[:, 2]
    e2 = p[:, 1] - p[:, 0]
    area2 = e2[:, 0] * (-e1[:, 1]) - e2[:, 1] * (-e1[:, 0])
    g = np.stack([e0, e1, e2], axis=1)
    g = np.stack([-g[..., 1], g[..., 0]], axis=-1) / area2[:, None, None]
    return 0.5 * area2, g, tris


def coefficient_points(x, epsilon=1.0):
    """Reference-cell coordinates frac(x / epsilon) for periodic coefficients."""
    z = np.asarray(x) / epsilon
    return z - np.floor(z)


def _assemble(tris, local, n):
    k = tris.shape[1]
    rows = np.repeat(tris, k, axis=1).ravel()
    cols = np.tile(tris, (1, k)).ravel()
    A = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    A.eliminate_zeros()
    return A


def assemble_bulk_stiffness(mesh: TriangleMesh, side, D: DiffusionSpec, scale=1.0, epsilon=1.0):
    """P1 stiffness of ``div(D grad u)`` with D evaluated at triangle centroids."""
    area, g, tris = gradients(mesh, side)
    j = side if side is not None else int(mesh.tags[0])
    cen = mesh.vertices[tris].mean(axis=1)
    d = D.bulk(j, coefficient_points(cen, epsilon))
    local = scale * area[:, None, None] * np.einsum("tai,tij,tbj->tab", g, d, g)
    return _assemble(tris, local, mesh.n_vertices)


def assemble_surface_stiffness(smesh: SurfaceMesh, DG, scale=1.0, epsilon=1.0, side=1):
    """Arclength P1 stiffness on the polygon, weighted by DG at edge midpoints.

    ``DG`` is a :class:`DiffusionSpec` (side ``side`` used), a constant or a
    callable of reference points.
    """
    y = coefficient_points(smesh.midpoints(), epsilon)
    if isinstance(DG, DiffusionSpec):
        w = DG.surface(side, y)
    else:
        w = np.broadcast_to(np.asarray(_as_scalar_field(DG)(y), dtype=float), (len(y),))
        if not np.all(np.isfinite(w)):
            raise EvaluationError("surface diffusivity returned non-finite values")
    c = scale * w / smesh.lengths
    local = c[:, None, None] * np.array([[1.0, -1.0], [-1.0, 1.0]])
    return _assemble(smesh.edges, local, smesh.n_nodes)


def assemble_mass(mesh, scale=1.0, side=None, lumped=False):
    """Consistent (or row-lumped) P1 mass on a triangle mesh or surface mesh."""
    if isinstance(mesh, SurfaceMesh):
        local = (scale * mesh.lengths / 6.0)[:, None, None] * np.array([[2.0, 1.0], [1.0, 2.0]])
        M = _assemble(mesh.edges, local, mesh.n_nodes)
    else:
        area, _, tris = gradients(mesh, side)
        M = _assemble(tris, scale * area[:, None, None] * _MASS_REF, mesh.n_vertices)
    if lumped:
        M = sp.diags(np.asarray(M.sum(axis=1)).ravel()).tocsr()
    return M


def trace_operator(smesh: SurfaceMesh, n_bulk):
    """Sparse (n_surface x n_bulk) restriction of bulk nodal values to the surface."""
    ns = smesh.n_nodes
    return sp.csr_matrix((np.ones(ns), (np.arange(ns), smesh.node_ids)), shape=(ns, n_bulk))


def embed(op, smesh: SurfaceMesh, n_bulk):
    """Lift a surface operator onto bulk numbering: P^T op P."""
    P = trace_operator(smesh, n_bulk)
    return (P.T @ op @ P).tocsr()


def surface_gradients(smesh: SurfaceMesh, values):
    """Tangential derivative per edge (scalar along the tangent)."""
    v = np.asarray(values)
    return (v[smesh.edges[:, 1]] - v[smesh.edges[:, 0]]) / smesh.lengths


def solve_spd(A, b, x0=None, rtol=1e-10, maxiter=10_000):
    """Jacobi-preconditioned conjugate gradients; raises SolverDivergence."""
    b = np.asarray(b, dtype=float)
    if not np.any(b) and x0 is None:
        return np.zeros_like(b)
    dinv = 1.0 / A.diagonal()
    M = LinearOperator(A.shape, matvec=lambda r: dinv * r, dtype=float)
    x, info = cg(A, b, x0=x0, rtol=rtol, atol=0.0, maxiter=maxiter, M=M)
    if info != 0:
        res = np.linalg.norm(A @ x - b) / max(np.linalg.norm(b), 1e-300)
        raise SolverDivergence(f"CG did not converge (info={info}, relative residual {res:.2e})")
    return x


@dataclass(eq=False)
class CoupledDofMap:
    """Bulk and interface DOF bookkeeping for the two sides of a mesh.

    ``interface[j]`` lists the bulk DOFs of side ``j`` carrying the trace;
    ``master`` is the periodic reduction map (identity when not periodic).
    """

    n_bulk: dict
    interface: dict
    master: np.ndarray

    @classmethod
    def for_cell(cls, sides, surfaces):
        return cls(
            n_bulk={j: sides[j].n_vertices for j in sides},
            interface={j: surfaces[j].node_ids for j in surfaces},
            master=sides[1].master_map(),
        )

    def is_idempotent(self):
        return bool(np.array_equal(self.master[self.master], self.master))

    def interface_is_subset(self):
        return all(np.all((ids >= 0) & (ids < self.n_bulk[j])) for j, ids in self.interface.items())

    def reduction(self):
        """Prolongation R (n x n_free) with full = R @ reduced, and the free ids."""
        free = np.unique(self.master)
        col = np.searchsorted(free, self.master)
        n = len(self.master)
        R = sp.csr_matrix((np.ones(n), (np.arange(n), col)), shape=(n, len(free)))
        return R, free


@dataclass(eq=False)
class SpaceNorms:
    """Discrete inner products of the epsilon-weighted trace spaces on one side.

    Stiffness matrices use identity coefficients so ``hje`` is the plain
    sqrt(|u|_{H1(bulk)}^2 + eps |u|_{H1(surface)}^2).
    """

    mass_bulk: sp.csr_matrix
    stiff_bulk: sp.csr_matrix
    mass_surf: sp.csr_matrix
    stiff_surf: sp.csr_matrix
    node_ids: np.ndarray
    epsilon: float

    @classmethod
    def build(cls, mesh: TriangleMesh, smesh: SurfaceMesh, epsilon):
        unit = DiffusionSpec()
        return cls(
            mass_bulk=assemble_mass(mesh),
            stiff_bulk=assemble_bulk_stiffness(mesh, None, unit),
            mass_surf=assemble_mass(smesh),
            stiff_surf=assemble_surface_stiffness(smesh, 1.0),
            node_ids=smesh.node_ids,
            epsilon=float(epsilon),
        )

    def _trace(self, u, trace):
        r = u[self.node_ids]
        if trace is None:
            return r
        trace = np.asarray(trace, dtype=float)
        scale = max(1.0, float(np.max(np.abs(r), initial=0.0)))
        if trace.shape != r.shape or np.max(np.abs(trace - r), initial=0.0) > 1e-12 * scale:
            raise ConsistencyError("trace differs from the bulk restriction")
        return trace

    def parts(self, u, trace=None):
        u = np.asarray(u, dtype=float)
        t = self._trace(u, trace)
        return {
            "bulk_l2": float(u @ (self.mass_bulk @ u)),
            "bulk_grad": float(u @ (self.stiff_bulk @ u)),
            "surf_l2": float(t @ (self.mass_surf @ t)),
            "surf_grad": float(t @ (self.stiff_surf @ t)),
        }

    def hje(self, u, trace=None):
        p = self.parts(u, trace)
        return float(np.sqrt(max(p["bulk_l2"] + p["bulk_grad"] + self.epsilon * (p["surf_l2"] + p["surf_grad"]), 0.0)))

    def lje(self, u, trace=None):
        p = self.parts(u, trace)
        return float(np.sqrt(max(p["bulk_l2"] + self.epsilon * p["surf_l2"], 0.0)))


def hje_norm(bulk, trace, norms: SpaceNorms):
    return norms.hje(bulk, trace)


def lje_norm(bulk, trace, norms: SpaceNorms):
    return norms.lje(bulk, trace)


@dataclass
class TraceReport:
    lhs: float
    rhs: float
    constant: float
    theta: float

    @property
    def ratio(self):
        return self.lhs / self.rhs if self.rhs > 0 else (0.0 if self.lhs == 0 else np.inf)

    @property
    def holds(self):
        return self.lhs <= self.rhs * (1 + 1e-12)


def _trace_terms(u, norms):
    p = norms.parts(u)
    return np.sqrt(p["surf_l2"]), np.sqrt(max(p["bulk_l2"], 0.0)), np.sqrt(max(p["bulk_grad"], 0.0))


def trace_inequality_check(u, norms: SpaceNorms, theta, constant):
    """Evaluate |u|_{L2(G)} <= C eps^{-1/2} |u|_{L2} + theta eps^{1/2} |grad u|_{L2}."""
    if theta <= 0:
        raise ValueError("theta must be positive")
    lhs, l2, grad = _trace_terms(u, norms)
    eps = norms.epsilon
    rhs = constant / np.sqrt(eps) * l2 + theta * np.sqrt(eps) * grad
    return TraceReport(lhs=float(lhs), rhs=float(rhs), constant=float(constant), theta=float(theta))


def required_trace_constant(u, norms: SpaceNorms, theta):
    """Smallest C for which the trace inequality holds for this field."""
    lhs, l2, grad = _trace_terms(u, norms)
    if l2 == 0:
        return 0.0
    eps = norms.epsilon
    return float(max(lhs - theta * np.sqrt(eps) * grad, 0.0) * np.sqrt(eps) / l2)


def calibrate_trace_constant(fields_by_norms, theta, safety=1.1):
    """C(theta) = safety x the largest constant required by the sample fields.

    ``fields_by_norms`` is an iterable of (SpaceNorms, list of nodal fields).
    """
    worst = 0.0
    for norms, fields in fields_by_norms:
        for u in fields:
            worst = max(worst, required_trace_constant(u, norms, theta))
    return safety * worst


def dump_triplets(A, path):
    """Write ``i j value`` lines for debugging."""
    C = sp.coo_matrix(A)
    order = np.lexsort((C.col, C.row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i, j, v in zip(C.row[order], C.col[order], C.data[order]):
            fh.write(f"{i} {j} {v:.17g}\n")
