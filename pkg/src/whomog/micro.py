"""The epsilon-problem: two bulk fields coupled through a dynamic Wentzell interface.

On each side j the unknown is a nodal P1 field on the perforated mesh; its
trace on the interface is the restriction to the interface nodes, so the
epsilon-weighted surface terms are simply extra matrices on the same DOFs.
The two sides exchange information only through the explicit h-loads.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import StabilityWarning, TopologyError
from .fem import (
    DiffusionSpec,
    SpaceNorms,
    assemble_bulk_stiffness,
    assemble_mass,
    assemble_surface_stiffness,
    calibrate_trace_constant,
    coefficient_points,
    embed,
    solve_spd,
    trace_inequality_check,
)
from .geometry import Y1, Y2, EpsilonTiling, extract_surface_mesh
from .macro import output_steps, time_grid
from .models import InitialData, ReactionSpec

_GAUSS2 = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])


def _bulk_quadrature(mesh, epsilon):
    """Edge-midpoint rule (exact for quadratics): interpolation Q, weights, reference points."""
    tris = mesh.triangles
    m = len(tris)
    a = mesh.vertices[tris[:, 1]] - mesh.vertices[tris[:, 0]]
    b = mesh.vertices[tris[:, 2]] - mesh.vertices[tris[:, 0]]
    area = 0.5 * np.abs(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])
    pairs = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    rows = np.repeat(np.arange(3 * m), 2)
    Q = sp.csr_matrix((np.full(6 * m, 0.5), (rows, pairs.ravel())), shape=(3 * m, mesh.n_vertices))
    x = 0.5 * (mesh.vertices[pairs[:, 0]] + mesh.vertices[pairs[:, 1]])
    return Q, np.tile(area / 3.0, 3), coefficient_points(x, epsilon)


def _surface_quadrature(smesh, epsilon):
    """Two-point Gauss rule per interface edge, on surface-local numbering."""
    e = smesh.edges
    E = len(e)
    rows, cols, vals, pts = [], [], [], []
    for k, s in enumerate(_GAUSS2):
        r = k * E + np.arange(E)
        rows += [r, r]
        cols += [e[:, 0], e[:, 1]]
        vals += [np.full(E, 1 - s), np.full(E, s)]
        pts.append((1 - s) * smesh.nodes[e[:, 0]] + s * smesh.nodes[e[:, 1]])
    Q = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(2 * E, smesh.n_nodes))
    return Q, np.tile(0.5 * smesh.lengths, 2), coefficient_points(np.vstack(pts), epsilon)


@dataclass(eq=False)
class WentzellSide:
    mesh: object
    surface: object
    A: sp.csr_matrix
    S: sp.csr_matrix
    norms: SpaceNorms
    Qb: sp.csr_matrix
    wb: np.ndarray
    yb: np.ndarray

    @property
    def node_ids(self):
        return self.surface.node_ids


@dataclass(eq=False)
class WentzellSystem:
    tiling: EpsilonTiling
    epsilon: float
    sides: dict
    Qs: sp.csr_matrix
    ws: np.ndarray
    ys: np.ndarray
    diffusion: DiffusionSpec
    rtol: float = 1e-12
    _cache: dict = field(default_factory=dict)

    def operator(self, j, dt):
        key = (j, float(dt))
        if key not in self._cache:
            s = self.sides[j]
            self._cache[key] = (s.A + dt * s.S).tocsr()
        return self._cache[key]


def build_wentzell_system(tiling: EpsilonTiling, D: DiffusionSpec = None, rtol=1e-12) -> WentzellSystem:
    D = D or DiffusionSpec()
    eps = tiling.epsilon
    sides = {}
    for j in (Y1, Y2):
        mesh, surf = tiling.meshes[j], tiling.surfaces[j]
        n = mesh.n_vertices
        A = assemble_mass(mesh) + embed(assemble_mass(surf, scale=eps), surf, n)
        S = assemble_bulk_stiffness(mesh, None, D, epsilon=eps) + embed(
            assemble_surface_stiffness(surf, D, scale=eps, epsilon=eps, side=j), surf, n)
        Qb, wb, yb = _bulk_quadrature(mesh, eps)
        sides[j] = WentzellSide(mesh, surf, A.tocsr(), S.tocsr(), SpaceNorms.build(mesh, surf, eps), Qb, wb, yb)
    s1, s2 = tiling.surfaces[Y1], tiling.surfaces[Y2]
    if not np.array_equal(s1.edges, s2.edges):
        raise TopologyError("interface edge lists differ between the two sides")
    Qs, ws, ys = _surface_quadrature(s1, eps)
    return WentzellSystem(tiling, eps, sides, Qs, ws, ys, D, rtol)


@dataclass(eq=False)
class MicroState:
    t: float
    u1: np.ndarray
    u2: np.ndarray
    epsilon: float

    def trace(self, sys: WentzellSystem, j):
        u = self.u1 if j == Y1 else self.u2
        return u[sys.sides[j].node_ids]


def reaction_loads(state: MicroState, sys: WentzellSystem, R: ReactionSpec):
    """Load vectors of f_eps^j over the bulk plus eps * h_eps^j over the interface."""
    loads = {}
    if R.is_zero:
        return {Y1: 0.0, Y2: 0.0}
    t = state.t
    z1 = sys.Qs @ state.trace(sys, Y1)
    z2 = sys.Qs @ state.trace(sys, Y2)
    for j, f, h, u in ((Y1, R.f1, R.h1, state.u1), (Y2, R.f2, R.h2, state.u2)):
        s = sys.sides[j]
        b = s.Qb.T @ (s.wb * np.asarray(f(t, s.yb, s.Qb @ u), dtype=float))
        hs = sys.Qs.T @ (sys.ws * np.asarray(h(t, sys.ys, z1, z2), dtype=float))
        np.add.at(b, s.node_ids, sys.epsilon * hs)
        loads[j] = b
    return loads


def micro_step(state: MicroState, dt, sys: WentzellSystem, R: ReactionSpec) -> MicroState:
    if not dt > 0:
        raise ValueError("dt must be positive")
    if dt * R.lipschitz_bound >= 1.0:
        warnings.warn(f"dt * L = {dt * R.lipschitz_bound:.3g} >= 1", StabilityWarning, stacklevel=2)
    loads = reaction_loads(state, sys, R)
    new = {}
    for j, u in ((Y1, state.u1), (Y2, state.u2)):
        A = sys.sides[j].A
        new[j] = solve_spd(sys.operator(j, dt), A @ u + dt * loads[j], x0=u, rtol=sys.rtol)
    return MicroState(state.t + dt, new[Y1], new[Y2], state.epsilon)


def initial_micro_state(sys: WentzellSystem, data: InitialData) -> MicroState:
    """Sample U^j(x, x/eps) at the nodes; interface nodes take the surface profile."""
    u = {}
    for j, bulk, surf in ((Y1, data.bulk1, data.surf1), (Y2, data.bulk2, data.surf2)):
        s = sys.sides[j]
        x = s.mesh.vertices
        v = bulk(x, coefficient_points(x, sys.epsilon))
        xs = x[s.node_ids]
        v[s.node_ids] = surf(xs, coefficient_points(xs, sys.epsilon))
        u[j] = v
    return MicroState(0.0, u[Y1], u[Y2], sys.epsilon)


def default_trace_constant(tiling: EpsilonTiling, theta=1.0, n_random=20, seed=0):
    """Calibrate C(theta) on the unit cell with constants, smooth waves and random fields."""
    cell = tiling.cell_sides[Y1]
    norms = SpaceNorms.build(cell, extract_surface_mesh(cell), 1.0)
    rng = np.random.default_rng(seed)
    y = cell.vertices
    fields = [np.ones(cell.n_vertices)]
    fields += [np.cos(2 * np.pi * (k * y[:, 0] + l * y[:, 1])) for k in range(3) for l in range(3) if k or l]
    fields += [rng.standard_normal(cell.n_vertices) for _ in range(n_random)]
    return calibrate_trace_constant([(norms, fields)], theta)


MICRO_COLUMNS = ("t", "mass1", "mass2", "hje_norm1", "hje_norm2", "trace_check_ratio")


def micro_diagnostics(state: MicroState, sys: WentzellSystem, trace_constant, theta=1.0):
    s1, s2 = sys.sides[Y1], sys.sides[Y2]
    rep = trace_inequality_check(state.u1, s1.norms, theta, trace_constant)
    return {
        "t": state.t,
        "mass1": float(np.sum(s1.A @ state.u1)),
        "mass2": float(np.sum(s2.A @ state.u2)),
        "hje_norm1": s1.norms.hje(state.u1),
        "hje_norm2": s2.norms.hje(state.u2),
        "trace_check_ratio": rep.ratio,
    }


@dataclass
class MicroRun:
    times: list
    states: list
    diagnostics: list
    hje_l2: tuple  # (||u1||_{L2(0,T;H_1eps)}, ||u2||_{L2(0,T;H_2eps)})
    trace_constant: float
    grad2_l2: float = 0.0  # ||grad u2||_{L2((0,T) x Omega_eps^2)}


def micro_run(sys: WentzellSystem, R: ReactionSpec, state: MicroState, dt, T, output_times=None,
              trace_constant=None, theta=1.0):
    """March to T; snapshots and diagnostics at ``output_times``.

    Time integrals of the H-norms and of |grad u2|^2 use the right-endpoint rule
    sum_n dt ||u^n||^2 over every step, the quantity the implicit scheme's own
    energy estimate controls.  It resolves initial layers of width eps^2 that a
    coarse snapshot grid would smear into an eps-independent floor.
    """
    if trace_constant is None:
        trace_constant = default_trace_constant(sys.tiling, theta)
    n, dt_eff = time_grid(dt, T)
    output_times = [T] if output_times is None else list(output_times)
    wanted = output_steps(output_times, n, T)
    snaps = {}
    if 0 in wanted:
        snaps[0] = state
    K2 = sys.sides[Y2].norms.stiff_bulk
    acc = np.zeros(3)
    t0 = state.t
    for k in range(1, n + 1):
        state = micro_step(state, dt_eff, sys, R)
        state.t = t0 + k * dt_eff
        acc += dt_eff * np.array([sys.sides[Y1].norms.hje(state.u1) ** 2, sys.sides[Y2].norms.hje(state.u2) ** 2,
                                  float(state.u2 @ (K2 @ state.u2))])
        if k in wanted:
            snaps[k] = state
    states = [snaps[k] for k in wanted]
    diag = [micro_diagnostics(s, sys, trace_constant, theta) for s in states]
    acc = np.sqrt(np.maximum(acc, 0.0))
    return MicroRun(output_times, states, diag, (float(acc[0]), float(acc[1])), trace_constant, float(acc[2]))
