"""Unfolding operator, two-scale identities, shift diagnostics and the epsilon-sweep.

The micro meshes are exact scaled copies of the cell mesh, so unfolding a P1
field is a gather: the value of T_eps v at cell k and reference node y is the
micro nodal value at eps (k + y).  Norms of unfolded fields use the cell mass
matrices with the factor eps^2 = |eps (k + Y)|.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cell import CellProblem, assemble_effective_tensor, solve_cell_problems
from .errors import DomainMismatch, GeometryError, NonMonotoneConvergence
from .fem import DiffusionSpec, assemble_mass, gradients, surface_gradients
from .geometry import Y1, Y2, EpsilonTiling, TriangleMesh, build_epsilon_tiling, unit_square_mesh
from .macro import (
    AveragedReactions,
    CellQuadrature,
    build_macro_system,
    initial_state,
    run as macro_run,
)
from .micro import build_wentzell_system, initial_micro_state, micro_run
from .models import InitialData, ReactionSpec

DOMAINS = ("Y", "Y1", "Y2", "Gamma1", "Gamma2")
_SIDE = {"Y": 0, "Y1": Y1, "Y2": Y2, "Gamma1": Y1, "Gamma2": Y2}


@dataclass(eq=False)
class UnfoldedField:
    """Values of T_eps v on the reference nodes of one cell domain, per cell (N^2, n_ref)."""

    epsilon: float
    domain: str
    values: np.ndarray
    cell_index: np.ndarray

    @property
    def is_surface(self):
        return self.domain.startswith("Gamma")


def unfold(values, tiling: EpsilonTiling, domain) -> UnfoldedField:
    """Unfold a nodal field on the micro mesh (bulk domains) or micro interface (Gamma domains).

    Bulk: ``values`` indexes ``tiling.meshes[j]``; Gamma: ``tiling.surfaces[j]`` nodes.
    """
    if domain not in DOMAINS:
        raise DomainMismatch(f"unknown domain {domain!r}")
    v = np.asarray(values, dtype=float)
    j = _SIDE[domain]
    if domain.startswith("Gamma"):
        s = tiling.surfaces[j]
        if v.shape != (s.n_nodes,):
            raise DomainMismatch(f"{domain} field needs {s.n_nodes} values, got {v.shape}")
        out = v.reshape(tiling.n_cells, -1)
    else:
        m = tiling.meshes[j]
        if v.shape != (m.n_vertices,):
            raise DomainMismatch(f"{domain} field needs {m.n_vertices} values, got {v.shape}")
        out = v[tiling.cell_nodes[j]]
    return UnfoldedField(tiling.epsilon, domain, out, tiling.cell_index)


def restrict_to_gamma(u: UnfoldedField, tiling: EpsilonTiling) -> UnfoldedField:
    """(T_eps v)|_Gamma from a bulk unfolding, on the reference interface nodes."""
    if u.domain not in ("Y1", "Y2"):
        raise DomainMismatch("restriction to Gamma needs a Y1 or Y2 unfolding")
    j = _SIDE[u.domain]
    return UnfoldedField(u.epsilon, "Gamma" + str(j), u.values[:, tiling.cell_surfaces[j].node_ids], u.cell_index)


def reference_mass(tiling: EpsilonTiling, domain):
    j = _SIDE[domain]
    if domain.startswith("Gamma"):
        return assemble_mass(tiling.cell_surfaces[j])
    return assemble_mass(tiling.cell_sides[j])


def unfolded_norm(u: UnfoldedField, tiling: EpsilonTiling):
    """||T_eps v||_{L2(Omega x Y_j)} or L2(Omega x Gamma)."""
    M = reference_mass(tiling, u.domain)
    return math.sqrt(max(u.epsilon**2 * float(np.einsum("ka,ka->", u.values, (M @ u.values.T).T)), 0.0))


def micro_norm(values, tiling: EpsilonTiling, domain):
    """L2 norm of the micro field on Omega_eps^j or Gamma_eps."""
    j = _SIDE[domain]
    mesh = tiling.surfaces[j] if domain.startswith("Gamma") else tiling.meshes[j]
    v = np.asarray(values, dtype=float)
    return math.sqrt(max(float(v @ (assemble_mass(mesh) @ v)), 0.0))


def norm_identity_defect(values, tiling: EpsilonTiling, domain):
    """Relative defect of ||T v|| = ||v|| (bulk) or ||T v|| = eps^(1/2) ||v||_{Gamma_eps}."""
    lhs = unfolded_norm(unfold(values, tiling, domain), tiling)
    rhs = micro_norm(values, tiling, domain)
    if domain.startswith("Gamma"):
        rhs *= math.sqrt(tiling.epsilon)
    return abs(lhs - rhs) / max(rhs, 1e-300)


def surface_norm_identity_check(values, tiling: EpsilonTiling, side=Y1):
    return norm_identity_defect(values, tiling, "Gamma" + str(side))


def unfold_gradient_identity_check(values, tiling: EpsilonTiling, domain="Y1"):
    """max |grad_y T v - eps T grad v| over cells and elements (bulk or tangential)."""
    eps = tiling.epsilon
    j = _SIDE[domain]
    v = np.asarray(values, dtype=float)
    u = unfold(v, tiling, domain)
    if domain.startswith("Gamma"):
        ref = tiling.cell_surfaces[j]
        gy = (u.values[:, ref.edges[:, 1]] - u.values[:, ref.edges[:, 0]]) / ref.lengths
        gx = surface_gradients(tiling.surfaces[j], v).reshape(tiling.n_cells, -1)
        return float(np.max(np.abs(gy - eps * gx), initial=0.0))
    _, g_ref, tris_ref = gradients(tiling.cell_sides[j])
    gy = np.einsum("tai,kta->kti", g_ref, u.values[:, tris_ref])
    _, g, tris = gradients(tiling.meshes[j])
    gx = np.einsum("tai,ta->ti", g, v[tris]).reshape(tiling.n_cells, -1, 2)
    return float(np.max(np.abs(gy - eps * gx), initial=0.0))


def trace_commutation_defect(values, tiling: EpsilonTiling, side=Y1):
    """T(v|_Gamma_eps) vs (T v)|_Gamma, nodally."""
    v = np.asarray(values, dtype=float)
    a = unfold(v[tiling.surfaces[side].node_ids], tiling, "Gamma" + str(side)).values
    b = restrict_to_gamma(unfold(v, tiling, "Y" + str(side)), tiling).values
    return float(np.max(np.abs(a - b), initial=0.0))


# --------------------------------------------------------------------------
# two-scale pairings


def _cell_rule(tiling, domain):
    """Quadrature on the reference domain: interpolation matrix, weights and points."""
    from .micro import _bulk_quadrature, _surface_quadrature

    j = _SIDE[domain]
    if domain.startswith("Gamma"):
        return _surface_quadrature(tiling.cell_surfaces[j], 1.0)
    return _bulk_quadrature(tiling.cell_sides[j], 1.0)


def two_scale_pairing(values, tiling: EpsilonTiling, domain, b, c, unfolded=False):
    """int u_eps(x) b(x) c(x/eps) over Omega_eps^j, or eps * int over Gamma_eps.

    ``unfolded=True`` evaluates the same integral on Omega x Y_j (or Omega x Gamma)
    through the unfolded field.  Both sides use the same scaled quadrature rule.
    """
    from .micro import _bulk_quadrature, _surface_quadrature

    eps = tiling.epsilon
    j = _SIDE[domain]
    v = np.asarray(values, dtype=float)
    if unfolded:
        u = unfold(v, tiling, domain)
        Q, w, _ = _cell_rule(tiling, domain)
        # unwrapped reference points: frac() would send the x=1 and y=1 faces to 0
        y = _points_surface(tiling.cell_surfaces[j]) if domain.startswith("Gamma") else _points_bulk(tiling.cell_sides[j])
        vals = (Q @ u.values.T).T  # (cells, q)
        x = eps * (u.cell_index[:, None, :] + y[None, :, :])
        bx = np.asarray(b(x.reshape(-1, 2)), dtype=float).reshape(vals.shape)
        return float(eps**2 * np.sum(vals * bx * (w * c(y))[None, :]))
    if domain.startswith("Gamma"):
        s = tiling.surfaces[j]
        Q, w, y = _surface_quadrature(s, eps)
        pts = _points_surface(s)
        return float(eps * np.sum(w * (Q @ v) * b(pts) * c(y)))
    mesh = tiling.meshes[j]
    Q, w, y = _bulk_quadrature(mesh, eps)
    pts = _points_bulk(mesh)
    return float(np.sum(w * (Q @ v) * b(pts) * c(y)))


def _points_bulk(mesh):
    t = mesh.triangles
    pairs = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    return 0.5 * (mesh.vertices[pairs[:, 0]] + mesh.vertices[pairs[:, 1]])


def _points_surface(s):
    from .micro import _GAUSS2

    e = s.edges
    return np.vstack([(1 - g) * s.nodes[e[:, 0]] + g * s.nodes[e[:, 1]] for g in _GAUSS2])


def nonlinear_compatibility_defect(spec: ReactionSpec, state_u1, state_u2, tiling: EpsilonTiling, t=0.0):
    """max |T(h(t, x/eps, u)) - h(t, y, T u)| over reference interface nodes, for f^j and h^j."""
    eps = tiling.epsilon
    worst = 0.0
    for j, f, u in ((Y1, spec.f1, state_u1), (Y2, spec.f2, state_u2)):
        x = tiling.meshes[j].vertices
        ev = np.asarray(f(t, x / eps - np.floor(x / eps), u), dtype=float)
        a = unfold(np.broadcast_to(ev, u.shape), tiling, "Y" + str(j)).values
        tu = unfold(u, tiling, "Y" + str(j)).values
        yref = np.broadcast_to(tiling.cell_sides[j].vertices, tu.shape + (2,))
        b = np.asarray(f(t, yref.reshape(-1, 2), tu.ravel()), dtype=float).reshape(tu.shape)
        worst = max(worst, float(np.max(np.abs(a - b))))
    s1, s2 = tiling.surfaces[Y1], tiling.surfaces[Y2]
    z1, z2 = state_u1[s1.node_ids], state_u2[s2.node_ids]
    xs = s1.nodes
    for h in (spec.h1, spec.h2):
        ev = np.broadcast_to(np.asarray(h(t, xs / eps - np.floor(xs / eps), z1, z2), dtype=float), z1.shape)
        a = unfold(ev, tiling, "Gamma1").values
        t1 = unfold(z1, tiling, "Gamma1").values
        t2 = unfold(z2, tiling, "Gamma2").values
        yref = np.broadcast_to(tiling.cell_surfaces[Y1].nodes, t1.shape + (2,))
        b = np.asarray(h(t, yref.reshape(-1, 2), t1.ravel(), t2.ravel()), dtype=float).reshape(t1.shape)
        worst = max(worst, float(np.max(np.abs(a - b))))
    return worst


# --------------------------------------------------------------------------
# shift differences


def interior_cells(tiling: EpsilonTiling, l, h=None):
    """Cells k whose shifted copy k + l is a cell of the tiling.

    With ``h`` given, the strict interior set {k : eps (k + Y) in Omega_h} is
    used instead and |l eps| < h is enforced.
    """
    l = np.asarray(l, dtype=int)
    eps, n, idx = tiling.epsilon, tiling.n, tiling.cell_index
    if h is None:
        target = idx + l
        ok = np.all((target >= 0) & (target < n), axis=1)
    else:
        if not np.linalg.norm(l * eps) < h:
            raise GeometryError(f"shift |l eps| = {np.linalg.norm(l * eps):.3g} must be below h = {h}")
        lo, hi = eps * idx, eps * (idx + 1)
        ok = np.all((lo >= h - 1e-14) & (hi <= 1 - h + 1e-14), axis=1)
    if not np.any(ok):
        raise GeometryError("no interior cell admits the requested shift")
    k = np.nonzero(ok)[0]
    lookup = {tuple(v): i for i, v in enumerate(idx)}
    return k, np.array([lookup[tuple(v)] for v in idx[k] + l])


def shift_difference(values, tiling: EpsilonTiling, side, l, h=None, surface_weight=False):
    """||delta_l v||_{L2(Omega_eps,h^j)}; with ``surface_weight`` the L_{j,eps,h} norm."""
    if not np.any(l):
        return 0.0
    k, kl = interior_cells(tiling, l, h)
    v = np.asarray(values, dtype=float)
    u = v[tiling.cell_nodes[side]]
    d = u[kl] - u[k]
    M = assemble_mass(tiling.cell_sides[side])
    eps = tiling.epsilon
    total = eps**2 * float(np.einsum("ka,ka->", d, (M @ d.T).T))
    if surface_weight:
        cs = tiling.cell_surfaces[side]
        ds = d[:, cs.node_ids]
        total += eps * eps * float(np.einsum("ka,ka->", ds, (assemble_mass(cs) @ ds.T).T))
    return math.sqrt(max(total, 0.0))


def _trapezoid(times, values):
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(t) < 2:
        return 0.0
    return float(np.sum(0.5 * np.diff(t) * (v[1:] + v[:-1])))


def shift_difference_norm(snapshots, times, tiling, side, l, h=None):
    """||delta_l u||_{L2((0,T) x Omega_eps,h^j)} by the trapezoid rule over snapshots."""
    sq = [shift_difference(u, tiling, side, l, h) ** 2 for u in snapshots]
    return math.sqrt(max(_trapezoid(times, sq), 0.0))


@dataclass
class ShiftTerms:
    epsilon: float
    l: tuple
    lhs: float
    du1: float
    dinit: float

    @property
    def rhs_base(self):
        return self.du1 + self.dinit + self.epsilon

    @property
    def ratio(self):
        return self.lhs / self.rhs_base


def shift_terms(micro, tiling, l, h=None):
    """Both sides of the shift estimate for one lattice vector."""
    times = micro.times
    lhs = shift_difference_norm([s.u2 for s in micro.states], times, tiling, Y2, l, h)
    du1 = shift_difference_norm([s.u1 for s in micro.states], times, tiling, Y1, l, h)
    dinit = shift_difference(micro.states[0].u2, tiling, Y2, l, h, surface_weight=True)
    return ShiftTerms(tiling.epsilon, tuple(int(a) for a in l), lhs, du1, dinit)


SHIFT_VECTORS = tuple((s * a, s * b) for m in (1, 2) for (a, b) in ((m, 0), (0, m)) for s in (1, -1))


# --------------------------------------------------------------------------
# errors against the limit


def cell_moments(macro_mesh: TriangleMesh, u, tiling: EpsilonTiling):
    """Exact integrals over every eps-cell of u, u^2, grad u and grad u grad u^T for P1 u.

    Requires the macro mesh lines to contain the cell boundaries.
    """
    area, g, tris = gradients(macro_mesh)
    cen = macro_mesh.vertices[tris].mean(axis=1)
    n = tiling.n
    ij = np.floor(cen * n).astype(int)
    lookup = np.full((n, n), -1)
    lookup[tiling.cell_index[:, 0], tiling.cell_index[:, 1]] = np.arange(tiling.n_cells)
    k = lookup[ij[:, 0], ij[:, 1]]
    ut = u[tris]
    s0 = np.bincount(k, area, tiling.n_cells)
    m1 = np.bincount(k, area * ut.mean(axis=1), tiling.n_cells)
    m2 = np.bincount(k, area / 6.0 * (np.sum(ut**2, axis=1) + ut[:, 0] * ut[:, 1] + ut[:, 1] * ut[:, 2] + ut[:, 0] * ut[:, 2]),
                     tiling.n_cells)
    grad = np.einsum("tai,ta->ti", g, ut)
    g1 = np.stack([np.bincount(k, area * grad[:, i], tiling.n_cells) for i in range(2)], axis=1)
    gg = area[:, None, None] * grad[:, :, None] * grad[:, None, :]
    g2 = np.zeros((tiling.n_cells, 2, 2))
    np.add.at(g2, k, gg)
    expected = tiling.epsilon**2
    if np.max(np.abs(s0 - expected)) > 1e-10:
        raise GeometryError("macro mesh does not resolve the eps-cells exactly")
    return {"m1": m1, "m2": m2, "g1": g1, "g2": g2}


def unfolded_l2_error_sq(u: UnfoldedField, tiling, mom):
    """||T u - u0||^2 over Omega x Y_j (or Gamma) using exact cell moments of u0."""
    M = reference_mass(tiling, u.domain)
    v = u.values
    Mv = (M @ v.T).T
    meas = float(M.sum())
    e2 = tiling.epsilon**2
    return float(e2 * np.einsum("ka,ka->", v, Mv) - 2 * np.sum(Mv.sum(axis=1) * mom["m1"]) + meas * np.sum(mom["m2"]))


def gradient_error_sq(u1, tiling, mom, corrector_grads=None):
    """||T grad u - B(y) grad u0||^2 over Omega x Y1 with B = I + [grad w_1, grad w_2]."""
    eps = tiling.epsilon
    area, g, tris = gradients(tiling.meshes[Y1])
    gm = np.einsum("tai,ta->ti", g, u1[tris]).reshape(tiling.n_cells, -1, 2)
    aref, _, _ = gradients(tiling.cell_sides[Y1])
    m = len(aref)
    B = np.broadcast_to(np.eye(2), (m, 2, 2)).copy()
    if corrector_grads is not None:
        B[:, :, 0] += corrector_grads[0]
        B[:, :, 1] += corrector_grads[1]
    t1 = eps**2 * np.einsum("t,kti,kti->", aref, gm, gm)
    t2 = np.einsum("t,kti,tij,kj->", aref, gm, B, mom["g1"])
    BtB = np.einsum("tij,til->tjl", B, B)
    t3 = np.einsum("t,tjl,cjl->", aref, BtB, mom["g2"])
    return float(t1 - 2 * t2 + t3)


def lp_error(u: UnfoldedField, tiling, macro_mesh, u0, p):
    """||T u - u0||_{L^p(Omega x Y_j)} by product quadrature (edge midpoints in x and y)."""
    from .micro import _bulk_quadrature

    Q, w, y = _cell_rule(tiling, u.domain)
    ty = (Q @ u.values.T).T  # (cells, qy)
    Qx, wx, _ = _bulk_quadrature(macro_mesh, 1.0)
    xq = _points_bulk(macro_mesh)
    u0q = Qx @ u0
    k = np.floor(xq * tiling.n).clip(0, tiling.n - 1).astype(int)
    lookup = np.full((tiling.n, tiling.n), -1)
    lookup[tiling.cell_index[:, 0], tiling.cell_index[:, 1]] = np.arange(tiling.n_cells)
    cell = lookup[k[:, 0], k[:, 1]]
    total = 0.0
    for c in range(tiling.n_cells):
        sel = cell == c
        d = np.abs(ty[c][None, :] - u0q[sel][:, None]) ** p
        total += float(wx[sel] @ d @ w)
    return total ** (1.0 / p)


# --------------------------------------------------------------------------
# the sweep


REPORT_COLUMNS = ("epsilon", "e1_bulk", "e1_surf", "e2_bulk", "e2_surf", "e1_grad", "grad2_norm", "hje1", "hje2")
MONOTONE_COLUMNS = ("e1_bulk", "e1_surf", "e2_bulk", "e2_surf", "e1_grad", "grad2_norm")


@dataclass
class SweepSettings:
    epsilons: tuple = (0.5, 0.25, 0.125)
    cell_h: float = 0.05
    macro_n: int = 64
    dt: float = 1e-3
    T: float = 0.25
    snapshots: int = 11
    ratio: float = 0.9
    shift_h: float = None


@dataclass
class ConvergenceReport:
    epsilons: list
    rows: list
    tensor: np.ndarray
    shift: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    e2_exponent: float = 2.0

    def column(self, name):
        return np.array([r[name] for r in self.rows])

    def monotone_failures(self, ratio=0.9, columns=MONOTONE_COLUMNS):
        bad = []
        for c in columns:
            v = self.column(c)
            for a, b, e in zip(v[:-1], v[1:], self.epsilons[1:]):
                if not (b < a and b <= ratio * a):
                    bad.append((c, e, b / a if a else math.inf))
        return bad

    def observed_orders(self):
        e = np.asarray(self.epsilons)
        out = {}
        for c in MONOTONE_COLUMNS:
            v = self.column(c)
            with np.errstate(divide="ignore", invalid="ignore"):
                out[c] = list(np.log(v[:-1] / v[1:]) / np.log(e[:-1] / e[1:]))
        return out

    def check(self, ratio=0.9):
        bad = self.monotone_failures(ratio)
        if bad:
            hints = "; ".join(f"{c} at eps={e:g} (ratio {r:.3f})" for c, e, r in bad)
            raise NonMonotoneConvergence(
                f"non-monotone errors: {hints}. Try a finer cell mesh, more macro cells or a smaller dt.")
        return self


def _time_norm(times, sq):
    return math.sqrt(max(_trapezoid(times, sq), 0.0))


def errors_for_epsilon(tiling, micro, macro_states, macro_mesh, corrector_grads):
    """All report norms for one epsilon, from stored snapshots."""
    times = micro.times
    acc = {k: [] for k in ("e1_bulk", "e1_surf", "e2_bulk", "e2_surf", "e1_grad", "e1_grad_plain")}
    for ms, st in zip(micro.states, macro_states):
        m1 = cell_moments(macro_mesh, st.u1, tiling)
        m2 = cell_moments(macro_mesh, st.u2, tiling)
        a = unfold(ms.u1, tiling, "Y1")
        b = unfold(ms.u2, tiling, "Y2")
        acc["e1_bulk"].append(unfolded_l2_error_sq(a, tiling, m1))
        acc["e1_surf"].append(unfolded_l2_error_sq(restrict_to_gamma(a, tiling), tiling, m1))
        acc["e2_bulk"].append(unfolded_l2_error_sq(b, tiling, m2))
        acc["e2_surf"].append(unfolded_l2_error_sq(restrict_to_gamma(b, tiling), tiling, m2))
        acc["e1_grad"].append(gradient_error_sq(ms.u1, tiling, m1, corrector_grads))
        acc["e1_grad_plain"].append(gradient_error_sq(ms.u1, tiling, m1, None))
    out = {k: _time_norm(times, v) for k, v in acc.items()}
    # ||T grad u2|| = ||grad u2||_{Omega_eps^2} (isometry); integrated per step by the micro run
    out["grad2_norm"] = micro.grad2_l2
    return out


def convergence_sweep(settings: SweepSettings, cell: TriangleMesh, reactions: ReactionSpec,
                      diffusion: DiffusionSpec, initial: InitialData, progress=None, keep_runs=False,
                      workers=1):
    """Run the micro problem per epsilon and the macro problem once; compare by unfolding.

    Per-epsilon jobs are independent; ``workers > 1`` runs them on a thread pool.
    """
    eps_list = [float(e) for e in settings.epsilons]
    problem = CellProblem.build(cell, diffusion)
    sols = solve_cell_problems(problem)
    tensor = assemble_effective_tensor(sols)
    _, g, tris = gradients(problem.mesh)
    corr = np.einsum("tai,kta->kti", g, sols.w[:, tris])

    quad = CellQuadrature.from_cell(cell)
    mesh = unit_square_mesh(settings.macro_n)
    msys = build_macro_system(mesh, tensor, AveragedReactions(reactions, quad))
    times = list(np.linspace(0.0, settings.T, settings.snapshots))
    mrun = macro_run(msys, initial_state(initial, quad, mesh), settings.dt, settings.T, times, every_step=False)

    def job(eps):
        tiling = build_epsilon_tiling(cell, eps)
        if settings.macro_n % tiling.n:
            raise GeometryError(f"macro_n={settings.macro_n} is not a multiple of 1/eps={tiling.n}")
        wsys = build_wentzell_system(tiling, diffusion)
        run = micro_run(wsys, reactions, initial_micro_state(wsys, initial), settings.dt, settings.T, times)
        err = errors_for_epsilon(tiling, run, mrun.states, mesh, corr)
        row = {"epsilon": tiling.epsilon, **{k: err[k] for k in REPORT_COLUMNS[1:7]},
               "hje1": run.hje_l2[0], "hje2": run.hje_l2[1], "e1_grad_plain": err["e1_grad_plain"]}
        shift = [shift_terms(run, tiling, l, settings.shift_h)
                 for l in SHIFT_VECTORS if _admissible(tiling, l, settings.shift_h)]
        if progress:
            progress(row)
        return row, shift, (tiling, run)

    if workers > 1 and len(eps_list) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, eps_list))
    else:
        results = [job(e) for e in eps_list]
    rows = [r[0] for r in results]
    shift = {r[0]["epsilon"]: r[1] for r in results}
    report = ConvergenceReport(eps_list, rows, tensor.entries, shift)
    if report.monotone_failures(settings.ratio, ("e2_bulk",)):
        # strong convergence of u2 is only guaranteed in L^p, p < 2
        for row, (tiling, run) in zip(rows, (r[2] for r in results)):
            sq = [lp_error(unfold(ms.u2, tiling, "Y2"), tiling, mesh, st.u2, 1.5) ** 1.5
                  for ms, st in zip(run.states, mrun.states)]
            row["e2_bulk"] = _trapezoid(times, sq) ** (1 / 1.5)
        report.e2_exponent = 1.5
    report.extra["macro"] = mrun
    report.extra["mesh"] = mesh
    if keep_runs:
        report.extra["runs"] = {r[0]["epsilon"]: r[2] for r in results}
    return report


def _admissible(tiling, l, h):
    try:
        interior_cells(tiling, l, h)
        return True
    except GeometryError:
        return False


def calibrate_shift_constant(terms):
    """Smallest C with lhs <= C (du1 + dinit + eps) for all supplied shift terms."""
    return max(t.ratio for t in terms)


def shift_check(report: ConvergenceReport):
    """Calibrate at the largest epsilon, then test at the smallest."""
    eps = sorted(report.shift)
    C = calibrate_shift_constant(report.shift[eps[-1]])
    worst = max(t.ratio for t in report.shift[eps[0]])
    return C, worst, worst <= C
