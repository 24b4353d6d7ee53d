"""Homogenized limit system: a parabolic field u1 coupled pointwise to an ODE field u2.

Both fields are nodal P1 values on one structured mesh of Omega.  The time
discretization is IMEX backward Euler: diffusion implicit, reactions explicit.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import StabilityWarning
from .fem import DiffusionSpec, assemble_bulk_stiffness, assemble_mass, gradients, solve_spd
from .geometry import Y1, Y2, TriangleMesh, extract_surface_mesh
from .models import InitialData, ReactionSpec


@dataclass(eq=False)
class CellQuadrature:
    """Centroid rule on Y1 and Y2 and midpoint rule on Gamma, from the committed cell mesh."""

    points: dict
    weights: dict

    @classmethod
    def from_cell(cls, cell: TriangleMesh):
        pts, wts = {}, {}
        for j in (Y1, Y2):
            area, _, tris = gradients(cell, j)
            pts[j] = cell.vertices[tris].mean(axis=1)
            wts[j] = area
        s = extract_surface_mesh(cell.side(Y1)[0])
        pts["G"], wts["G"] = s.midpoints(), s.lengths.copy()
        return cls(pts, wts)

    @property
    def matrix_area(self):
        return float(self.weights[Y1].sum())

    @property
    def inclusion_area(self):
        return float(self.weights[Y2].sum())

    @property
    def interface_length(self):
        return float(self.weights["G"].sum())

    @property
    def c1(self):
        return self.matrix_area + self.interface_length

    @property
    def c2(self):
        return self.inclusion_area + self.interface_length


def _integrate(fn, t, pts, wts, *z):
    """sum_q w_q fn(t, y_q, z) for every entry of z, looping over quadrature points."""
    n = len(z[0])
    acc = np.zeros(n)
    for y, w in zip(pts, wts):
        acc += w * np.asarray(fn(t, np.broadcast_to(y, (n, 2)), *z), dtype=float)
    return acc


@dataclass(eq=False)
class AveragedReactions:
    """Cell integrals of the kinetics; y-independent kinetics are evaluated once."""

    spec: ReactionSpec
    quad: CellQuadrature

    @property
    def lipschitz(self):
        q = self.quad
        return self.spec.lipschitz_bound * max(q.matrix_area, q.inclusion_area, q.interface_length)

    def _eval(self, fn, key, t, *z):
        if self.spec.is_zero:
            return np.zeros(len(z[0]))
        if not self.spec.y_dependent:
            y0 = np.zeros((len(z[0]), 2))
            return float(self.quad.weights[key].sum()) * np.asarray(fn(t, y0, *z), dtype=float)
        return _integrate(fn, t, self.quad.points[key], self.quad.weights[key], *z)

    def F1(self, t, z):
        return self._eval(self.spec.f1, Y1, t, z)

    def F2(self, t, z):
        return self._eval(self.spec.f2, Y2, t, z)

    def H1(self, t, z1, z2):
        return self._eval(self.spec.h1, "G", t, z1, z2)

    def H2(self, t, z1, z2):
        return self._eval(self.spec.h2, "G", t, z1, z2)


@dataclass(eq=False)
class MacroState:
    t: float
    u1: np.ndarray
    u2: np.ndarray
    mesh: TriangleMesh

    def __post_init__(self):
        if not (np.all(np.isfinite(self.u1)) and np.all(np.isfinite(self.u2))):
            raise ValueError("macro state contains non-finite values")


@dataclass(eq=False)
class MacroSystem:
    mesh: TriangleMesh
    tensor: np.ndarray
    reactions: AveragedReactions
    source: object = None
    rtol: float = 1e-12
    M: object = None
    K: object = None
    _cache: dict = field(default_factory=dict)

    @property
    def quad(self):
        return self.reactions.quad

    def operator(self, dt):
        key = float(dt)
        if key not in self._cache:
            self._cache[key] = (self.quad.c1 * self.M + dt * self.K).tocsr()
        return self._cache[key]


def build_macro_system(mesh, tensor, reactions: AveragedReactions, source=None, rtol=1e-12):
    """Assemble mass and D-hat stiffness; ``tensor`` is an EffectiveTensor or a 2x2 array.

    ``source(t, x)`` optionally adds a nodal forcing to the u1 equation.
    """
    entries = np.asarray(getattr(tensor, "entries", tensor), dtype=float)
    K = assemble_bulk_stiffness(mesh, None, DiffusionSpec(D1=entries, D2=entries))
    return MacroSystem(mesh, entries, reactions, source, rtol, assemble_mass(mesh), K)


def weighted_initial_data(u0i_1, u0iG_1, u0i_2, u0iG_2, quad: CellQuadrature, mesh: TriangleMesh):
    """MacroState at t=0 from the bulk and surface two-scale limits of the initial data."""
    g = quad.interface_length
    a1, a2 = quad.matrix_area, quad.inclusion_area
    u1 = (a1 * np.asarray(u0i_1, float) + g * np.asarray(u0iG_1, float)) / (a1 + g)
    u2 = (a2 * np.asarray(u0i_2, float) + g * np.asarray(u0iG_2, float)) / (a2 + g)
    n = mesh.n_vertices
    return MacroState(0.0, np.broadcast_to(u1, (n,)).copy(), np.broadcast_to(u2, (n,)).copy(), mesh)


def initial_state(data: InitialData, quad: CellQuadrature, mesh: TriangleMesh):
    """Limits of separable profiles U(x, y): cell averages over Y_j and Gamma."""
    x = mesh.vertices
    lim = [
        data.bulk1.cell_average(x, quad.weights[Y1], quad.points[Y1]),
        data.surf1.cell_average(x, quad.weights["G"], quad.points["G"]),
        data.bulk2.cell_average(x, quad.weights[Y2], quad.points[Y2]),
        data.surf2.cell_average(x, quad.weights["G"], quad.points["G"]),
    ]
    return weighted_initial_data(*lim, quad, mesh)


def stability_margin(dt, system: MacroSystem):
    """dt * L_eff; the explicit reaction treatment wants this below one."""
    q = system.quad
    return dt * system.reactions.lipschitz / min(q.c1, q.c2)


def step(state: MacroState, dt, system: MacroSystem) -> MacroState:
    if not dt > 0:
        raise ValueError("dt must be positive")
    margin = stability_margin(dt, system)
    if margin >= 1.0:
        warnings.warn(f"dt * L_eff = {margin:.3g} >= 1", StabilityWarning, stacklevel=2)
    R, q, t = system.reactions, system.quad, state.t
    u1, u2 = state.u1, state.u2
    load1 = R.F1(t, u1) + R.H1(t, u1, u2)
    if system.source is not None:
        load1 = load1 + np.asarray(system.source(t, state.mesh.vertices), dtype=float)
    rhs = q.c1 * (system.M @ u1) + dt * (system.M @ load1)
    new1 = solve_spd(system.operator(dt), rhs, x0=u1, rtol=system.rtol)
    new2 = u2 + dt * (R.F2(t, u2) + R.H2(t, u1, u2)) / q.c2
    return MacroState(t + dt, new1, new2, state.mesh)


MACRO_COLUMNS = ("t", "mass1", "mass2", "energy", "min_u1", "max_u1")


def diagnostics(state: MacroState, system: MacroSystem):
    q, M = system.quad, system.M
    one = np.ones(len(state.u1))
    return {
        "t": state.t,
        "mass1": q.c1 * float(one @ (M @ state.u1)),
        "mass2": q.c2 * float(one @ (M @ state.u2)),
        "energy": 0.5 * (q.c1 * float(state.u1 @ (M @ state.u1)) + q.c2 * float(state.u2 @ (M @ state.u2))),
        "min_u1": float(state.u1.min()),
        "max_u1": float(state.u1.max()),
    }


def time_grid(dt, T):
    """Number of steps and the effective step so that n * dt == T exactly."""
    if T < 0 or not dt > 0:
        raise ValueError("need T >= 0 and dt > 0")
    n = int(math.ceil(T / dt - 1e-9))
    return n, (T / n if n else dt)


def output_steps(times, n, T):
    """Step index of each requested output time (nearest step)."""
    if n == 0:
        return [0 for _ in times]
    return [int(round(t / T * n)) if T > 0 else 0 for t in times]


@dataclass
class MacroRun:
    times: list
    states: list
    diagnostics: list


def run(system: MacroSystem, state: MacroState, dt, T, output_times=None, every_step=True):
    """March to T, storing states at ``output_times`` and diagnostics per step."""
    n, dt_eff = time_grid(dt, T)
    output_times = [T] if output_times is None else list(output_times)
    wanted = output_steps(output_times, n, T)
    states, diag = {}, [diagnostics(state, system)]
    if 0 in wanted:
        states[0] = state
    t0 = state.t
    for k in range(1, n + 1):
        state = step(state, dt_eff, system)
        state.t = t0 + k * dt_eff
        if every_step or k == n:
            diag.append(diagnostics(state, system))
        if k in wanted:
            states[k] = state
    return MacroRun([output_times[i] for i in range(len(wanted))], [states[k] for k in wanted], diag)
