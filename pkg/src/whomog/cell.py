"""Periodic cell problems with coupled bulk-surface diffusion and the effective tensor.

The corrector w_i lives on the matrix side Y1 only; its trace on Gamma carries
tangential diffusion.  Weak form, for all periodic test functions phi::

    int_Y1 D1 (grad w + e_i) . grad phi + int_G DG1 (grad_G w + P_G e_i) . grad_G phi = 0

with the constant fixed by int_G w = 0.  On a polygon P_G e_i = tau (tau . e_i)
per edge, so the surface flux is scalar along the tangent.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import CertificateFailure, SingularSystem
from .fem import (
    CoupledDofMap,
    DiffusionSpec,
    assemble_bulk_stiffness,
    assemble_mass,
    assemble_surface_stiffness,
    coefficient_points,
    embed,
    gradients,
    solve_spd,
    surface_gradients,
)
from .geometry import Y1, Y2, SurfaceMesh, TriangleMesh, extract_surface_mesh


@dataclass(eq=False)
class CellProblem:
    """Matrix-side mesh, interface and the assembled coupled operator."""

    mesh: TriangleMesh
    surface: SurfaceMesh
    diffusion: DiffusionSpec
    stiffness: object
    dofs: CoupledDofMap
    inclusion_area: float
    matrix_area: float

    @classmethod
    def build(cls, cell: TriangleMesh, diffusion: DiffusionSpec, surface: SurfaceMesh = None):
        sub, _ = cell.side(Y1)
        smesh = surface if surface is not None else extract_surface_mesh(sub)
        K = assemble_bulk_stiffness(sub, None, diffusion) + embed(
            assemble_surface_stiffness(smesh, diffusion, side=1), smesh, sub.n_vertices
        )
        sub2, _ = cell.side(Y2)
        dofs = CoupledDofMap(
            n_bulk={1: sub.n_vertices, 2: sub2.n_vertices},
            interface={1: smesh.node_ids},
            master=sub.master_map(),
        )
        return cls(sub, smesh, diffusion, K.tocsr(), dofs, cell.area(Y2), cell.area(Y1))

    @property
    def interface_length(self):
        return self.surface.length

    def load(self, xi):
        """Right-hand side for the macroscopic gradient ``xi``."""
        xi = np.asarray(xi, dtype=float)
        area, g, tris = gradients(self.mesh)
        d = self.diffusion.bulk(1, coefficient_points(self.mesh.vertices[tris].mean(axis=1)))
        flux = np.einsum("tij,j->ti", d, xi)
        b = np.zeros(self.mesh.n_vertices)
        np.add.at(b, tris, -area[:, None] * np.einsum("tai,ti->ta", g, flux))
        s = self.surface
        dg = self.diffusion.surface(1, coefficient_points(s.midpoints()))
        q = dg * (s.tangents @ xi)
        bs = np.zeros(s.n_nodes)
        np.add.at(bs, s.edges[:, 0], q)
        np.add.at(bs, s.edges[:, 1], -q)
        np.add.at(b, s.node_ids, bs)
        return b

    def gamma_mean(self, w):
        ws = w[self.surface.node_ids]
        return float(np.ones(len(ws)) @ (assemble_mass(self.surface) @ ws)) / self.interface_length


@dataclass(eq=False)
class CellSolutionSet:
    problem: CellProblem
    w: np.ndarray  # (2, n_vertices of the Y1 mesh)
    residual_norm: np.ndarray
    mean_on_gamma: np.ndarray

    def trace(self, i):
        return self.w[i][self.problem.surface.node_ids]


def solve_cell_problem(problem: CellProblem, direction, pin_dof=0, rtol=1e-12):
    """Corrector for the macroscopic gradient ``direction``.

    Returns (w, relative residual of the reduced system, Gamma-mean before
    normalization).  ``pin_dof`` indexes the reduced (periodic) unknowns.
    """
    R, free = problem.dofs.reduction()
    K = (R.T @ problem.stiffness @ R).tocsr()
    b = R.T @ problem.load(direction)
    if pin_dof is None:
        raise SingularSystem("periodic reduction leaves the constant nullspace unpinned")
    keep = np.ones(K.shape[0], dtype=bool)
    keep[pin_dof] = False
    w_r = np.zeros(K.shape[0])
    if np.any(b):
        w_r[keep] = solve_spd(K[keep][:, keep], b[keep], rtol=rtol)
    w = R @ w_r
    mean = problem.gamma_mean(w)
    w = w - mean
    res = np.linalg.norm(K @ w[free] - b) / np.linalg.norm(b) if np.any(b) else 0.0
    return w, float(res), mean


def solve_cell_problems(problem: CellProblem, rtol=1e-12):
    ws, res, means = [], [], []
    for i in range(2):
        e = np.zeros(2)
        e[i] = 1.0
        w, r, m = solve_cell_problem(problem, e, rtol=rtol)
        ws.append(w)
        res.append(r)
        means.append(problem.gamma_mean(w))
    return CellSolutionSet(problem, np.array(ws), np.array(res), np.array(means))


@dataclass
class EffectiveTensor:
    entries: np.ndarray
    bulk_part: np.ndarray
    surface_part: np.ndarray

    @property
    def eigenvalues(self):
        return np.linalg.eigvalsh(0.5 * (self.entries + self.entries.T))

    @property
    def symmetry_defect(self):
        return float(abs(self.entries[0, 1] - self.entries[1, 0]))

    @property
    def min_eigenvalue(self):
        return float(self.eigenvalues[0])

    @property
    def certificate(self):
        return {"symmetry_defect": self.symmetry_defect, "min_eigenvalue": self.min_eigenvalue}

    def check(self):
        scale = float(np.max(np.abs(self.entries)))
        if self.symmetry_defect > 1e-10 * scale:
            raise CertificateFailure(f"effective tensor not symmetric (defect {self.symmetry_defect:.3e})")
        if not self.min_eigenvalue > 0:
            raise CertificateFailure(f"effective tensor not positive definite ({self.min_eigenvalue:.3e})")
        return self


def corrected_gradients(problem: CellProblem, w):
    """Per-triangle grad w_i + e_i (2, m, 2) and per-edge tangential parts (2, E)."""
    _, g, tris = gradients(problem.mesh)
    bulk = np.einsum("tai,kta->kti", g, w[:, tris]) + np.eye(2)[:, None, :]
    s = problem.surface
    surf = np.array([surface_gradients(s, w[i][s.node_ids]) + s.tangents[:, i] for i in range(2)])
    return bulk, surf


def quadratic_energy(problem: CellProblem, bulk, surf):
    """Matrix of the bulk and surface energy pairings between corrected gradients."""
    area, _, tris = gradients(problem.mesh)
    d = problem.diffusion.bulk(1, coefficient_points(problem.mesh.vertices[tris].mean(axis=1)))
    s = problem.surface
    dg = problem.diffusion.surface(1, coefficient_points(s.midpoints()))
    Db = np.einsum("t,kta,tab,ltb->kl", area, bulk, d, bulk)
    Ds = np.einsum("e,ke,le->kl", s.lengths * dg, surf, surf)
    return Db, Ds


def assemble_effective_tensor(solutions: CellSolutionSet, check=True) -> EffectiveTensor:
    bulk, surf = corrected_gradients(solutions.problem, solutions.w)
    Db, Ds = quadratic_energy(solutions.problem, bulk, surf)
    t = EffectiveTensor(entries=Db + Ds, bulk_part=Db, surface_part=Ds)
    return t.check() if check else t


def effective_tensor(cell: TriangleMesh, diffusion: DiffusionSpec = None, rtol=1e-12):
    """Convenience wrapper: build, solve both cell problems and assemble the tensor."""
    problem = CellProblem.build(cell, diffusion or DiffusionSpec())
    sol = solve_cell_problems(problem, rtol=rtol)
    return assemble_effective_tensor(sol), sol


def reconstruct_corrector(u0_gradient, solutions: CellSolutionSet):
    """sum_i g_i w_i on the Y1 cell mesh."""
    g = np.asarray(u0_gradient, dtype=float)
    if not np.all(np.isfinite(g)):
        raise ValueError("gradient must be finite")
    return g @ solutions.w


def zero_corrector_bound(problem: CellProblem, xi):
    """Energy of w = 0: xi.(int D1) xi + int DG1 |P_G xi|^2, an upper bound for xi.Dhat xi."""
    xi = np.asarray(xi, dtype=float)
    area, _, tris = gradients(problem.mesh)
    d = problem.diffusion.bulk(1, coefficient_points(problem.mesh.vertices[tris].mean(axis=1)))
    s = problem.surface
    dg = problem.diffusion.surface(1, coefficient_points(s.midpoints()))
    return float(np.einsum("t,a,tab,b->", area, xi, d, xi) + np.sum(s.lengths * dg * (s.tangents @ xi) ** 2))


def golden_tensor():
    """Committed fine-mesh reference for the centered r = 0.25 disc with D1 = I, DG1 = 1.

    Returns the parsed record; ``entries`` is the 2x2 tensor as nested lists.
    """
    return json.loads(resources.files("whomog").joinpath("data/golden_cell.json").read_text())
