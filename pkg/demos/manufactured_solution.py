"""Manufactured solution for the limit system: spatial and temporal orders.

The forcing makes u1 = exp(-t) cos(pi x1) cos(pi x2) exact for the u1 equation.
The temporal study also reports the distance to a same-mesh run with a much
smaller step, which removes the spatial error floor from the estimate.
"""
import math

import numpy as np

from whomog.cell import golden_tensor
from whomog.geometry import UnitCellGeometry, build_cell_mesh, unit_square_mesh
from whomog.macro import AveragedReactions, CellQuadrature, MacroState, build_macro_system, run
from whomog.models import mms_solution, mms_source, no_reaction

quad = CellQuadrature.from_cell(build_cell_mesh(UnitCellGeometry(), 0.05))
d_hat = golden_tensor()["entries"][0][0]


def solve(n, dt, T):
    mesh = unit_square_mesh(n)
    system = build_macro_system(mesh, d_hat * np.eye(2), AveragedReactions(no_reaction(), quad),
                                source=mms_source(quad.c1, d_hat))
    x = mesh.vertices
    u = run(system, MacroState(0.0, mms_solution(0.0, x), np.zeros(len(x)), mesh), dt, T,
            every_step=False).states[-1].u1
    return u, system.M, mms_solution(T, x)


def norm(v, M):
    return math.sqrt(float(v @ (M @ v)))


print("space (dt = h^2 / 4, T = 0.1)")
prev = None
for n in (16, 32, 64, 128):
    u, M, exact = solve(n, 0.25 / n**2, 0.1)
    e = norm(u - exact, M)
    print(f"  h = 1/{n:<4d} error {e:.3e}" + (f"  order {math.log2(prev / e):.3f}" if prev else ""))
    prev = e

print("time (h = 1/64, T = 0.5)")
ref, M, exact = solve(64, 1.25e-4, 0.5)
prev = None
for dt in (4e-3, 2e-3, 1e-3, 5e-4):
    u, _, _ = solve(64, dt, 0.5)
    e, d = norm(u - exact, M), norm(u - ref, M)
    print(f"  dt = {dt:.1e}  error {e:.3e}  time error {d:.3e}"
          + (f"  orders {math.log2(prev[0] / e):.2f} / {math.log2(prev[1] / d):.2f}" if prev else ""))
    prev = (e, d)
