"""Effective tensor of the disc cell under mesh refinement.

Prints D-hat at several mesh sizes next to the committed fine-mesh oracle, then
switches the surface diffusion off and compares the perforated-medium value
with Rayleigh's multipole series for a square array of insulating cylinders.
"""
import math

from whomog.cell import effective_tensor, golden_tensor
from whomog.fem import DiffusionSpec
from whomog.geometry import UnitCellGeometry, build_cell_mesh

geom = UnitCellGeometry()
gold = golden_tensor()["entries"][0][0]
print(f"oracle (h=0.005): D11 = {gold:.10f}")
print(f"{'h':>6} {'vertices':>9} {'D11':>14} {'bulk':>12} {'surface':>12} {'rel. to oracle':>15}")
for h in (0.1, 0.05, 0.02, 0.01):
    cell = build_cell_mesh(geom, h)
    T, _ = effective_tensor(cell)
    print(f"{h:6.3f} {cell.n_vertices:9d} {T.entries[0, 0]:14.10f} {T.bulk_part[0, 0]:12.8f} "
          f"{T.surface_part[0, 0]:12.8f} {T.entries[0, 0] / gold - 1:15.2e}")

phi = math.pi / 16
rayleigh = 1 - 2 * phi / (1 + phi - 0.305827 * phi**4 - 0.013362 * phi**8)
print(f"\nno surface diffusion; Rayleigh series gives {rayleigh:.8f}")
for h in (0.05, 0.02, 0.01):
    T, _ = effective_tensor(build_cell_mesh(geom, h), DiffusionSpec(DG1=0.0, c0=0.0))
    print(f"  h={h:5.3f}: D11 = {T.entries[0, 0]:.8f}  (difference {T.entries[0, 0] - rayleigh:.2e})")
