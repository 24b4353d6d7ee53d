"""Recompute the fine-mesh effective tensor stored in src/whomog/data/golden_cell.json.

Takes a few seconds.  Pass --write to overwrite the committed file; without it
the record is printed and compared against the stored one.
"""
import argparse
import json
import platform
import time
from pathlib import Path

import numpy as np
import scipy

from whomog.cell import effective_tensor
from whomog.geometry import UnitCellGeometry, build_cell_mesh

TARGET = Path(__file__).resolve().parents[1] / "src" / "whomog" / "data" / "golden_cell.json"


def record(h=0.005):
    cell = build_cell_mesh(UnitCellGeometry(), h)
    T, sol = effective_tensor(cell)
    return {
        "description": "Effective tensor for a centered disc of radius 0.25 with D1 = I and DG1 = 1, fine-mesh oracle",
        "geometry": {"center": [0.5, 0.5], "radius": 0.25, "inclusion": "disc"},
        "diffusion": {"D1": "identity", "DG1": 1.0},
        "target_h": h,
        "n_vertices": int(cell.n_vertices),
        "n_triangles": int(cell.n_triangles),
        "mesh_h": cell.h,
        "entries": T.entries.tolist(),
        "bulk_part": T.bulk_part.tolist(),
        "surface_part": T.surface_part.tolist(),
        "cg_rtol": 1e-12,
        "residuals": sol.residual_norm.tolist(),
        "generator": "python3 demos/regenerate_golden_tensor.py --write",
        "versions": {"numpy": np.__version__, "scipy": scipy.__version__, "python": platform.python_version()},
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--write", action="store_true")
    args = ap.parse_args()
    t0 = time.perf_counter()
    rec = record()
    print(f"solved in {time.perf_counter() - t0:.1f} s on {rec['n_vertices']} vertices")
    print("D-hat =", np.array(rec["entries"]))
    if args.write:
        TARGET.write_text(json.dumps(rec, indent=2) + "\n")
        print("wrote", TARGET)
    elif TARGET.exists():
        old = np.array(json.loads(TARGET.read_text())["entries"])
        print("max difference to stored oracle:", np.abs(old - np.array(rec["entries"])).max())


if __name__ == "__main__":
    main()
