"""Deterministic text formats for meshes, nodal fields and tables.

Floats are printed with 17 significant digits through ``%.17g`` so that a
write/read round trip is exact and identical inputs give identical bytes.
"""
from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .errors import ParseError, TopologyError, WhomogError
from .geometry import INTERFACE, OUTER, TriangleMesh


def _fmt(x):
    return "%.17g" % float(x)


def _write_text(path, text):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror or exc}") from exc
    return path


def _read_lines(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read().splitlines()
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror or exc}") from exc


def write_mesh(mesh: TriangleMesh, path):
    out = ["meshfmt 1", f"vertices {mesh.n_vertices}"]
    out += [f"{_fmt(x)} {_fmt(y)}" for x, y in mesh.vertices]
    out.append(f"triangles {mesh.n_triangles}")
    out += [f"{a} {b} {c} {t}" for (a, b, c), t in zip(mesh.triangles, mesh.tags)]
    ie = mesh.interface_edges
    out.append(f"interface_edges {len(ie)}")
    out += [f"{a} {b}" for a, b in ie]
    out.append(f"periodic_pairs {len(mesh.periodic_pairs)}")
    out += [f"{a} {b}" for a, b in mesh.periodic_pairs]
    return _write_text(path, "\n".join(out) + "\n")


def _block(lines, pos, name, width, conv, path):
    if pos >= len(lines):
        raise ParseError(f"{path}: missing '{name}' block", pos + 1)
    head = lines[pos].split()
    if len(head) != 2 or head[0] != name or not head[1].isdigit():
        raise ParseError(f"{path}: expected '{name} <count>'", pos + 1)
    n = int(head[1])
    rows = []
    for k in range(pos + 1, pos + 1 + n):
        if k >= len(lines):
            raise ParseError(f"{path}: '{name}' block truncated", k + 1)
        parts = lines[k].split()
        if len(parts) != width:
            raise ParseError(f"{path}: expected {width} entries", k + 1)
        try:
            rows.append([conv(p) for p in parts])
        except ValueError:
            raise ParseError(f"{path}: bad number in '{name}' block", k + 1) from None
    return rows, pos + 1 + n


def read_mesh(path) -> TriangleMesh:
    """Parse a ``meshfmt 1`` file; structural defects raise TopologyError naming the file."""
    lines = [l for l in _read_lines(path) if l.strip()]
    if not lines or lines[0].strip() != "meshfmt 1":
        raise ParseError(f"{path}: missing 'meshfmt 1' header", 1)
    v, pos = _block(lines, 1, "vertices", 2, float, path)
    t, pos = _block(lines, pos, "triangles", 4, int, path)
    ie, pos = _block(lines, pos, "interface_edges", 2, int, path)
    pp, pos = _block(lines, pos, "periodic_pairs", 2, int, path)
    verts = np.array(v, dtype=float).reshape(-1, 2)
    tri = np.array(t, dtype=int).reshape(-1, 4)
    n = len(verts)
    for name, arr in (("triangles", tri[:, :3]), ("interface_edges", np.array(ie, int)),
                      ("periodic_pairs", np.array(pp, int))):
        if arr.size and (arr.min() < 0 or arr.max() >= n):
            raise TopologyError(f"{path}: {name} reference vertices outside 0..{n - 1}")
    if not np.all(np.isfinite(verts)):
        raise TopologyError(f"{path}: non-finite vertex coordinates")
    ie = np.array(ie, dtype=int).reshape(-1, 2)
    mesh = TriangleMesh(vertices=verts, triangles=tri[:, :3].copy(), tags=tri[:, 3].copy(),
                        periodic_pairs=np.array(pp, dtype=int).reshape(-1, 2))
    # outer boundary edges are implied by the triangles
    e = np.sort(mesh.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    u, c = np.unique(e, axis=0, return_counts=True)
    outer = u[c == 1]
    mesh.boundary_edges = np.vstack([outer, ie]) if len(ie) else outer
    mesh.boundary_tags = np.concatenate([np.full(len(outer), OUTER), np.full(len(ie), INTERFACE)])
    try:
        mesh.validate()
    except TopologyError as exc:
        raise TopologyError(f"{path}: {exc}") from None
    return mesh


def write_field(values, path, name="u", t=None, mesh_vertices=None):
    """``fieldfmt 1`` file: header, then one value per vertex line."""
    v = np.asarray(values, dtype=float).ravel()
    head = ["fieldfmt 1", f"name {name}"]
    if t is not None:
        head.append(f"time {_fmt(t)}")
    if mesh_vertices is not None and int(mesh_vertices) != len(v):
        raise WhomogError(f"{path}: field has {len(v)} values for a mesh with {mesh_vertices} vertices")
    head.append(f"values {len(v)}")
    return _write_text(path, "\n".join(head + [_fmt(x) for x in v]) + "\n")


def read_field(path):
    """Returns (values, metadata dict)."""
    lines = _read_lines(path)
    if not lines or lines[0].strip() != "fieldfmt 1":
        raise ParseError(f"{path}: missing 'fieldfmt 1' header", 1)
    meta, k = {}, 1
    while k < len(lines) and not lines[k].startswith("values"):
        key, _, val = lines[k].partition(" ")
        meta[key] = float(val) if key == "time" else val
        k += 1
    if k >= len(lines):
        raise ParseError(f"{path}: missing 'values' line", k + 1)
    n = int(lines[k].split()[1])
    data = lines[k + 1:k + 1 + n]
    if len(data) != n:
        raise ParseError(f"{path}: expected {n} values, found {len(data)}", k + 1)
    try:
        return np.array([float(x) for x in data]), meta
    except ValueError:
        raise ParseError(f"{path}: malformed value", k + 2) from None


def write_csv(rows, path, columns):
    """Header exactly ``columns``; numbers with 17 significant digits."""
    out = [",".join(columns)]
    for r in rows:
        out.append(",".join(_fmt(r[c]) if not isinstance(r[c], str) else r[c] for c in columns))
    return _write_text(path, "\n".join(out) + "\n")


def read_csv(path):
    lines = _read_lines(path)
    cols = lines[0].split(",")
    return cols, [dict(zip(cols, (float(x) for x in l.split(",")))) for l in lines[1:] if l.strip()]


def write_dat(rows, path, columns):
    """Whitespace-separated mirror with a ``#`` header for gnuplot."""
    out = ["# " + " ".join(columns)]
    out += [" ".join(_fmt(r[c]) for c in columns) for r in rows]
    return _write_text(path, "\n".join(out) + "\n")


def time_tag(t):
    """Stable file-name fragment for an output time."""
    return ("%.6f" % t).rstrip("0").rstrip(".") if t else "0"


def env_threads(default=1):
    """Worker cap from WHOMOG_THREADS (at least one)."""
    raw = os.environ.get("WHOMOG_THREADS")
    if not raw:
        return default
    try:
        return max(1, int(raw))
    except ValueError:
        return default
