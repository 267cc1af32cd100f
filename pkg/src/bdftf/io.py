"""Bit-stable CSV and legacy-VTK writers."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .mesh import TAGS, CoupledMesh


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return format(v, ".17g")
    return str(v)


def write_csv(path, columns, rows) -> Path:
    """Write dict rows restricted to ``columns``; floats use 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([format_value(row.get(c)) for c in columns])
    return path


def read_csv(path) -> list:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def write_vtk(path, mesh: CoupledMesh, point_data=None, title="bdftf output") -> Path:
    """Legacy ASCII VTK 3.0 unstructured grid.

    Cells are the triangles (VTK type 5) followed by the tagged boundary
    edges (type 3). Cell data ``region`` is 0 fluid / 1 porous / -1 for edges,
    ``tag`` is -1 for triangles and the boundary-tag index for edges.
    ``point_data`` maps names to per-vertex arrays (scalars or 2-vectors).
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    nv = mesh.n_vertices
    tris, edges = mesh.triangles, mesh.boundary_edges
    nt, ne = len(tris), len(edges)
    f = lambda x: format(float(x), ".17g")  # noqa: E731
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID", f"POINTS {nv} double"]
    lines += [f"{f(x)} {f(y)} 0" for x, y in mesh.vertices]
    lines.append(f"CELLS {nt + ne} {4 * nt + 3 * ne}")
    lines += [f"3 {a} {b} {c}" for a, b, c in tris]
    lines += [f"2 {a} {b}" for a, b in edges]
    lines.append(f"CELL_TYPES {nt + ne}")
    lines += ["5"] * nt + ["3"] * ne
    lines.append(f"CELL_DATA {nt + ne}")
    lines += ["SCALARS region int 1", "LOOKUP_TABLE default"]
    lines += [str(int(r)) for r in mesh.regions] + ["-1"] * ne
    lines += ["SCALARS tag int 1", "LOOKUP_TABLE default"]
    lines += ["-1"] * nt + [str(int(t)) for t in mesh.boundary_tags]
    if point_data:
        lines.append(f"POINT_DATA {nv}")
        for name, arr in point_data.items():
            arr = np.asarray(arr, dtype=float)
            if arr.ndim == 1:
                lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
                lines += [f(v) for v in arr]
            else:
                lines.append(f"VECTORS {name} double")
                lines += [f"{f(a)} {f(b)} 0" for a, b in arr.reshape(nv, 2)]
    path.write_text("\n".join(lines) + "\n")
    return path


def vertex_values(space, coeffs, fill=np.nan) -> np.ndarray:
    """Sample a discrete field at mesh vertices (``fill`` outside its region)."""
    nv = space.mesh.n_vertices
    c = space.components
    out = np.full((nv, c) if c > 1 else nv, fill, dtype=float)
    have = space.vertex_node >= 0
    nodes = space.vertex_node[have]
    if c == 1:
        out[have] = coeffs[nodes]
    else:
        out[have] = np.asarray(coeffs).reshape(-1, c)[nodes]
    return out


def state_point_data(system, state) -> dict:
    u, p, phi = system.split(state)
    return {
        "velocity": np.nan_to_num(vertex_values(system.U, u), nan=0.0),
        "pressure": np.nan_to_num(vertex_values(system.Q, p), nan=0.0),
        "head": np.nan_to_num(vertex_values(system.H, phi), nan=0.0),
    }


TAG_LEGEND = {i: name for i, name in enumerate(TAGS)}
