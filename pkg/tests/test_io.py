import numpy as np
import pytest

from bdftf.io import format_value, read_csv, state_point_data, vertex_values, write_csv, write_vtk
from bdftf.mesh import build_rect_union
from bdftf.mms import FLUID_RECT, POROUS_RECT


def test_format_value():
    assert format_value(0.1) == "0.10000000000000001"
    assert format_value(float("nan")) == "nan"
    assert format_value(True) == "1"
    assert format_value(None) == ""
    assert format_value(np.int64(3)) == "3"


def test_empty_rows_give_header_only(tmp_path):
    p = write_csv(tmp_path / "a.csv", ("x", "y"), [])
    assert p.read_bytes() == b"x,y\n"


def test_round_trip(tmp_path):
    row = {"x": 1 / 3, "y": -2.5e-300, "name": "BDF2"}
    p = write_csv(tmp_path / "a.csv", ("x", "y", "name"), [row])
    back = read_csv(p)[0]
    assert float(back["x"]) == row["x"] and float(back["y"]) == row["y"] and back["name"] == "BDF2"
    assert b"\r" not in p.read_bytes()


def test_vtk_structure(tmp_path, mms4):
    system, exact = mms4
    mesh = system.mesh
    state = exact.state(system, 0.0)
    p = write_vtk(tmp_path / "f.vtk", mesh, state_point_data(system, state))
    lines = p.read_text().splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0"
    assert f"POINTS {mesh.n_vertices} double" in lines
    n_cells = len(mesh.triangles) + len(mesh.boundary_edges)
    assert f"CELL_TYPES {n_cells}" in lines
    assert "VECTORS velocity double" in lines and "SCALARS head double 1" in lines


def test_vertex_values_fill():
    mesh = build_rect_union(FLUID_RECT, POROUS_RECT, 2, 2, 2)
    from bdftf.fem import FiniteElementSpace
    from bdftf.mesh import POROUS

    V = FiniteElementSpace(mesh, 2, POROUS)
    vals = vertex_values(V, V.interpolate(lambda x, y: x + y))
    top = mesh.vertices[:, 1] > 1.0 + 1e-12
    assert np.isnan(vals[top]).all()
    assert np.allclose(vals[~top], mesh.vertices[~top].sum(axis=1))
    with pytest.raises(Exception):
        write_vtk("/proc/forbidden/x.vtk", mesh)
