import dataclasses

import numpy as np
import pytest

from bdftf.mesh import (
    FLUID,
    POROUS,
    MeshError,
    WellboreGeometry,
    build_rect_union,
    build_wellbore_domain,
    euler_characteristic,
    validate,
)
from bdftf.mms import FLUID_RECT, POROUS_RECT


@pytest.fixture(scope="module")
def mesh4():
    return build_rect_union(FLUID_RECT, POROUS_RECT, 4, 4, 4)


def test_counts(mesh4):
    assert len(mesh4.region_triangles(FLUID)) == 32
    assert len(mesh4.region_triangles(POROUS)) == 32
    assert len(mesh4.interface_edges) == 4
    assert mesh4.n_vertices == 45
    assert mesh4.h == pytest.approx(np.sqrt(2) / 4)


def test_topology(mesh4):
    assert euler_characteristic(mesh4, FLUID) == 1
    assert euler_characteristic(mesh4, POROUS) == 1
    assert mesh4.region_area(FLUID) == pytest.approx(1.0)
    assert validate(mesh4) == []


def test_interface_frame(mesh4):
    assert np.allclose(mesh4.interface_normals, [0.0, -1.0])
    assert np.allclose(np.abs(mesh4.interface_tangents[:, 0]), 1.0)
    assert np.allclose(mesh4.vertices[mesh4.interface_edges][..., 1], 1.0)


def test_flipped_triangle_detected(mesh4):
    tris = mesh4.triangles.copy()
    tris[0] = tris[0][[0, 2, 1]]
    problems = validate(dataclasses.replace(mesh4, triangles=tris))
    assert any("orientation" in p for p in problems)


def test_reversed_normal_detected(mesh4):
    bad = dataclasses.replace(mesh4, interface_normals=-mesh4.interface_normals)
    assert any("interface normal" in p for p in validate(bad))


def test_wellbore_domain():
    mesh = build_wellbore_domain(target_h=0.25)
    assert validate(mesh) == []
    assert mesh.region_area(POROUS) == pytest.approx(14.0)
    assert mesh.region_area(FLUID) == pytest.approx(1.0)
    assert len(mesh.edges_with_tag("fluid_inflow")) > 0 and len(mesh.edges_with_tag("fluid_outflow")) > 0
    assert euler_characteristic(mesh, POROUS) == 1
    assert euler_characteristic(mesh, FLUID) == 3


def test_bad_geometry():
    with pytest.raises(MeshError):
        build_wellbore_domain(WellboreGeometry(slots=((0.0, 1.0, "injection"), (0.5, 2.0, "production"))))
    with pytest.raises(MeshError):
        build_wellbore_domain(WellboreGeometry(slots=((6.0, 8.0, "injection"),)))
    with pytest.raises(MeshError):
        build_rect_union(FLUID_RECT, POROUS_RECT, 4, 4, 4).edges_with_tag("nope")
