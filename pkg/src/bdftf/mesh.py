"""Matched triangulations of a fluid region and a porous region.

Both builders go through one tensor-grid routine: the grid lines are chosen
so every subdomain edge lies on a grid line, each cell gets a region (or is
left out), and each kept cell is cut into two triangles with alternating
diagonals. Vertices on the fluid/porous contact are therefore shared by
construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

FLUID, POROUS = 0, 1
REGION_NAMES = ("fluid", "porous")
TAGS = ("fluid_wall", "fluid_inflow", "fluid_outflow", "porous_dirichlet", "interface")
TAG_ID = {name: i for i, name in enumerate(TAGS)}


class MeshError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CoupledMesh:
    """Triangulation of the fluid and porous subdomains.

    ``boundary_edges`` holds every edge on the boundary of either
    subdomain, interface edges included (tagged ``interface``). The interface
    also gets its own ordered arrays with the fluid-to-porous unit normal and
    a unit tangent per edge.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    regions: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    interface_edges: np.ndarray
    interface_normals: np.ndarray
    interface_tangents: np.ndarray
    interface_fluid_tri: np.ndarray
    interface_porous_tri: np.ndarray
    info: dict = field(default_factory=dict)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def h(self) -> float:
        """Largest element diameter (longest triangle edge)."""
        if len(self.triangles) == 0:
            return 0.0
        p = self.vertices[self.triangles]
        lens = [np.linalg.norm(p[:, (i + 1) % 3] - p[:, i], axis=1) for i in range(3)]
        return float(np.max(lens))

    def region_triangles(self, region: int) -> np.ndarray:
        return np.flatnonzero(self.regions == region)

    def edges_with_tag(self, tag: str) -> np.ndarray:
        if tag not in TAG_ID:
            raise MeshError(f"unknown boundary tag {tag!r}")
        return self.boundary_edges[self.boundary_tags == TAG_ID[tag]]

    def region_area(self, region: int) -> float:
        tri = self.triangles[self.regions == region]
        if len(tri) == 0:
            return 0.0
        p = self.vertices[tri]
        return float(0.5 * np.sum(_cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])))


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _edge_table(triangles):
    """Sorted vertex pairs of all triangle edges and their owning triangles."""
    local = np.array([[1, 2], [2, 0], [0, 1]])
    pairs = triangles[:, local].reshape(-1, 2)
    owner = np.repeat(np.arange(len(triangles)), 3)
    keys = np.sort(pairs, axis=1)
    return keys, owner


def _subdivide(breaks, target_h):
    pts = [breaks[0]]
    for a, b in zip(breaks[:-1], breaks[1:]):
        n = max(1, math.ceil((b - a) / target_h - 1e-9))
        pts.extend(np.linspace(a, b, n + 1)[1:])
    return np.asarray(pts)


def _grid_mesh(xs, ys, cell_region, tag_edge, info=None) -> CoupledMesh:
    nx, ny = len(xs) - 1, len(ys) - 1
    regions = np.full((nx, ny), -1, dtype=int)
    for i in range(nx):
        for j in range(ny):
            r = cell_region(0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1]))
            regions[i, j] = -1 if r is None else r

    grid_id = np.full((nx + 1, ny + 1), -1, dtype=int)
    tris, tri_reg = [], []
    for j in range(ny):
        for i in range(nx):
            r = regions[i, j]
            if r < 0:
                continue
            for a, b in ((i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)):
                if grid_id[a, b] < 0:
                    grid_id[a, b] = 0
            tris.append((i, j, r))
    # number vertices row by row for a readable ordering
    used = np.argwhere(grid_id.T >= 0)  # (j, i) pairs sorted by row
    vertices = np.array([(xs[i], ys[j]) for j, i in used], dtype=float).reshape(-1, 2)
    for n, (j, i) in enumerate(used):
        grid_id[i, j] = n

    triangles = []
    for i, j, r in tris:
        v00, v10 = grid_id[i, j], grid_id[i + 1, j]
        v01, v11 = grid_id[i, j + 1], grid_id[i + 1, j + 1]
        if (i + j) % 2 == 0:
            triangles += [(v00, v10, v11), (v00, v11, v01)]
        else:
            triangles += [(v00, v10, v01), (v10, v11, v01)]
        tri_reg += [r, r]
    triangles = np.array(triangles, dtype=np.int64).reshape(-1, 3)
    tri_reg = np.array(tri_reg, dtype=int)
    return _finish(vertices, triangles, tri_reg, tag_edge, info or {})


def _finish(vertices, triangles, tri_reg, tag_edge, info) -> CoupledMesh:
    keys, owner = _edge_table(triangles)
    uniq, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()

    bnd, bnd_tags = [], []
    iface = []
    first_owner = np.full(len(uniq), -1)
    second_owner = np.full(len(uniq), -1)
    for e, t in zip(inverse, owner):
        if first_owner[e] < 0:
            first_owner[e] = t
        else:
            second_owner[e] = t
    for e, (a, b) in enumerate(uniq):
        t0, t1 = first_owner[e], second_owner[e]
        if counts[e] == 1:
            mid = 0.5 * (vertices[a] + vertices[b])
            bnd.append((a, b))
            bnd_tags.append(TAG_ID[tag_edge(mid, int(tri_reg[t0]))])
        elif tri_reg[t0] != tri_reg[t1]:
            tf, tp = (t0, t1) if tri_reg[t0] == FLUID else (t1, t0)
            iface.append((a, b, tf, tp))

    normals, tangents, edges, ftri, ptri = [], [], [], [], []
    centroids = vertices[triangles].mean(axis=1)
    for a, b, tf, tp in iface:
        d = vertices[b] - vertices[a]
        n = np.array([d[1], -d[0]]) / np.linalg.norm(d)
        mid = 0.5 * (vertices[a] + vertices[b])
        if np.dot(n, mid - centroids[tf]) < 0:
            n = -n
        tau = np.array([-n[1], n[0]])
        if np.dot(d, tau) < 0:
            a, b = b, a
        edges.append((a, b))
        normals.append(n)
        tangents.append(tau)
        ftri.append(tf)
        ptri.append(tp)
        bnd.append((min(a, b), max(a, b)))
        bnd_tags.append(TAG_ID["interface"])

    edges = np.array(edges, dtype=np.int64).reshape(-1, 2)
    if len(edges):
        mids = vertices[edges].mean(axis=1)
        order = np.lexsort((mids[:, 1], mids[:, 0]))
    else:
        order = np.arange(0)
    bnd = np.array(bnd, dtype=np.int64).reshape(-1, 2)
    bnd_tags = np.array(bnd_tags, dtype=int)
    border = np.lexsort((bnd[:, 1], bnd[:, 0])) if len(bnd) else np.arange(0)
    return CoupledMesh(
        vertices=vertices,
        triangles=triangles,
        regions=tri_reg,
        boundary_edges=bnd[border],
        boundary_tags=bnd_tags[border],
        interface_edges=edges[order],
        interface_normals=np.array(normals, dtype=float).reshape(-1, 2)[order],
        interface_tangents=np.array(tangents, dtype=float).reshape(-1, 2)[order],
        interface_fluid_tri=np.array(ftri, dtype=np.int64)[order],
        interface_porous_tri=np.array(ptri, dtype=np.int64)[order],
        info=info,
    )


def build_rect_union(fluid_rect, porous_rect, nx: int, ny_f: int, ny_p: int) -> CoupledMesh:
    """Mesh two axis-aligned rectangles that share one full horizontal side.

    Rectangles are given as ``((x0, x1), (y0, y1))``. All fluid sides except
    the interface are tagged ``fluid_wall``; porous sides ``porous_dirichlet``.
    """
    (fx0, fx1), (fy0, fy1) = fluid_rect
    (px0, px1), (py0, py1) = porous_rect
    if min(nx, ny_f, ny_p) < 1:
        raise MeshError("subdivision counts must be >= 1")
    if not (np.isclose(fx0, px0) and np.isclose(fx1, px1)):
        raise MeshError("rectangles must share a full horizontal edge")
    if np.isclose(fy0, py1):
        ys = np.r_[np.linspace(py0, py1, ny_p + 1), np.linspace(fy0, fy1, ny_f + 1)[1:]]
        y_split, fluid_above = py1, True
    elif np.isclose(fy1, py0):
        ys = np.r_[np.linspace(fy0, fy1, ny_f + 1), np.linspace(py0, py1, ny_p + 1)[1:]]
        y_split, fluid_above = fy1, False
    else:
        raise MeshError("rectangles are not adjacent")
    xs = np.linspace(fx0, fx1, nx + 1)

    def cell_region(x, y):
        return FLUID if (y > y_split) == fluid_above else POROUS

    def tag_edge(mid, region):
        return "fluid_wall" if region == FLUID else "porous_dirichlet"

    return _grid_mesh(xs, ys, cell_region, tag_edge, info={"kind": "rect_union", "nx": nx})


@dataclass(frozen=True)
class WellboreGeometry:
    """Porous block with rectangular wellbore slots sitting on its top side.

    Each slot is ``(x0, x1, kind)`` with kind ``injection`` or ``production``.
    Injection tops are inflow boundaries, production tops are free outflow.
    """

    width: float = 7.0
    porous_height: float = 2.0
    slot_height: float = 1.0
    slots: tuple = ((0.0, 0.25, "injection"), (3.25, 3.75, "production"), (6.75, 7.0, "injection"))

    def check(self):
        spans = sorted((x0, x1) for x0, x1, _ in self.slots)
        for x0, x1, kind in self.slots:
            if kind not in ("injection", "production"):
                raise MeshError(f"unknown slot kind {kind!r}")
            if not (0.0 <= x0 < x1 <= self.width):
                raise MeshError(f"slot ({x0}, {x1}) lies outside the domain")
        for (a0, a1), (b0, b1) in zip(spans[:-1], spans[1:]):
            if b0 < a1:
                raise MeshError(f"slots ({a0}, {a1}) and ({b0}, {b1}) overlap")
        if self.porous_height <= 0 or self.slot_height <= 0 or self.width <= 0:
            raise MeshError("geometry dimensions must be positive")


def build_wellbore_domain(geometry: WellboreGeometry = WellboreGeometry(), target_h: float = 0.25) -> CoupledMesh:
    geometry.check()
    top = geometry.porous_height
    xbreaks = sorted({0.0, geometry.width, *[s[0] for s in geometry.slots], *[s[1] for s in geometry.slots]})
    ybreaks = [0.0, top] + ([top + geometry.slot_height] if geometry.slots else [])
    xs = _subdivide(xbreaks, target_h)
    ys = _subdivide(ybreaks, target_h)
    y_top = top + geometry.slot_height

    def slot_at(x):
        for x0, x1, kind in geometry.slots:
            if x0 < x < x1:
                return kind
        return None

    def cell_region(x, y):
        if y < top:
            return POROUS
        return FLUID if slot_at(x) is not None else None

    def tag_edge(mid, region):
        if region == POROUS:
            return "porous_dirichlet"
        if np.isclose(mid[1], y_top):
            return "fluid_inflow" if slot_at(mid[0]) == "injection" else "fluid_outflow"
        return "fluid_wall"

    return _grid_mesh(xs, ys, cell_region, tag_edge, info={"kind": "wellbore", "geometry": geometry})


def euler_characteristic(mesh: CoupledMesh, region: int) -> int:
    tri = mesh.triangles[mesh.regions == region]
    if len(tri) == 0:
        return 0
    keys, _ = _edge_table(tri)
    n_edges = len(np.unique(keys, axis=0))
    n_verts = len(np.unique(tri))
    return n_verts - n_edges + len(tri)


def validate(mesh: CoupledMesh) -> list[str]:
    """Return a list of violated mesh invariants; empty means valid."""
    problems = []
    p = mesh.vertices[mesh.triangles]
    area2 = _cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    for t in np.flatnonzero(area2 <= 0):
        problems.append(f"orientation: triangle {t} is not counter-clockwise")

    keys, owner = _edge_table(mesh.triangles)
    incident: dict[tuple, list] = {}
    for (a, b), t in zip(map(tuple, keys), owner):
        incident.setdefault((a, b), []).append(int(t))

    for e, (a, b) in enumerate(mesh.interface_edges):
        key = (min(a, b), max(a, b))
        tris = incident.get(key, [])
        regs = sorted(int(mesh.regions[t]) for t in tris)
        if regs != [FLUID, POROUS]:
            problems.append(f"interface matching: edge {key} is not shared by one fluid and one porous triangle")
            continue
        tf = tris[0] if mesh.regions[tris[0]] == FLUID else tris[1]
        tp = tris[1] if tf == tris[0] else tris[0]
        n = mesh.interface_normals[e]
        mid = mesh.vertices[[a, b]].mean(axis=0)
        cf = mesh.vertices[mesh.triangles[tf]].mean(axis=0)
        cp = mesh.vertices[mesh.triangles[tp]].mean(axis=0)
        if not (np.dot(n, mid - cf) > 0 and np.dot(n, cp - mid) > 0):
            problems.append(f"interface normal: edge {key} normal does not point fluid -> porous")
        if not np.isclose(np.linalg.norm(n), 1.0) or abs(np.dot(n, mesh.interface_tangents[e])) > 1e-12:
            problems.append(f"interface frame: edge {key} normal/tangent not orthonormal")

    tagged = {tuple(e): int(t) for e, t in zip(mesh.boundary_edges, mesh.boundary_tags)}
    for key, tris in incident.items():
        regs = {int(mesh.regions[t]) for t in tris}
        on_boundary = len(tris) == 1 or len(regs) == 2
        if on_boundary and key not in tagged:
            problems.append(f"boundary tags: edge {key} is on a subdomain boundary but untagged")
        if len(tris) > 2:
            problems.append(f"topology: edge {key} has {len(tris)} incident triangles")
    for key in tagged:
        tris = incident.get(key)
        if tris is None:
            problems.append(f"boundary tags: tagged edge {key} is not a mesh edge")

    # geometrically coincident but distinct vertices mean unmatched grids
    if len(mesh.vertices):
        rounded = np.round(mesh.vertices / max(mesh.h, 1e-300) * 1e6)
        _, idx, cnt = np.unique(rounded, axis=0, return_index=True, return_counts=True)
        for i in idx[cnt > 1]:
            problems.append(f"interface matching: vertex {i} is duplicated at {mesh.vertices[i]}")
    return problems
