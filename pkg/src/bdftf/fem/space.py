from __future__ import annotations

import numpy as np

from ..mesh import TAG_ID, CoupledMesh
from .reference import LOCAL_EDGES, lattice_nodes, reference_basis


class FiniteElementSpace:
    """Continuous Lagrange space of a given degree on one mesh region.

    Vector spaces interleave components: dof ``c + ncomp * node``.
    """

    def __init__(self, mesh: CoupledMesh, degree: int, region: int, components: int = 1):
        if components not in (1, 2):
            raise ValueError("components must be 1 or 2")
        self.mesh = mesh
        self.degree = degree
        self.region = region
        self.components = components
        self.cells = mesh.region_triangles(region)
        tris = mesh.triangles[self.cells]

        verts = np.unique(tris)
        self.vertex_node = np.full(mesh.n_vertices, -1, dtype=np.int64)
        self.vertex_node[verts] = np.arange(len(verts))
        n_nodes = len(verts)

        p = degree
        local = lattice_nodes(p)
        nloc = len(local)
        node_map = np.empty((len(tris), nloc), dtype=np.int64)
        node_map[:, :3] = self.vertex_node[tris]

        edge_ids: dict[tuple, int] = {}
        if p > 1:
            for t, tri in enumerate(tris):
                for le, (a, b) in enumerate(LOCAL_EDGES):
                    ga, gb = int(tri[a]), int(tri[b])
                    key = (min(ga, gb), max(ga, gb))
                    if key not in edge_ids:
                        edge_ids[key] = n_nodes
                        n_nodes += p - 1
                    first = edge_ids[key]
                    ids = np.arange(first, first + p - 1)
                    if ga > gb:
                        ids = ids[::-1]
                    node_map[t, 3 + le * (p - 1): 3 + (le + 1) * (p - 1)] = ids
            n_int = nloc - 3 - 3 * (p - 1)
            if n_int:
                node_map[:, nloc - n_int:] = n_nodes + np.arange(len(tris) * n_int).reshape(-1, n_int)
                n_nodes += len(tris) * n_int
        self.edge_first_node = edge_ids
        self.node_map = node_map
        self.n_nodes = n_nodes
        self.n_dofs = n_nodes * components

        xy = mesh.vertices[tris]
        self.jac = np.stack([xy[:, 1] - xy[:, 0], xy[:, 2] - xy[:, 0]], axis=2)  # (nt, 2, 2) columns
        self.det = self.jac[:, 0, 0] * self.jac[:, 1, 1] - self.jac[:, 0, 1] * self.jac[:, 1, 0]
        self.inv_jac = np.linalg.inv(self.jac)
        self.origin = xy[:, 0]
        coords = np.empty((n_nodes, 2))
        phys = self.origin[:, None, :] + np.einsum("tij,nj->tni", self.jac, local)
        coords[node_map.ravel()] = phys.reshape(-1, 2)
        self.node_coords = coords
        self._cell_pos = {int(c): i for i, c in enumerate(self.cells)}

    # -- dof helpers -------------------------------------------------------
    def cell_dofs(self) -> np.ndarray:
        """Element dof table ``(ncell, nloc * ncomp)``; component fastest."""
        c = self.components
        return (self.node_map[:, :, None] * c + np.arange(c)).reshape(len(self.cells), -1)

    def local_index(self, cell: int) -> int:
        return self._cell_pos[int(cell)]

    def to_physical(self, cell_pos, ref_pts):
        return self.origin[cell_pos] + ref_pts @ self.jac[cell_pos].T

    def to_reference(self, cell_pos, phys_pts):
        return (np.asarray(phys_pts) - self.origin[cell_pos]) @ self.inv_jac[cell_pos].T

    def edge_nodes(self, a: int, b: int) -> np.ndarray:
        """Node ids on mesh edge (a, b), vertices included."""
        ids = [self.vertex_node[a], self.vertex_node[b]]
        if self.degree > 1:
            first = self.edge_first_node[(min(a, b), max(a, b))]
            ids += list(range(first, first + self.degree - 1))
        return np.asarray(ids, dtype=np.int64)

    def boundary_nodes(self, tag: str) -> np.ndarray:
        if tag not in TAG_ID:
            raise KeyError(f"unknown boundary tag {tag!r}")
        edges = self.mesh.edges_with_tag(tag)
        nodes = []
        for a, b in edges:
            if self.vertex_node[a] < 0 or self.vertex_node[b] < 0:
                continue
            nodes.extend(self.edge_nodes(a, b))
        return np.unique(np.asarray(nodes, dtype=np.int64))

    def boundary_dofs(self, tag: str) -> np.ndarray:
        nodes = self.boundary_nodes(tag)
        c = self.components
        return (nodes[:, None] * c + np.arange(c)).ravel()

    # -- evaluation --------------------------------------------------------
    def interpolate(self, f) -> np.ndarray:
        """Nodal interpolant of ``f(x, y)``; vector fields return shape (2, n)."""
        x, y = self.node_coords[:, 0], self.node_coords[:, 1]
        vals = np.asarray(f(x, y), dtype=float)
        if self.components == 1:
            return np.broadcast_to(vals, x.shape).astype(float).copy()
        vals = np.broadcast_to(vals, (2,) + x.shape)
        return np.ascontiguousarray(vals.T).ravel()

    def evaluate(self, coeffs, cell: int, phys_pts):
        """Values (and gradients) of a discrete field at points inside ``cell``."""
        pos = self.local_index(cell)
        ref = self.to_reference(pos, phys_pts)
        vals, grads = reference_basis(self.degree, ref)
        grads = grads @ self.inv_jac[pos]
        nodes = self.node_map[pos]
        c = self.components
        if c == 1:
            loc = coeffs[nodes]
            return vals @ loc, np.einsum("qbd,b->qd", grads, loc)
        loc = coeffs[(nodes[:, None] * c + np.arange(c))]  # (nb, c)
        return vals @ loc, np.einsum("qbd,bc->qcd", grads, loc)
