"""Element loops for the bilinear forms and load vectors of the coupled model.

Everything is vectorized over triangles with ``einsum`` and finalized
through :func:`bdftf.linalg.finalize_from_triplets`, so the resulting
matrices do not depend on element ordering.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ..linalg import finalize_from_triplets
from .reference import quadrature, reference_basis
from .space import FiniteElementSpace


def default_exactness(*spaces) -> int:
    return 2 * max(s.degree for s in spaces) + 2


class _CellData:
    """Basis values, physical gradients and weights at quadrature points."""

    def __init__(self, space: FiniteElementSpace, exactness: int):
        rule = quadrature("triangle", exactness)
        self.values, ref_grads = reference_basis(space.degree, rule.points)
        # physical gradient = J^{-T} grad_ref  ->  grad_ref @ inv_jac (row vectors)
        self.grads = np.einsum("qbk,tkd->tqbd", ref_grads, space.inv_jac)
        self.weights = np.abs(space.det)[:, None] * rule.weights[None, :]
        self.points = space.origin[:, None, :] + np.einsum("tij,qj->tqi", space.jac, rule.points)


def _scatter(row_dofs, col_dofs, local, shape):
    nt, nr = row_dofs.shape
    nc = col_dofs.shape[1]
    rows = np.broadcast_to(row_dofs[:, :, None], (nt, nr, nc))
    cols = np.broadcast_to(col_dofs[:, None, :], (nt, nr, nc))
    return finalize_from_triplets(rows, cols, local, shape)


def _expand_vector(space, local_scalar):
    """Block-diagonal vector element matrix from a scalar one (interleaved)."""
    if space.components == 1:
        return local_scalar
    nt, nb, _ = local_scalar.shape
    out = np.zeros((nt, nb, 2, nb, 2))
    for c in range(2):
        out[:, :, c, :, c] = local_scalar
    return out.reshape(nt, 2 * nb, 2 * nb)


def mass_matrix(space: FiniteElementSpace, coefficient: float = 1.0, exactness=None):
    cd = _CellData(space, exactness or default_exactness(space))
    local = coefficient * np.einsum("tq,qi,qj->tij", cd.weights, cd.values, cd.values)
    dofs = space.cell_dofs()
    return _scatter(dofs, dofs, _expand_vector(space, local), (space.n_dofs, space.n_dofs))


def stiffness_matrix(space: FiniteElementSpace, coefficient=1.0, exactness=None):
    """``(c grad u, grad v)`` with scalar ``c`` or a constant 2x2 tensor."""
    cd = _CellData(space, exactness or default_exactness(space))
    K = np.asarray(coefficient, dtype=float)
    if K.ndim == 0:
        K = K * np.eye(2)
    if K.shape != (2, 2):
        raise ValueError("stiffness coefficient must be a scalar or a 2x2 tensor")
    local = np.einsum("tq,tqid,de,tqje->tij", cd.weights, cd.grads, K, cd.grads)
    dofs = space.cell_dofs()
    return _scatter(dofs, dofs, _expand_vector(space, local), (space.n_dofs, space.n_dofs))


def divergence_matrix(vspace: FiniteElementSpace, qspace: FiniteElementSpace, exactness=None):
    """``B[q_i, v_j] = -(q_i, div v_j)``; shape (n_pressure, n_velocity)."""
    if vspace.mesh is not qspace.mesh:
        raise ValueError("velocity and pressure spaces live on different meshes")
    if vspace.components != 2 or qspace.components != 1:
        raise ValueError("divergence needs a vector velocity space and a scalar pressure space")
    if not np.array_equal(vspace.cells, qspace.cells):
        raise ValueError("velocity and pressure spaces cover different cells")
    ex = exactness or default_exactness(vspace, qspace)
    cv = _CellData(vspace, ex)
    cq = _CellData(qspace, ex)
    # d(phi_b e_c)/dx_c -> interleaved (b, c)
    div = cv.grads.reshape(*cv.grads.shape[:2], -1)  # (t, q, nb*2) with index b*2+d
    local = -np.einsum("tq,qi,tqj->tij", cv.weights, cq.values, div)
    return _scatter(qspace.cell_dofs(), vspace.cell_dofs(), local, (qspace.n_dofs, vspace.n_dofs))


def load_vector(space: FiniteElementSpace, f, t=0.0, exactness=None) -> np.ndarray:
    """``(f, v)`` for ``f(x, y, t)``; vector spaces expect ``f`` to return (fx, fy)."""
    cd = _CellData(space, exactness or default_exactness(space))
    x, y = cd.points[..., 0], cd.points[..., 1]
    vals = np.asarray(f(x, y, t), dtype=float)
    out = np.zeros(space.n_dofs)
    dofs = space.cell_dofs()
    if space.components == 1:
        vals = np.broadcast_to(vals, x.shape)
        local = np.einsum("tq,tq,qi->ti", cd.weights, vals, cd.values)
    else:
        vals = np.broadcast_to(vals, (2,) + x.shape)
        local = np.einsum("tq,ctq,qi->tic", cd.weights, vals, cd.values).reshape(len(dofs), -1)
    np.add.at(out, dofs, local)
    return out


# -- interface terms -----------------------------------------------------------

class _EdgeData:
    """Quadrature on interface edges with traces of fluid and porous bases."""

    def __init__(self, mesh, exactness):
        if len(mesh.interface_edges) == 0:
            raise ValueError("mesh has no interface edges")
        rule = quadrature("segment", exactness)
        s = rule.points[:, 0]
        va = mesh.vertices[mesh.interface_edges[:, 0]]
        vb = mesh.vertices[mesh.interface_edges[:, 1]]
        length = np.linalg.norm(vb - va, axis=1)
        self.points = va[:, None, :] + s[None, :, None] * (vb - va)[:, None, :]
        self.weights = length[:, None] * rule.weights[None, :]
        self.normals = mesh.interface_normals
        self.tangents = mesh.interface_tangents
        self.fluid_tri = mesh.interface_fluid_tri
        self.porous_tri = mesh.interface_porous_tri

    def trace(self, space: FiniteElementSpace, tris):
        """Basis values (ne, nq, nb) and element dofs of ``space`` along the edges."""
        pos = np.array([space.local_index(t) for t in tris], dtype=np.int64)
        ref = np.einsum("eij,eqj->eqi", space.inv_jac[pos], self.points - space.origin[pos][:, None, :])
        vals = np.stack([reference_basis(space.degree, r)[0] for r in ref])
        return vals, space.cell_dofs()[pos]

    def side(self, space):
        return self.fluid_tri if space.region == 0 else self.porous_tri


def interface_normal_matrix(vspace, hspace, weight=1.0, exactness=None):
    """``C[v_j, psi_i] = weight * int_Gamma psi_i (v_j . n_f)``; shape (n_v, n_h)."""
    if vspace.mesh is not hspace.mesh:
        raise ValueError("spaces live on different meshes")
    ed = _EdgeData(vspace.mesh, exactness or default_exactness(vspace, hspace))
    phi_v, dofs_v = ed.trace(vspace, ed.side(vspace))
    phi_h, dofs_h = ed.trace(hspace, ed.side(hspace))
    # vector basis (b, c) . n = phi_b n_c
    vn = np.einsum("eqb,ec->eqbc", phi_v, ed.normals).reshape(*phi_v.shape[:2], -1)
    local = weight * np.einsum("eq,eqi,eqj->eij", ed.weights, vn, phi_h)
    return _scatter(dofs_v, dofs_h, local, (vspace.n_dofs, hspace.n_dofs))


def interface_tangential_matrix(vspace, weight=1.0, exactness=None):
    """``weight * int_Gamma (u . tau)(v . tau)`` on the velocity space."""
    ed = _EdgeData(vspace.mesh, exactness or default_exactness(vspace))
    phi, dofs = ed.trace(vspace, ed.side(vspace))
    vt = np.einsum("eqb,ec->eqbc", phi, ed.tangents).reshape(*phi.shape[:2], -1)
    local = weight * np.einsum("eq,eqi,eqj->eij", ed.weights, vt, vt)
    return _scatter(dofs, dofs, local, (vspace.n_dofs, vspace.n_dofs))


def interface_load(space, g, t=0.0, exactness=None) -> np.ndarray:
    """``int_Gamma g . v`` for ``g(x, y, t, n_f, tau)``.

    The normal and tangent arrays are passed so callers can build
    traction-type data; ``g`` returns a scalar field or a pair for
    vector spaces.
    """
    ed = _EdgeData(space.mesh, exactness or default_exactness(space))
    phi, dofs = ed.trace(space, ed.side(space))
    x, y = ed.points[..., 0], ed.points[..., 1]
    n = np.broadcast_to(ed.normals[:, None, :], ed.points.shape)
    tau = np.broadcast_to(ed.tangents[:, None, :], ed.points.shape)
    vals = np.asarray(g(x, y, t, n, tau), dtype=float)
    out = np.zeros(space.n_dofs)
    if space.components == 1:
        vals = np.broadcast_to(vals, x.shape)
        local = np.einsum("eq,eq,eqi->ei", ed.weights, vals, phi)
    else:
        vals = np.broadcast_to(vals, (2,) + x.shape)
        local = np.einsum("eq,ceq,eqi->eic", ed.weights, vals, phi).reshape(len(dofs), -1)
    np.add.at(out, dofs, local)
    return out


def interface_flux(vspace, u, exactness=None) -> float:
    """``int_Gamma u . n_f`` for a discrete velocity."""
    ed = _EdgeData(vspace.mesh, exactness or default_exactness(vspace))
    phi, dofs = ed.trace(vspace, ed.side(vspace))
    loc = np.asarray(u)[dofs].reshape(len(dofs), -1, 2)
    un = np.einsum("eqb,ebc,ec->eq", phi, loc, ed.normals)
    return float(np.sum(ed.weights * un))


# -- Dirichlet conditions ------------------------------------------------------

def dirichlet_data(space, tags, g, t=0.0):
    """Constrained dofs on ``tags`` and their nodal values of ``g(x, y, t)``."""
    if isinstance(tags, str):
        tags = (tags,)
    nodes = np.unique(np.concatenate([space.boundary_nodes(tag) for tag in tags] or [np.zeros(0, int)]))
    nodes = nodes.astype(np.int64)
    xy = space.node_coords[nodes]
    c = space.components
    if g is None:
        vals = np.zeros((len(nodes), c))
    else:
        v = np.asarray(g(xy[:, 0], xy[:, 1], t), dtype=float)
        vals = np.broadcast_to(v, (c, len(nodes))).T if c == 2 else np.broadcast_to(v, (len(nodes),))[:, None]
    dofs = (nodes[:, None] * c + np.arange(c)).ravel()
    return dofs, np.ascontiguousarray(vals).ravel()


def constrain_matrix(a, dofs):
    """Zero rows and columns of ``dofs`` and put ones on their diagonal."""
    n = a.shape[0]
    keep = np.ones(n)
    keep[dofs] = 0.0
    d = sp.diags(keep)
    out = (d @ a @ d + sp.diags(1.0 - keep)).tocsr()
    out.eliminate_zeros()
    out.sort_indices()
    return out


def lift_rhs(a, rhs, dofs, values):
    """Move known boundary values to the right-hand side (symmetric elimination)."""
    x = np.zeros(a.shape[1])
    x[dofs] = values
    out = rhs - a @ x
    out[dofs] = values
    return out


def apply_dirichlet(a, rhs, dofs, values):
    return constrain_matrix(a, dofs), lift_rhs(a, rhs, dofs, values)


# -- error norms ---------------------------------------------------------------

def error_norm(space, coeffs, exact, norm="L2", t=None, exactness=None) -> float:
    """``||u_h - u||`` in L2 or the H1 seminorm.

    ``exact(x, y)`` (or ``exact(x, y, t)`` when ``t`` is given) returns the
    field for ``L2`` and its gradient for ``H1_semi``: shape (2, ...) for a
    scalar field, (2, 2, ...) indexed [component, direction] for a vector
    field. Pass ``exact=None`` to get the norm of the discrete field itself.
    """
    cd = _CellData(space, exactness or default_exactness(space))
    x, y = cd.points[..., 0], cd.points[..., 1]
    coeffs = np.asarray(coeffs, dtype=float)
    loc = coeffs[space.cell_dofs()]
    c = space.components
    if norm == "L2":
        if c == 1:
            uh = np.einsum("qb,tb->tq", cd.values, loc)[None]
        else:
            uh = np.einsum("qb,tbc->ctq", cd.values, loc.reshape(len(loc), -1, 2))
        shape = (c,) + x.shape
    elif norm == "H1_semi":
        if c == 1:
            uh = np.einsum("tqbd,tb->dtq", cd.grads, loc)[None]
        else:
            uh = np.einsum("tqbd,tbc->cdtq", cd.grads, loc.reshape(len(loc), -1, 2))
        shape = (c, 2) + x.shape
    else:
        raise ValueError(f"unknown norm {norm!r}")
    uh = uh.reshape(shape)
    if exact is None:
        diff = uh
    else:
        ex = exact(x, y) if t is None else exact(x, y, t)
        diff = uh - np.broadcast_to(np.asarray(ex, dtype=float), shape)
    sq = diff**2
    while sq.ndim > 2:
        sq = sq.sum(axis=0)
    return float(np.sqrt(np.sum(cd.weights * sq)))
