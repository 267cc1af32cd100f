"""Lagrange bases on the reference triangle and quadrature rules.

Reference triangle: vertices (0,0), (1,0), (0,1). Local node order is the
three vertices, then the nodes of edge 0 (v1->v2), edge 1 (v2->v0),
edge 2 (v0->v1), then interior nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

SUPPORTED_DEGREES = (1, 2, 3)
MAX_EXACTNESS = 8
REF_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
LOCAL_EDGES = ((1, 2), (2, 0), (0, 1))


def _check_degree(degree):
    if degree not in SUPPORTED_DEGREES:
        raise ValueError(f"unsupported Lagrange degree {degree}; expected one of {SUPPORTED_DEGREES}")


@lru_cache(maxsize=None)
def lattice_nodes(degree: int) -> np.ndarray:
    """Reference coordinates of the local Lagrange nodes."""
    _check_degree(degree)
    nodes = [*REF_VERTICES]
    for a, b in LOCAL_EDGES:
        for i in range(1, degree):
            nodes.append(REF_VERTICES[a] + i / degree * (REF_VERTICES[b] - REF_VERTICES[a]))
    for j in range(1, degree):
        for i in range(1, degree - j):
            nodes.append(np.array([i / degree, j / degree]))
    return np.array(nodes)


def _monomial_exponents(degree):
    return [(a, d - a) for d in range(degree + 1) for a in range(d, -1, -1)]


@lru_cache(maxsize=None)
def _coefficients(degree):
    exps = _monomial_exponents(degree)
    nodes = lattice_nodes(degree)
    vander = np.array([[x**a * y**b for a, b in exps] for x, y in nodes])
    return np.linalg.inv(vander)


def reference_basis(degree: int, points) -> tuple[np.ndarray, np.ndarray]:
    """Basis values ``(npts, nb)`` and gradients ``(npts, nb, 2)`` at points."""
    _check_degree(degree)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    x, y = pts[:, 0], pts[:, 1]
    exps = _monomial_exponents(degree)
    coef = _coefficients(degree)
    mono = np.stack([x**a * y**b for a, b in exps], axis=1)
    dx = np.stack([a * x ** max(a - 1, 0) * y**b if a else np.zeros_like(x) for a, b in exps], axis=1)
    dy = np.stack([b * x**a * y ** max(b - 1, 0) if b else np.zeros_like(x) for a, b in exps], axis=1)
    values = mono @ coef
    grads = np.stack([dx @ coef, dy @ coef], axis=-1)
    return values, grads


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # reference coordinates
    weights: np.ndarray
    exactness: int
    domain: str

    @property
    def barycentric(self) -> np.ndarray:
        if self.domain == "segment":
            s = self.points[:, 0]
            return np.stack([1 - s, s], axis=1)
        x, y = self.points[:, 0], self.points[:, 1]
        return np.stack([1 - x - y, x, y], axis=1)


@lru_cache(maxsize=None)
def quadrature(domain: str, exactness: int) -> QuadratureRule:
    """Collapsed Gauss rule (triangle) or Gauss-Legendre rule (segment [0,1])."""
    if not 0 <= exactness <= MAX_EXACTNESS:
        raise ValueError(f"quadrature exactness {exactness} unsupported (max {MAX_EXACTNESS})")
    n = max(1, math.ceil((exactness + 1) / 2))
    gx, gw = roots_legendre(n)
    s, ws = 0.5 * (gx + 1), 0.5 * gw
    if domain == "segment":
        return QuadratureRule(s[:, None], ws, exactness, domain)
    if domain != "triangle":
        raise ValueError(f"unknown quadrature domain {domain!r}")
    # Duffy collapse: x = xi, y = eta (1 - xi), Jacobian (1 - xi) absorbed by Gauss-Jacobi
    jx, jw = roots_jacobi(n, 1.0, 0.0)
    xi, wxi = 0.5 * (jx + 1), 0.25 * jw
    X, E = np.meshgrid(xi, s, indexing="ij")
    W = np.outer(wxi, ws)
    pts = np.stack([X.ravel(), (E * (1 - X)).ravel()], axis=1)
    return QuadratureRule(pts, W.ravel(), exactness, domain)
