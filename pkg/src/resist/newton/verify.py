"""Structural checks on heightfields: slope gap, top set, boundary values, Hessian determinant."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..config import DEFAULT, Tolerances
from .field import HeightField, Mesh

P2_NOTE = "slope gap tested as: no triangle with delta < |grad u| < 1 - delta"


@dataclass
class P2Report:
    delta: float
    fraction: float  # share of triangles in the band
    area_fraction: float
    violating: np.ndarray
    note: str = P2_NOTE


def verify_P2(u: HeightField, delta: float = 0.05) -> P2Report:
    """Triangles whose slope lies strictly inside the forbidden band ``(delta, 1 - delta)``."""
    s = np.linalg.norm(u.gradients(), axis=1)
    bad = (s > delta) & (s < 1.0 - delta)
    A = u.mesh.areas
    return P2Report(delta, float(bad.mean()), float(A[bad].sum() / A.sum()), np.nonzero(bad)[0])


@dataclass
class P4P5Report:
    top_diameter: float
    top_area: float
    top_count: int
    boundary_max: float
    spacing: float

    @property
    def top_ok(self) -> bool:
        return self.top_diameter > 2 * self.spacing


def verify_P4_P5(u: HeightField, tol: Tolerances = DEFAULT) -> P4P5Report:
    m = u.mesh
    top = u.values >= u.M - tol.top * u.M
    pts = m.points[top]
    if len(pts) > 1:
        from scipy.spatial import ConvexHull
        from scipy.spatial.distance import pdist

        try:
            cand = pts[ConvexHull(pts).vertices]
        except Exception:
            cand = pts
        diam = float(pdist(cand).max())
    else:
        diam = 0.0
    full = top[m.tris].all(axis=1)
    return P4P5Report(diam, float(m.areas[full].sum()), int(top.sum()), float(np.abs(u.values[m.boundary]).max()), m.spacing)


# ---------------------------------------------------------------- Hessians


def _two_ring(m: Mesh, i: int) -> np.ndarray:
    nb = m.neighbors
    one = nb[i]
    return np.unique(np.concatenate([one] + [nb[j] for j in one]))


def fit_quadratic(points: np.ndarray, values: np.ndarray, center: np.ndarray):
    """Least-squares ``a + b.x + x^T H x / 2`` about ``center``; returns (a, grad, H)."""
    d = points - center
    x, y = d[:, 0], d[:, 1]
    A = np.column_stack([np.ones_like(x), x, y, 0.5 * x * x, x * y, 0.5 * y * y])
    coef, *_ = np.linalg.lstsq(A, values, rcond=None)
    H = np.array([[coef[3], coef[4]], [coef[4], coef[5]]])
    return coef[0], coef[1:3], H


def crease_vertices(u: HeightField, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Vertices touching an edge across which the gradient turns by more than ``tol.crease``."""
    m = u.mesh
    G = u.gradients()
    pair = m.interior_edges
    jump = np.linalg.norm(G[pair[:, 0]] - G[pair[:, 1]], axis=1)
    hot = pair[jump > tol.crease]
    flag = np.zeros(len(m.points), dtype=bool)
    flag[np.unique(m.tris[hot.ravel()])] = True
    return flag


@dataclass
class DetReport:
    count: int
    median: float
    quantiles: dict = field(default_factory=dict)
    dets: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    used: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int), repr=False)


def verify_detD2(u: HeightField, margin: float = 0.1, tol: Tolerances = DEFAULT) -> DetReport:
    """Distribution of ``|det D^2 u|`` from 2-ring quadratic fits at admissible interior vertices.

    Vertices are skipped when they lie within ``margin`` of the domain
    boundary, or when their 2-ring touches the top set or a crease.
    """
    m = u.mesh
    top = u.values >= u.M - tol.top * u.M
    crease = crease_vertices(u, tol)
    near_bd = m.boundary_distance() < margin
    dets, used = [], []
    for i in np.nonzero(~near_bd)[0]:
        ring = _two_ring(m, i)
        if top[ring].any() or crease[ring].any() or len(ring) < 6:
            continue
        _, _, H = fit_quadratic(m.points[ring], u.values[ring], m.points[i])
        dets.append(abs(np.linalg.det(H)))
        used.append(i)
    d = np.array(dets)
    if len(d) == 0:
        return DetReport(0, float("nan"))
    q = {k: float(np.quantile(d, k)) for k in (0.1, 0.25, 0.5, 0.75, 0.9)}
    return DetReport(len(d), float(np.median(d)), q, d, np.array(used))
