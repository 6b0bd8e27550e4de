"""Boundary classification, visibility predicates and sampling on polytopes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config import DEFAULT, Tolerances
from ..errors import NotOnBoundary, NotRegular, NoValidPoint
from .polytope import Polytope


@dataclass(frozen=True)
class BoundaryPointClass:
    kind: str  # "regular" | "singular"
    normal_cone: np.ndarray  # (k, 3) unit normals of the supporting facets
    angular_diameter: float

    @property
    def singular(self) -> bool:
        return self.kind == "singular"


@dataclass(frozen=True)
class Segment3:
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))

    @property
    def degenerate(self) -> bool:
        return bool(np.array_equal(self.a, self.b))


def cone_diameter(normals: np.ndarray) -> float:
    """Largest pairwise angle between unit normals."""
    if len(normals) < 2:
        return 0.0
    dots = np.clip(normals @ normals.T, -1.0, 1.0)
    return float(np.arccos(dots.min()))


def _classify(normals: np.ndarray, tol: Tolerances) -> BoundaryPointClass:
    diam = cone_diameter(normals)
    kind = "singular" if diam > tol.sing else "regular"
    return BoundaryPointClass(kind, normals, diam)


def classify_point(C: Polytope, xi, tol: Tolerances = DEFAULT) -> BoundaryPointClass:
    """Normal cone of a boundary point and its regular/singular verdict."""
    d = C.signed_distances(np.asarray(xi, dtype=float))
    eps = tol.plane * C.diameter
    if d.max() > eps or d.max() < -eps:
        raise NotOnBoundary(f"max signed distance {d.max():.3e} exceeds {eps:.1e}")
    active = np.nonzero(np.abs(d) <= eps)[0]
    return _classify(np.array(C.normals[active]), tol)


def classify_vertex(C: Polytope, i: int, tol: Tolerances = DEFAULT) -> BoundaryPointClass:
    return _classify(np.array(C.normals[C.vertex_facets[i]]), tol)


def singular_set(C: Polytope, tol: Tolerances = DEFAULT) -> tuple[np.ndarray, np.ndarray]:
    """Thresholded surrogate of Sing C: (singular vertices (k,3), singular edges (m,2,3))."""
    verts = [i for i in range(len(C.vertices)) if classify_vertex(C, i, tol).singular]
    edges = []
    for (a, b), fs in C.edges.items():
        if cone_diameter(np.array(C.normals[fs])) > tol.sing:
            edges.append((C.vertices[a], C.vertices[b]))
    return np.array(C.vertices[verts]).reshape(-1, 3), np.array(edges).reshape(-1, 2, 3)


def interior_interval(C: Polytope, a, b, margin: float) -> tuple[float, float]:
    """Parameter range t where a + t(b-a) satisfies every facet with slack > margin."""
    a = np.asarray(a, dtype=float)
    d = np.asarray(b, dtype=float) - a
    num = C.offsets - margin - C.normals @ a
    den = C.normals @ d
    lo, hi = -np.inf, np.inf
    pos = den > 0
    neg = den < 0
    if pos.any():
        hi = float((num[pos] / den[pos]).min())
    if neg.any():
        lo = float((num[neg] / den[neg]).max())
    if (num[~pos & ~neg] <= 0).any():
        return 0.0, -1.0
    return lo, hi


def segment_meets_interior(C: Polytope, seg: Segment3 | tuple, tol: Tolerances = DEFAULT) -> bool:
    """True iff the open segment (a, b) passes through int C."""
    if not isinstance(seg, Segment3):
        seg = Segment3(*seg)
    lo, hi = interior_interval(C, seg.a, seg.b, tol.strict * C.diameter)
    if seg.degenerate:
        return False
    return max(lo, 0.0) < min(hi, 1.0)


def place_nose_point(
    C: Polytope, xi, A=(), eps: float = 0.1, tol: Tolerances = DEFAULT, retries: int = 8
) -> np.ndarray:
    """Point O outside C within ``eps`` of vertex ``xi`` seeing all of ``A`` through int C.

    O is placed on the outward vertex normal, half-way to the eps-sphere, beyond
    the plane that cuts the vertex off from the rest of C.  The candidate is
    validated and ``eps`` halved on failure.
    """
    xi = np.asarray(xi, dtype=float)
    dv = np.linalg.norm(C.vertices - xi, axis=1)
    i = int(np.argmin(dv))
    if dv[i] > tol.plane * C.diameter:
        raise ValueError("xi is not a vertex of C")
    cls = classify_vertex(C, i, tol)
    if cls.singular:
        raise NotRegular(f"vertex has normal-cone diameter {cls.angular_diameter:.3f} rad")
    n = C.vertex_normal(i)
    A = np.asarray(A, dtype=float).reshape(-1, 3)
    strict = tol.strict * C.diameter
    for _ in range(retries + 1):
        O = xi + 0.5 * eps * n
        outside = C.signed_distances(O).max() > strict
        if outside and np.linalg.norm(O - xi) < eps:
            if all(segment_meets_interior(C, (O, a), tol) for a in A):
                return O
        eps *= 0.5
    raise NoValidPoint("no admissible nose point after the retry schedule")


def sample_uniform(C: Polytope, n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform samples in C via a volume-weighted tetrahedral fan."""
    tris = C.triangles()
    P = C.vertices
    o = C.centroid
    a, b, c = P[tris[:, 0]] - o, P[tris[:, 1]] - o, P[tris[:, 2]] - o
    vol = np.abs(np.einsum("ij,ij->i", a, np.cross(b, c))) / 6.0
    pick = rng.choice(len(tris), size=n, p=vol / vol.sum())
    w = rng.dirichlet(np.ones(4), size=n)
    return o + w[:, 1:2] * a[pick] + w[:, 2:3] * b[pick] + w[:, 3:4] * c[pick]


def segment_distances(p0, p1, q0, q1) -> np.ndarray:
    """Vectorised minimum distance between segments [p0,p1] and [q0,q1] (row-wise)."""
    p0, p1, q0, q1 = (np.atleast_2d(np.asarray(x, dtype=float)) for x in (p0, p1, q0, q1))
    d1 = p1 - p0
    d2 = q1 - q0
    r = p0 - q0
    a = np.einsum("ij,ij->i", d1, d1)
    e = np.einsum("ij,ij->i", d2, d2)
    f = np.einsum("ij,ij->i", d2, r)
    c = np.einsum("ij,ij->i", d1, r)
    b = np.einsum("ij,ij->i", d1, d2)
    den = a * e - b * b
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(den > 1e-14 * a * e, np.clip((b * f - c * e) / den, 0, 1), 0.0)
        t = (b * s + f) / e
        t_c = np.clip(t, 0, 1)
        s = np.where(t < 0, np.clip(-c / a, 0, 1), np.where(t > 1, np.clip((b - c) / a, 0, 1), s))
    t = t_c
    diff = (p0 + s[:, None] * d1) - (q0 + t[:, None] * d2)
    return np.linalg.norm(diff, axis=1)
