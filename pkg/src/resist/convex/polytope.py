"""Bounded convex polytopes in R^3: V/H conversions and affine maps."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError, cKDTree

from ..config import DEFAULT, Tolerances
from ..errors import DegenerateInput, Empty, Unbounded


@dataclass(frozen=True)
class Facet:
    normal: np.ndarray
    offset: float
    loop: tuple[int, ...]


def plane_basis(n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal (u, v) spanning the plane orthogonal to n, with u x v = n."""
    e = np.zeros(3)
    e[np.argmin(np.abs(n))] = 1.0
    u = np.cross(n, e)
    u /= np.linalg.norm(u)
    return u, np.cross(n, u)


def _hull2d(pts: np.ndarray, eps: float) -> list[int]:
    """Monotone chain; returns CCW corner indices, dropping collinear points."""
    order = sorted(range(len(pts)), key=lambda i: (pts[i, 0], pts[i, 1]))

    def turn(o, a, b):
        d = pts[a] - pts[o]
        return d[0] * (pts[b, 1] - pts[o, 1]) - d[1] * (pts[b, 0] - pts[o, 0]), np.hypot(*d)

    def chain(idx):
        out: list[int] = []
        for i in idx:
            while len(out) >= 2:
                cr, ln = turn(out[-2], out[-1], i)
                if cr > eps * max(ln, np.hypot(*(pts[i] - pts[out[-2]]))):
                    break
                out.pop()
            out.append(i)
        return out

    lower = chain(order)
    upper = chain(order[::-1])
    return lower[:-1] + upper[:-1]


def _loop_for(points: np.ndarray, members: np.ndarray, normal: np.ndarray, eps: float):
    u, v = plane_basis(normal)
    local = points[members]
    c = local.mean(axis=0)
    p2 = np.column_stack([(local - c) @ u, (local - c) @ v])
    corners = _hull2d(p2, eps)
    if len(corners) < 3:
        return None
    return [int(members[i]) for i in corners]


def _diameter_bound(points: np.ndarray) -> float:
    ext = points.max(axis=0) - points.min(axis=0)
    return float(np.linalg.norm(ext))


class Polytope:
    """Convex polytope stored as vertices plus facets (normal, offset, CCW loop).

    Facet ``i`` is the set ``{x : normals[i] @ x == offsets[i]}`` restricted to
    the body; loops are counter-clockwise seen from outside.
    """

    def __init__(self, vertices, normals, offsets, loops):
        self.vertices = np.array(vertices, dtype=float).reshape(-1, 3)
        self.normals = np.array(normals, dtype=float).reshape(-1, 3)
        self.offsets = np.array(offsets, dtype=float).reshape(-1)
        self.loops = tuple(tuple(int(i) for i in lp) for lp in loops)
        for arr in (self.vertices, self.normals, self.offsets):
            arr.setflags(write=False)

    def __repr__(self) -> str:
        return f"Polytope({len(self.vertices)} vertices, {len(self.loops)} facets)"

    @property
    def facets(self) -> list[Facet]:
        return [Facet(n, float(c), lp) for n, c, lp in zip(self.normals, self.offsets, self.loops)]

    @cached_property
    def diameter(self) -> float:
        v = self.vertices
        if len(v) > 400:
            return _diameter_bound(v)
        d = v[:, None, :] - v[None, :, :]
        return float(np.sqrt((d**2).sum(-1)).max())

    @cached_property
    def centroid(self) -> np.ndarray:
        """Vertex mean (an interior point, not the center of mass)."""
        return self.vertices.mean(axis=0)

    def facet_polygon(self, i: int) -> np.ndarray:
        return self.vertices[list(self.loops[i])]

    @cached_property
    def facet_areas(self) -> np.ndarray:
        areas = np.empty(len(self.loops))
        for i, lp in enumerate(self.loops):
            p = self.vertices[list(lp)]
            p = p - p.mean(axis=0)
            s = np.cross(p, np.roll(p, -1, axis=0)).sum(axis=0)
            areas[i] = 0.5 * float(self.normals[i] @ s)
        return areas

    @property
    def area(self) -> float:
        return float(self.facet_areas.sum())

    @cached_property
    def volume(self) -> float:
        h = self.offsets - self.normals @ self.centroid
        return float((self.facet_areas * h).sum() / 3.0)

    @cached_property
    def edges(self) -> dict[tuple[int, int], list[int]]:
        """Undirected edge (i<j) -> incident facet indices."""
        out: dict[tuple[int, int], list[int]] = {}
        for f, lp in enumerate(self.loops):
            for a, b in zip(lp, lp[1:] + lp[:1]):
                out.setdefault((min(a, b), max(a, b)), []).append(f)
        return out

    @cached_property
    def vertex_facets(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(len(self.vertices))]
        for f, lp in enumerate(self.loops):
            for i in lp:
                out[i].append(f)
        return out

    def halfspaces(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array(self.normals), np.array(self.offsets)

    def signed_distances(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return pts @ self.normals.T - self.offsets

    def contains(self, points, tol: float | None = None) -> np.ndarray:
        """Closed membership test with absolute tolerance (default tau_plane*diam)."""
        if tol is None:
            tol = DEFAULT.plane * self.diameter
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return (self.signed_distances(pts) <= tol).all(axis=1)

    def triangles(self) -> np.ndarray:
        """Fan triangulation of every facet, (T, 3) vertex indices, outward CCW."""
        tris = [(lp[0], lp[k], lp[k + 1]) for lp in self.loops for k in range(1, len(lp) - 1)]
        return np.array(tris, dtype=int).reshape(-1, 3)

    def vertex_normal(self, i: int) -> np.ndarray:
        n = self.normals[self.vertex_facets[i]].sum(axis=0)
        return n / np.linalg.norm(n)

    def validate(self, tol: Tolerances = DEFAULT) -> None:
        """Raise AssertionError if a structural invariant fails."""
        scale = self.diameter
        assert np.allclose(np.linalg.norm(self.normals, axis=1), 1.0, atol=1e-12, rtol=0)
        for i, lp in enumerate(self.loops):
            d = self.vertices[list(lp)] @ self.normals[i] - self.offsets[i]
            assert np.abs(d).max() <= tol.plane * scale, f"facet {i} not planar"
        assert (self.signed_distances(self.vertices) <= tol.plane * scale).all()
        assert (self.facet_areas > 0).all(), "facet with non-positive area"
        assert self.volume > 0
        used = {i for lp in self.loops for i in lp}
        assert used == set(range(len(self.vertices)))

    def with_vertices(self, vertices) -> "Polytope":
        return Polytope(vertices, self.normals, self.offsets, self.loops)


def _compact(points: np.ndarray, normals, offsets, loops) -> Polytope:
    used = sorted({i for lp in loops for i in lp})
    remap = {old: new for new, old in enumerate(used)}
    return Polytope(
        points[used], normals, offsets, [[remap[i] for i in lp] for lp in loops]
    )


def hull3d(points, tol: Tolerances = DEFAULT) -> Polytope:
    """Convex hull with coplanar triangles merged into polygonal facets."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) < 4:
        raise DegenerateInput("need at least 4 points")
    scale = _diameter_bound(pts)
    if scale == 0.0:
        raise DegenerateInput("all points coincide")
    ctr = pts - pts.mean(axis=0)
    _, _, vt = np.linalg.svd(ctr, full_matrices=False)
    if np.abs(ctr @ vt[-1]).max() <= tol.plane * scale:
        raise DegenerateInput("points are coplanar within tau_plane")
    try:
        hull = ConvexHull(pts)
    except QhullError as exc:  # pragma: no cover - guarded by the SVD test
        raise DegenerateInput(str(exc)) from exc

    eps = tol.plane * scale
    simp = hull.simplices
    eq = hull.equations
    # merge neighbouring triangles whose vertices lie on each other's plane
    rows, cols = [], []
    for t in range(len(simp)):
        for nb in hull.neighbors[t]:
            if nb > t:
                d = np.abs(pts[simp[nb]] @ eq[t, :3] + eq[t, 3]).max()
                if d <= eps:
                    rows.append(t)
                    cols.append(nb)
    n = len(simp)
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    ngroups, label = connected_components(graph, directed=False)

    cand = np.unique(simp)
    normals, offsets, loops = [], [], []
    for g in range(ngroups):
        tri = np.nonzero(label == g)[0]
        ref_n = eq[tri].mean(axis=0)[:3]
        ref_n /= np.linalg.norm(ref_n)
        mem = np.unique(simp[tri])
        # refit the plane through the member points
        c0 = pts[mem].mean(axis=0)
        _, _, vt = np.linalg.svd(pts[mem] - c0, full_matrices=False)
        nrm = vt[-1] if vt[-1] @ ref_n > 0 else -vt[-1]
        off = float((pts[mem] @ nrm).mean())
        on = cand[np.abs(pts[cand] @ nrm - off) <= eps]
        lp = _loop_for(pts, on, nrm, eps)
        if lp is None:
            continue
        normals.append(nrm)
        offsets.append(off)
        loops.append(lp)

    normals, offsets, loops = _dedupe_planes(pts, normals, offsets, loops, eps)
    return _compact(pts, normals, offsets, loops)


def _dedupe_planes(pts, normals, offsets, loops, eps):
    if not normals:
        raise DegenerateInput("no facets")
    N = np.array(normals)
    c = np.array(offsets)
    keep = np.ones(len(N), dtype=bool)
    for i in range(len(N)):
        if not keep[i]:
            continue
        same = (np.linalg.norm(N[i + 1 :] - N[i], axis=1) < 1e-9) & (np.abs(c[i + 1 :] - c[i]) <= eps)
        dup = np.nonzero(same)[0] + i + 1
        if len(dup):
            mem = np.unique(np.concatenate([loops[i]] + [loops[j] for j in dup]))
            lp = _loop_for(pts, mem, N[i], eps)
            if lp is not None:
                loops[i] = lp
            keep[dup] = False
    idx = np.nonzero(keep)[0]
    return N[idx], c[idx], [loops[i] for i in idx]


def dilate(C: Polytope, center, ratio: float) -> Polytope:
    """Homothety x -> center + ratio * (x - center)."""
    if not ratio > 0:
        raise ValueError("ratio must be positive")
    o = np.asarray(center, dtype=float)
    verts = o + ratio * (C.vertices - o)
    no = C.normals @ o
    offsets = no + ratio * (C.offsets - no)
    return Polytope(verts, C.normals, offsets, C.loops)


def _chebyshev_center(N: np.ndarray, c: np.ndarray) -> tuple[np.ndarray, float]:
    A = np.column_stack([N, np.ones(len(N))])
    res = linprog(
        np.array([0.0, 0.0, 0.0, -1.0]),
        A_ub=A,
        b_ub=c,
        bounds=[(None, None)] * 3 + [(0, None)],
        method="highs",
    )
    if res.status == 3:
        raise Unbounded("intersection contains arbitrarily large balls")
    if res.status == 2:
        raise Empty("halfspaces are infeasible")
    if res.status != 0:  # pragma: no cover
        raise Empty(res.message)
    return res.x[:3], float(res.x[3])


def _positively_spanning(N: np.ndarray) -> bool:
    m = len(N)
    res = linprog(
        np.zeros(m), A_eq=N.T, b_eq=np.zeros(3), bounds=[(1.0, None)] * m, method="highs"
    )
    return res.status == 0 and np.linalg.matrix_rank(N) == 3


def intersect_halfspaces(halfspaces, tol: Tolerances = DEFAULT) -> Polytope:
    """V-representation of the intersection of ``{x : <x, n> <= c}``.

    ``halfspaces`` is either a sequence of ``(normal, offset)`` pairs or a
    ``(normals, offsets)`` tuple of arrays.  Facet normals of the result are the
    (normalised) input normals of the active halfspaces.
    """
    N, c = _as_arrays(halfspaces)
    nrm = np.linalg.norm(N, axis=1)
    if (nrm == 0).any():
        raise ValueError("zero normal")
    N = N / nrm[:, None]
    c = c / nrm

    x0, r = _chebyshev_center(N, c)
    scale_guess = max(1.0, float(np.abs(c).max()))
    if r <= tol.plane * scale_guess:
        raise Empty("intersection has empty interior")
    if not _positively_spanning(N):
        raise Unbounded("normals do not positively span R^3")

    hs = HalfspaceIntersection(np.column_stack([N, -c]), x0)
    X = hs.intersections
    if not np.isfinite(X).all():  # pragma: no cover
        raise Unbounded("non-finite vertex")
    scale = _diameter_bound(X)

    # polish each vertex on its active set
    act_tol = tol.plane * scale
    for k in range(len(X)):
        r0 = N @ X[k] - c
        act = np.abs(r0) <= act_tol
        if act.sum() >= 3:
            sol, *_ = np.linalg.lstsq(N[act], c[act], rcond=None)
            # keep the polished point only if it is no less feasible
            if (N @ sol - c).max() <= max(r0.max(), 0.0):
                X[k] = sol
    X = _merge_points(X, tol.plane * scale)

    eps = tol.plane * scale
    dist = X @ N.T - c  # (V, m)
    seen: set[frozenset] = set()
    normals, offsets, loops = [], [], []
    for j in np.argsort(c - N @ x0, kind="stable"):
        mem = np.nonzero(np.abs(dist[:, j]) <= eps)[0]
        if len(mem) < 3:
            continue
        key = frozenset(mem.tolist())
        if key in seen:
            continue
        lp = _loop_for(X, mem, N[j], eps)
        if lp is None:
            continue
        seen.add(key)
        normals.append(N[j])
        offsets.append(c[j])
        loops.append(lp)
    order = np.argsort([min(lp) for lp in loops], kind="stable")
    return _compact(X, [normals[i] for i in order], [offsets[i] for i in order], [loops[i] for i in order])


def _as_arrays(halfspaces) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(halfspaces, tuple) and len(halfspaces) == 2 and np.ndim(halfspaces[1]) == 1:
        N = np.asarray(halfspaces[0], dtype=float).reshape(-1, 3)
        c = np.asarray(halfspaces[1], dtype=float).reshape(-1)
        if len(N) == len(c):
            return N, c
    N = np.array([np.asarray(h[0], dtype=float) for h in halfspaces]).reshape(-1, 3)
    c = np.array([float(h[1]) for h in halfspaces])
    return N, c


def _merge_points(X: np.ndarray, r: float) -> np.ndarray:
    pairs = cKDTree(X).query_pairs(r, output_type="ndarray")
    if len(pairs) == 0:
        return X
    n = len(X)
    g = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, lab = connected_components(g, directed=False)
    _, first = np.unique(lab, return_index=True)
    return X[np.sort(first)]
