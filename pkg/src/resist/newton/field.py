"""Concave heightfields on triangulated convex polygons.

Fields are piecewise linear (one gradient per triangle).  Admissibility
(``0 <= u <= M`` and concavity) is enforced by projecting onto the least
concave majorant of the lifted vertex set.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix, diags
from scipy.spatial import ConvexHull

from ..config import DEFAULT, Tolerances
from ..errors import InvalidField
from ..measure import PressureLaw
from .radial import RadialProfile


# ---------------------------------------------------------------- polygons


def regular_polygon(R: float, n: int, inradius: bool = False) -> np.ndarray:
    """CCW regular n-gon centred at the origin; ``R`` is the circumradius unless ``inradius``."""
    if n < 3:
        raise ValueError("polygon needs at least 3 sides")
    if inradius:
        R = R / np.cos(np.pi / n)
    t = 2 * np.pi * np.arange(n) / n
    return np.column_stack([R * np.cos(t), R * np.sin(t)])


def parse_omega(spec: str) -> np.ndarray:
    """``disc:R:n`` (regular n-gon, circumradius R) or ``poly:x1,y1;x2,y2;...``."""
    kind, _, rest = spec.partition(":")
    if kind == "disc":
        R, n = rest.split(":")
        return regular_polygon(float(R), int(n))
    if kind == "poly":
        pts = np.array([[float(v) for v in p.split(",")] for p in rest.split(";") if p.strip()])
        return _ccw_convex(pts)
    raise ValueError(f"bad domain spec {spec!r}")


def _ccw_convex(P: np.ndarray) -> np.ndarray:
    if len(P) < 3:
        raise ValueError("polygon needs at least 3 vertices")
    area = 0.5 * np.sum(P[:, 0] * np.roll(P[:, 1], -1) - np.roll(P[:, 0], -1) * P[:, 1])
    if area < 0:
        P = P[::-1]
    e = np.roll(P, -1, axis=0) - P
    cr = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
    if (cr <= 0).any():
        raise ValueError("polygon is not strictly convex")
    return P


def polygon_area(P: np.ndarray) -> float:
    return float(0.5 * np.sum(P[:, 0] * np.roll(P[:, 1], -1) - np.roll(P[:, 0], -1) * P[:, 1]))


# ---------------------------------------------------------------- meshes


@dataclass(frozen=True, eq=False)
class Mesh:
    points: np.ndarray  # (V, 2)
    tris: np.ndarray  # (T, 3), CCW
    boundary: np.ndarray  # bool (V,)
    omega: np.ndarray  # polygon corners (m, 2), CCW
    rings: np.ndarray  # ring index of each vertex (0 = centre)
    t: np.ndarray  # ring fractions, t[0] = 0, t[-1] = 1

    @cached_property
    def areas(self) -> np.ndarray:
        p = self.points[self.tris]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @cached_property
    def grad_matrix(self) -> csr_matrix:
        """Sparse (2T, V) operator: rows 2k, 2k+1 give d/dx, d/dy on triangle k."""
        p = self.points[self.tris]
        x, y = p[..., 0], p[..., 1]
        A2 = 2.0 * self.areas
        # gradient of the hat functions on each triangle
        bx = np.column_stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]]) / A2[:, None]
        by = np.column_stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]]) / A2[:, None]
        T = len(self.tris)
        rows = np.concatenate([np.repeat(2 * np.arange(T), 3), np.repeat(2 * np.arange(T) + 1, 3)])
        cols = np.concatenate([self.tris.ravel(), self.tris.ravel()])
        vals = np.concatenate([bx.ravel(), by.ravel()])
        return csr_matrix((vals, (rows, cols)), shape=(2 * T, len(self.points)))

    def gradients(self, u: np.ndarray) -> np.ndarray:
        return (self.grad_matrix @ u).reshape(-1, 2)

    @cached_property
    def edges(self) -> np.ndarray:
        e = np.vstack([self.tris[:, [0, 1]], self.tris[:, [1, 2]], self.tris[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    @cached_property
    def spacing(self) -> float:
        """Longest edge."""
        e = self.edges
        return float(np.linalg.norm(self.points[e[:, 0]] - self.points[e[:, 1]], axis=1).max())

    @cached_property
    def interior_edges(self) -> np.ndarray:
        """(E, 2) pairs of triangles sharing an edge."""
        T = len(self.tris)
        e = np.vstack([self.tris[:, [0, 1]], self.tris[:, [1, 2]], self.tris[:, [2, 0]]])
        owner = np.tile(np.arange(T), 3)
        key = np.sort(e, axis=1)
        order = np.lexsort((key[:, 1], key[:, 0]))
        k = key[order]
        same = (k[1:] == k[:-1]).all(axis=1)
        i = np.nonzero(same)[0]
        return np.column_stack([owner[order][i], owner[order][i + 1]])

    @cached_property
    def fold_matrix(self) -> csr_matrix:
        """Sparse (E, V) map from vertex values to fold heights, one row per
        interior edge: height of the far vertex above the plane of the near
        triangle.  A field is concave iff every row is <= 0."""
        E = self.interior_edges
        ta, tb = self.tris[E[:, 0]], self.tris[E[:, 1]]
        opp = np.where((tb[:, :, None] != ta[:, None, :]).all(axis=2), tb, -1).max(axis=1)
        base = ta[:, 0]
        d = self.points[opp] - self.points[base]
        Gm = self.grad_matrix.tocsr()
        Gx, Gy = Gm[2 * E[:, 0]], Gm[2 * E[:, 0] + 1]
        n, V = len(E), len(self.points)
        S = csr_matrix((np.ones(n), (np.arange(n), opp)), shape=(n, V))
        B = csr_matrix((np.ones(n), (np.arange(n), base)), shape=(n, V))
        return (S - B - diags(d[:, 0]) @ Gx - diags(d[:, 1]) @ Gy).tocsr()

    def fold_excess(self, u) -> float:
        """Largest convex fold of the interpolant; zero iff it is concave."""
        return float(max((self.fold_matrix @ np.asarray(u, dtype=float)).max(initial=0.0), 0.0))

    @cached_property
    def neighbors(self) -> list[np.ndarray]:
        V = len(self.points)
        e = self.edges
        adj = csr_matrix((np.ones(2 * len(e)), (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])), shape=(V, V))
        return [adj.indices[adj.indptr[i] : adj.indptr[i + 1]] for i in range(V)]

    @cached_property
    def topology_hash(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.tris, dtype=np.int64).tobytes()).hexdigest()

    def boundary_distance(self) -> np.ndarray:
        """Distance of each vertex to the polygon boundary."""
        P = self.omega
        Q = np.roll(P, -1, axis=0)
        e = Q - P
        n = np.column_stack([e[:, 1], -e[:, 0]]) / np.linalg.norm(e, axis=1, keepdims=True)
        return np.min((P * n).sum(1)[None, :] - self.points @ n.T, axis=1)

    def gauge(self) -> np.ndarray:
        """Minkowski gauge of the vertices w.r.t. ``omega`` about its vertex centroid."""
        c = self.omega.mean(axis=0)
        P = self.omega - c
        Q = np.roll(P, -1, axis=0)
        e = Q - P
        n = np.column_stack([e[:, 1], -e[:, 0]])
        h = (P * n).sum(1)
        return np.max((self.points - c) @ n.T / h[None, :], axis=1)


def sector_mesh(omega, rings: int, t=None) -> Mesh:
    """Triangulate a convex polygon by subdividing each centroid fan triangle.

    Ring ``k`` is the polygon scaled by ``t[k]`` about the vertex centroid; its
    edges carry ``k`` segments each, so every fan triangle is split into
    ``rings^2`` triangles.  ``t`` defaults to uniform fractions.
    """
    P = np.asarray(omega, dtype=float)
    m = len(P)
    c = P.mean(axis=0)
    K = int(rings)
    t = np.linspace(0.0, 1.0, K + 1) if t is None else np.asarray(t, dtype=float)
    if len(t) != K + 1 or t[0] != 0 or t[-1] != 1 or (np.diff(t) <= 0).any():
        raise ValueError("ring fractions must increase from 0 to 1")
    pts = [c]
    ring_id = [0]
    start = [0]
    for k in range(1, K + 1):
        start.append(len(pts))
        for j in range(m):
            a, b = P[j] - c, P[(j + 1) % m] - c
            for i in range(k):
                pts.append(c + t[k] * (a + (b - a) * i / k))
                ring_id.append(k)

    def idx(k, j, i):
        # vertex i (0..k) along edge j of ring k; i == k wraps to the next edge
        if k == 0:
            return 0
        n = m * k
        return start[k] + (j * k + i) % n

    tris = []
    for j in range(m):
        for k in range(1, K + 1):
            for i in range(k):
                tris.append((idx(k - 1, j, i), idx(k, j, i), idx(k, j, i + 1)))
                if i < k - 1:
                    tris.append((idx(k - 1, j, i), idx(k, j, i + 1), idx(k - 1, j, i + 1)))
    tris = np.array(tris, dtype=np.int64)
    pts = np.array(pts)
    ring_id = np.array(ring_id)
    # make every triangle CCW
    p = pts[tris]
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    cw = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0] < 0
    tris[cw] = tris[cw][:, [0, 2, 1]]
    return Mesh(pts, tris, ring_id == K, P, ring_id, t)


def aligned_rings(K: int, t_star: float | None) -> np.ndarray:
    """Uniform ring fractions with the nearest interior ring moved to ``t_star``."""
    t = np.linspace(0.0, 1.0, K + 1)
    if t_star is not None and 0 < t_star < 1:
        k = int(np.clip(np.argmin(np.abs(t - t_star)), 1, K - 1))
        if t[k - 1] < t_star < t[k + 1]:
            t[k] = t_star
    return t


# ---------------------------------------------------------------- fields


@dataclass(frozen=True, eq=False)
class HeightField:
    mesh: Mesh
    M: float
    values: np.ndarray
    seed: int | None = None

    @property
    def omega(self) -> np.ndarray:
        return self.mesh.omega

    def gradients(self) -> np.ndarray:
        return self.mesh.gradients(self.values)

    def with_values(self, values) -> "HeightField":
        return HeightField(self.mesh, self.M, np.asarray(values, dtype=float), self.seed)

    def check(self, tol: Tolerances = DEFAULT) -> None:
        eps = tol.conc * max(self.M, 1.0)
        u = self.values
        if not np.isfinite(u).all():
            raise InvalidField("non-finite values")
        if u.min() < -eps or u.max() > self.M + eps:
            raise InvalidField("values outside [0, M]")
        lcm = least_concave_majorant(self.mesh, u)
        gap = float((lcm - u).max())
        if gap > eps:
            raise InvalidField(f"field is not concave (majorant gap {gap:.3e})")

    # ---- I/O
    def save(self, path) -> tuple[Path, Path]:
        """Graph surface as OFF plus a JSON sidecar with the domain and provenance."""
        from ..convex.meshio import write_off

        path = Path(path)
        verts = np.column_stack([self.mesh.points, self.values])
        write_off(path, (verts, self.mesh.tris))
        side = path.with_suffix(".json")
        meta = {
            "omega": self.omega.tolist(),
            "M": self.M,
            "rings": self.mesh.t.tolist(),
            "topology_hash": self.mesh.topology_hash,
            "seed": self.seed,
        }
        side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        return path, side

    @classmethod
    def load(cls, path) -> "HeightField":
        from ..convex.meshio import read_off

        path = Path(path)
        meta = json.loads(path.with_suffix(".json").read_text())
        verts, faces = read_off(path)
        t = np.array(meta["rings"])
        mesh = sector_mesh(np.array(meta["omega"]), len(t) - 1, t)
        if mesh.topology_hash != meta["topology_hash"] or not np.array_equal(mesh.tris, np.array(faces)):
            raise InvalidField("mesh topology does not match the sidecar")
        return cls(mesh, float(meta["M"]), verts[:, 2], meta.get("seed"))


def least_concave_majorant(mesh: Mesh, u: np.ndarray) -> np.ndarray:
    """Values at the mesh vertices of the smallest concave function above ``u``."""
    u = np.asarray(u, dtype=float)
    P = mesh.points
    lifted, simp, planes = _upper_hull(mesh, u)
    out = u.copy()
    on = np.zeros(len(P), dtype=bool)
    sv = simp.ravel()
    on[sv[sv < len(P)]] = True
    rest = np.nonzero(~on)[0]
    if len(rest):
        out[rest] = _upper_height(P[rest], lifted, simp, planes)
    return np.maximum(out, u)


def _upper_hull(mesh: Mesh, u: np.ndarray):
    """Lifted points and the upward-facing facets of their hull.

    The polygon corners are added below the data so that the hull's upper part
    covers all of the domain."""
    floor = u.min() - 1.0 - (u.max() - u.min())
    corners = np.column_stack([mesh.omega, np.full(len(mesh.omega), floor)])
    lifted = np.vstack([np.column_stack([mesh.points, u]), corners])
    hull = ConvexHull(lifted)
    eq = hull.equations
    up = eq[:, 2] > 1e-12
    return lifted, hull.simplices[up], eq[up]


def concave_surface(mesh: Mesh, u) -> tuple[np.ndarray, np.ndarray]:
    """Gradients and planar areas of the facets of the concave surface through
    the samples ``u`` (the upper hull of the lifted points).

    When the mesh interpolant of ``u`` is itself concave it is this surface,
    possibly triangulated differently."""
    lifted, simp, planes = _upper_hull(mesh, np.asarray(u, dtype=float))
    a, b, c = planes[:, 0], planes[:, 1], planes[:, 2]
    t = lifted[simp][:, :, :2]
    e1, e2 = t[:, 1] - t[:, 0], t[:, 2] - t[:, 0]
    areas = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    return np.column_stack([-a / c, -b / c]), areas


def _upper_height(Q: np.ndarray, lifted: np.ndarray, simp: np.ndarray, planes: np.ndarray) -> np.ndarray:
    """Height of the upper hull above the 2-D points ``Q``.

    Each point is located in a nearby upper facet (barycentric test over the
    facets with the closest centroids); points not located that way fall back
    to the minimum over all facet planes, which is the same value.
    """
    from scipy.spatial import cKDTree

    a, b, c, d = planes.T
    tri = lifted[simp][:, :, :2]
    z = np.full(len(Q), np.nan)
    k = min(12, len(simp))
    _, cand = cKDTree(tri.mean(axis=1)).query(Q, k=k)
    cand = cand.reshape(len(Q), k)
    p0, p1, p2 = tri[:, 0], tri[:, 1], tri[:, 2]
    for j in range(k):
        f = cand[:, j]
        todo = np.isnan(z)
        if not todo.any():
            break
        f = f[todo]
        q = Q[todo]
        e1, e2, w = p1[f] - p0[f], p2[f] - p0[f], q - p0[f]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            l1 = (w[:, 0] * e2[:, 1] - w[:, 1] * e2[:, 0]) / det
            l2 = (e1[:, 0] * w[:, 1] - e1[:, 1] * w[:, 0]) / det
            eps = 1e-12
            inside = (l1 >= -eps) & (l2 >= -eps) & (l1 + l2 <= 1 + eps) & (np.abs(det) > 0)
        idx = np.nonzero(todo)[0][inside]
        fi = f[inside]
        z[idx] = -(a[fi] * Q[idx, 0] + b[fi] * Q[idx, 1] + d[fi]) / c[fi]
    miss = np.nonzero(np.isnan(z))[0]
    for chunk in np.array_split(miss, max(1, len(miss) // 2048 + 1)):
        if len(chunk):
            # height of plane a x + b y + c z + d = 0 is z = -(a x + b y + d) / c
            zz = -(np.outer(Q[chunk, 0], a) + np.outer(Q[chunk, 1], b) + d) / c
            z[chunk] = zz.min(axis=1)
    return z


def project_concave(u, mesh: Mesh, M: float, seed: int | None = None) -> HeightField:
    """``clamp(LCM(clamp(u, 0, M)), 0, M)``, never below ``clamp(u, 0, M)``."""
    v = np.clip(np.asarray(u, dtype=float), 0.0, M)
    w = np.clip(least_concave_majorant(mesh, v), 0.0, M)
    return HeightField(mesh, float(M), np.maximum(w, v), seed)


def resistance_2d(law: PressureLaw, u: HeightField, check: bool = True, tol: Tolerances = DEFAULT) -> float:
    """Sum over the facets of the concave surface of ``g(grad u) * area``.

    The samples define the surface through their majorant, so a field whose
    mesh interpolant folds the wrong way is charged for the surface it
    actually represents.  For a concave interpolant this is the plain P1 sum.
    """
    if check:
        u.check(tol)
    return surface_objective(law, u.mesh, u.values)


def surface_objective(law: PressureLaw, mesh: Mesh, u) -> float:
    G, A = concave_surface(mesh, u)
    return float(law.g(G[:, 0], G[:, 1]) @ A)


def mesh_objective(law: PressureLaw, mesh: Mesh, u) -> float:
    """P1 sum on the fixed mesh triangles."""
    G = mesh.gradients(np.asarray(u, dtype=float))
    return float(law.g(G[:, 0], G[:, 1]) @ mesh.areas)


def objective_and_gradient(law: PressureLaw, mesh: Mesh, u: np.ndarray) -> tuple[float, np.ndarray]:
    """Mesh P1 objective and its gradient in the vertex values (a search direction)."""
    G = mesh.gradients(u)
    A = mesh.areas
    F = float(law.g(G[:, 0], G[:, 1]) @ A)
    gx, gy = law.grad_g(G[:, 0], G[:, 1])
    dG = np.column_stack([gx * A, gy * A]).ravel()
    return F, mesh.grad_matrix.T @ dG


def embed_radial(profile: RadialProfile, mesh: Mesh) -> HeightField:
    """``u(x) = phi(L * gauge(x))``: a radial profile transplanted onto ``mesh``.

    Using the polygon gauge keeps boundary values at zero up to roundoff and makes the
    field concave (a concave non-increasing profile of a convex gauge).
    """
    rho = mesh.gauge()
    rho[mesh.boundary] = 1.0  # the gauge rounds to 1 - eps on some edges
    u = profile(np.clip(rho, 0.0, 1.0) * profile.L)
    return project_concave(u, mesh, profile.M)
