"""Discrete surface-area measures and resistance functionals.

A measure is a finite list of atoms ``(unit normal, signed area)``.  Atoms whose
normals agree to within ``Tolerances.normal`` radians are merged by summing
their weights, so the same measure always has the same atom list regardless of
how its facets were split.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .config import DEFAULT, Tolerances
from .convex.polytope import Polytope

FMT = "%.17g"


def _merge(normals: np.ndarray, weights: np.ndarray, tol: float):
    if len(normals) == 0:
        return np.zeros((0, 3)), np.zeros(0)
    # chord length ~ angle for tiny angles
    pairs = cKDTree(normals).query_pairs(2.0 * np.sin(0.5 * tol), output_type="ndarray")
    n = len(normals)
    if len(pairs) == 0:
        return normals, weights
    g = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    k, lab = connected_components(g, directed=False)
    # label components in order of first appearance for determinism
    first = np.full(k, n)
    np.minimum.at(first, lab, np.arange(n))
    order = np.argsort(first, kind="stable")
    rank = np.empty(k, dtype=int)
    rank[order] = np.arange(k)
    lab = rank[lab]
    w = np.zeros(k)
    np.add.at(w, lab, weights)
    return normals[np.sort(first)], w


class DiscreteSurfaceMeasure:
    """Finite signed atomic measure on the unit sphere."""

    def __init__(self, normals, weights, tol: Tolerances = DEFAULT):
        N = np.asarray(normals, dtype=float).reshape(-1, 3)
        w = np.asarray(weights, dtype=float).reshape(-1)
        if len(N) != len(w):
            raise ValueError("normals and weights differ in length")
        if len(N):
            # leave rows that are already unit alone so text round trips are exact
            nrm = np.linalg.norm(N, axis=1, keepdims=True)
            N = np.where(np.abs(nrm - 1.0) > 4 * np.finfo(float).eps, N / nrm, N)
        N, w = _merge(N, w, tol.normal)
        self.normals = N
        self.weights = w
        self.tol = tol
        self.normals.setflags(write=False)
        self.weights.setflags(write=False)

    def __len__(self) -> int:
        return len(self.weights)

    def __repr__(self) -> str:
        return f"DiscreteSurfaceMeasure({len(self)} atoms, mass {self.mass:.6g})"

    @property
    def atoms(self) -> list[tuple[np.ndarray, float]]:
        return [(n.copy(), float(w)) for n, w in zip(self.normals, self.weights)]

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    @property
    def total_variation(self) -> float:
        return float(np.abs(self.weights).sum())

    def __add__(self, other: "DiscreteSurfaceMeasure") -> "DiscreteSurfaceMeasure":
        return measure_linear_combine([1.0, 1.0], [self, other])

    def __sub__(self, other: "DiscreteSurfaceMeasure") -> "DiscreteSurfaceMeasure":
        return measure_linear_combine([1.0, -1.0], [self, other])

    def __mul__(self, c: float) -> "DiscreteSurfaceMeasure":
        return DiscreteSurfaceMeasure(self.normals, c * self.weights, self.tol)

    __rmul__ = __mul__

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("nx,ny,nz,weight\n")
        for n, w in zip(self.normals, self.weights):
            buf.write(",".join(FMT % x for x in (*n, w)) + "\n")
        return buf.getvalue()

    def save(self, path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def from_csv(cls, text: str, tol: Tolerances = DEFAULT) -> "DiscreteSurfaceMeasure":
        rows = list(csv.DictReader(io.StringIO(text)))
        N = [[float(r["nx"]), float(r["ny"]), float(r["nz"])] for r in rows]
        w = [float(r["weight"]) for r in rows]
        return cls(N, w, tol)

    @classmethod
    def load(cls, path, tol: Tolerances = DEFAULT) -> "DiscreteSurfaceMeasure":
        return cls.from_csv(Path(path).read_text(), tol)


def zero_measure(tol: Tolerances = DEFAULT) -> DiscreteSurfaceMeasure:
    return DiscreteSurfaceMeasure(np.zeros((0, 3)), np.zeros(0), tol)


def measure_of(
    C: Polytope, facets=None, orientation: int = 1, tol: Tolerances = DEFAULT
) -> DiscreteSurfaceMeasure:
    """Surface measure of a set of facets of ``C`` (all facets by default).

    ``orientation`` is +1 for outward normals, -1 to flip them.  The caller
    picks the sign explicitly for planar patches.
    """
    if orientation not in (1, -1):
        raise ValueError("orientation must be +1 or -1")
    idx = np.arange(len(C.offsets)) if facets is None else np.asarray(list(facets), dtype=int)
    return DiscreteSurfaceMeasure(orientation * C.normals[idx], C.facet_areas[idx], tol)


def measure_of_triangles(tris, orientation: int = 1, tol: Tolerances = DEFAULT) -> DiscreteSurfaceMeasure:
    """Measure of triangles ``(k, 3, 3)`` whose normals follow the vertex winding."""
    T = np.asarray(tris, dtype=float).reshape(-1, 3, 3)
    cr = np.cross(T[:, 1] - T[:, 0], T[:, 2] - T[:, 0])
    nrm = np.linalg.norm(cr, axis=1)
    keep = nrm > 0
    return DiscreteSurfaceMeasure(orientation * cr[keep] / nrm[keep, None], 0.5 * nrm[keep], tol)


def measure_linear_combine(coeffs, measures, tol: Tolerances = DEFAULT) -> DiscreteSurfaceMeasure:
    coeffs = list(coeffs)
    measures = list(measures)
    if len(coeffs) != len(measures):
        raise ValueError("coefficient and measure counts differ")
    if not measures:
        return zero_measure(tol)
    N = np.vstack([m.normals for m in measures])
    w = np.concatenate([c * m.weights for c, m in zip(coeffs, measures)])
    return DiscreteSurfaceMeasure(N, w, tol)


def closure_defect(nu: DiscreteSurfaceMeasure) -> float:
    """Norm of the weighted normal sum; zero for a closed convex surface."""
    return float(np.linalg.norm(nu.weights @ nu.normals)) if len(nu) else 0.0


def atom_deviation(nu: DiscreteSurfaceMeasure, ref: DiscreteSurfaceMeasure) -> float:
    """Largest merged atom weight of ``nu - ref`` relative to the mass of ``ref``."""
    d = nu - ref
    scale = max(ref.total_variation, nu.total_variation, np.finfo(float).tiny)
    return float(np.abs(d.weights).max() / scale) if len(d) else 0.0


# ---------------------------------------------------------------- pressure laws


def _graph_normals(X, Y) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    s = np.sqrt(1.0 + X * X + Y * Y)
    return np.stack([-X / s, -Y / s, 1.0 / s], axis=-1)


@dataclass
class PressureLaw:
    """Pressure ``p`` on the sphere with its boundary density ``f`` and heightfield integrand ``g``.

    ``f`` and ``g`` default to ``p(n) n_3`` and ``p`` evaluated at the
    upward normal of a graph with slope ``(X, Y)``.  All callables are
    vectorised over a trailing axis of length 3 (``p``, ``f``) or over
    broadcast arrays (``g``).
    """

    name: str
    p: Callable[[np.ndarray], np.ndarray]
    f_: Callable[[np.ndarray], np.ndarray] | None = None
    g_: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    grad_g_: Callable | None = field(default=None, repr=False)

    def f(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=float)
        if self.f_ is not None:
            return self.f_(n)
        return self.p(n) * n[..., 2]

    def g(self, X, Y) -> np.ndarray:
        if self.g_ is not None:
            return self.g_(np.asarray(X, dtype=float), np.asarray(Y, dtype=float))
        return self.p(_graph_normals(X, Y))

    def grad_g(self, X, Y, h: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
        if self.grad_g_ is not None:
            return self.grad_g_(np.asarray(X, dtype=float), np.asarray(Y, dtype=float))
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        gx = (self.g(X + h, Y) - self.g(X - h, Y)) / (2 * h)
        gy = (self.g(X, Y + h) - self.g(X, Y - h)) / (2 * h)
        return gx, gy

    def hess_g(self, X: float, Y: float, h: float = 1e-4) -> np.ndarray:
        """Central-difference Hessian of ``g`` at a single slope."""
        g = lambda a, b: float(self.g(a, b))  # noqa: E731
        c = g(X, Y)
        xx = (g(X + h, Y) - 2 * c + g(X - h, Y)) / h**2
        yy = (g(X, Y + h) - 2 * c + g(X, Y - h)) / h**2
        xy = (g(X + h, Y + h) - g(X + h, Y - h) - g(X - h, Y + h) + g(X - h, Y - h)) / (4 * h * h)
        return np.array([[xx, xy], [xy, yy]])


def _classical() -> PressureLaw:
    def p(n):
        return np.clip(n[..., 2], 0.0, None) ** 2

    def f(n):
        return np.clip(n[..., 2], 0.0, None) ** 3

    def g(X, Y):
        return 1.0 / (1.0 + X * X + Y * Y)

    def grad(X, Y):
        d = (1.0 + X * X + Y * Y) ** 2
        return -2.0 * X / d, -2.0 * Y / d

    return PressureLaw("classical", p, f, g, grad)


def _area() -> PressureLaw:
    def p(n):
        with np.errstate(divide="ignore"):
            return 1.0 / n[..., 2]

    def f(n):
        return np.ones(np.shape(n)[:-1])

    def g(X, Y):
        return np.sqrt(1.0 + X * X + Y * Y)

    return PressureLaw("area", p, f, g)


def _lower() -> PressureLaw:
    # f(n) = (-n3)_+^3: vanishes on the upper hemisphere
    def p(n):
        return -np.clip(-n[..., 2], 0.0, None) ** 2

    def f(n):
        return np.clip(-n[..., 2], 0.0, None) ** 3

    def g(X, Y):
        return np.zeros(np.broadcast(X, Y).shape)

    return PressureLaw("lower", p, f, g)


_REGISTRY: dict[str, Callable[[], PressureLaw]] = {
    "classical": _classical,
    "area": _area,
    "lower": _lower,
}


def register_law(name: str, factory: Callable[[], PressureLaw]) -> None:
    _REGISTRY[name] = factory


def law_names() -> list[str]:
    return sorted(_REGISTRY)


def get_law(name: str) -> PressureLaw:
    if name in _REGISTRY:
        return _REGISTRY[name]()
    path = Path(name)
    if path.suffix == ".csv" and path.exists():
        return tabulated_law(path)
    raise KeyError(f"unknown pressure law {name!r}; known: {law_names()}")


def tabulated_law(path) -> PressureLaw:
    """Law from a CSV grid ``theta,phi,p`` (polar angle, azimuth) with bilinear interpolation.

    The grid must be complete: every (theta, phi) combination present once.
    """
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    th = np.unique(data[:, 0])
    ph = np.unique(data[:, 1])
    if len(th) * len(ph) != len(data):
        raise ValueError("tabulated law must be a full theta x phi grid")
    order = np.lexsort((data[:, 1], data[:, 0]))
    vals = data[order, 2].reshape(len(th), len(ph))
    interp = RegularGridInterpolator((th, ph), vals, method="linear", bounds_error=False, fill_value=None)

    def p(n):
        n = np.asarray(n, dtype=float)
        theta = np.arccos(np.clip(n[..., 2], -1.0, 1.0))
        phi = np.mod(np.arctan2(n[..., 1], n[..., 0]), 2 * np.pi)
        pts = np.stack([theta, phi], axis=-1)
        return interp(pts.reshape(-1, 2)).reshape(theta.shape)

    return PressureLaw(Path(path).stem, p)


def eval_functional(law: PressureLaw, nu: DiscreteSurfaceMeasure) -> float:
    """Resistance ``sum f(n_i) w_i`` of a measure."""
    if len(nu) == 0:
        return 0.0
    return float(law.f(nu.normals) @ nu.weights)
