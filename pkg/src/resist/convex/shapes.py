"""Stock bodies used by tests, the CLI and the verification suites."""
from __future__ import annotations

import numpy as np

from .polytope import Polytope, hull3d


def cube(lo: float = 0.0, hi: float = 1.0) -> Polytope:
    g = np.array([lo, hi])
    pts = np.array(np.meshgrid(g, g, g, indexing="ij")).reshape(3, -1).T
    return hull3d(pts)


def regular_tetrahedron() -> Polytope:
    return hull3d([(1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)])


def fibonacci_sphere(n: int, radius: float = 1.0) -> np.ndarray:
    """Quasi-uniform points on a sphere; the first and last are the poles."""
    k = np.arange(n)
    z = 1.0 - 2.0 * k / (n - 1)
    rho = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = k * np.pi * (3.0 - np.sqrt(5.0))
    return radius * np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])


def sphere_polytope(n: int = 1000, radius: float = 1.0) -> Polytope:
    return hull3d(fibonacci_sphere(n, radius))


def random_polytope(n: int, rng: np.random.Generator, axes=(1.0, 0.8, 0.6)) -> Polytope:
    """Hull of ``n`` random points on an ellipsoid (every point is a vertex)."""
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return hull3d(v * np.asarray(axes))
