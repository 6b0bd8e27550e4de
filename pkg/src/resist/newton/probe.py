"""Second-variation test with an oscillating bump.

At a point where ``u`` is strictly concave and strictly between its bounds,
perturb by ``t psi`` with

    psi(chi) = gamma(chi_1) gamma(chi_2) sin(chi_2 / tau)

in coordinates ``chi`` that diagonalise ``D^2 g(grad u(x0))`` as ``diag(a, -b)``.
The second variation is ``Q = a I_1 - b I_2``; ``I_2`` grows like ``1 / tau^2``
while ``I_1`` stays bounded, so ``Q < 0`` for small ``tau`` whenever ``b > 0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..config import DEFAULT, Tolerances
from ..errors import CreaseDetected, TooCloseToBound
from ..measure import PressureLaw
from .field import HeightField
from .verify import fit_quadratic


def bump(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    m = np.abs(t) < 1
    out[m] = np.exp(-1.0 / (1.0 - t[m] ** 2))
    return out


def bump_prime(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    m = np.abs(t) < 1
    s = 1.0 - t[m] ** 2
    out[m] = np.exp(-1.0 / s) * (-2.0 * t[m] / s**2)
    return out


def _nodes(panels: int, order: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule on [-1, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(-1.0, 1.0, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * np.diff(edges)
    return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()


def probe_integrals(tau: float, gamma=bump, dgamma=bump_prime, panels: int | None = None) -> tuple[float, float]:
    """``I_1 = int (d psi / d chi_1)^2`` and ``I_2 = int (d psi / d chi_2)^2`` over the square."""
    if panels is None:
        panels = int(max(400, 40 / tau))
    x, w = _nodes(panels)
    g, dg = gamma(x), dgamma(x)
    s, c = np.sin(x / tau), np.cos(x / tau)
    I1 = float(w @ (dg**2)) * float(w @ ((g * s) ** 2))
    I2 = float(w @ (g**2)) * float(w @ ((dg * s + g * c / tau) ** 2))
    return I1, I2


@dataclass
class SecondVariationReport:
    x0: np.ndarray
    grad_u: np.ndarray
    hess_u: np.ndarray
    eig_g: tuple  # (a, -b)
    taus: np.ndarray
    Q: np.ndarray
    I1: np.ndarray
    I2: np.ndarray
    I2_slope: float  # log-log slope of I_2 over the two smallest taus
    concave_definite: bool
    verdict: str  # "certified-nonoptimal" | "inconclusive"
    notes: list = field(default_factory=list)


def second_variation_probe(
    law: PressureLaw,
    u: HeightField,
    x0,
    taus=(1.0, 0.1, 0.01),
    radius: float | None = None,
    definiteness: float = 0.1,
    gamma=bump,
    dgamma=bump_prime,
    tol: Tolerances = DEFAULT,
) -> SecondVariationReport:
    """Probe ``Q(tau)`` at ``x0`` and decide whether ``u`` is certifiably not optimal.

    ``definiteness`` is the relative margin by which the smaller eigenvalue of
    ``-D^2 u`` must be positive (scaled by the larger one) before the local
    perturbation is trusted to keep ``u`` concave.
    """
    m = u.mesh
    x0 = np.asarray(x0, dtype=float)
    if radius is None:
        radius = 4.0 * m.spacing
    d = np.linalg.norm(m.points - x0, axis=1)
    disc = d <= radius
    if disc.sum() < 6:
        raise ValueError("support disc contains too few vertices")
    vals = u.values[disc]
    if vals.max() >= u.M - tol.top * u.M or vals.min() <= tol.top * u.M:
        raise TooCloseToBound("u reaches a bound on the support disc")
    if m.boundary[disc].any():
        raise TooCloseToBound("support disc meets the domain boundary")
    tri_in = disc[m.tris].all(axis=1)
    G = u.gradients()
    pair = m.interior_edges
    inside = tri_in[pair[:, 0]] & tri_in[pair[:, 1]]
    jump = np.linalg.norm(G[pair[inside, 0]] - G[pair[inside, 1]], axis=1)
    if len(jump) and jump.max() > tol.crease:
        raise CreaseDetected(f"gradient jump {jump.max():.3f} inside the support disc")

    _, grad, H = fit_quadratic(m.points[disc], vals, x0)
    ev_u = np.linalg.eigvalsh(-H)
    definite = bool(ev_u[0] > definiteness * max(abs(ev_u[1]), np.finfo(float).tiny))

    D2g = law.hess_g(float(grad[0]), float(grad[1]))
    ev = np.linalg.eigvalsh(D2g)  # ascending
    a, mb = float(ev[1]), float(ev[0])  # diag(a, -b) with a >= -b
    b = -mb
    taus = np.asarray(taus, dtype=float)
    I = np.array([probe_integrals(t, gamma, dgamma) for t in taus])
    Q = a * I[:, 0] - b * I[:, 1]
    order = np.argsort(taus)
    t2, t1 = taus[order[0]], taus[order[1]]
    slope = float(np.log(I[order[0], 1] / I[order[1], 1]) / np.log(t2 / t1))
    verdict = "certified-nonoptimal" if definite and (Q < 0).any() else "inconclusive"
    notes = []
    if not definite:
        notes.append("-D^2 u not positive definite: perturbation may break concavity")
    return SecondVariationReport(x0, grad, H, (a, mb), taus, Q, I[:, 0], I[:, 1], slope, definite, verdict, notes)
