"""Rotationally symmetric minimal-resistance profiles.

A profile is stored by its values on a radial grid.  The solver works with the
cell slopes ``q_i = -(phi_{i+1} - phi_i) / dr``: the admissible class becomes
``0 <= q_0 <= q_1 <= ...`` with ``sum q_i dr <= M``, a convex set whose
Euclidean projection is an isotonic regression followed by a shift.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, isotonic_regression

from ..config import DEFAULT, Tolerances
from ..errors import InvalidProfile


@dataclass(frozen=True, eq=False)
class RadialProfile:
    L: float
    M: float
    r: np.ndarray
    phi: np.ndarray

    @property
    def N(self) -> int:
        return len(self.r) - 1

    @property
    def slopes(self) -> np.ndarray:
        """Cell slopes d(phi)/dr (non-positive for admissible profiles)."""
        return np.diff(self.phi) / np.diff(self.r)

    @property
    def flat_radius(self) -> float:
        """Outer radius of the cells where phi stays at its maximum."""
        top = self.phi >= self.phi[0] - DEFAULT.top * self.M
        k = int(np.argmin(top)) if not top.all() else len(top)
        return float(self.r[max(k - 1, 0)])

    def validate(self, tol: Tolerances = DEFAULT) -> None:
        eps = tol.conc * max(self.M, 1.0)
        d = np.diff(self.r)
        if (d <= 0).any() or abs(self.r[0]) > 0 or abs(self.r[-1] - self.L) > 1e-12 * self.L:
            raise InvalidProfile("grid must increase from 0 to L")
        if self.phi.min() < -eps or self.phi.max() > self.M + eps:
            raise InvalidProfile("values outside [0, M]")
        sl = self.slopes
        if (sl > eps).any():
            raise InvalidProfile("profile increases")
        if (np.diff(sl) > eps * 1e3 / d.min()).any():
            raise InvalidProfile("profile is not concave")

    def to_csv(self) -> str:
        rows = ["r,phi"] + ["%.17g,%.17g" % (a, b) for a, b in zip(self.r, self.phi)]
        return "\n".join(rows) + "\n"

    def __call__(self, rr) -> np.ndarray:
        return np.interp(rr, self.r, self.phi)


def resistance_radial(phi: RadialProfile, check: bool = True, tol: Tolerances = DEFAULT) -> float:
    """Midpoint quadrature of ``r / (1 + phi'^2)`` with constant slope per cell."""
    if check:
        phi.validate(tol)
    r = phi.r
    q = phi.slopes
    # exact integral of r over each cell
    w = 0.5 * (r[1:] ** 2 - r[:-1] ** 2)
    return float(np.sum(w / (1.0 + q * q)))


def _profile_from_slopes(q: np.ndarray, L: float, M: float) -> RadialProfile:
    N = len(q)
    r = np.linspace(0.0, L, N + 1)
    h = L / N
    # accumulate from the rim so phi_N = 0 exactly
    phi = np.concatenate([np.cumsum((q * h)[::-1])[::-1], [0.0]])
    np.clip(phi, 0.0, M, out=phi)
    return RadialProfile(float(L), float(M), r, phi)


def project_slopes(y: np.ndarray, budget: float) -> np.ndarray:
    """Euclidean projection onto {0 <= q nondecreasing, sum q <= budget}."""
    iso = isotonic_regression(y, increasing=True).x
    q = np.clip(iso, 0.0, None)
    if q.sum() <= budget:
        return q
    # shifting commutes with isotonic regression: q(nu) = max(iso - nu, 0)
    f = lambda nu: np.clip(iso - nu, 0.0, None).sum() - budget  # noqa: E731
    hi = float(iso.max())
    nu = brentq(f, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return np.clip(iso - nu, 0.0, None)


def _objective(q: np.ndarray, w: np.ndarray) -> float:
    return float(np.sum(w / (1.0 + q * q)))


def _grad(q: np.ndarray, w: np.ndarray) -> np.ndarray:
    return -2.0 * q * w / (1.0 + q * q) ** 2


@dataclass
class RadialTrace:
    objective: list
    step: list


def _descend(q, w, h, budget, max_iter, tr):
    """Projected gradient with Armijo backtracking; every accepted step lowers F."""
    F = _objective(q, w)
    alpha = 1.0
    for _ in range(max_iter):
        g = _grad(q, w) / h  # gradient in the L2(dr) metric
        a = alpha
        for _ls in range(40):
            qn = project_slopes(q - a * g, budget)
            Fn = _objective(qn, w)
            if Fn < F - 1e-4 * float(g @ (q - qn)) * h:
                break
            a *= 0.5
        else:
            break
        done = F - Fn <= 1e-15 * F
        q, F = qn, Fn
        tr.objective.append(F)
        tr.step.append("gradient")
        if done:
            break
        alpha = min(4.0 * a, 1e3)
    return q, F


def _start(N, h, budget, rho_cells):
    q = np.zeros(N)
    q[rho_cells:] = budget / (N - rho_cells)
    return q


def solve_radial(
    M: float,
    L: float,
    N: int,
    starts: int = 31,
    max_iter: int = 4000,
    polish: bool = True,
    delta: float | None = None,
    trace: RadialTrace | None = None,
) -> RadialProfile:
    """Multi-start projected-gradient descent on the cell slopes, then a coordinate polish.

    The descent leaves the position of the first nonzero slope almost fixed, so
    it is started from truncated cones ``q = 0`` on ``[0, rho)`` for a grid of
    ``rho`` and the best start is refined by golden-section search in ``rho``.
    The polish tries ``phi_i +- delta`` moves followed by concave re-projection
    and keeps any that help.  ``trace`` records the winning run.
    """
    if not (M > 0 and L > 0):
        raise ValueError("M and L must be positive")
    if N < 16:
        raise ValueError("N must be at least 16")
    h = L / N
    r = np.linspace(0.0, L, N + 1)
    w = 0.5 * (r[1:] ** 2 - r[:-1] ** 2)
    budget = M / h  # sum of q, in slope units

    cache: dict[int, tuple] = {}

    def run(k: int):
        k = int(min(max(k, 0), N - 1))
        if k not in cache:
            t = RadialTrace([], [])
            q0 = _start(N, h, budget, k)
            t.objective.append(_objective(q0, w))
            t.step.append("init")
            q, F = _descend(q0, w, h, budget, max_iter, t)
            cache[k] = (F, q, t)
        return cache[k]

    grid = np.unique(np.round(np.linspace(0, 0.9 * N, starts)).astype(int))
    vals = [run(k)[0] for k in grid]
    j = int(np.argmin(vals))
    a = int(grid[max(j - 1, 0)])
    b = int(grid[min(j + 1, len(grid) - 1)])
    # golden-section search on the integer start index
    gr = (np.sqrt(5.0) - 1.0) / 2.0
    while b - a > 2:
        c = int(round(b - gr * (b - a)))
        d = int(round(a + gr * (b - a)))
        if c == d:
            d = c + 1
        if run(c)[0] <= run(d)[0]:
            b = d
        else:
            a = c
    best = min(cache, key=lambda k: (cache[k][0], k))
    F, q, t = cache[best]
    tr = trace if trace is not None else RadialTrace([], [])
    tr.objective.extend(t.objective)
    tr.step.extend(t.step)
    if polish:
        q, F = _polish(q, w, L, M, N, delta if delta is not None else M / N, tr)
    return _profile_from_slopes(q, L, M)


def _q_from_phi(phi: np.ndarray, h: float) -> np.ndarray:
    return -np.diff(phi) / h


def _polish(q, w, L, M, N, delta, tr, sweeps: int = 3):
    h = L / N
    budget = M / h
    F = _objective(q, w)
    for _ in range(sweeps):
        changed = False
        phi = _profile_from_slopes(q, L, M).phi
        for i in range(N):  # phi_N = 0 is pinned
            for sgn in (1.0, -1.0):
                trial = phi.copy()
                trial[i] += sgn * delta
                qn = project_slopes(_q_from_phi(trial, h), budget)
                Fn = _objective(qn, w)
                if Fn < F:
                    q, F = qn, Fn
                    phi = _profile_from_slopes(q, L, M).phi
                    tr.objective.append(F)
                    tr.step.append("polish")
                    changed = True
                    break
        if not changed:
            break
    return q, F


def perturbation_neighbors(phi: RadialProfile, delta: float, idx=None):
    """Yield concave re-projections of the coordinate moves ``phi_i +- delta``."""
    h = phi.L / phi.N
    budget = phi.M / h
    idx = range(phi.N) if idx is None else idx
    for i in idx:
        for sgn in (1.0, -1.0):
            trial = phi.phi.copy()
            trial[i] += sgn * delta
            q = project_slopes(_q_from_phi(trial, h), budget)
            yield _profile_from_slopes(q, phi.L, phi.M)
