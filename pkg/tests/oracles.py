"""Independent reference computations used only by the tests."""
from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import linprog


def in_hull_lp(points: np.ndarray, x: np.ndarray) -> bool:
    """Is ``x`` a convex combination of ``points``?  Linear feasibility."""
    n = len(points)
    A = np.vstack([points.T, np.ones(n)])
    b = np.concatenate([x, [1.0]])
    res = linprog(np.zeros(n), A_eq=A, b_eq=b, bounds=[(0, None)] * n, method="highs")
    return res.status == 0


def extreme_points_lp(points: np.ndarray) -> list[int]:
    """Indices of points not in the hull of the others."""
    out = []
    for i in range(len(points)):
        rest = np.delete(points, i, axis=0)
        if not in_hull_lp(rest, points[i]):
            out.append(i)
    return out


def vertices_by_enumeration(N: np.ndarray, c: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Vertices of {x : N x <= c} from all 3-subsets of planes."""
    out = []
    for i, j, k in itertools.combinations(range(len(c)), 3):
        A = N[[i, j, k]]
        if abs(np.linalg.det(A)) < 1e-12:
            continue
        x = np.linalg.solve(A, c[[i, j, k]])
        if (N @ x - c <= tol).all():
            if not any(np.linalg.norm(x - y) < 1e-7 for y in out):
                out.append(x)
    return np.array(out)


def radial_dp(M: float, L: float, N: int, step: float = 0.002, qmax: float = 10.0, iters: int = 60):
    """Slope-space dynamic programme for the radial problem.

    Slopes take values in {0} u [1, qmax] on a grid of ``step``.  Cell ``i``
    costs ``w_i / (1 + q^2)``; slopes must be non-decreasing outward; the height
    budget is handled by a Lagrange multiplier found by bisection.
    Returns (resistance, height used).
    """
    S = np.concatenate([[0.0], np.arange(1.0, qmax + step / 2, step)])
    h = L / N
    r = np.linspace(0.0, L, N + 1)
    w = 0.5 * (r[1:] ** 2 - r[:-1] ** 2)
    base = 1.0 / (1.0 + S * S)

    K = len(S)
    ar = np.arange(K)

    def run(lam):
        # backward pass over cells; W[k], H[k]: cost and height of the best tail with q_i = S[k]
        W = np.zeros(K)
        H = np.zeros(K)
        for i in range(N - 1, -1, -1):
            if i < N - 1:
                # best tail with slope index >= k (suffix minimum and its position)
                rev = W[::-1]
                m = np.minimum.accumulate(rev)
                pos = np.maximum.accumulate(np.where(rev <= m, ar, 0))
                at = (K - 1 - pos)[::-1]
                tailW, tailH = W[at], H[at]
            else:
                tailW = tailH = 0.0
            W = w[i] * base + lam * h * S + tailW
            H = h * S + tailH
        k = int(np.argmin(W))
        return float(W[k] - lam * H[k]), float(H[k])

    lo, hi = 0.0, 1.0
    while run(hi)[1] > M:
        hi *= 2
    best = run(hi)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        res = run(mid)
        if res[1] <= M:
            hi, best = mid, res
        else:
            lo = mid
    return best


def concave_majorant_lp(points: np.ndarray, values: np.ndarray, x: np.ndarray) -> float:
    """Least concave majorant at ``x``: max sum l_j u_j over l >= 0, sum l = 1, sum l_j p_j = x."""
    n = len(points)
    A = np.vstack([points.T, np.ones(n)])
    b = np.concatenate([x, [1.0]])
    res = linprog(-values, A_eq=A, b_eq=b, bounds=[(0, None)] * n, method="highs")
    return float(-res.fun)
