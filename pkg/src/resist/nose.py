"""Nose stretching of a polytope toward an external apex.

For an apex ``O`` outside ``C`` the boundary splits into the part seen from
``O`` (near), the rest (far), and the lateral cone ``V`` spanned by ``O`` over
the silhouette.  The stretch family

    C(s) = union over sqrt(1-s) <= lam <= 1 of (lam C + (1 - lam) O)

interpolates between ``C`` and ``Conv(C, O)``.  Its surface measure moves along
the line ``nu_C + s (nu_V - nu_near)``, so every resistance functional is
affine in ``s``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .config import DEFAULT, Tolerances
from .convex.polytope import Polytope, hull3d, intersect_halfspaces
from .convex.predicates import sample_uniform, segment_distances, segment_meets_interior, singular_set
from .errors import ApexInside, FamilyInvariantViolated, ObstacleHit
from .measure import (
    DiscreteSurfaceMeasure,
    PressureLaw,
    atom_deviation,
    closure_defect,
    eval_functional,
    measure_linear_combine,
    measure_of,
    measure_of_triangles,
)

S_NEG_CAP = 0.5


@dataclass(frozen=True, eq=False)
class NoseDecomposition:
    C: Polytope
    O: np.ndarray
    near: tuple[int, ...]
    far: tuple[int, ...]
    silhouette: tuple[tuple[int, int], ...]  # directed edge loop
    V: np.ndarray  # (k, 3, 3) triangles (a, b, O), outward winding
    tol: Tolerances = DEFAULT

    @cached_property
    def V_normals(self) -> np.ndarray:
        cr = np.cross(self.V[:, 1] - self.V[:, 0], self.V[:, 2] - self.V[:, 0])
        return cr / np.linalg.norm(cr, axis=1, keepdims=True)

    @cached_property
    def V_areas(self) -> np.ndarray:
        cr = np.cross(self.V[:, 1] - self.V[:, 0], self.V[:, 2] - self.V[:, 0])
        return 0.5 * np.linalg.norm(cr, axis=1)

    @property
    def area_near(self) -> float:
        return float(self.C.facet_areas[list(self.near)].sum())

    @property
    def area_far(self) -> float:
        return float(self.C.facet_areas[list(self.far)].sum())

    @property
    def area_V(self) -> float:
        return float(self.V_areas.sum())

    @cached_property
    def nu_C(self) -> DiscreteSurfaceMeasure:
        return measure_of(self.C, tol=self.tol)

    @cached_property
    def nu_near(self) -> DiscreteSurfaceMeasure:
        return measure_of(self.C, self.near, tol=self.tol)

    @cached_property
    def nu_far(self) -> DiscreteSurfaceMeasure:
        return measure_of(self.C, self.far, tol=self.tol)

    @cached_property
    def nu_V(self) -> DiscreteSurfaceMeasure:
        return measure_of_triangles(self.V, tol=self.tol)

    @cached_property
    def nu0(self) -> DiscreteSurfaceMeasure:
        """Direction of the stretch family in measure space."""
        return measure_linear_combine([1.0, -1.0], [self.nu_V, self.nu_near], self.tol)

    def derivative(self, law: PressureLaw) -> float:
        return eval_functional(law, self.nu_V) - eval_functional(law, self.nu_near)

    def cone_halfspaces(self) -> tuple[np.ndarray, np.ndarray]:
        N = self.V_normals
        return N, N @ self.O

    def near_halfspaces(self, lam: float) -> tuple[np.ndarray, np.ndarray]:
        idx = list(self.near)
        N = self.C.normals[idx]
        no = N @ self.O
        return N, no + lam * (self.C.offsets[idx] - no)

    def far_halfspaces(self) -> tuple[np.ndarray, np.ndarray]:
        idx = list(self.far)
        return self.C.normals[idx], self.C.offsets[idx]

    def silhouette_points(self) -> np.ndarray:
        return self.C.vertices[[a for a, _ in self.silhouette]]


def decompose(C: Polytope, O, tol: Tolerances = DEFAULT) -> NoseDecomposition:
    """Split ``dC`` into near / far facets and build the tangent cone from ``O``."""
    O = np.asarray(O, dtype=float)
    d = C.signed_distances(O)
    strict = tol.strict * C.diameter
    is_near = d > strict
    if not is_near.any():
        raise ApexInside("apex sees no facet of C")
    near = tuple(int(i) for i in np.nonzero(is_near)[0])
    far = tuple(int(i) for i in np.nonzero(~is_near)[0])

    # silhouette edges, directed as in the near facet's CCW loop
    nxt: dict[int, int] = {}
    for f in near:
        lp = C.loops[f]
        for a, b in zip(lp, lp[1:] + lp[:1]):
            other = [g for g in C.edges[(min(a, b), max(a, b))] if g != f]
            if other and not is_near[other[0]]:
                if a in nxt:
                    raise ApexInside("silhouette is not a simple loop")
                nxt[a] = b
    start = min(nxt)
    loop = []
    a = start
    for _ in range(len(nxt)):
        loop.append((a, nxt[a]))
        a = nxt[a]
        if a == start:
            break
    if a != start or len(loop) != len(nxt):
        raise ApexInside("silhouette is not a single closed loop")

    P = C.vertices
    V = np.array([[P[b], P[a], O] for a, b in loop])
    # orient outward: the interior point must lie on the negative side
    cr = np.cross(V[:, 1] - V[:, 0], V[:, 2] - V[:, 0])
    flip = np.einsum("ij,ij->i", cr, C.centroid - V[:, 0]) > 0
    V[flip] = V[flip][:, [1, 0, 2]]
    return NoseDecomposition(C, O, near, far, tuple(loop), V, tol)


def check_decomposition(D: NoseDecomposition) -> dict:
    """Numerical checks of the decomposition invariants."""
    C = D.C
    scale = C.diameter
    N, c = D.cone_halfspaces()
    support = float((C.vertices @ N.T - c).max()) if len(c) else 0.0
    hull_area = hull3d(np.vstack([C.vertices, D.O]), D.tol).area
    gap = abs(D.area_far + D.area_V - hull_area) / hull_area
    return {
        "support_violation": support / scale,
        "area_identity_rel": gap,
        "partition_ok": set(D.near).isdisjoint(D.far) and len(D.near) + len(D.far) == len(C.loops),
    }


# ---------------------------------------------------------------- obstacles


@dataclass
class Obstacles:
    """Closed sets the dilated near boundary must avoid for negative ``s``."""

    points: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    segments: np.ndarray = field(default_factory=lambda: np.zeros((0, 2, 3)))
    bodies: list = field(default_factory=list)

    @classmethod
    def singular_surrogate(cls, C: Polytope, tol: Tolerances = DEFAULT) -> "Obstacles":
        v, e = singular_set(C, tol)
        return cls(v, e)

    def __bool__(self) -> bool:
        return bool(len(self.points) or len(self.segments) or self.bodies)


def _near_patch_system(D: NoseDecomposition, lam: float, i: int):
    """Inequalities A x <= b describing the dilated near facet ``i`` clipped to C."""
    C = D.C
    n = C.normals[i]
    no = n @ D.O
    ci = no + lam * (C.offsets[i] - no)
    allno = C.normals @ D.O
    A = np.vstack([n, -n, C.normals, C.normals])
    b = np.concatenate([[ci, -ci], allno + lam * (C.offsets - allno), C.offsets])
    return A, b


def _patch_hits(D: NoseDecomposition, lam: float, obs: Obstacles, slack: float) -> bool:
    from scipy.optimize import linprog

    for i in D.near:
        A, b = _near_patch_system(D, lam, i)
        bt = b + slack
        if len(obs.points) and ((obs.points @ A.T <= bt).all(axis=1)).any():
            return True
        for a, e in obs.segments:
            d = e - a
            num = bt - A @ a
            den = A @ d
            lo, hi = 0.0, 1.0
            pos, neg = den > 0, den < 0
            if (num[~pos & ~neg] < 0).any():
                continue
            if pos.any():
                hi = min(hi, float((num[pos] / den[pos]).min()))
            if neg.any():
                lo = max(lo, float((num[neg] / den[neg]).max()))
            if lo <= hi:
                return True
        for body in obs.bodies:
            Ab = np.vstack([A, body.normals])
            bb = np.concatenate([bt, body.offsets + slack])
            res = linprog(np.zeros(3), A_ub=Ab, b_ub=bb, bounds=[(None, None)] * 3, method="highs")
            if res.status == 0:
                return True
    return False


def negative_range(
    D: NoseDecomposition, obstacles: Obstacles | None = None, iters: int = 40
) -> float:
    """Largest ``s_min`` in [0, 0.5] with every s in (-s_min, 0] clear of the obstacles."""
    obs = Obstacles.singular_surrogate(D.C, D.tol) if obstacles is None else obstacles
    slack = D.tol.plane * D.C.diameter
    if _patch_hits(D, 1.0, obs, slack):
        return 0.0
    lo, hi = 0.0, S_NEG_CAP
    if not _patch_hits(D, np.sqrt(1.0 + hi), obs, slack):
        return hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if _patch_hits(D, np.sqrt(1.0 + mid), obs, slack):
            hi = mid
        else:
            lo = mid
    return lo


# ---------------------------------------------------------------- stretching


def _stretch_from(D: NoseDecomposition, s: float, obstacles=None) -> Polytope:
    C = D.C
    if s == 0:
        return C
    if s == 1:
        return hull3d(np.vstack([C.vertices, D.O]), D.tol)
    if s > 1:
        raise ValueError("s must not exceed 1")
    if s < 0 and -s >= negative_range(D, obstacles):
        raise ObstacleHit(f"s = {s} is outside the admissible negative range")
    lam = np.sqrt(1.0 - s)
    parts = [D.far_halfspaces(), D.cone_halfspaces(), D.near_halfspaces(lam)]
    N = np.vstack([p[0] for p in parts])
    c = np.concatenate([p[1] for p in parts])
    return intersect_halfspaces((N, c), D.tol)


def stretch(C: Polytope, O, s: float, obstacles: Obstacles | None = None, tol: Tolerances = DEFAULT) -> Polytope:
    """Body ``C(s)``: ``C`` at s=0, ``Conv(C, O)`` at s=1.

    Negative ``s`` shrinks the near side and is only allowed while the dilated
    near boundary stays clear of ``obstacles`` (default: the numerically
    singular vertices and edges of ``C``).
    """
    return _stretch_from(decompose(C, O, tol), float(s), obstacles)


@dataclass
class FamilyMeasureReport:
    s: np.ndarray
    deviations: np.ndarray
    closure: np.ndarray  # closure defect / area per body

    @property
    def max_deviation(self) -> float:
        return float(self.deviations.max())


def family_measure_check(C: Polytope, O, s_grid, tol: Tolerances = DEFAULT) -> FamilyMeasureReport:
    """Compare the measure of each ``C(s)`` with ``nu_C + s nu0`` atom by atom."""
    D = decompose(C, O, tol)
    s_grid = np.asarray(s_grid, dtype=float)
    dev, clo = [], []
    for s in s_grid:
        body = _stretch_from(D, float(s))
        nu = measure_of(body, tol=tol)
        pred = measure_linear_combine([1.0, s], [D.nu_C, D.nu0], tol)
        dev.append(0.0 if s == 0 else atom_deviation(nu, pred))
        clo.append(closure_defect(nu) / body.area)
    return FamilyMeasureReport(s_grid, np.array(dev), np.array(clo))


@dataclass
class FamilyTable:
    law: str
    s: np.ndarray
    F: np.ndarray
    area_near: np.ndarray
    area_V: np.ndarray
    closure: np.ndarray
    intercept: float
    slope: float
    max_residual: float  # relative to max |F|

    def to_csv(self) -> str:
        lines = ["s,F,area_near,area_V,closure_defect"]
        for row in zip(self.s, self.F, self.area_near, self.area_V, self.closure):
            lines.append(",".join("%.17g" % x for x in row))
        return "\n".join(lines) + "\n"


def _classify_area(D: NoseDecomposition, body: Polytope, lam: float) -> tuple[float, float]:
    eps = D.tol.plane * body.diameter
    Nn, cn = D.near_halfspaces(lam)
    Nv, cv = D.cone_halfspaces()
    Nf, cf = D.far_halfspaces()

    def match(n, c, N, cc):
        return len(N) > 0 and bool(((np.abs(N @ n - 1) <= 1e-9) & (np.abs(cc - c) <= eps)).any())

    a_near = a_v = 0.0
    for n, c, a in zip(body.normals, body.offsets, body.facet_areas):
        if lam > 0 and match(n, c, Nn, cn):
            a_near += a
        elif match(n, c, Nv, cv) and not match(n, c, Nf, cf):
            a_v += a
    return a_near, a_v


def resistance_along_family(law: PressureLaw, C: Polytope, O, s_grid, tol: Tolerances = DEFAULT) -> FamilyTable:
    """Tabulate ``F(dC(s))`` over ``s_grid`` and fit a line through it."""
    D = decompose(C, O, tol)
    s_grid = np.asarray(s_grid, dtype=float)
    F, an, av, cl = [], [], [], []
    for s in s_grid:
        body = _stretch_from(D, float(s))
        nu = measure_of(body, tol=tol)
        F.append(eval_functional(law, nu))
        a, b = _classify_area(D, body, np.sqrt(max(0.0, 1.0 - s)))
        an.append(a)
        av.append(b)
        cl.append(closure_defect(nu))
    F = np.array(F)
    if len(s_grid) >= 2:
        A = np.column_stack([np.ones_like(s_grid), s_grid])
        coef, *_ = np.linalg.lstsq(A, F, rcond=None)
        res = F - A @ coef
        scale = max(np.abs(F).max(), np.finfo(float).tiny)
        intercept, slope, mres = float(coef[0]), float(coef[1]), float(np.abs(res).max() / scale)
    else:
        intercept, slope, mres = float(F[0]), float("nan"), 0.0
    return FamilyTable(law.name, s_grid, F, np.array(an), np.array(av), np.array(cl), intercept, slope, mres)


def stretch_derivative(law: PressureLaw, C: Polytope, O, tol: Tolerances = DEFAULT) -> float:
    """Right derivative of ``s -> F(dC(s))`` at 0, i.e. ``F(V) - F(near)``."""
    return decompose(C, O, tol).derivative(law)


@dataclass
class DerivativeReport:
    analytic: float
    fd: float
    two_sided: bool
    s_min: float
    rel_error: float


def derivative_check(
    law: PressureLaw, C: Polytope, O, h: float = 1e-4, obstacles: Obstacles | None = None, tol: Tolerances = DEFAULT
) -> DerivativeReport:
    """Richardson-extrapolated finite difference of F(dC(s)) against the analytic slope.

    A central difference is used when ``-2h`` is admissible; otherwise the
    one-sided formula ``2 D(h) - D(2h)`` with forward quotients is used and the
    report says so.
    """
    D = decompose(C, O, tol)

    def F(s):
        return eval_functional(law, measure_of(_stretch_from(D, s, obstacles), tol=tol))

    smin = negative_range(D, obstacles)
    exact = D.derivative(law)
    f0 = F(0.0)
    if smin > 2 * h:
        d1 = (F(h) - F(-h)) / (2 * h)
        d2 = (F(2 * h) - F(-2 * h)) / (4 * h)
        fd = (4 * d1 - d2) / 3
        two = True
    else:
        d1 = (F(h) - f0) / h
        d2 = (F(2 * h) - f0) / (2 * h)
        fd = 2 * d1 - d2
        two = False
    # relative error; absolute when the slope itself vanishes
    scale = abs(exact) if abs(exact) > 1e-12 else 1.0
    return DerivativeReport(exact, float(fd), two, smin, abs(fd - exact) / scale)


def stationary_apex(
    law: PressureLaw,
    C: Polytope,
    base,
    direction,
    lo: float,
    hi: float,
    xtol: float = 1e-10,
    tol: Tolerances = DEFAULT,
) -> tuple[np.ndarray, float]:
    """Bisect ``t`` on [lo, hi] so the apex ``base + t direction`` has zero derivative."""
    base = np.asarray(base, dtype=float)
    direction = np.asarray(direction, dtype=float)

    def g(t):
        return stretch_derivative(law, C, base + t * direction, tol)

    glo, ghi = g(lo), g(hi)
    if np.sign(glo) == np.sign(ghi):
        raise ValueError("derivative does not change sign on the bracket")
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if gm == 0:
            lo = hi = mid
            break
        if np.sign(gm) == np.sign(glo):
            lo, glo = mid, gm
        else:
            hi = mid
    t = 0.5 * (lo + hi)
    return base + t * direction, t


# ---------------------------------------------------------------- multi-nose


@dataclass(eq=False)
class NoseFamily:
    """Base body with finitely many apexes and one stretch parameter per apex."""

    C: Polytope
    apexes: np.ndarray
    s: np.ndarray | None = None
    tol: Tolerances = DEFAULT

    def __post_init__(self):
        self.apexes = np.asarray(self.apexes, dtype=float).reshape(-1, 3)
        k = len(self.apexes)
        if k == 0:
            raise FamilyInvariantViolated("family needs at least one apex")
        self.s = np.zeros(k) if self.s is None else np.asarray(self.s, dtype=float).reshape(-1)
        if len(self.s) != k:
            raise FamilyInvariantViolated("one parameter per apex required")
        if (self.s < 0).any() or (self.s > 1).any():
            raise FamilyInvariantViolated("parameters must lie in [0, 1]")
        eps = self.tol.plane * self.C.diameter
        for i, j in itertools.combinations(range(k), 2):
            if np.linalg.norm(self.apexes[i] - self.apexes[j]) <= eps:
                raise FamilyInvariantViolated(f"apexes {i} and {j} coincide")
        self.decompositions = [decompose(self.C, O, self.tol) for O in self.apexes]

    def with_s(self, s) -> "NoseFamily":
        return NoseFamily(self.C, self.apexes, np.asarray(s, dtype=float), self.tol)

    @cached_property
    def hypothesis_failures(self) -> list[tuple[int, int]]:
        """Apex pairs whose open segment misses int C."""
        k = len(self.apexes)
        return [
            (i, j)
            for i, j in itertools.combinations(range(k), 2)
            if not segment_meets_interior(self.C, (self.apexes[i], self.apexes[j]), self.tol)
        ]

    @property
    def hypothesis_ok(self) -> bool:
        return not self.hypothesis_failures

    def require(self) -> None:
        if not self.hypothesis_ok:
            raise FamilyInvariantViolated(f"open apex segments miss int C: {self.hypothesis_failures}")

    def bodies(self) -> list[Polytope]:
        return [_stretch_from(D, float(si)) for D, si in zip(self.decompositions, self.s)]


def multi_stretch(family: NoseFamily) -> Polytope:
    """Hull of the union of the single-apex stretches ``C_i(s_i)``."""
    family.require()
    bodies = family.bodies()
    if len(bodies) == 1:
        return bodies[0]
    return hull3d(np.vstack([b.vertices for b in bodies]), family.tol)


@dataclass
class UnionReport:
    samples: int
    violations: int
    max_excess: float  # largest distance outside every C_i(s_i), relative to diameter


def hull_union_check(family: NoseFamily, n: int = 10_000, seed: int = 0) -> UnionReport:
    """Sample the hull uniformly and test membership in at least one ``C_i(s_i)``."""
    family.require()
    rng = np.random.default_rng(seed)
    H = multi_stretch(family)
    X = sample_uniform(H, n, rng)
    bodies = family.bodies()
    eps = family.tol.plane * H.diameter
    excess = np.full(n, np.inf)
    for b in bodies:
        excess = np.minimum(excess, b.signed_distances(X).max(axis=1))
    bad = int((excess > eps).sum())
    return UnionReport(n, bad, float(max(excess.max(), 0.0) / H.diameter))


@dataclass
class DisjointnessReport:
    hypothesis_ok: bool
    hypothesis_failures: list
    pairs_sampled: int
    near_violations: int
    tangent_violations: int
    min_near_distance: float
    min_tangent_distance: float

    @property
    def ok(self) -> bool:
        return self.hypothesis_ok and self.near_violations == 0 and self.tangent_violations == 0


def _sample_near(D: NoseDecomposition, n: int, rng) -> np.ndarray:
    C = D.C
    tris = [(lp[0], lp[k], lp[k + 1]) for f in D.near for lp in [C.loops[f]] for k in range(1, len(lp) - 1)]
    T = C.vertices[np.array(tris)]
    area = 0.5 * np.linalg.norm(np.cross(T[:, 1] - T[:, 0], T[:, 2] - T[:, 0]), axis=1)
    pick = rng.choice(len(T), size=n, p=area / area.sum())
    w = rng.dirichlet(np.ones(3), size=n)
    return np.einsum("ij,ijk->ik", w, T[pick])


def _sample_silhouette(D: NoseDecomposition, n: int, rng) -> np.ndarray:
    P = D.C.vertices
    a = P[[e[0] for e in D.silhouette]]
    b = P[[e[1] for e in D.silhouette]]
    length = np.linalg.norm(b - a, axis=1)
    pick = rng.choice(len(a), size=n, p=length / length.sum())
    t = rng.random(n)[:, None]
    return a[pick] + t * (b[pick] - a[pick])


def check_cone_disjointness(family: NoseFamily, n: int = 10_000, seed: int = 0) -> DisjointnessReport:
    """Sampled test that near segments and tangent segments of different apexes never meet."""
    fails = family.hypothesis_failures
    if fails:
        return DisjointnessReport(False, fails, 0, 0, 0, float("nan"), float("nan"))
    rng = np.random.default_rng(seed)
    eps = family.tol.strict * family.C.diameter
    k = len(family.apexes)
    pairs = list(itertools.combinations(range(k), 2))
    per = max(1, n // max(1, len(pairs)))
    nv = tv = 0
    mn = mt = np.inf
    for i, j in pairs:
        Di, Dj = family.decompositions[i], family.decompositions[j]
        Oi = np.broadcast_to(Di.O, (per, 3))
        Oj = np.broadcast_to(Dj.O, (per, 3))
        dn = segment_distances(Oi, _sample_near(Di, per, rng), Oj, _sample_near(Dj, per, rng))
        dt = segment_distances(Oi, _sample_silhouette(Di, per, rng), Oj, _sample_silhouette(Dj, per, rng))
        nv += int((dn <= eps).sum())
        tv += int((dt <= eps).sum())
        mn = min(mn, float(dn.min()))
        mt = min(mt, float(dt.min()))
    return DisjointnessReport(True, [], per * len(pairs), nv, tv, mn, mt)


@dataclass
class MultiMeasureReport:
    grid: list
    measure_deviation: np.ndarray
    F_deviation: np.ndarray

    @property
    def max_measure_deviation(self) -> float:
        return float(self.measure_deviation.max())

    @property
    def max_F_deviation(self) -> float:
        return float(self.F_deviation.max())


def measure_multi_check(family: NoseFamily, law: PressureLaw, values=(0.0, 0.5, 1.0)) -> MultiMeasureReport:
    """Check ``nu(C(s)) = nu_C + sum s_i nu0_i`` and the matching F identity on a grid."""
    family.require()
    tol = family.tol
    k = len(family.apexes)
    Ds = family.decompositions
    nu_C = Ds[0].nu_C
    F_C = eval_functional(law, nu_C)
    grid, mdev, fdev = [], [], []
    for s in itertools.product(values, repeat=k):
        s = np.array(s, dtype=float)
        body = multi_stretch(family.with_s(s))
        nu = measure_of(body, tol=tol)
        pred = measure_linear_combine([1.0, *s], [nu_C] + [D.nu0 for D in Ds], tol)
        F_pred = F_C + sum(si * D.derivative(law) for si, D in zip(s, Ds))
        F_act = eval_functional(law, nu)
        grid.append(tuple(s))
        mdev.append(atom_deviation(nu, pred))
        fdev.append(abs(F_act - F_pred) / max(abs(F_pred), 1.0))
    return MultiMeasureReport(grid, np.array(mdev), np.array(fdev))


def export_frames(C: Polytope, O, s_grid, outdir, tol: Tolerances = DEFAULT) -> list:
    """Write ``C(s)`` for each s as an OFF frame; returns the paths."""
    from pathlib import Path

    from .convex.meshio import write_off

    D = decompose(C, O, tol)
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for k, s in enumerate(s_grid):
        p = out / f"frame_{k:04d}.off"
        write_off(p, _stretch_from(D, float(s)))
        paths.append(p)
    return paths
