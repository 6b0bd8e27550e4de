"""Seeded problem instances and verification suites shared by the CLI and tests."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT, Tolerances
from .convex.polytope import Polytope
from .convex.shapes import cube, random_polytope
from .measure import get_law
from .nose import (
    NoseFamily,
    check_cone_disjointness,
    derivative_check,
    family_measure_check,
    hull_union_check,
    measure_multi_check,
    resistance_along_family,
)

CUBE_APEX = np.array([0.5, 0.5, 1.5])


def random_apex(C: Polytope, rng: np.random.Generator, upward: bool = True) -> np.ndarray:
    """Point outside ``C`` along a random direction, 1.2-2 times the support distance."""
    while True:
        d = rng.normal(size=3)
        if upward:
            d[2] = abs(d[2]) + 0.3
        d /= np.linalg.norm(d)
        h = float((C.vertices - C.centroid).dot(d).max())
        O = C.centroid + rng.uniform(1.2, 2.0) * h * d
        if C.signed_distances(O).max() > 1e-3 * C.diameter:
            return O


def nose_instances(seed: int = 0, k: int = 5) -> list[tuple[str, Polytope, np.ndarray]]:
    """The unit cube with apex over its top and ``k`` random polytopes with random apexes."""
    out = [("cube", cube(), CUBE_APEX.copy())]
    rng = np.random.default_rng(seed)
    for i in range(k):
        C = random_polytope(20, rng)
        out.append((f"random{i}", C, random_apex(C, rng)))
    return out


def _facet_apex(C: Polytope, f: int, frac: float) -> np.ndarray:
    poly = C.facet_polygon(f)
    ctr = poly.mean(axis=0)
    r = float(np.linalg.norm(poly - ctr, axis=1).min())
    return ctr + frac * r * C.normals[f]


def two_apex_cube() -> NoseFamily:
    C = cube()
    return NoseFamily(C, [[0.5, 0.5, 1.5], [0.5, 0.5, -0.5]], [0.5, 0.5])


def random_family(rng: np.random.Generator, tol: Tolerances = DEFAULT, tries: int = 200) -> NoseFamily:
    """Two apexes over vertex-disjoint facets of a random polytope, satisfying the segment hypothesis.

    The near sets of the two apexes are also required to share no vertex.
    """
    for _ in range(tries):
        C = random_polytope(20, rng)
        f1, f2 = rng.choice(len(C.loops), size=2, replace=False)
        if set(C.loops[f1]) & set(C.loops[f2]):
            continue
        frac = rng.uniform(0.1, 0.4)
        O = [_facet_apex(C, int(f1), frac), _facet_apex(C, int(f2), frac)]
        try:
            fam = NoseFamily(C, O, rng.uniform(0.2, 1.0, size=2), tol)
        except Exception:
            continue
        if not fam.hypothesis_ok:
            continue
        v1 = {v for f in fam.decompositions[0].near for v in C.loops[f]}
        v2 = {v for f in fam.decompositions[1].near for v in C.loops[f]}
        if v1 & v2:
            continue
        return fam
    raise RuntimeError("could not draw an admissible family")


def appendix_families(seed: int = 7, k: int = 3) -> list[tuple[str, NoseFamily]]:
    rng = np.random.default_rng(seed)
    out = [("cube2", two_apex_cube())]
    out += [(f"random{i}", random_family(rng)) for i in range(k)]
    return out


@dataclass
class SuiteResult:
    name: str
    passed: bool
    rows: list = field(default_factory=list)  # (instance, check, value, threshold, ok)

    def add(self, inst: str, check: str, value: float, threshold: float, ok: bool | None = None) -> None:
        ok = bool(value <= threshold) if ok is None else bool(ok)
        self.rows.append((inst, check, float(value), float(threshold), ok))
        self.passed = self.passed and ok

    def to_csv(self) -> str:
        lines = ["instance,check,value,threshold,ok"]
        lines += ["%s,%s,%.17g,%.17g,%d" % r for r in self.rows]
        return "\n".join(lines) + "\n"


def appendix_suite(seed: int = 7, samples: int = 10_000) -> SuiteResult:
    res = SuiteResult("appendix", True)
    for name, fam in appendix_families(seed):
        u = hull_union_check(fam, samples, seed)
        res.add(name, "hull_union_violations", u.violations, 0)
        d = check_cone_disjointness(fam, samples, seed)
        res.add(name, "hypothesis", 0 if d.hypothesis_ok else 1, 0)
        res.add(name, "near_segment_violations", d.near_violations, 0)
        res.add(name, "tangent_segment_violations", d.tangent_violations, 0)
    return res


def nose_suite(seed: int = 0) -> SuiteResult:
    res = SuiteResult("nose", True)
    grid = np.linspace(0.0, 1.0, 11)
    laws = [get_law("classical"), get_law("area")]
    for name, C, O in nose_instances(seed):
        r = family_measure_check(C, O, grid)
        res.add(name, "measure_deviation", r.max_deviation, 1e-8)
        res.add(name, "closure_defect", r.closure.max(), 1e-9)
        for law in laws:
            t = resistance_along_family(law, C, O, grid)
            res.add(name, f"affine_residual_{law.name}", t.max_residual, 1e-9)
            dc = derivative_check(law, C, O)
            res.add(name, f"derivative_{law.name}", dc.rel_error, 1e-5)
    return res


def multi_suite(seed: int = 7) -> SuiteResult:
    res = SuiteResult("multi", True)
    law = get_law("classical")
    for name, fam in appendix_families(seed):
        r = measure_multi_check(fam, law)
        res.add(name, "multi_measure_deviation", r.max_measure_deviation, 1e-8)
        res.add(name, "multi_F_deviation", r.max_F_deviation, 1e-8)
    return res


SUITES = {"appendix": appendix_suite, "nose": nose_suite, "multi": multi_suite}


def run_suite(name: str, seed: int) -> list[SuiteResult]:
    names = list(SUITES) if name == "all" else [name]
    out = []
    for n in names:
        if n not in SUITES:
            raise KeyError(n)
        out.append(SUITES[n](seed))
    return out
