"""Numerical tolerances.

Geometric tolerances are absolute at unit scale; geometry routines multiply
them by the diameter of the body they act on.
"""
from __future__ import annotations

from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class Tolerances:
    plane: float = 1e-9  # coplanar merge / on-plane test
    strict: float = 1e-10  # strict-interior and visibility tests
    sing: float = 0.15  # radians; normal-cone diameter above which a point is singular
    normal: float = 1e-9  # radians; atom merging in surface measures
    closure: float = 1e-9  # relative to total area
    conc: float = 1e-9  # least-concave-majorant residual
    top: float = 1e-6  # relative to M; top-set threshold
    crease: float = 0.2  # radians; gradient jump marking a crease

    def override(self, **kw) -> "Tolerances":
        known = {f.name for f in fields(self)}
        bad = set(kw) - known
        if bad:
            raise KeyError(f"unknown tolerance(s): {sorted(bad)}")
        return replace(self, **{k: float(v) for k, v in kw.items()})


DEFAULT = Tolerances()
