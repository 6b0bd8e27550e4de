"""Command-line front end.

Every command writes its artifacts into ``--out`` together with a
``manifest.json`` holding the sha256 of each file.  Settings resolve as
built-in defaults < JSON config (``--config``) < explicit flags; the seed
falls back to ``RESIST_SEED`` when neither gives one.

Exit codes: 0 success, 1 a requested verification failed, 2 bad
configuration or input.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from .config import DEFAULT, Tolerances
from .errors import ConfigError, ResistError, VerificationFailure

COMMANDS = ("solve-radial", "solve-2d", "stretch", "verify", "probe")

# defaults per command; keys double as the accepted config keys
_COMMON = {"law": "classical", "seed": None, "out": "out", "tol": {}, "check": False}
DEFAULTS = {
    "solve-radial": {"M": 1.0, "L": 1.0, "N": 2000, "delta": 0.05, "rings": 40},
    "solve-2d": {"omega": "disc:1:64", "M": 1.5, "rings": 16, "seeds": 2, "iters": 40, "N": 2000},
    "stretch": {"body": "cube", "apex": "0.5,0.5,1.5", "s": "0:0.1:1", "frames": False},
    "verify": {"suite": "all"},
    "probe": {"field": None, "M": 1.0, "omega": "disc:1:64", "rings": 20, "x0": "0,0", "taus": "1,0.1,0.01"},
}
_POSITIVE = {"M", "L", "N", "delta", "rings", "seeds", "iters"}


def parse_grid(spec: str) -> np.ndarray:
    """Inclusive ``a:step:b`` grid (or a single number)."""
    parts = spec.split(":")
    try:
        if len(parts) == 1:
            return np.array([float(parts[0])])
        a, step, b = (float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"bad grid {spec!r}; expected a:step:b") from None
    if step <= 0 or b < a:
        raise ConfigError(f"bad grid {spec!r}")
    n = int(np.floor((b - a) / step + 1e-9)) + 1
    g = a + step * np.arange(n)
    if abs(g[-1] - b) <= 1e-9 * max(1.0, abs(b)):
        g[-1] = b
    return g


def _floats(spec: str, n: int | None = None, what: str = "value") -> np.ndarray:
    try:
        v = np.array([float(x) for x in str(spec).split(",")])
    except ValueError:
        raise ConfigError(f"bad {what} {spec!r}") from None
    if n is not None and len(v) != n:
        raise ConfigError(f"{what} needs {n} comma-separated numbers")
    return v


# ------------------------------------------------------------------ config


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=S, help="JSON file with settings (flags win)")
    common.add_argument("--out", default=S, help="output directory")
    common.add_argument("--seed", type=int, default=S)
    common.add_argument("--law", default=S, help="registered law name or a theta,phi,p CSV")
    common.add_argument("--tol", action="append", default=S, metavar="KEY=VALUE", help="tolerance override")
    common.add_argument("--check", action="store_true", default=S, help="fail (exit 1) if a verification misses")

    p = argparse.ArgumentParser(prog="resist", description="Minimal-resistance solvers and nose-stretching checks.")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("solve-radial", parents=[common], help="optimal radial profile")
    a.add_argument("--M", type=float, default=S)
    a.add_argument("--L", type=float, default=S)
    a.add_argument("--N", type=int, default=S)
    a.add_argument("--delta", type=float, default=S, help="forbidden-band margin")
    a.add_argument("--rings", type=int, default=S, help="rings of the 2-D mesh used for the reports")

    b = sub.add_parser("solve-2d", parents=[common], help="heightfield descent on a polygon")
    b.add_argument("--omega", default=S, help="disc:R:n or poly:x1,y1;x2,y2;...")
    b.add_argument("--M", type=float, default=S)
    b.add_argument("--rings", type=int, default=S)
    b.add_argument("--seeds", type=int, default=S)
    b.add_argument("--iters", type=int, default=S)
    b.add_argument("--N", type=int, default=S, help="radial grid for the seed profile")

    c = sub.add_parser("stretch", parents=[common], help="nose-stretching family")
    c.add_argument("--body", default=S, help="cube, tetra, or an OFF/OBJ file")
    c.add_argument("--apex", default=S, help="x,y,z")
    c.add_argument("--s", default=S, help="grid a:step:b")
    c.add_argument("--frames", action="store_true", default=S, help="also write C(s) as OFF frames")

    d = sub.add_parser("verify", parents=[common], help="property suites")
    d.add_argument("--suite", default=S, choices=["appendix", "nose", "multi", "all"])

    e = sub.add_parser("probe", parents=[common], help="second-variation probe")
    e.add_argument("--field", default=S, help="heightfield OFF (with JSON sidecar); default is a cap")
    e.add_argument("--M", type=float, default=S, help="cap height when no field is given")
    e.add_argument("--omega", default=S)
    e.add_argument("--rings", type=int, default=S)
    e.add_argument("--x0", default=S, help="x,y")
    e.add_argument("--taus", default=S, help="comma-separated schedule")
    return p


def resolve(ns: argparse.Namespace, environ=os.environ) -> dict:
    """Merge defaults, config file and flags into one settings dict."""
    given = dict(vars(ns))
    cmd = given.pop("command")
    cfg_path = given.pop("config", None)
    cfg: dict = {}
    if cfg_path is not None:
        try:
            cfg = json.loads(Path(cfg_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {cfg_path}: {exc}") from None
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
        if cfg.pop("command", cmd) != cmd:
            raise ConfigError("config is for a different command")
    allowed = {**_COMMON, **DEFAULTS[cmd]}
    unknown = sorted(set(cfg) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    out = {**allowed, **cfg, **given}
    out["command"] = cmd
    if out["seed"] is None:
        env = environ.get("RESIST_SEED")
        try:
            out["seed"] = int(env) if env is not None else 0
        except ValueError:
            raise ConfigError(f"RESIST_SEED={env!r} is not an integer") from None
    tol = out["tol"]
    if isinstance(tol, list):
        pairs = {}
        for item in tol:
            k, sep, v = item.partition("=")
            if not sep:
                raise ConfigError(f"tolerance override {item!r} is not KEY=VALUE")
            pairs[k] = v
        tol = pairs
    try:
        out["tolerances"] = DEFAULT.override(**tol)
    except (KeyError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    out["tol"] = {k: float(v) for k, v in tol.items()}
    for k in _POSITIVE & set(out):
        if not (isinstance(out[k], (int, float)) and out[k] > 0):
            raise ConfigError(f"{k} must be positive")
    return out


# ------------------------------------------------------------------ output


class Output:
    def __init__(self, root) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.files: list[Path] = []

    def text(self, name: str, content: str) -> Path:
        p = self.root / name
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(content)
        self.files.append(p)
        return p

    def json(self, name: str, obj) -> Path:
        return self.text(name, json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def add(self, *paths) -> None:
        self.files.extend(Path(p) for p in paths)

    def manifest(self, settings: dict) -> Path:
        entries = []
        for p in sorted(set(self.files)):
            entries.append({"file": str(p.relative_to(self.root)), "sha256": hashlib.sha256(p.read_bytes()).hexdigest()})
        meta = {k: v for k, v in settings.items() if k != "tolerances"}
        return self.text("manifest.json", json.dumps({"settings": meta, "files": entries}, indent=2, sort_keys=True) + "\n")


def _law(settings):
    from .measure import get_law

    try:
        return get_law(settings["law"])
    except KeyError as exc:
        raise ConfigError(str(exc)) from None


def _omega(spec):
    from .newton.field import parse_omega

    try:
        return parse_omega(spec)
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"bad domain {spec!r}: {exc}") from None


def _body(spec: str):
    from .convex.meshio import load_polytope
    from .convex.shapes import cube, regular_tetrahedron

    if spec == "cube":
        return cube()
    if spec in ("tetra", "tetrahedron"):
        return regular_tetrahedron()
    path = Path(spec)
    if not path.exists():
        raise ConfigError(f"no such body file {spec!r}")
    return load_polytope(path)


# ------------------------------------------------------------------ commands


def cmd_solve_radial(st: dict, out: Output) -> list[str]:
    from .newton.field import embed_radial, regular_polygon, sector_mesh, aligned_rings
    from .newton.radial import resistance_radial, solve_radial
    from .newton.verify import verify_P2, verify_P4_P5

    prof = solve_radial(st["M"], st["L"], int(st["N"]))
    R = resistance_radial(prof)
    mesh = sector_mesh(regular_polygon(st["L"], 64), int(st["rings"]), aligned_rings(int(st["rings"]), prof.flat_radius / st["L"]))
    u = embed_radial(prof, mesh)
    p2 = verify_P2(u, st["delta"])
    p45 = verify_P4_P5(u, st["tolerances"])
    out.text("profile.csv", prof.to_csv())
    report = {
        "resistance": R,
        "flat_radius": prof.flat_radius,
        "P2": {"delta": p2.delta, "triangle_fraction": p2.fraction, "area_fraction": p2.area_fraction},
        "P4": {"top_diameter": p45.top_diameter, "top_area": p45.top_area, "spacing": p45.spacing, "ok": p45.top_ok},
        "P5": {"boundary_max": p45.boundary_max},
    }
    out.json("result.json", report)
    print(f"resistance {R:.12g}")
    fails = []
    if p2.fraction > 0.02:
        fails.append(f"P2 band fraction {p2.fraction:.4f} > 0.02")
    if p45.boundary_max > 1e-9:
        fails.append(f"P5 boundary value {p45.boundary_max:.3e}")
    if not p45.top_ok:
        fails.append("P4 top set too small")
    return fails


def cmd_solve_2d(st: dict, out: Output) -> list[str]:
    from .newton.field import HeightField
    from .newton.solve2d import solve_2d
    from .newton.verify import verify_detD2

    omega = _omega(st["omega"])
    res = solve_2d(_law(st), omega, st["M"], int(st["rings"]), int(st["seeds"]), st["seed"], int(st["iters"]), int(st["N"]))
    m = res.field.mesh
    c = omega.mean(axis=0)
    r2 = ((m.points - c) ** 2).sum(axis=1) / ((omega - c) ** 2).sum(axis=1).max()
    cap = HeightField(m, res.field.M, res.field.M * (1.0 - r2))
    det = verify_detD2(res.field, tol=st["tolerances"])
    det_cap = verify_detD2(cap, tol=st["tolerances"])
    ratio = det.median / det_cap.median
    out.add(*res.field.save(out.root / "field.off"))
    out.text("trace.csv", res.trace.to_csv())
    out.json(
        "result.json",
        {
            "objective": res.objective,
            "radial_objective": res.radial_objective,
            "seed_objectives": res.seed_objectives,
            "winner": res.winner,
            "det_median": det.median,
            "cap_det_median": det_cap.median,
            "det_ratio": ratio,
            "det_count": det.count,
        },
    )
    print(f"objective {res.objective:.12g} (radial {res.radial_objective:.12g}); det ratio {ratio:.4g}")
    fails = []
    if not ratio <= 0.1:
        fails.append(f"det ratio {ratio:.4g} > 0.1")
    if res.objective > res.radial_objective:
        fails.append("objective above the radial embedding")
    return fails


def cmd_stretch(st: dict, out: Output) -> list[str]:
    from .measure import closure_defect
    from .nose import decompose, export_frames, resistance_along_family

    C = _body(st["body"])
    O = _floats(st["apex"], 3, "apex")
    grid = parse_grid(st["s"])
    if grid.min() < 0 or grid.max() > 1:
        raise ConfigError("s grid must lie in [0, 1]")
    tol: Tolerances = st["tolerances"]
    D = decompose(C, O, tol)
    t = resistance_along_family(_law(st), C, O, grid, tol)
    out.text("family.csv", t.to_csv())
    if st["frames"]:
        out.add(*export_frames(C, O, grid, out.root / "frames", tol))
    area = C.area
    out.json(
        "result.json",
        {
            "near_facets": [int(f) for f in D.near],
            "derivative": D.derivative(_law(st)),
            "intercept": t.intercept,
            "slope": t.slope,
            "max_residual": t.max_residual,
            "max_closure_defect": float(t.closure.max()),
            "closure_C": closure_defect(D.nu_C) / area,
        },
    )
    print(f"slope {t.slope:.12g}  affine residual {t.max_residual:.3e}")
    fails = []
    if t.max_residual > 1e-9:
        fails.append(f"affine residual {t.max_residual:.3e} > 1e-9")
    if t.closure.max() > tol.closure:
        fails.append(f"closure defect {t.closure.max():.3e}")
    return fails


def cmd_verify(st: dict, out: Output) -> list[str]:
    from .suites import run_suite

    fails = []
    for res in run_suite(st["suite"], st["seed"]):
        out.text(f"suite_{res.name}.csv", res.to_csv())
        print(f"{res.name}: {'pass' if res.passed else 'FAIL'}")
        fails += [f"{res.name}/{r[0]}/{r[1]} = {r[2]:.3e}" for r in res.rows if not r[4]]
    return fails


def cmd_probe(st: dict, out: Output) -> list[str]:
    from .newton.field import HeightField, sector_mesh
    from .newton.probe import second_variation_probe

    if st["field"]:
        u = HeightField.load(st["field"])
    else:
        omega = _omega(st["omega"])
        m = sector_mesh(omega, int(st["rings"]))
        c = omega.mean(axis=0)
        # cap 1 - r^2/2 scaled to height M
        u = HeightField(m, 2.0 * st["M"], st["M"] * (1.0 - 0.5 * ((m.points - c) ** 2).sum(axis=1)))
    rep = second_variation_probe(_law(st), u, _floats(st["x0"], 2, "x0"), _floats(st["taus"], None, "taus"), tol=st["tolerances"])
    out.json(
        "probe.json",
        {
            "x0": rep.x0.tolist(),
            "grad_u": rep.grad_u.tolist(),
            "hess_u": rep.hess_u.tolist(),
            "eig_g": list(rep.eig_g),
            "taus": rep.taus.tolist(),
            "Q": rep.Q.tolist(),
            "I1": rep.I1.tolist(),
            "I2": rep.I2.tolist(),
            "I2_slope": rep.I2_slope,
            "verdict": rep.verdict,
            "notes": rep.notes,
        },
    )
    print(f"verdict {rep.verdict}; Q = {', '.join('%.4g' % q for q in rep.Q)}")
    return []


HANDLERS = {
    "solve-radial": cmd_solve_radial,
    "solve-2d": cmd_solve_2d,
    "stretch": cmd_stretch,
    "verify": cmd_verify,
    "probe": cmd_probe,
}


def run(settings: dict) -> int:
    """Execute one resolved command; raises VerificationFailure on a missed check."""
    out = Output(settings["out"])
    fails = HANDLERS[settings["command"]](settings, out)
    out.manifest(settings)
    # suites are verifications by nature; other commands only on request
    if fails and (settings["check"] or settings["command"] == "verify"):
        raise VerificationFailure("; ".join(fails))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return run(resolve(ns))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except VerificationFailure as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return 1
    except ResistError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
