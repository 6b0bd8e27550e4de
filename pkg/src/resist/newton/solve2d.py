"""Local descent for the heightfield problem on a polygon.

Moves (each followed by concave re-projection, accepted only if the
objective strictly drops):

* ``gradient`` -- a step along the mass-lumped negative gradient;
* ``apex``     -- raise one vertex toward M, i.e. replace the field by the
  majorant of its graph and one external point (the heightfield analogue of a
  full nose stretch);
* ``perturb``  -- a random single-vertex move of size ``delta``.

Objectives are taken on the concave surface the samples define, not on the
fixed mesh; otherwise the descent learns to fold the mesh interpolant convexly
between vertices whose majorant is concave.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from ..measure import PressureLaw
from .field import (
    HeightField,
    Mesh,
    aligned_rings,
    embed_radial,
    objective_and_gradient,
    project_concave,
    regular_polygon,
    resistance_2d,
    sector_mesh,
    surface_objective,
)
from .radial import solve_radial


@dataclass
class SolveTrace:
    rows: list = field(default_factory=list)  # (iteration, objective, step)

    def add(self, it: int, F: float, step: str) -> None:
        self.rows.append((it, F, step))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("iteration,objective,step\n")
        for it, F, st in self.rows:
            buf.write("%d,%.17g,%s\n" % (it, F, st))
        return buf.getvalue()


@dataclass
class SolveResult:
    field: HeightField
    objective: float
    trace: SolveTrace
    seed_objectives: list
    radial_objective: float
    winner: int


def _lumped_mass(mesh: Mesh) -> np.ndarray:
    m = np.zeros(len(mesh.points))
    np.add.at(m, mesh.tris.ravel(), np.repeat(mesh.areas / 3.0, 3))
    return m


def descend(
    law: PressureLaw,
    u: HeightField,
    rng: np.random.Generator,
    max_iter: int = 200,
    apex_tries: int = 20,
    perturb_tries: int = 20,
    delta: float | None = None,
    trace: SolveTrace | None = None,
    moves: tuple = ("gradient", "apex", "perturb"),
) -> tuple[HeightField, float, SolveTrace]:
    mesh, M = u.mesh, u.M
    def propose(trial) -> tuple[np.ndarray, float]:
        v = project_concave(trial, mesh, M).values
        return v, surface_objective(law, mesh, v)

    tr = trace if trace is not None else SolveTrace()
    mass = _lumped_mass(mesh)
    free = ~mesh.boundary
    delta = 0.05 * M if delta is None else delta
    cur = u.values.copy()
    F = surface_objective(law, mesh, cur)
    tr.add(0, F, "init")
    alpha = 0.1
    it = 0
    while it < max_iter:
        it += 1
        moved = False
        # gradient step with backtracking
        _, g = objective_and_gradient(law, mesh, cur)
        d = -g / mass
        d[~free] = np.minimum(d[~free], 0.0)
        a = alpha
        for _ in range(12 if "gradient" in moves else 0):
            cand, Fc = propose(cur + a * d)
            if Fc < F:
                cur, F = cand, Fc
                tr.add(it, F, "gradient")
                moved = True
                alpha = min(2 * a, 1.0)
                break
            a *= 0.5
        else:
            alpha = max(a, 1e-6)
        # apex insertion: lift a vertex to the bound or by delta
        n_apex = apex_tries if "apex" in moves else 0
        idx = rng.choice(np.nonzero(free)[0], size=min(n_apex, int(free.sum())), replace=False)
        for i in idx:
            for target in (M, min(M, cur[i] + delta)):
                if target <= cur[i]:
                    continue
                trial = cur.copy()
                trial[i] = target
                cand, Fc = propose(trial)
                if Fc < F:
                    cur, F = cand, Fc
                    tr.add(it, F, "apex")
                    moved = True
                    break
        # random single-vertex perturbation
        n_pert = perturb_tries if "perturb" in moves else 0
        idx = rng.choice(len(cur), size=min(n_pert, len(cur)), replace=False)
        for i in idx:
            trial = cur.copy()
            trial[i] += delta * rng.choice((-1.0, 1.0))
            cand, Fc = propose(trial)
            if Fc < F:
                cur, F = cand, Fc
                tr.add(it, F, "perturb")
                moved = True
        if not moved:
            delta *= 0.5
            if delta < 1e-6 * M:
                break
    return HeightField(mesh, M, cur, u.seed), F, tr


def symmetry_images(mesh: Mesh) -> list[np.ndarray]:
    """Vertex permutations induced by the symmetries of a square-like sector mesh.

    Only symmetries mapping the vertex set onto itself (to 1e-9) are returned.
    """
    from scipy.spatial import cKDTree

    P = mesh.points - mesh.omega.mean(axis=0)
    tree = cKDTree(P)
    perms = []
    for k in range(4):
        c, s = np.cos(k * np.pi / 2), np.sin(k * np.pi / 2)
        R = np.array([[c, -s], [s, c]])
        for refl in (np.eye(2), np.diag([1.0, -1.0])):
            Q = P @ (R @ refl).T
            d, j = tree.query(Q)
            if d.max() < 1e-9:
                perms.append(j)
    return perms


def solve_2d(
    law: PressureLaw,
    omega,
    M: float,
    rings: int = 16,
    seeds: int = 2,
    rng_seed: int = 0,
    max_iter: int = 40,
    radial_N: int = 2000,
    apex_tries: int = 8,
    perturb_tries: int = 8,
) -> SolveResult:
    """Multi-start local descent; seed 0 is the embedded radial optimum.

    Other seeds are random concave perturbations of it.  The lowest objective
    wins; ties within 1e-12 go to the lexicographically smaller value vector.
    """
    omega = np.asarray(omega, dtype=float)
    c = omega.mean(axis=0)
    L = float(np.linalg.norm(omega - c, axis=1).max())
    prof = solve_radial(M, L, radial_N)
    mesh = sector_mesh(omega, rings, aligned_rings(rings, prof.flat_radius / L))
    base = embed_radial(prof, mesh)
    base = HeightField(mesh, M, base.values, rng_seed)
    radial_F = resistance_2d(law, base)
    rng = np.random.default_rng(rng_seed)
    starts = [base.values]
    for _ in range(1, seeds):
        noise = rng.normal(scale=0.05 * M, size=len(mesh.points))
        noise[mesh.boundary] = 0.0
        starts.append(project_concave(base.values + noise, mesh, M).values)
    results = []
    for k, v in enumerate(starts):
        sub = np.random.default_rng([rng_seed, k])
        f, F, tr = descend(
            law, HeightField(mesh, M, v, rng_seed), sub, max_iter, apex_tries, perturb_tries
        )
        results.append((F, tuple(np.round(f.values, 12)), k, f, tr))
    results.sort(key=lambda r: (r[0], r[1]))
    best = results[0]
    Fmin = best[0]
    tied = [r for r in results if r[0] - Fmin <= 1e-12 * max(abs(Fmin), 1.0)]
    best = min(tied, key=lambda r: r[1])
    by_k = sorted(results, key=lambda r: r[2])
    return SolveResult(best[3], best[0], best[4], [r[0] for r in by_k], radial_F, best[2])


def disc_problem(M: float, sides: int = 64, R: float = 1.0):
    return regular_polygon(R, sides), M
