import json

import numpy as np
import pytest

from oracles import concave_majorant_lp
from resist.errors import InvalidField
from resist.measure import get_law
from resist.newton.field import (
    HeightField,
    aligned_rings,
    concave_surface,
    embed_radial,
    least_concave_majorant,
    mesh_objective,
    parse_omega,
    polygon_area,
    project_concave,
    regular_polygon,
    resistance_2d,
    sector_mesh,
    surface_objective,
)
from resist.newton.radial import RadialProfile, solve_radial
from resist.newton.solve2d import symmetry_images

CLASSICAL = get_law("classical")
SQUARE = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1.0]])


def _cap(mesh, M):
    r2 = (mesh.points**2).sum(axis=1)
    return HeightField(mesh, M, M * (1 - r2 / r2.max()))


# ---------------------------------------------------------------- domains and meshes


def test_parse_omega():
    P = parse_omega("disc:2:6")
    assert len(P) == 6 and np.allclose(np.linalg.norm(P, axis=1), 2.0)
    Q = parse_omega("poly:0,0;0,1;1,1;1,0")  # clockwise input comes back CCW
    assert polygon_area(Q) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        parse_omega("poly:0,0;1,0;0.5,0.1;1,1;0,1")
    with pytest.raises(ValueError):
        parse_omega("blob:1")


def test_sector_mesh_tiles_polygon():
    for P, K in [(regular_polygon(1, 64), 8), (SQUARE, 5), (regular_polygon(2, 5), 3)]:
        m = sector_mesh(P, K)
        assert (m.areas > 0).all()
        assert m.areas.sum() == pytest.approx(polygon_area(P), rel=1e-12)
        assert len(m.tris) == len(P) * K * K
        assert np.allclose(m.boundary_distance()[m.boundary], 0, atol=1e-12)
    with pytest.raises(ValueError):
        sector_mesh(SQUARE, 3, [0, 0.5, 0.4, 1])


def test_aligned_rings():
    t = aligned_rings(10, 0.33)
    assert 0.33 in t and len(t) == 11 and (np.diff(t) > 0).all()
    assert np.array_equal(aligned_rings(10, None), np.linspace(0, 1, 11))


def test_gradients_exact_for_affine_field():
    m = sector_mesh(regular_polygon(1, 7), 4)
    u = 0.3 + 2.0 * m.points[:, 0] - 0.5 * m.points[:, 1]
    assert np.allclose(m.gradients(u), [2.0, -0.5], atol=1e-12)
    assert m.fold_excess(u) <= 1e-12


def test_fold_matrix_matches_explicit_loop():
    m = sector_mesh(regular_polygon(1, 6), 3)
    u = np.random.default_rng(0).random(len(m.points))
    ref = []
    for ta, tb in m.interior_edges:
        A, B = m.tris[ta], m.tris[tb]
        o = [v for v in B if v not in A][0]
        p = np.column_stack([m.points[A], np.ones(3)])
        coef = np.linalg.solve(p, u[A])
        ref.append(u[o] - coef @ [*m.points[o], 1.0])
    assert np.allclose(m.fold_matrix @ u, ref, atol=1e-12)


# ---------------------------------------------------------------- objective


def test_flat_field_and_unit_slope_cone():
    P = regular_polygon(1, 64)
    m = sector_mesh(P, 8)
    A = polygon_area(P)
    flat = HeightField(m, 1.0, np.zeros(len(m.points)))
    assert resistance_2d(CLASSICAL, flat) == pytest.approx(A, rel=1e-12)
    # slope exactly 1 everywhere: height apothem * (1 - gauge)
    a = np.cos(np.pi / 64)
    cone = HeightField(m, 1.0, a * (1 - m.gauge()))
    assert resistance_2d(CLASSICAL, cone) == pytest.approx(A / 2, rel=1e-12)


def test_surface_equals_mesh_sum_for_concave_interpolant():
    m = sector_mesh(regular_polygon(1, 16), 6)
    u = _cap(m, 0.7)
    assert m.fold_excess(u.values) <= 1e-12
    assert resistance_2d(CLASSICAL, u) == pytest.approx(mesh_objective(CLASSICAL, m, u.values), rel=1e-12)
    _, A = concave_surface(m, u.values)
    assert A.sum() == pytest.approx(m.areas.sum(), rel=1e-12)


def test_folded_interpolant_is_charged_for_its_majorant():
    # the vertex set is concave but the fixed-mesh interpolant folds upward
    m = sector_mesh(SQUARE, 2)
    u = project_concave(np.random.default_rng(1).random(len(m.points)), m, 1.0)
    u.check()
    assert m.fold_excess(u.values) > 0.1
    F_surf = surface_objective(CLASSICAL, m, u.values)
    assert F_surf < mesh_objective(CLASSICAL, m, u.values) - 1e-3
    assert resistance_2d(CLASSICAL, u) == F_surf
    _, A = concave_surface(m, u.values)
    assert A.sum() == pytest.approx(polygon_area(SQUARE), rel=1e-12)


def test_rotation_symmetry_on_square():
    m = sector_mesh(SQUARE, 6)
    perms = symmetry_images(m)
    assert len(perms) == 8
    u = project_concave(np.random.default_rng(2).random(len(m.points)), m, 1.0)
    F = resistance_2d(CLASSICAL, u)
    for p in perms:
        assert resistance_2d(CLASSICAL, u.with_values(u.values[p])) == pytest.approx(F, rel=1e-12)


def test_scaling_covariance():
    m1 = sector_mesh(regular_polygon(1, 12), 5)
    u1 = project_concave(np.random.default_rng(3).random(len(m1.points)) * 0.8, m1, 0.8)
    lam = 2.5
    m2 = sector_mesh(regular_polygon(lam, 12), 5)
    u2 = HeightField(m2, lam * 0.8, lam * u1.values)
    assert resistance_2d(CLASSICAL, u2) == pytest.approx(lam**2 * resistance_2d(CLASSICAL, u1), rel=1e-12)


def _straddling_rings(K, rho):
    """Rings spaced 1/K with ``rho`` at the middle of a cell."""
    h = 1.0 / K
    t = rho + (np.arange(-K - 2, K + 3) + 0.5) * h
    t = t[(t > h / 4) & (t < 1 - h / 4)]
    return np.concatenate([[0.0], t, [1.0]])


def test_radial_embedding_converges_first_order():
    # truncated cone with its kink inside a ring cell at every resolution
    r = np.linspace(0, 1, 2001)
    prof = RadialProfile(1.0, 1.0, r, np.minimum(1.0, 2 * (1 - r)))
    n = 64
    P = regular_polygon(1, n)
    a = np.cos(np.pi / n)
    # the same field in the continuum: flat disc of gauge 1/2, slope 2/a outside
    exact = 2 * polygon_area(P) * (CLASSICAL.g(0.0, 0.0) * 0.125 + CLASSICAL.g(2 / a, 0.0) * 0.375)
    errs = []
    for K in (16, 32):
        t = _straddling_rings(K, 0.5)
        errs.append(abs(resistance_2d(CLASSICAL, embed_radial(prof, sector_mesh(P, len(t) - 1, t))) - exact))
    assert 1.5 <= errs[0] / errs[1] <= 3.0
    # the continuum value tends to 2 pi R as the polygon fills the disc
    from resist.newton.radial import resistance_radial

    big = regular_polygon(1, 8192)
    ab = np.cos(np.pi / 8192)
    exact_big = 2 * polygon_area(big) * (0.125 + CLASSICAL.g(2 / ab, 0.0) * 0.375)
    assert exact_big == pytest.approx(2 * np.pi * resistance_radial(prof), abs=1e-6)


def test_embedded_radial_optimum_is_concave_with_zero_rim():
    prof = solve_radial(1.0, 1.0, 400)
    m = sector_mesh(regular_polygon(1, 32), 10, aligned_rings(10, prof.flat_radius))
    u = embed_radial(prof, m)
    u.check()
    assert m.fold_excess(u.values) <= 1e-12
    assert np.abs(u.values[m.boundary]).max() <= 1e-12


# ---------------------------------------------------------------- projection


def test_project_concave_idempotent():
    m = sector_mesh(regular_polygon(1, 9), 6)
    rng = np.random.default_rng(4)
    for _ in range(5):
        once = project_concave(rng.normal(size=len(m.points)), m, 1.0)
        twice = project_concave(once.values, m, 1.0)
        assert np.abs(twice.values - once.values).max() <= 1e-12
        once.check()


def test_majorant_matches_lp_oracle():
    m = sector_mesh(regular_polygon(1, 6), 3)
    u = np.random.default_rng(5).random(len(m.points))
    lcm = least_concave_majorant(m, u)
    ref = [concave_majorant_lp(m.points, u, x) for x in m.points]
    assert np.abs(lcm - ref).max() <= 1e-9


def test_spike_becomes_tent():
    m = sector_mesh(SQUARE, 4)
    u = np.zeros(len(m.points))
    u[0] = 1.0  # centre vertex
    v = project_concave(u, m, 1.0).values
    # the tent over the square: 1 - max(|x|, |y|)
    assert np.allclose(v, 1 - np.abs(m.points).max(axis=1), atol=1e-12)


def test_projection_clamps_to_bounds():
    m = sector_mesh(SQUARE, 3)
    v = project_concave(np.full(len(m.points), 5.0), m, 1.0).values
    assert np.allclose(v, 1.0)
    w = project_concave(np.full(len(m.points), -5.0), m, 1.0).values
    assert np.allclose(w, 0.0)


def test_check_rejects_bad_fields():
    m = sector_mesh(SQUARE, 3)
    with pytest.raises(InvalidField):
        HeightField(m, 1.0, np.full(len(m.points), 1.5)).check()
    bowl = (m.points**2).sum(axis=1) * 0.4
    with pytest.raises(InvalidField):
        resistance_2d(CLASSICAL, HeightField(m, 1.0, bowl))
    with pytest.raises(InvalidField):
        HeightField(m, 1.0, np.full(len(m.points), np.nan)).check()


# ---------------------------------------------------------------- I/O


def test_save_load_round_trip(tmp_path):
    m = sector_mesh(regular_polygon(1, 8), 4, aligned_rings(4, 0.3))
    u = HeightField(m, 1.0, _cap(m, 1.0).values, seed=7)
    off, side = u.save(tmp_path / "u.off")
    back = HeightField.load(off)
    assert np.array_equal(back.values, u.values) and back.seed == 7 and back.M == 1.0
    assert np.array_equal(back.mesh.t, m.t)
    meta = json.loads(side.read_text())
    meta["topology_hash"] = "0" * 64
    side.write_text(json.dumps(meta))
    with pytest.raises(InvalidField):
        HeightField.load(off)
