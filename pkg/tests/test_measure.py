import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resist.config import DEFAULT
from resist.convex import cube, random_polytope, regular_tetrahedron
from resist.measure import (
    DiscreteSurfaceMeasure,
    atom_deviation,
    closure_defect,
    eval_functional,
    get_law,
    law_names,
    measure_linear_combine,
    measure_of,
    measure_of_triangles,
    register_law,
    PressureLaw,
    tabulated_law,
    zero_measure,
)
from resist.nose import stretch

TET = np.array([(1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)], dtype=float)


def _atom_dict(nu):
    return {tuple(np.round(n, 9)): w for n, w in nu.atoms}


def test_cube_measure_six_unit_atoms():
    nu = measure_of(cube())
    d = _atom_dict(nu)
    assert len(d) == 6
    for i in range(3):
        for s in (1.0, -1.0):
            e = np.zeros(3)
            e[i] = s
            assert d[tuple(e)] == pytest.approx(1.0, abs=1e-15)


def test_cube_top_facet_single_atom():
    C = cube()
    top = int(np.argmax(C.normals[:, 2]))
    nu = measure_of(C, [top])
    assert len(nu) == 1
    assert np.allclose(nu.normals[0], [0, 0, 1]) and nu.weights[0] == pytest.approx(1.0)
    assert closure_defect(nu) == pytest.approx(1.0)


def test_tetrahedron_atoms_cross_product_oracle():
    nu = measure_of(regular_tetrahedron())
    assert len(nu) == 4
    # each face is an equilateral triangle of side 2 sqrt 2
    for f in [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)]:
        a, b, c = TET[list(f)]
        area = 0.5 * np.linalg.norm(np.cross(b - a, c - a))
        assert area == pytest.approx(2 * np.sqrt(3))
    assert np.allclose(nu.weights, 2 * np.sqrt(3))


def test_functionals_on_cube_and_tetrahedron():
    classical, area = get_law("classical"), get_law("area")
    nu = measure_of(cube())
    assert eval_functional(classical, nu) == pytest.approx(1.0, abs=1e-15)
    assert eval_functional(area, nu) == pytest.approx(6.0, abs=1e-14)
    # facet-by-facet hand computation on the tetrahedron
    ctr = TET.mean(axis=0)
    total = 0.0
    for f in [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)]:
        a, b, c = TET[list(f)]
        n = np.cross(b - a, c - a)
        if n @ (a - ctr) < 0:
            n = -n
        n /= np.linalg.norm(n)
        total += max(n[2], 0.0) ** 3 * 2 * np.sqrt(3)
    assert eval_functional(classical, measure_of(regular_tetrahedron())) == pytest.approx(total, rel=1e-12)


def test_linear_combination_basics():
    nu = measure_of(cube())
    other = measure_of(regular_tetrahedron())
    same = measure_linear_combine([1.0, 0.0], [nu, other])
    assert atom_deviation(same, nu) <= 1e-15
    zero = nu - nu
    assert np.abs(zero.weights).max() <= 1e-12
    assert eval_functional(get_law("classical"), zero_measure()) == 0.0


def test_cone_over_cube_top_triangle_oracle():
    C = cube()
    O = np.array([0.5, 0.5, 1.5])
    top = int(np.argmax(C.normals[:, 2]))
    sq = [(0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)]
    tris = np.array([[sq[i], sq[(i + 1) % 4], O] for i in range(4)], dtype=float)
    nu_V = measure_of_triangles(tris)
    if nu_V.normals[:, 2].min() < 0:  # winding gave inward normals
        nu_V = measure_of_triangles(tris, orientation=-1)
    # each triangle has base 1 and slant height sqrt(0.5^2 + 0.5^2)
    assert np.allclose(nu_V.weights, 0.5 * np.sqrt(0.5))
    nu0 = nu_V - measure_of(C, [top])
    assert nu0.mass == pytest.approx(4 * 0.5 * np.sqrt(0.5) - 1.0)
    assert closure_defect(nu0) <= 1e-12  # cone closes the top square


def test_merge_within_normal_tolerance():
    n = np.array([[0, 0, 1.0], [1e-12, 0, 1.0], [1, 0, 0]])
    nu = DiscreteSurfaceMeasure(n, [1.0, 2.0, 3.0])
    assert len(nu) == 2
    assert nu.weights[0] == pytest.approx(3.0)
    far = DiscreteSurfaceMeasure([[0, 0, 1.0], [1e-6, 0, 1.0]], [1.0, 1.0])
    assert len(far) == 2


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_functional_linear_over_combinations(seed, coeffs):
    rng = np.random.default_rng(seed)
    ms = [measure_of(random_polytope(12, rng)) for _ in range(3)]
    law = get_law("classical")
    lhs = eval_functional(law, measure_linear_combine(coeffs, ms))
    rhs = sum(c * eval_functional(law, m) for c, m in zip(coeffs, ms))
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, sum(abs(c) * eval_functional(get_law("area"), m) for c, m in zip(coeffs, ms)))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_closure_and_additivity_random(seed):
    rng = np.random.default_rng(seed)
    C = random_polytope(20, rng)
    nu = measure_of(C)
    assert (nu.weights > 0).all()
    assert closure_defect(nu) <= DEFAULT.closure * C.area
    k = len(C.loops)
    part = rng.permutation(k)
    a, b = part[: k // 2], part[k // 2 :]
    both = measure_of(C, a) + measure_of(C, b)
    assert atom_deviation(both, nu) <= 1e-14


def test_stretched_cube_closes():
    B = stretch(cube(), [0.5, 0.5, 1.5], 0.5)
    assert closure_defect(measure_of(B)) <= 1e-9


def test_law_consistency_on_grid():
    XY = np.random.default_rng(0).uniform(-10, 10, size=(10_000, 2))
    X, Y = XY.T
    n = np.stack([-X, -Y, np.ones_like(X)], axis=1) / np.sqrt(1 + X**2 + Y**2)[:, None]
    for name in law_names():
        law = get_law(name)
        assert np.abs(law.g(X, Y) - law.p(n)).max() <= 1e-12
        assert np.abs(law.f(n) - law.p(n) * n[:, 2]).max() <= 1e-12


def test_classical_gradient_and_hessian():
    law = get_law("classical")
    gx, gy = law.grad_g(np.array([0.3]), np.array([-0.7]))
    h = 1e-6
    assert gx[0] == pytest.approx((law.g(0.3 + h, -0.7) - law.g(0.3 - h, -0.7)) / (2 * h), rel=1e-8)
    assert np.allclose(law.hess_g(0.0, 0.0), -2 * np.eye(2), atol=1e-6)


def test_unknown_law_and_registry():
    with pytest.raises(KeyError):
        get_law("nonsense")
    register_law("half", lambda: PressureLaw("half", lambda n: 0.5 * np.clip(n[..., 2], 0, None) ** 2))
    assert get_law("half").g(0.0, 0.0) == pytest.approx(0.5)


def test_tabulated_law_reproduces_classical(tmp_path):
    th = np.linspace(0, np.pi, 181)
    ph = np.linspace(0, 2 * np.pi, 9)
    rows = [(t, p, max(np.cos(t), 0.0) ** 2) for t in th for p in ph]
    path = tmp_path / "tab.csv"
    path.write_text("theta,phi,p\n" + "".join("%.17g,%.17g,%.17g\n" % r for r in rows))
    law = get_law(str(path))
    assert law is not None and tabulated_law(path).name == "tab"
    X = np.linspace(-2, 2, 21)
    # linear interpolation in theta with a 1 degree step
    assert np.abs(law.g(X, 0 * X) - get_law("classical").g(X, 0 * X)).max() < 1e-3


def test_csv_round_trip(tmp_path):
    nu = measure_of(random_polytope(15, np.random.default_rng(1)))
    p = tmp_path / "m.csv"
    nu.save(p)
    back = DiscreteSurfaceMeasure.load(p)
    assert np.array_equal(back.normals, nu.normals) and np.array_equal(back.weights, nu.weights)
    assert p.read_text().splitlines()[0] == "nx,ny,nz,weight"
