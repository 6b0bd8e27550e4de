import numpy as np
import pytest

from resist.suites import appendix_families, nose_instances, random_apex, run_suite


def test_nose_and_multi_suites_pass():
    for res in run_suite("nose", 0) + run_suite("multi", 7):
        assert res.passed, [r for r in res.rows if not r[4]]
        assert res.to_csv().count("\n") == len(res.rows) + 1


def test_instances_are_seeded():
    a = nose_instances(3, 2)
    b = nose_instances(3, 2)
    for (_, C1, O1), (_, C2, O2) in zip(a, b):
        assert np.array_equal(C1.vertices, C2.vertices) and np.array_equal(O1, O2)
    fams = appendix_families(7)
    assert [n for n, _ in fams] == ["cube2", "random0", "random1", "random2"]
    assert all(f.hypothesis_ok for _, f in fams)


def test_random_apex_outside():
    rng = np.random.default_rng(0)
    for _, C, _ in nose_instances(1, 3):
        O = random_apex(C, rng)
        assert C.signed_distances(O).max() > 0


def test_unknown_suite():
    with pytest.raises(KeyError):
        run_suite("nope", 0)
