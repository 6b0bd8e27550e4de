import numpy as np
import pytest

from resist.convex import cube, load_polytope, random_polytope, read_obj, read_off, save_polytope, write_obj, write_off


@pytest.mark.parametrize("ext", ["off", "obj"])
def test_round_trip_full_precision(tmp_path, ext):
    C = random_polytope(30, np.random.default_rng(2))
    p = tmp_path / f"body.{ext}"
    save_polytope(p, C)
    back = load_polytope(p)
    assert np.array_equal(np.sort(back.vertices, axis=0), np.sort(C.vertices, axis=0))
    assert len(back.loops) == len(C.loops)


def test_off_facets_triangulated(tmp_path):
    p = tmp_path / "cube.off"
    write_off(p, cube())
    verts, faces = read_off(p)
    assert len(verts) == 8 and len(faces) == 12
    assert all(len(f) == 3 for f in faces)
    assert p.read_text().startswith("OFF")


def test_obj_reader_accepts_slashes(tmp_path):
    p = tmp_path / "t.obj"
    p.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1/1 2/2 3/3\nf 1//1 2//1 4//1\n")
    verts, faces = read_obj(p)
    assert verts.shape == (4, 3)
    assert faces[0] == [0, 1, 2]
    write_obj(tmp_path / "u.obj", (verts, np.array(faces)))
    assert read_obj(tmp_path / "u.obj")[1] == faces
