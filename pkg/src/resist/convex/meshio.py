"""ASCII OFF / OBJ reading and writing.

Facets are fan-triangulated on export and coordinates are written with
``%.17g`` so a write/read cycle is lossless.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .polytope import Polytope, hull3d

FMT = "%.17g"


def _fmt(row) -> str:
    return " ".join(FMT % x for x in row)


def _faces_of(mesh) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(mesh, Polytope):
        return mesh.vertices, mesh.triangles()
    verts, faces = mesh
    return np.asarray(verts, dtype=float), np.asarray(faces, dtype=int)


def write_off(path, mesh) -> None:
    verts, faces = _faces_of(mesh)
    lines = ["OFF", f"{len(verts)} {len(faces)} 0"]
    lines += [_fmt(v) for v in verts]
    lines += [" ".join([str(len(f))] + [str(int(i)) for i in f]) for f in faces]
    Path(path).write_text("\n".join(lines) + "\n")


def read_off(path) -> tuple[np.ndarray, list[list[int]]]:
    tokens = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            tokens.append(line)
    head = tokens[0]
    if not head.startswith("OFF"):
        raise ValueError("not an OFF file")
    rest = head[3:].split()
    body = tokens[1:]
    if not rest:
        rest = body[0].split()
        body = body[1:]
    nv, nf = int(rest[0]), int(rest[1])
    verts = np.array([[float(x) for x in body[i].split()[:3]] for i in range(nv)])
    faces = []
    for line in body[nv : nv + nf]:
        parts = [int(x) for x in line.split()]
        faces.append(parts[1 : 1 + parts[0]])
    return verts, faces


def write_obj(path, mesh) -> None:
    verts, faces = _faces_of(mesh)
    lines = ["v " + _fmt(v) for v in verts]
    lines += ["f " + " ".join(str(int(i) + 1) for i in f) for f in faces]
    Path(path).write_text("\n".join(lines) + "\n")


def read_obj(path) -> tuple[np.ndarray, list[list[int]]]:
    verts, faces = [], []
    for line in Path(path).read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(x) for x in parts[1:4]])
        elif parts[0] == "f":
            faces.append([int(p.split("/")[0]) - 1 for p in parts[1:]])
    return np.array(verts, dtype=float), faces


def load_polytope(path) -> Polytope:
    """Convex hull of the vertices stored in an OFF or OBJ file."""
    path = Path(path)
    reader = read_obj if path.suffix.lower() == ".obj" else read_off
    verts, _ = reader(path)
    return hull3d(verts)


def save_polytope(path, C: Polytope) -> None:
    path = Path(path)
    (write_obj if path.suffix.lower() == ".obj" else write_off)(path, C)
