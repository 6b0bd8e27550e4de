from .meshio import load_polytope, read_obj, read_off, save_polytope, write_obj, write_off
from .polytope import Facet, Polytope, dilate, hull3d, intersect_halfspaces, plane_basis
from .predicates import (
    BoundaryPointClass,
    Segment3,
    classify_point,
    classify_vertex,
    cone_diameter,
    place_nose_point,
    sample_uniform,
    segment_distances,
    segment_meets_interior,
    singular_set,
)
from .shapes import cube, fibonacci_sphere, random_polytope, regular_tetrahedron, sphere_polytope

__all__ = [
    "BoundaryPointClass",
    "Facet",
    "Polytope",
    "Segment3",
    "classify_point",
    "classify_vertex",
    "cone_diameter",
    "cube",
    "dilate",
    "fibonacci_sphere",
    "hull3d",
    "intersect_halfspaces",
    "load_polytope",
    "place_nose_point",
    "plane_basis",
    "random_polytope",
    "read_obj",
    "read_off",
    "regular_tetrahedron",
    "sample_uniform",
    "save_polytope",
    "segment_distances",
    "segment_meets_interior",
    "singular_set",
    "sphere_polytope",
    "write_obj",
    "write_off",
]
