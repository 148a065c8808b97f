import numpy as np

from marginline.bvh import TriangleBVH, brute_force_closest
from marginline.shapes import icosphere


def test_bvh_matches_brute_force(unit_sphere):
    bvh = TriangleBVH(unit_sphere.vertices, unit_sphere.faces)
    rng = np.random.default_rng(4)
    queries = rng.uniform(-2.0, 2.0, size=(200, 3))
    for q in queries:
        p, f, d = bvh.closest_point(q)
        pb, fb, db = brute_force_closest(
            unit_sphere.vertices, unit_sphere.faces, q
        )
        assert abs(d - db) < 1e-9
        assert np.linalg.norm(p - pb) < 1e-9


def test_batched_query_agrees_with_single(unit_sphere):
    bvh = unit_sphere.bvh()
    rng = np.random.default_rng(5)
    queries = rng.uniform(-1.5, 1.5, size=(50, 3))
    pts, faces, dists = bvh.closest_points(queries)
    for i, q in enumerate(queries):
        p, f, d = bvh.closest_point(q)
        assert abs(dists[i] - d) < 1e-12
        assert np.linalg.norm(pts[i] - p) < 1e-12


def test_distance_to_unit_sphere_surface():
    sphere = icosphere(subdivisions=4, radius=1.0)
    bvh = sphere.bvh()
    # far outside: distance approaches |q| - 1
    _, _, d = bvh.closest_point(np.array([3.0, 0.0, 0.0]))
    assert abs(d - 2.0) < 5e-3
    # center: distance approaches the radius
    _, _, d = bvh.closest_point(np.zeros(3))
    assert abs(d - 1.0) < 5e-3
