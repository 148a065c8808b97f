import numpy as np
import pytest

from marginline.decimate import decimate
from marginline.mesh import extract_boundary_loops
from marginline.shapes import icosphere, open_cylinder


def test_sphere_decimation_accuracy():
    sphere = icosphere(subdivisions=4, radius=10.0)  # 5120 faces
    out = decimate(sphere, 1000)
    assert out.n_faces <= 1005
    assert out.n_faces >= 900
    assert extract_boundary_loops(out) == []
    # all vertices stay near the sphere
    r = np.linalg.norm(out.vertices, axis=1)
    assert np.abs(r - 10.0).max() < 0.2


def test_boundary_edges_preserved():
    cyl = open_cylinder(radius=3.0, height=6.0, segments=48, rings=12)
    out = decimate(cyl, 400)
    loops_in = extract_boundary_loops(cyl)
    loops_out = extract_boundary_loops(out)
    assert len(loops_out) == 2
    for a, b in zip(loops_in, loops_out):
        # rim length shrinks only slightly under collapse
        assert b.length == pytest.approx(a.length, rel=0.05)


def test_noop_above_current_count(unit_sphere):
    with pytest.warns(UserWarning):
        out = decimate(unit_sphere, unit_sphere.n_faces * 2)
    assert out.n_faces == unit_sphere.n_faces


def test_rejects_tiny_target(unit_sphere):
    with pytest.raises(ValueError):
        decimate(unit_sphere, 3)


def test_face_normals_stay_outward():
    sphere = icosphere(subdivisions=3, radius=1.0)
    out = decimate(sphere, 300)
    dots = np.einsum("ij,ij->i", out.face_normals, out.barycenters)
    assert (dots > 0).all()
