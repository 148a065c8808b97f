import itertools

import numpy as np
import pytest

from marginline.errors import EmptyRegionError
from marginline.mesh import TriangleMesh
from marginline.refine import (
    GraphCutConfig,
    cleanup_components,
    cut_energy,
    graph_cut_refine,
)
from marginline.shapes import icosphere


def _random_mesh(rng, max_faces=16):
    """Small random patch of an icosphere (re-indexed)."""
    sphere = icosphere(subdivisions=1, radius=1.0)
    n = int(rng.integers(4, max_faces + 1))
    start = int(rng.integers(0, sphere.n_faces))
    adjacency = sphere.adjacency()
    chosen = [start]
    frontier = [start]
    while len(chosen) < n and frontier:
        f = frontier.pop(0)
        for g in adjacency.neighbors[f]:
            if g not in chosen:
                chosen.append(g)
                frontier.append(g)
            if len(chosen) == n:
                break
    faces = sphere.faces[sorted(chosen)]
    used = np.unique(faces)
    remap = {int(v): i for i, v in enumerate(used)}
    faces = np.vectorize(remap.get)(faces)
    return TriangleMesh(sphere.vertices[used], faces)


def _enumerate_optimum(mesh, probs, config):
    best = np.inf
    best_labels = None
    for bits in itertools.product((0, 1), repeat=mesh.n_faces):
        labels = np.asarray(bits, dtype=np.int64)
        e = cut_energy(mesh, probs, labels, config)
        if e < best - 1e-12:
            best = e
            best_labels = labels
    return best, best_labels


def test_exact_on_enumerable_instances():
    rng = np.random.default_rng(17)
    for _ in range(25):
        mesh = _random_mesh(rng, max_faces=12)
        probs = rng.uniform(0.01, 0.99, size=mesh.n_faces)
        probs = np.stack([1 - probs, probs], axis=1)
        config = GraphCutConfig(smoothness=float(rng.uniform(0, 10)))
        labels = graph_cut_refine(mesh, probs, config)
        achieved = cut_energy(mesh, probs, labels, config)
        optimum, _ = _enumerate_optimum(mesh, probs, config)
        assert achieved == pytest.approx(optimum, abs=1e-9)


def test_zero_smoothness_returns_argmax():
    rng = np.random.default_rng(3)
    mesh = _random_mesh(rng)
    probs = rng.uniform(0.01, 0.99, size=mesh.n_faces)
    probs = np.stack([1 - probs, probs], axis=1)
    labels = graph_cut_refine(mesh, probs, GraphCutConfig(smoothness=0.0))
    assert np.array_equal(labels, probs.argmax(axis=1))


def test_huge_smoothness_flattens_labels():
    rng = np.random.default_rng(8)
    mesh = _random_mesh(rng, max_faces=14)
    probs = rng.uniform(0.01, 0.99, size=mesh.n_faces)
    probs = np.stack([1 - probs, probs], axis=1)
    labels = graph_cut_refine(mesh, probs, GraphCutConfig(smoothness=1e6))
    assert len(np.unique(labels)) == 1


def test_smoothness_never_increases_boundary_length():
    """Property: the cut boundary (number of disagreeing adjacent pairs)
    shrinks or stays equal as smoothness grows."""
    rng = np.random.default_rng(11)
    sphere = icosphere(subdivisions=2, radius=1.0)
    probs = rng.uniform(0.05, 0.95, size=sphere.n_faces)
    probs = np.stack([1 - probs, probs], axis=1)
    adjacency = sphere.adjacency()

    def boundary_edges(labels):
        interior = adjacency.edge_faces[adjacency.edge_faces[:, 1] >= 0]
        return int(np.sum(labels[interior[:, 0]] != labels[interior[:, 1]]))

    last = np.inf
    for lam in (0.0, 0.5, 2.0, 8.0):
        labels = graph_cut_refine(sphere, probs, GraphCutConfig(smoothness=lam))
        edges = boundary_edges(labels)
        assert edges <= last + 1e-9
        last = edges


def test_config_validation():
    with pytest.raises(ValueError):
        GraphCutConfig(smoothness=-1.0).validate()
    with pytest.raises(ValueError):
        GraphCutConfig(dihedral_sigma=0.0).validate()


def test_cleanup_keeps_largest_island(unit_sphere):
    labels = np.zeros(unit_sphere.n_faces, dtype=np.int64)
    z = unit_sphere.barycenters[:, 2]
    labels[z > 0.5] = 1      # big cap
    south = np.argmin(z)
    labels[south] = 1        # lone island
    cleaned = cleanup_components(labels, unit_sphere.adjacency())
    assert cleaned[south] == 0
    assert np.array_equal(cleaned[z > 0.55], labels[z > 0.55])


def test_cleanup_rejects_empty_region(unit_sphere):
    with pytest.raises(EmptyRegionError):
        cleanup_components(
            np.zeros(unit_sphere.n_faces, dtype=np.int64),
            unit_sphere.adjacency(),
        )
