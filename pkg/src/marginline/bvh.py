"""Axis-aligned bounding box hierarchy over triangles for closest-point
queries. Queries are exact: traversal prunes by box distance only, so the
returned distance equals the brute-force minimum over all triangles."""

from __future__ import annotations

import heapq

import numpy as np

_LEAF_SIZE = 8


def closest_point_on_triangles(p, a, b, c):
    """Closest point to `p` on each triangle (a[i], b[i], c[i]).

    Vectorized version of the standard region-test algorithm (Ericson,
    Real-Time Collision Detection). Returns (points (n,3), sqdist (n,)).
    """
    p = np.asarray(p, dtype=np.float64)
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)

    out = np.empty_like(a)
    done = np.zeros(len(a), dtype=bool)

    # vertex regions
    m = (d1 <= 0) & (d2 <= 0)
    out[m] = a[m]
    done |= m
    m = (~done) & (d3 >= 0) & (d4 <= d3)
    out[m] = b[m]
    done |= m
    m = (~done) & (d6 >= 0) & (d5 <= d6)
    out[m] = c[m]
    done |= m

    # edge AB
    vc = d1 * d4 - d3 * d2
    m = (~done) & (vc <= 0) & (d1 >= 0) & (d3 <= 0)
    denom = d1 - d3
    t = np.where(denom != 0, d1 / np.where(denom != 0, denom, 1.0), 0.0)
    out[m] = a[m] + t[m, None] * ab[m]
    done |= m

    # edge AC
    vb = d5 * d2 - d1 * d6
    m = (~done) & (vb <= 0) & (d2 >= 0) & (d6 <= 0)
    denom = d2 - d6
    t = np.where(denom != 0, d2 / np.where(denom != 0, denom, 1.0), 0.0)
    out[m] = a[m] + t[m, None] * ac[m]
    done |= m

    # edge BC
    va = d3 * d6 - d5 * d4
    m = (~done) & (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)
    denom = (d4 - d3) + (d5 - d6)
    t = np.where(denom != 0, (d4 - d3) / np.where(denom != 0, denom, 1.0), 0.0)
    out[m] = b[m] + t[m, None] * (c[m] - b[m])
    done |= m

    # interior
    m = ~done
    denom = va + vb + vc
    safe = np.where(denom != 0, denom, 1.0)
    v = vb / safe
    w = vc / safe
    out[m] = a[m] + v[m, None] * ab[m] + w[m, None] * ac[m]

    d = out - p
    return out, np.einsum("ij,ij->i", d, d)


def brute_force_closest(vertices, faces, query):
    """Reference exhaustive closest point; used as the oracle in tests."""
    tri = vertices[faces]
    pts, sq = closest_point_on_triangles(query, tri[:, 0], tri[:, 1], tri[:, 2])
    i = int(np.argmin(sq))
    return pts[i], i, float(np.sqrt(sq[i]))


class TriangleBVH:
    """Median-split AABB tree; immutable and safe to share after build."""

    def __init__(self, vertices, faces):
        self.vertices = np.asarray(vertices, dtype=np.float64)
        self.faces = np.asarray(faces, dtype=np.int64)
        tri = self.vertices[self.faces]
        self._tri = tri
        tri_min = tri.min(axis=1)
        tri_max = tri.max(axis=1)
        centroids = tri.mean(axis=1)

        order = np.arange(len(self.faces))
        nodes_min = []
        nodes_max = []
        nodes_left = []  # child index or face-range start
        nodes_right = []  # child index or face-range end
        nodes_leaf = []

        def build(idx):
            node = len(nodes_min)
            nodes_min.append(tri_min[idx].min(axis=0))
            nodes_max.append(tri_max[idx].max(axis=0))
            nodes_left.append(0)
            nodes_right.append(0)
            nodes_leaf.append(False)
            if len(idx) <= _LEAF_SIZE:
                nodes_leaf[node] = True
                nodes_left[node] = len(leaf_faces)
                leaf_faces.extend(idx.tolist())
                nodes_right[node] = len(leaf_faces)
                return node
            cen = centroids[idx]
            axis = int(np.argmax(cen.max(axis=0) - cen.min(axis=0)))
            half = len(idx) // 2
            part = np.argpartition(cen[:, axis], half)
            left = build(idx[part[:half]])
            right = build(idx[part[half:]])
            nodes_left[node] = left
            nodes_right[node] = right
            return node

        leaf_faces = []
        build(order)
        self._min = np.asarray(nodes_min)
        self._max = np.asarray(nodes_max)
        self._left = np.asarray(nodes_left)
        self._right = np.asarray(nodes_right)
        self._is_leaf = np.asarray(nodes_leaf)
        self._leaf_faces = np.asarray(leaf_faces, dtype=np.int64)

    def _box_sqdist(self, node, p):
        d = np.maximum(self._min[node] - p, 0.0) + np.maximum(
            p - self._max[node], 0.0
        )
        return float(d @ d)

    def closest_point(self, query):
        """Returns (point (3,), face id, distance)."""
        p = np.asarray(query, dtype=np.float64)
        best_sq = np.inf
        best_pt = None
        best_face = -1
        heap = [(self._box_sqdist(0, p), 0)]
        while heap:
            dist, node = heapq.heappop(heap)
            if dist >= best_sq:
                break
            if self._is_leaf[node]:
                ids = self._leaf_faces[self._left[node] : self._right[node]]
                tri = self._tri[ids]
                pts, sq = closest_point_on_triangles(
                    p, tri[:, 0], tri[:, 1], tri[:, 2]
                )
                i = int(np.argmin(sq))
                if sq[i] < best_sq:
                    best_sq = float(sq[i])
                    best_pt = pts[i]
                    best_face = int(ids[i])
            else:
                for child in (self._left[node], self._right[node]):
                    d = self._box_sqdist(child, p)
                    if d < best_sq:
                        heapq.heappush(heap, (d, int(child)))
        return best_pt, best_face, float(np.sqrt(best_sq))

    def closest_points(self, queries):
        """Batched closest_point; returns (points (n,3), faces (n,), dists (n,))."""
        queries = np.asarray(queries, dtype=np.float64).reshape(-1, 3)
        pts = np.empty_like(queries)
        faces = np.empty(len(queries), dtype=np.int64)
        dists = np.empty(len(queries))
        for i, q in enumerate(queries):
            pts[i], faces[i], dists[i] = self.closest_point(q)
        return pts, faces, dists
