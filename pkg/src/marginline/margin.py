"""Margin line generation: label-boundary faces, full-resolution surface
projection, periodic smoothing spline, and the sampled surface loop."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BoundaryExtractionError
from .labeling import LabeledMesh
from .mesh import TriangleMesh
from .spline import SmoothingSpline, fit_smoothing_spline

DEFAULT_SAMPLES = 5000


def _label_boundary_edges(labeled: LabeledMesh):
    """Mesh edges separating label-1 from label-0 faces, with the label-1
    face of each edge."""
    adjacency = labeled.mesh.adjacency()
    labels = labeled.labels
    interior = adjacency.edge_faces[:, 1] >= 0
    ef = adjacency.edge_faces[interior]
    ev = adjacency.edge_vertices[interior]
    diff = labels[ef[:, 0]] != labels[ef[:, 1]]
    ef = ef[diff]
    ev = ev[diff]
    one_side = np.where(labels[ef[:, 0]] == 1, ef[:, 0], ef[:, 1])
    return ev, one_side


def _edge_loops(edge_vertices):
    """Group edges into closed vertex loops; returns lists of edge ids."""
    incident = {}
    for eid, (a, b) in enumerate(edge_vertices.tolist()):
        incident.setdefault(a, []).append(eid)
        incident.setdefault(b, []).append(eid)
    used = set()
    loops = []
    for start in range(len(edge_vertices)):
        if start in used:
            continue
        loop = [start]
        used.add(start)
        a, b = edge_vertices[start]
        first, cur = int(a), int(b)
        closed = False
        while True:
            nxt = [e for e in incident[cur] if e not in used]
            if not nxt:
                closed = cur == first
                break
            eid = nxt[0]
            used.add(eid)
            loop.append(eid)
            u, v = edge_vertices[eid]
            cur = int(v) if int(u) == cur else int(u)
            if cur == first:
                closed = True
                break
        if closed and len(loop) >= 3:
            loops.append(loop)
    return loops


def extract_boundary_faces(labeled: LabeledMesh):
    """Ordered centers of the label-1 faces adjacent to label-0 faces,
    following the longest closed loop of label-boundary edges.

    Returns (centers (k, 3), face ids (k,))."""
    ev, one_side = _label_boundary_edges(labeled)
    if len(ev) == 0:
        raise BoundaryExtractionError("labels are uniform: no label boundary")
    loops = _edge_loops(ev)
    if not loops:
        raise BoundaryExtractionError(
            f"{len(ev)} label-boundary edges form no closed loop"
        )
    verts = labeled.mesh.vertices
    lengths = [
        sum(
            float(np.linalg.norm(verts[ev[e, 0]] - verts[ev[e, 1]]))
            for e in loop
        )
        for loop in loops
    ]
    loop = loops[int(np.argmax(lengths))]
    faces = []
    for eid in loop:
        f = int(one_side[eid])
        if not faces or (f != faces[-1] and f != faces[0]):
            faces.append(f)
    face_ids = np.asarray(faces, dtype=np.int64)
    return labeled.mesh.barycenters[face_ids], face_ids


@dataclass
class MarginLine:
    """Ordered closed loop of points lying on the original die surface."""

    points: np.ndarray  # (n, 3) mm
    spline: SmoothingSpline
    case_id: str = ""

    @property
    def n_points(self):
        return len(self.points)

    def to_json_dict(self):
        return {
            "case_id": self.case_id,
            "n": int(self.n_points),
            "points": [[float(x) for x in p] for p in self.points],
            "closed": True,
        }

    def save_json(self, path):
        Path(path).write_text(
            json.dumps(self.to_json_dict(), separators=(",", ":"))
        )

    def save_obj(self, path):
        lines = [f"v {p[0]:.9g} {p[1]:.9g} {p[2]:.9g}" for p in self.points]
        n = self.n_points
        lines.append("l " + " ".join(str(i) for i in range(1, n + 1)) + " 1")
        Path(path).write_text("\n".join(lines) + "\n")


def load_margin_json(path):
    data = json.loads(Path(path).read_text())
    return np.asarray(data["points"], dtype=np.float64), data.get("case_id", "")


def _self_intersects_2d(points):
    """Cheap planarized self-intersection screen used only for warnings."""
    # project on the two largest-variance axes
    centered = points - points.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    flat = centered @ vt[:2].T
    seg = np.roll(flat, -1, axis=0) - flat
    n = len(flat)
    step = max(1, n // 200)  # screen a subsample; this is advisory only
    idx = range(0, n, step)
    for i in idx:
        for j in idx:
            if abs(i - j) <= 1 or (i == 0 and j == n - 1) or (j == 0 and i == n - 1):
                continue
            p, r = flat[i], seg[i]
            q, s = flat[j], seg[j]
            denom = r[0] * s[1] - r[1] * s[0]
            if abs(denom) < 1e-30:
                continue
            qp = q - p
            t = (qp[0] * s[1] - qp[1] * s[0]) / denom
            u = (qp[0] * r[1] - qp[1] * r[0]) / denom
            if 0 < t < 1 and 0 < u < 1:
                return True
    return False


def extract_margin_line(
    labeled: LabeledMesh,
    original_die: TriangleMesh,
    n_samples=DEFAULT_SAMPLES,
    case_id="",
) -> MarginLine:
    """Boundary face centers -> closest points on the original die ->
    periodic smoothing spline -> n_samples parameter-uniform samples,
    each projected back onto the die surface."""
    centers, _ = extract_boundary_faces(labeled)
    bvh = original_die.bvh()
    projected, _, _ = bvh.closest_points(centers)
    spline = fit_smoothing_spline(projected)
    sampled = spline.sample(n_samples)
    on_surface, _, _ = bvh.closest_points(sampled)
    if _self_intersects_2d(on_surface):
        warnings.warn(f"margin line for case {case_id!r} self-intersects")
    return MarginLine(points=on_surface, spline=spline, case_id=case_id)
