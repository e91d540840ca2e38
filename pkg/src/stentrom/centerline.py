"""Centerline paths used to drive the positioning phase.

The crimped stent has a straight, z-aligned centerline C0 built from its ring
centers. Its target C_T lies along the vessel centerline starting at the
deployment site. Per-segment rotations (axis/angle between consecutive
segments) let us straighten C_T back onto the z axis and, by scaling the
angles, generate intermediate configurations C_t.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError
from .geometry import rotation_matrix
from .vessel import VesselModel


@dataclass
class CenterlinePath:
    """Ordered ring-center points R_0 ... R_{N_r - 1}."""

    points: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2 or self.points.shape[0] < 2 or self.points.shape[1] != 3:
            raise GeometryError("a centerline path needs at least two 3D points")

    @property
    def segments(self) -> np.ndarray:
        """seg_i = R_i - R_{i-1}, shape (n_points - 1, 3)."""
        return np.diff(self.points, axis=0)

    @property
    def segment_lengths(self) -> np.ndarray:
        return np.linalg.norm(self.segments, axis=1)

    @property
    def total_length(self) -> float:
        return float(self.segment_lengths.sum())


def project_centerline(C0: CenterlinePath, vessel: VesselModel, eta: float) -> CenterlinePath:
    """Lay C0 along the vessel centerline starting at arc fraction eta.

    R_0 goes to arc length eta * L_vessel; each subsequent point is placed
    on the vessel polyline so that consecutive points keep their chord
    lengths exactly, which preserves the total path length. The (crimped)
    stent must fit in the vessel downstream of eta.
    """
    if not 0.0 <= eta <= 1.0:
        raise GeometryError(f"deployment site eta={eta} outside [0, 1]")
    seg_lengths = C0.segment_lengths
    if np.any(seg_lengths == 0):
        raise GeometryError("zero-length segment in stent centerline")

    poly = vessel.polyline_points
    s0 = eta * vessel.arc_length
    start = vessel.point_at_arc(np.array([s0]))[0]
    # polyline segment index holding the start point
    arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(poly, axis=0), axis=1))])
    seg_idx = int(np.clip(np.searchsorted(arc, s0) - 1, 0, len(poly) - 2))

    out = [start]
    cur = start
    for L in seg_lengths:
        cur, seg_idx = _march_chord(poly, cur, seg_idx, L)
        if cur is None:
            raise GeometryError("stent centerline overruns the end of the vessel")
        out.append(cur)
    return CenterlinePath(points=np.asarray(out))


def _march_chord(poly: np.ndarray, origin: np.ndarray, seg_idx: int, chord: float):
    """First point forward along the polyline at Euclidean distance `chord`."""
    for j in range(seg_idx, len(poly) - 1):
        a = poly[j] if j > seg_idx else origin
        b = poly[j + 1]
        d = b - a
        # solve |a + t d - origin| = chord for t in (0, 1]
        ao = a - origin
        aa = float(np.dot(d, d))
        if aa == 0.0:
            continue
        bb = 2.0 * float(np.dot(ao, d))
        cc = float(np.dot(ao, ao)) - chord * chord
        disc = bb * bb - 4 * aa * cc
        if disc < 0:
            continue
        t = (-bb + np.sqrt(disc)) / (2 * aa)
        # tolerate roots landing a rounding error outside (0, 1]: a solution
        # exactly on a polyline vertex must not be missed by both segments
        if -1e-9 < t <= 1.0 + 1e-9 and (t > 0.0 or j > seg_idx):
            return a + min(max(t, 0.0), 1.0) * d, j
    return None, None


def segment_rotations(C: CenterlinePath) -> list[tuple[np.ndarray, float]]:
    """Axis/angle realigning each segment with the preceding one.

    The first segment is realigned with the +z axis. The rotation
    (axis_i, theta_i) maps seg_i onto the direction of seg_{i-1}; collinear
    segments get theta = 0 with a fixed arbitrary axis.
    """
    segs = C.segments
    lens = np.linalg.norm(segs, axis=1)
    if np.any(lens == 0):
        raise GeometryError("zero-length segment")
    prev = np.array([0.0, 0.0, 1.0])
    prev_len = 1.0
    out = []
    for seg, ln in zip(segs, lens):
        cross = np.cross(seg, prev)
        sin_n = np.linalg.norm(cross) / (ln * prev_len)
        cos_v = float(np.dot(seg, prev) / (ln * prev_len))
        theta = float(np.arctan2(sin_n, cos_v))
        if sin_n < 1e-14:
            axis = np.array([1.0, 0.0, 0.0])
            theta = 0.0 if cos_v > 0 else np.pi
        else:
            axis = cross / np.linalg.norm(cross)
        out.append((axis, theta))
        prev, prev_len = seg, ln
    return out


def cumulative_rotations(rotations: list[tuple[np.ndarray, float]], scale: float = 1.0) -> list[np.ndarray]:
    """M_tot,i = M_1 ... M_i with each angle multiplied by `scale`."""
    out = []
    acc = np.eye(3)
    for axis, theta in rotations:
        acc = acc @ rotation_matrix(axis, scale * theta)
        out.append(acc.copy())
    return out


def straighten(C: CenterlinePath) -> CenterlinePath:
    """Apply the cumulative rotations to map C onto a z-aligned path."""
    rot = segment_rotations(C)
    mats = cumulative_rotations(rot)
    segs = C.segments
    pts = [C.points[0]]
    for M, seg in zip(mats, segs):
        pts.append(pts[-1] + M @ seg)
    return CenterlinePath(points=np.asarray(pts))


def bend_fraction(CT: CenterlinePath, fraction: float) -> tuple["CenterlinePath", list[np.ndarray]]:
    """Path C_t with each inter-segment angle scaled by `fraction`.

    fraction = 0 gives the straight (z-aligned) C0, fraction = 1 returns C_T.
    All paths share the start point of C_T; rotations are isometries, so the
    total length is preserved.
    """
    rot = segment_rotations(CT)
    full = cumulative_rotations(rot, scale=1.0)
    part = cumulative_rotations(rot, scale=fraction)
    segs = CT.segments
    pts = [CT.points[0]]
    mats = []
    for Mf, Mp, seg in zip(full, part, segs):
        # straightened segment, then re-bent by the partial rotation
        straight_seg = Mf @ seg
        M = Mp.T
        pts.append(pts[-1] + M @ straight_seg)
        mats.append(M)
    return CenterlinePath(points=np.asarray(pts)), mats


def interpolate_path(C0: CenterlinePath, CT: CenterlinePath, n_steps: int) -> list[CenterlinePath]:
    """Intermediate paths C_t for k = 1 .. n_steps (C_t at n_steps equals CT)."""
    if C0.points.shape != CT.points.shape:
        raise GeometryError("C0 and CT must have the same number of points")
    if n_steps < 1:
        raise GeometryError("n_steps must be >= 1")
    return [bend_fraction(CT, k / n_steps)[0] for k in range(1, n_steps + 1)]
