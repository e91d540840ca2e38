"""Small rotation/quaternion helpers shared by the centerline and beam code.

All rotations are right-handed; quaternions are stored (w, x, y, z) and kept
normalized by the callers that integrate them.
"""

from __future__ import annotations

import numpy as np


def rotation_matrix(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix about a unit axis."""
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n < 1e-300:
        return np.eye(3)
    axis = axis / n
    k = np.array(
        [
            [0.0, -axis[2], axis[1]],
            [axis[2], 0.0, -axis[0]],
            [-axis[1], axis[0], 0.0],
        ]
    )
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def quat_multiply(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    """Hamilton product, broadcasting over leading axes."""
    w1, x1, y1, z1 = np.moveaxis(q1, -1, 0)
    w2, x2, y2, z2 = np.moveaxis(q2, -1, 0)
    return np.stack(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ],
        axis=-1,
    )


def quat_from_rotvec(rv: np.ndarray) -> np.ndarray:
    """Exponential map: rotation vectors (..., 3) to unit quaternions (..., 4)."""
    rv = np.asarray(rv, dtype=float)
    angle = np.linalg.norm(rv, axis=-1, keepdims=True)
    half = 0.5 * angle
    # sinc form is stable at angle -> 0
    small = angle < 1e-8
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(small, 0.5 - angle**2 / 48.0, np.sin(half) / np.where(angle == 0, 1.0, angle))
    w = np.cos(half)
    xyz = rv * scale
    return np.concatenate([w, xyz], axis=-1)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Unit quaternions (..., 4) to rotation matrices (..., 3, 3)."""
    w, x, y, z = np.moveaxis(q, -1, 0)
    m = np.empty(q.shape[:-1] + (3, 3), dtype=float)
    m[..., 0, 0] = 1 - 2 * (y * y + z * z)
    m[..., 0, 1] = 2 * (x * y - w * z)
    m[..., 0, 2] = 2 * (x * z + w * y)
    m[..., 1, 0] = 2 * (x * y + w * z)
    m[..., 1, 1] = 1 - 2 * (x * x + z * z)
    m[..., 1, 2] = 2 * (y * z - w * x)
    m[..., 2, 0] = 2 * (x * z - w * y)
    m[..., 2, 1] = 2 * (y * z + w * x)
    m[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return m


def matrix_to_quat(m: np.ndarray) -> np.ndarray:
    """Rotation matrices (..., 3, 3) to unit quaternions (..., 4), w >= 0."""
    m = np.asarray(m, dtype=float)
    t = np.einsum("...ii->...", m)
    q = np.empty(m.shape[:-2] + (4,), dtype=float)
    # Shepperd's method, branch on the largest diagonal entry for stability.
    cand = np.stack([t, m[..., 0, 0], m[..., 1, 1], m[..., 2, 2]], axis=-1)
    case = np.argmax(cand, axis=-1)

    flat_m = m.reshape(-1, 3, 3)
    flat_case = np.atleast_1d(case).reshape(-1)
    flat_q = q.reshape(-1, 4)
    for i in range(flat_m.shape[0]):
        mm = flat_m[i]
        c = flat_case[i]
        if c == 0:
            s = np.sqrt(max(1.0 + mm[0, 0] + mm[1, 1] + mm[2, 2], 0.0)) * 2
            flat_q[i] = [0.25 * s, (mm[2, 1] - mm[1, 2]) / s, (mm[0, 2] - mm[2, 0]) / s, (mm[1, 0] - mm[0, 1]) / s]
        elif c == 1:
            s = np.sqrt(max(1.0 + mm[0, 0] - mm[1, 1] - mm[2, 2], 0.0)) * 2
            flat_q[i] = [(mm[2, 1] - mm[1, 2]) / s, 0.25 * s, (mm[0, 1] + mm[1, 0]) / s, (mm[0, 2] + mm[2, 0]) / s]
        elif c == 2:
            s = np.sqrt(max(1.0 - mm[0, 0] + mm[1, 1] - mm[2, 2], 0.0)) * 2
            flat_q[i] = [(mm[0, 2] - mm[2, 0]) / s, (mm[0, 1] + mm[1, 0]) / s, 0.25 * s, (mm[1, 2] + mm[2, 1]) / s]
        else:
            s = np.sqrt(max(1.0 - mm[0, 0] - mm[1, 1] + mm[2, 2], 0.0)) * 2
            flat_q[i] = [(mm[1, 0] - mm[0, 1]) / s, (mm[0, 2] + mm[2, 0]) / s, (mm[1, 2] + mm[2, 1]) / s, 0.25 * s]
    neg = flat_q[:, 0] < 0
    flat_q[neg] *= -1.0
    out = flat_q.reshape(q.shape)
    return out


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vectors (..., 3) by unit quaternions (..., 4)."""
    w = q[..., :1]
    u = q[..., 1:]
    uv = np.cross(u, v)
    return v + 2.0 * (w * uv + np.cross(u, uv))


def rotvec_from_matrix_small(m: np.ndarray) -> np.ndarray:
    """Log map for rotations expected to be small (< ~90 degrees).

    Used to extract local corotational rotations; matrices (..., 3, 3).
    """
    tr = np.clip((np.einsum("...ii->...", m) - 1.0) * 0.5, -1.0, 1.0)
    angle = np.arccos(tr)
    ax = np.stack(
        [
            m[..., 2, 1] - m[..., 1, 2],
            m[..., 0, 2] - m[..., 2, 0],
            m[..., 1, 0] - m[..., 0, 1],
        ],
        axis=-1,
    )
    s = 2.0 * np.sin(angle)
    small = angle < 1e-6
    with np.errstate(invalid="ignore", divide="ignore"):
        factor = np.where(small, 0.5 + angle**2 / 12.0, angle / np.where(s == 0, 1.0, s))
    return ax * factor[..., None]


def closest_point_on_segments(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Closest points of p (..., 3) to each segment [a_j, b_j].

    Returns (distances (..., n_seg), points (..., n_seg, 3)).
    """
    p = np.asarray(p, dtype=float)
    d = b - a  # (n_seg, 3)
    dd = np.einsum("ij,ij->i", d, d)
    dd = np.where(dd == 0.0, 1.0, dd)
    ap = p[..., None, :] - a  # (..., n_seg, 3)
    t = np.clip(np.einsum("...ij,ij->...i", ap, d) / dd, 0.0, 1.0)
    closest = a + t[..., None] * d
    dist = np.linalg.norm(p[..., None, :] - closest, axis=-1)
    return dist, closest
