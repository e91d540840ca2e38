"""Parametric artery-with-aneurysm geometry and its signed distance field.

The vessel is a constant-diameter tube swept along a planar quadratic Bezier
centerline, merged (boolean union) with a spherical aneurysm. Distances are
signed: negative inside the lumen/sac, zero on the wall, positive outside.

The union SDF is the pointwise min of the tube and sphere SDFs. This is
sign-correct everywhere and exact outside the concave blend near the neck,
which is sufficient (and conservative) for penalty contact.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError
from .geometry import closest_point_on_segments

#: extra clearance added around the geometry bounding box [mm]
BBOX_MARGIN = 2.0

#: default grid spacing [mm]; below the finest imaging threshold (0.15 mm)
DEFAULT_GRID_SPACING = 0.1


@dataclass(frozen=True)
class BezierCenterline:
    """Planar quadratic Bezier curve; all control points share the x plane."""

    P0: np.ndarray
    P1: np.ndarray
    P2: np.ndarray

    def __post_init__(self):
        for name in ("P0", "P1", "P2"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if not (self.P0[0] == self.P1[0] == self.P2[0]):
            raise GeometryError("control points must share the same x coordinate (planar curve)")
        if np.allclose(self.P0, self.P2):
            raise GeometryError("P0 and P2 must differ")

    def point(self, t):
        """Evaluate the curve at t in [0, 1]."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0.0) or np.any(t > 1.0):
            raise GeometryError(f"curve parameter outside [0, 1]: {t}")
        tt = t[..., None]
        return (1 - tt) ** 2 * self.P0 + 2 * tt * (1 - tt) * self.P1 + tt**2 * self.P2

    def polyline(self, n_segments: int) -> np.ndarray:
        """(n_segments + 1, 3) points at uniform parameter spacing."""
        return self.point(np.linspace(0.0, 1.0, n_segments + 1))


def bezier_point(c: BezierCenterline, t) -> np.ndarray:
    return c.point(t)


@dataclass
class VesselModel:
    """Tube along a Bezier centerline plus a spherical aneurysm.

    All lengths in mm. C_a must be offset from the centerline midpoint only
    along y.
    """

    centerline: BezierCenterline
    D_v: float
    D_a: float
    C_a: np.ndarray
    n_polyline: int = 400

    _poly: np.ndarray = field(init=False, repr=False)
    _arc: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.D_v <= 0 or self.D_a <= 0:
            raise GeometryError("vessel and aneurysm diameters must be positive")
        self.C_a = np.asarray(self.C_a, dtype=float)
        mid = self.centerline.point(0.5)
        off = self.C_a - mid
        if abs(off[0]) > 1e-9 or abs(off[2]) > 1e-9:
            raise GeometryError("aneurysm center must be offset from B(0.5) along y only")
        self._poly = self.centerline.polyline(self.n_polyline)
        seg = np.linalg.norm(np.diff(self._poly, axis=0), axis=1)
        self._arc = np.concatenate([[0.0], np.cumsum(seg)])

    # -- centerline queries -------------------------------------------------

    @property
    def polyline_points(self) -> np.ndarray:
        return self._poly

    @property
    def arc_length(self) -> float:
        return float(self._arc[-1])

    def point_at_arc(self, s) -> np.ndarray:
        """Point on the discretized centerline at arc length s (clamped)."""
        s = np.clip(np.asarray(s, dtype=float), 0.0, self._arc[-1])
        idx = np.clip(np.searchsorted(self._arc, s) - 1, 0, len(self._arc) - 2)
        seg_len = self._arc[idx + 1] - self._arc[idx]
        seg_len = np.where(seg_len == 0, 1.0, seg_len)
        t = (s - self._arc[idx]) / seg_len
        return self._poly[idx] + t[..., None] * (self._poly[idx + 1] - self._poly[idx])

    # -- signed distance ----------------------------------------------------

    def sdf_tube(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if p.ndim == 2 and len(p) > 512:
            return self._sdf_tube_fast(p)
        dist, _ = closest_point_on_segments(p, self._poly[:-1], self._poly[1:])
        return dist.min(axis=-1) - 0.5 * self.D_v

    def _sdf_tube_fast(self, pts: np.ndarray, k: int = 16) -> np.ndarray:
        """Exact segment distance restricted to KD-tree-preselected candidates.

        The candidate set (k nearest segment midpoints) always contains the
        closest segment for a smooth centerline, so the result equals the
        brute-force minimum.
        """
        from scipy.spatial import cKDTree

        if not hasattr(self, "_mid_tree"):
            self._mid_tree = cKDTree(0.5 * (self._poly[:-1] + self._poly[1:]))
        k = min(k, len(self._poly) - 1)
        _, idx = self._mid_tree.query(pts, k=k)
        idx = np.atleast_2d(idx)
        a = self._poly[:-1][idx]  # (n, k, 3)
        d = self._poly[1:][idx] - a
        t = np.einsum("nkj,nkj->nk", pts[:, None, :] - a, d) / np.einsum("nkj,nkj->nk", d, d)
        np.clip(t, 0.0, 1.0, out=t)
        closest = a + t[..., None] * d
        dist = np.linalg.norm(pts[:, None, :] - closest, axis=-1).min(axis=1)
        return dist - 0.5 * self.D_v

    def sdf_sphere(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return np.linalg.norm(p - self.C_a, axis=-1) - 0.5 * self.D_a

    def sdf(self, p) -> np.ndarray:
        """Signed distance to the tube/sphere union; negative inside."""
        return np.minimum(self.sdf_tube(p), self.sdf_sphere(p))

    def sdf_gradient(self, p, h: float = 1e-4) -> np.ndarray:
        """Unit outward normal by central differences of the SDF."""
        p = np.asarray(p, dtype=float)
        single = p.ndim == 1
        pts = np.atleast_2d(p)
        grad = np.empty_like(pts)
        for k in range(3):
            dp = np.zeros(3)
            dp[k] = h
            grad[:, k] = (self.sdf(pts + dp) - self.sdf(pts - dp)) / (2 * h)
        norm = np.linalg.norm(grad, axis=-1, keepdims=True)
        if np.any(norm < 1e-12):
            raise GeometryError("degenerate SDF gradient (equidistant point)")
        grad /= norm
        return grad[0] if single else grad

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        """Axis-aligned box of the control points and C_a, inflated."""
        pts = np.vstack([self.centerline.P0, self.centerline.P1, self.centerline.P2, self.C_a])
        pad = 0.5 * self.D_a + BBOX_MARGIN
        return pts.min(axis=0) - pad, pts.max(axis=0) + pad

    def bake_sdf_grid(
        self,
        spacing: float = DEFAULT_GRID_SPACING,
        bounds: tuple[np.ndarray, np.ndarray] | None = None,
    ) -> "SDFGrid":
        """Sample the analytic SDF on a regular grid covering the vessel.

        `bounds` restricts the grid to a sub-box (clipped to the vessel
        bounding box), e.g. the neighborhood of a deployment site.
        """
        if spacing <= 0:
            raise GeometryError("grid spacing must be positive")
        lo, hi = self.bounding_box()
        if bounds is not None:
            lo = np.maximum(lo, np.asarray(bounds[0], dtype=float))
            hi = np.minimum(hi, np.asarray(bounds[1], dtype=float))
            if np.any(hi <= lo):
                raise GeometryError("bake bounds do not intersect the vessel box")
        dims = np.maximum(np.ceil((hi - lo) / spacing).astype(int) + 1, 2)
        xs = lo[0] + spacing * np.arange(dims[0])
        ys = lo[1] + spacing * np.arange(dims[1])
        zs = lo[2] + spacing * np.arange(dims[2])
        # evaluate in z-slabs to bound memory
        values = np.empty(tuple(dims), dtype=float)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        for k, z in enumerate(zs):
            pts = np.stack([gx, gy, np.full_like(gx, z)], axis=-1).reshape(-1, 3)
            values[:, :, k] = self.sdf(pts).reshape(dims[0], dims[1])
        return SDFGrid(origin=lo, spacing=float(spacing), values=values)

    # -- surface mesh -------------------------------------------------------

    def surface_mesh(self, n_circ: int = 48, n_axial: int | None = None, n_sphere: int = 48):
        """Triangulated tube (capsule) and sphere surfaces for visualization.

        Returns (vertices, triangles). The two primitives are concatenated;
        faces inside the union are not trimmed (adequate for rendering and
        for distance oracles that compose by min).
        """
        n_axial = n_axial or self.n_polyline
        poly = self.centerline.polyline(n_axial)
        verts = []
        tris = []

        # tube rings with a parallel-transported frame
        r = 0.5 * self.D_v
        tangents = np.gradient(poly, axis=0)
        tangents /= np.linalg.norm(tangents, axis=1, keepdims=True)
        normal = np.array([1.0, 0.0, 0.0])  # planar curve: x is always transverse
        ring_angles = 2 * np.pi * np.arange(n_circ) / n_circ
        base = len(verts)
        for i, (c, t) in enumerate(zip(poly, tangents)):
            b1 = normal - np.dot(normal, t) * t
            b1 /= np.linalg.norm(b1)
            b2 = np.cross(t, b1)
            ring = c + r * (np.outer(np.cos(ring_angles), b1) + np.outer(np.sin(ring_angles), b2))
            verts.extend(ring)
        for i in range(n_axial):
            for j in range(n_circ):
                a = base + i * n_circ + j
                b = base + i * n_circ + (j + 1) % n_circ
                c2 = a + n_circ
                d = b + n_circ
                tris.append((a, b, d))
                tris.append((a, d, c2))
        # hemispherical end caps
        for end, sign in ((0, -1.0), (n_axial, 1.0)):
            center = poly[end]
            t = tangents[end] * sign
            cap_base = len(verts)
            n_lat = max(n_circ // 4, 2)
            # frame from the unsigned tangent so cap rings stay angularly
            # aligned with the adjacent tube ring at both ends
            b1 = normal - np.dot(normal, tangents[end]) * tangents[end]
            b1 /= np.linalg.norm(b1)
            b2 = np.cross(tangents[end], b1)
            for li in range(1, n_lat + 1):
                lat = 0.5 * np.pi * li / n_lat
                rr = r * np.cos(lat)
                h = r * np.sin(lat)
                if li < n_lat:
                    ring = center + h * t + rr * (
                        np.outer(np.cos(ring_angles), b1) + np.outer(np.sin(ring_angles), b2)
                    )
                    verts.extend(ring)
                else:
                    verts.append(center + r * t)
            prev = [end * n_circ + j for j in range(n_circ)]
            for li in range(n_lat):
                if li < n_lat - 1:
                    cur = [cap_base + li * n_circ + j for j in range(n_circ)]
                    for j in range(n_circ):
                        tris.append((prev[j], prev[(j + 1) % n_circ], cur[(j + 1) % n_circ]))
                        tris.append((prev[j], cur[(j + 1) % n_circ], cur[j]))
                    prev = cur
                else:
                    apex = cap_base + (n_lat - 1) * n_circ
                    for j in range(n_circ):
                        tris.append((prev[j], prev[(j + 1) % n_circ], apex))

        # aneurysm sphere (UV sphere)
        sphere_base = len(verts)
        ra = 0.5 * self.D_a
        n_lat = n_sphere // 2
        for li in range(1, n_lat):
            lat = np.pi * li / n_lat
            for j in range(n_sphere):
                lon = 2 * np.pi * j / n_sphere
                verts.append(
                    self.C_a
                    + ra * np.array([np.sin(lat) * np.cos(lon), np.sin(lat) * np.sin(lon), np.cos(lat)])
                )
        top = len(verts)
        verts.append(self.C_a + ra * np.array([0.0, 0.0, 1.0]))
        bot = len(verts)
        verts.append(self.C_a - ra * np.array([0.0, 0.0, 1.0]))
        for j in range(n_sphere):
            jn = (j + 1) % n_sphere
            tris.append((top, sphere_base + j, sphere_base + jn))
            tris.append((bot, sphere_base + (n_lat - 2) * n_sphere + jn, sphere_base + (n_lat - 2) * n_sphere + j))
        for li in range(n_lat - 2):
            for j in range(n_sphere):
                jn = (j + 1) % n_sphere
                a = sphere_base + li * n_sphere + j
                b = sphere_base + li * n_sphere + jn
                c2 = sphere_base + (li + 1) * n_sphere + j
                d = sphere_base + (li + 1) * n_sphere + jn
                tris.append((a, b, d))
                tris.append((a, d, c2))

        return np.asarray(verts, dtype=float), np.asarray(tris, dtype=np.int64)


def sdf_eval(v: VesselModel, p) -> np.ndarray:
    return v.sdf(p)


def sdf_gradient(v: VesselModel, p) -> np.ndarray:
    return v.sdf_gradient(p)


def bake_sdf_grid(v: VesselModel, spacing: float = DEFAULT_GRID_SPACING) -> "SDFGrid":
    return v.bake_sdf_grid(spacing)


_SDF_MAGIC = b"SDF1"


@dataclass
class SDFGrid:
    """Regular grid of signed distances with trilinear interpolation."""

    origin: np.ndarray
    spacing: float
    values: np.ndarray  # (nx, ny, nz), x fastest when flattened Fortran-style

    clamped_queries: int = 0

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.spacing <= 0:
            raise GeometryError("grid spacing must be positive")
        if self.values.ndim != 3 or min(self.values.shape) < 2:
            raise GeometryError("grid needs at least 2 samples per axis")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.values.shape

    def sample(self, p) -> np.ndarray:
        """Trilinear interpolation; out-of-bounds points are clamped."""
        p = np.asarray(p, dtype=float)
        single = p.ndim == 1
        pts = np.atleast_2d(p)
        g = (pts - self.origin) / self.spacing
        hi = np.asarray(self.values.shape) - 1
        clamped = np.any((g < 0) | (g > hi), axis=-1)
        if np.any(clamped):
            self.clamped_queries += int(np.count_nonzero(clamped))
            warnings.warn("SDF grid queried out of bounds; values clamped", stacklevel=2)
            g = np.clip(g, 0.0, hi)
        i0 = np.minimum(g.astype(int), hi - 1)
        f = g - i0
        ix, iy, iz = i0[:, 0], i0[:, 1], i0[:, 2]
        fx, fy, fz = f[:, 0], f[:, 1], f[:, 2]
        v = self.values
        c00 = v[ix, iy, iz] * (1 - fx) + v[ix + 1, iy, iz] * fx
        c10 = v[ix, iy + 1, iz] * (1 - fx) + v[ix + 1, iy + 1, iz] * fx
        c01 = v[ix, iy, iz + 1] * (1 - fx) + v[ix + 1, iy, iz + 1] * fx
        c11 = v[ix, iy + 1, iz + 1] * (1 - fx) + v[ix + 1, iy + 1, iz + 1] * fx
        c0 = c00 * (1 - fy) + c10 * fy
        c1 = c01 * (1 - fy) + c11 * fy
        out = c0 * (1 - fz) + c1 * fz
        return out[0] if single else out

    def interp_gradient(self, p) -> np.ndarray:
        """Exact gradient of the trilinear interpolant (not normalized).

        Piecewise constant-in-cell derivative of sample(); used for contact
        forces so that the penalty field stays conservative.
        """
        p = np.asarray(p, dtype=float)
        single = p.ndim == 1
        pts = np.atleast_2d(p)
        g = (pts - self.origin) / self.spacing
        hi = np.asarray(self.values.shape) - 1
        g = np.clip(g, 0.0, hi)
        i0 = np.minimum(g.astype(int), hi - 1)
        f = g - i0
        ix, iy, iz = i0[:, 0], i0[:, 1], i0[:, 2]
        fx, fy, fz = f[:, 0], f[:, 1], f[:, 2]
        v = self.values
        v000 = v[ix, iy, iz]
        v100 = v[ix + 1, iy, iz]
        v010 = v[ix, iy + 1, iz]
        v110 = v[ix + 1, iy + 1, iz]
        v001 = v[ix, iy, iz + 1]
        v101 = v[ix + 1, iy, iz + 1]
        v011 = v[ix, iy + 1, iz + 1]
        v111 = v[ix + 1, iy + 1, iz + 1]
        c00 = v000 * (1 - fx) + v100 * fx
        c10 = v010 * (1 - fx) + v110 * fx
        c01 = v001 * (1 - fx) + v101 * fx
        c11 = v011 * (1 - fx) + v111 * fx
        c0 = c00 * (1 - fy) + c10 * fy
        c1 = c01 * (1 - fy) + c11 * fy
        inv_h = 1.0 / self.spacing
        grad = np.stack(
            [
                (
                    (v100 - v000) * (1 - fy) * (1 - fz)
                    + (v110 - v010) * fy * (1 - fz)
                    + (v101 - v001) * (1 - fy) * fz
                    + (v111 - v011) * fy * fz
                )
                * inv_h,
                ((c10 - c00) * (1 - fz) + (c11 - c01) * fz) * inv_h,
                (c1 - c0) * inv_h,
            ],
            axis=-1,
        )
        return grad[0] if single else grad

    def gradient(self, p, h: float | None = None) -> np.ndarray:
        """Unit gradient of the interpolated field by central differences."""
        h = h or 0.5 * self.spacing
        p = np.asarray(p, dtype=float)
        single = p.ndim == 1
        pts = np.atleast_2d(p)
        grad = np.empty_like(pts)
        for k in range(3):
            dp = np.zeros(3)
            dp[k] = h
            grad[:, k] = (self.sample(pts + dp) - self.sample(pts - dp)) / (2 * h)
        norm = np.linalg.norm(grad, axis=-1, keepdims=True)
        norm = np.where(norm < 1e-12, 1.0, norm)
        grad /= norm
        return grad[0] if single else grad

    # -- binary serialization (little-endian) --------------------------------

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(_SDF_MAGIC)
            fh.write(struct.pack("<3d", *self.origin))
            fh.write(struct.pack("<d", self.spacing))
            fh.write(struct.pack("<3I", *self.values.shape))
            # row-major with x fastest
            fh.write(np.ascontiguousarray(self.values.transpose(2, 1, 0), dtype="<f4").tobytes())

    @classmethod
    def load(cls, path) -> "SDFGrid":
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != _SDF_MAGIC:
                raise GeometryError(f"not an SDF grid file (magic {magic!r})")
            origin = np.array(struct.unpack("<3d", fh.read(24)))
            spacing = struct.unpack("<d", fh.read(8))[0]
            dims = struct.unpack("<3I", fh.read(12))
            data = np.frombuffer(fh.read(), dtype="<f4")
        if data.size != dims[0] * dims[1] * dims[2]:
            raise GeometryError("SDF grid payload size mismatch")
        values = data.reshape(dims[2], dims[1], dims[0]).transpose(2, 1, 0).astype(float)
        return cls(origin=origin, spacing=spacing, values=values)
