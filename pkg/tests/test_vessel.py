"""Vessel geometry and signed distance field against independent oracles."""

import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stentrom.errors import GeometryError
from stentrom.geometry import closest_point_on_segments
from stentrom.vessel import BezierCenterline, SDFGrid, VesselModel


def make_vessel(y_P1=4.0, z_P1=10.0, D_v=3.0, D_a=6.0, y_Ca=4.0, z_end=20.0):
    cl = BezierCenterline(P0=(0, 0, 0), P1=(0, y_P1, z_P1), P2=(0, 0, z_end))
    C_a = cl.point(0.5) + np.array([0.0, y_Ca, 0.0])
    return VesselModel(centerline=cl, D_v=D_v, D_a=D_a, C_a=C_a)


# -- Bezier curve --------------------------------------------------------------


def test_bezier_endpoints():
    cl = BezierCenterline(P0=(0, 1, 2), P1=(0, 5, 9), P2=(0, -1, 20))
    np.testing.assert_array_equal(cl.point(0.0), [0, 1, 2])
    np.testing.assert_array_equal(cl.point(1.0), [0, -1, 20])


def test_bezier_midpoint_value():
    cl = BezierCenterline(P0=(0, 0, 0), P1=(0, 4, 10), P2=(0, 0, 20))
    np.testing.assert_allclose(cl.point(0.5), [0, 2, 10], atol=1e-15)


@given(t=st.floats(0, 1), y=st.floats(-5, 8), z=st.floats(1, 30))
@settings(max_examples=50)
def test_bezier_matches_de_casteljau(t, y, z):
    cl = BezierCenterline(P0=(0, 0, 0), P1=(0, y, z), P2=(0, 0, 40))
    # independent evaluation by repeated linear interpolation
    a = (1 - t) * cl.P0 + t * cl.P1
    b = (1 - t) * cl.P1 + t * cl.P2
    np.testing.assert_allclose(cl.point(t), (1 - t) * a + t * b, atol=1e-12)


def test_bezier_out_of_range_raises():
    cl = BezierCenterline(P0=(0, 0, 0), P1=(0, 1, 1), P2=(0, 0, 2))
    with pytest.raises(GeometryError):
        cl.point(1.5)


def test_bezier_nonplanar_raises():
    with pytest.raises(GeometryError):
        BezierCenterline(P0=(0, 0, 0), P1=(1, 0, 1), P2=(0, 0, 2))
    with pytest.raises(GeometryError):
        BezierCenterline(P0=(0, 0, 0), P1=(0, 1, 1), P2=(0, 0, 0))


# -- analytic SDF ---------------------------------------------------------------


def test_sdf_straight_tube_analytic():
    """Degenerate-curvature vessel: tube SDF equals the cylinder formula."""
    v = make_vessel(y_P1=0.0, y_Ca=4.0)
    rng = np.random.default_rng(0)
    pts = rng.uniform([-4, -4, 2], [4, 4, 18], size=(400, 3))
    expected = np.hypot(pts[:, 0], pts[:, 1]) - 0.5 * v.D_v
    np.testing.assert_allclose(v.sdf_tube(pts), expected, atol=1e-9)


def test_sdf_sphere_analytic():
    v = make_vessel()
    rng = np.random.default_rng(1)
    pts = rng.uniform(-10, 25, size=(300, 3))
    expected = np.linalg.norm(pts - v.C_a, axis=1) - 0.5 * v.D_a
    np.testing.assert_allclose(v.sdf_sphere(pts), expected, rtol=0, atol=1e-12)


def test_sdf_union_is_min():
    v = make_vessel()
    rng = np.random.default_rng(2)
    pts = rng.uniform(-10, 25, size=(500, 3))
    np.testing.assert_array_equal(v.sdf(pts), np.minimum(v.sdf_tube(pts), v.sdf_sphere(pts)))


def test_sdf_signs():
    v = make_vessel()
    assert v.sdf(v.centerline.point(0.3)) < 0  # in the lumen
    assert v.sdf(v.C_a) < 0  # in the sac
    assert v.sdf(np.array([50.0, 0.0, 0.0])) > 0  # far outside


def test_sdf_fast_path_matches_brute_force():
    v = make_vessel(y_P1=6.0, z_end=40.0)
    rng = np.random.default_rng(3)
    pts = rng.uniform([-6, -6, -2], [6, 10, 42], size=(600, 3))
    fast = v._sdf_tube_fast(pts)
    poly = v.polyline_points
    dist, _ = closest_point_on_segments(pts, poly[:-1], poly[1:])
    brute = dist.min(axis=-1) - 0.5 * v.D_v
    np.testing.assert_array_equal(fast, brute)


def test_sdf_gradient_unit_and_fd_consistent():
    v = make_vessel()
    rng = np.random.default_rng(4)
    pts = rng.uniform([-3, -3, 3], [3, 8, 17], size=(50, 3))
    # keep away from the medial axis where the gradient is discontinuous
    keep = np.abs(v.sdf(pts)) > 0.2
    g = v.sdf_gradient(pts[keep])
    np.testing.assert_allclose(np.linalg.norm(g, axis=1), 1.0, atol=1e-9)
    h = 1e-5
    for k in range(3):
        dp = np.zeros(3)
        dp[k] = h
        fd = (v.sdf(pts[keep] + dp) - v.sdf(pts[keep] - dp)) / (2 * h)
        raw_norm = np.linalg.norm(
            np.stack(
                [(v.sdf(pts[keep] + np.eye(3)[j] * h) - v.sdf(pts[keep] - np.eye(3)[j] * h)) / (2 * h) for j in range(3)],
                axis=1,
            ),
            axis=1,
        )
        np.testing.assert_allclose(g[:, k] * raw_norm, fd, atol=1e-3)


def test_bounding_box_formula():
    v = make_vessel()
    lo, hi = v.bounding_box()
    pts = np.vstack([v.centerline.P0, v.centerline.P1, v.centerline.P2, v.C_a])
    pad = 0.5 * v.D_a + 2.0
    np.testing.assert_array_equal(lo, pts.min(axis=0) - pad)
    np.testing.assert_array_equal(hi, pts.max(axis=0) + pad)


def test_aneurysm_offset_must_be_y_only():
    cl = BezierCenterline(P0=(0, 0, 0), P1=(0, 4, 10), P2=(0, 0, 20))
    with pytest.raises(GeometryError):
        VesselModel(centerline=cl, D_v=3, D_a=6, C_a=cl.point(0.5) + np.array([1.0, 4.0, 0.0]))


# -- baked grid -------------------------------------------------------------------


def test_grid_nodes_hold_exact_sdf():
    v = make_vessel()
    grid = v.bake_sdf_grid(spacing=1.0)
    i, j, k = 2, 3, 4
    p = grid.origin + np.array([i, j, k]) * grid.spacing
    assert grid.values[i, j, k] == pytest.approx(float(v.sdf(p)), abs=1e-12)
    assert grid.sample(p) == pytest.approx(grid.values[i, j, k], abs=1e-12)


def test_trilinear_reproduces_linear_fields_exactly():
    origin = np.array([-1.0, 2.0, 0.5])
    spacing = 0.7
    dims = (6, 5, 7)
    idx = np.indices(dims).astype(float)
    coef = np.array([0.3, -1.1, 2.2])
    xs = origin[:, None, None, None] + spacing * idx
    values = 4.0 + coef[0] * xs[0] + coef[1] * xs[1] + coef[2] * xs[2]
    grid = SDFGrid(origin=origin, spacing=spacing, values=values)
    rng = np.random.default_rng(5)
    lo = origin
    hi = origin + spacing * (np.array(dims) - 1)
    pts = rng.uniform(lo, hi, size=(200, 3))
    expected = 4.0 + pts @ coef
    np.testing.assert_allclose(grid.sample(pts), expected, atol=1e-10)


def test_grid_out_of_bounds_clamps_and_warns():
    grid = SDFGrid(origin=np.zeros(3), spacing=1.0, values=np.ones((3, 3, 3)))
    with pytest.warns(UserWarning):
        val = grid.sample(np.array([10.0, 10.0, 10.0]))
    assert val == pytest.approx(1.0)
    assert grid.clamped_queries == 1


def test_grid_save_load_roundtrip(tmp_path):
    v = make_vessel()
    grid = v.bake_sdf_grid(spacing=1.5)
    path = tmp_path / "grid.sdf"
    grid.save(path)
    back = SDFGrid.load(path)
    np.testing.assert_array_equal(back.origin, grid.origin)
    assert back.spacing == grid.spacing
    # payload is stored as f32
    np.testing.assert_array_equal(back.values, grid.values.astype(np.float32).astype(float))


def test_grid_bad_magic_raises(tmp_path):
    path = tmp_path / "junk.sdf"
    path.write_bytes(b"NOPE" + b"\0" * 60)
    with pytest.raises(GeometryError):
        SDFGrid.load(path)


def test_bake_bounds_clip_and_reject():
    v = make_vessel()
    sub = v.bake_sdf_grid(spacing=1.0, bounds=(np.array([-2, -2, 5.0]), np.array([2, 2, 9.0])))
    full = v.bake_sdf_grid(spacing=1.0)
    assert np.prod(sub.dims) < np.prod(full.dims)
    with pytest.raises(GeometryError):
        v.bake_sdf_grid(spacing=1.0, bounds=(np.array([100.0, 0, 0]), np.array([200.0, 1, 1])))


def test_grid_gradient_unit():
    v = make_vessel()
    grid = v.bake_sdf_grid(spacing=0.8)
    rng = np.random.default_rng(6)
    pts = rng.uniform(grid.origin + 1, grid.origin + spacing_extent(grid) - 1, size=(30, 3))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        g = grid.gradient(pts)
    np.testing.assert_allclose(np.linalg.norm(g, axis=1), 1.0, atol=1e-9)


def spacing_extent(grid: SDFGrid) -> np.ndarray:
    return grid.spacing * (np.asarray(grid.dims) - 1)


# -- surface mesh -----------------------------------------------------------------


def test_surface_mesh_indices_and_sphere_radius():
    v = make_vessel()
    verts, tris = v.surface_mesh(n_circ=16, n_axial=40, n_sphere=16)
    assert tris.min() >= 0 and tris.max() < len(verts)
    # every sphere vertex sits exactly on the aneurysm surface
    on_sphere = np.abs(np.linalg.norm(verts - v.C_a, axis=1) - 0.5 * v.D_a) < 1e-9
    assert on_sphere.sum() >= 16 * 7
    # tube ring vertices are a tube radius away from the centerline polyline
    poly = v.polyline_points
    dist, _ = closest_point_on_segments(verts[: 16 * 41], poly[:-1], poly[1:])
    np.testing.assert_allclose(dist.min(axis=-1), 0.5 * v.D_v, atol=5e-3)
