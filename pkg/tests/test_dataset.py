"""Sampling plans, labeling, geometric predictors, and campaign storage."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stentrom.dataset import (
    FAILURE,
    SUCCESS,
    HFDataset,
    ParamSpace,
    assemble_snapshots,
    build_vessel,
    NECK_MARGIN,
    clinical_label,
    crimped_pitch,
    extract_mu_cl,
    geometric_c0,
    label_outcome,
    neck_interval,
    lhs_plan,
    lhs_unit,
    load_dataset,
    make_split,
    mu_cl_from_mu_B,
    run_campaign,
    sub_plan,
    y_ca_interval,
)
from stentrom.centerline import CenterlinePath
from stentrom.errors import ConfigError, DataError
from stentrom.solver import SolverConfig
from stentrom.stent import StentSpec, generate_stent

from conftest import write_synthetic_campaign


def test_param_space_defaults_and_validation():
    sp = ParamSpace()
    assert sp.z_P1 == (50.0, 70.0)
    with pytest.raises(ConfigError):
        ParamSpace(D_v=(4.0, 2.0))
    with pytest.raises(ConfigError):
        ParamSpace(eta=(0.5, 1.5))
    with pytest.raises(ConfigError):
        ParamSpace(z_end=-1.0)


def test_y_ca_interval_values():
    lo, hi = y_ca_interval(3.0, 6.0)
    assert lo == pytest.approx(0.6 * 1.5 + 0.3 * 6.0)  # 2.7
    assert hi == pytest.approx(0.9 * (1.5 + 3.0))  # 4.05
    assert lo < hi


@given(n=st.integers(2, 40), d=st.integers(1, 6), seed=st.integers(0, 100))
@settings(max_examples=40)
def test_lhs_unit_stratification(n, d, seed):
    u = lhs_unit(n, d, seed)
    assert u.shape == (n, d)
    for j in range(d):
        strata = np.floor(u[:, j] * n).astype(int)
        # exactly one sample per stratum in every dimension
        assert sorted(strata) == list(range(n))


def test_lhs_unit_deterministic_and_seed_sensitive():
    np.testing.assert_array_equal(lhs_unit(10, 3, 7), lhs_unit(10, 3, 7))
    assert not np.array_equal(lhs_unit(10, 3, 7), lhs_unit(10, 3, 8))


def test_lhs_plan_ranges_and_neck_interval(space):
    plan = lhs_plan(space, 50)
    assert plan.shape == (50, 6)
    for j, (lo, hi) in enumerate(space.ranges):
        if j == 4:
            continue  # y_Ca column is remapped
        assert np.all(plan[:, j] >= lo) and np.all(plan[:, j] <= hi)
    for row in plan:
        lo, hi = y_ca_interval(row[2], row[3])
        assert lo <= row[4] <= hi
    np.testing.assert_array_equal(plan, lhs_plan(space, 50))


def test_sub_plan_beats_random_subsets(space):
    plan = lhs_plan(space, 40)
    span = plan.max(axis=0) - plan.min(axis=0)

    def maximin(rows):
        z = rows / span
        d = np.linalg.norm(z[:, None] - z[None, :], axis=-1)
        return d[np.triu_indices(len(rows), 1)].min()

    chosen = sub_plan(plan, 10, seed=0)
    assert chosen.shape == (10, 6)
    # every chosen row comes from the plan
    for row in chosen:
        assert any(np.array_equal(row, p) for p in plan)
    rng = np.random.default_rng(0)
    random_scores = [maximin(plan[rng.choice(40, 10, replace=False)]) for _ in range(50)]
    assert maximin(chosen) > np.mean(random_scores)


def test_sub_plan_validation(space):
    plan = lhs_plan(space, 10)
    with pytest.raises(ConfigError):
        sub_plan(plan, 10)
    with pytest.raises(ConfigError):
        sub_plan(plan, 0)


def test_build_vessel_geometry(space, demo_mu):
    v = build_vessel(demo_mu, space)
    np.testing.assert_array_equal(v.centerline.P1, [0.0, demo_mu[0], demo_mu[1]])
    np.testing.assert_array_equal(v.centerline.P2, [0.0, 0.0, space.z_end])
    assert v.D_v == demo_mu[2] and v.D_a == demo_mu[3]
    np.testing.assert_allclose(v.C_a, v.centerline.point(0.5) + [0.0, demo_mu[4], 0.0])


def test_label_outcome_rules(space, demo_mu, tiny_spec):
    v = build_vessel(demo_mu, space)
    mesh = generate_stent(tiny_spec)
    # all nodes far from the sac -> success
    far = np.zeros_like(mesh.nodes)
    far[:, 2] = np.linspace(0, 10, len(mesh.nodes))
    assert label_outcome(far, v, tiny_spec, mesh) == SUCCESS
    # one first-ring node at the aneurysm center -> failure
    bad = far.copy()
    bad[mesh.rings[0][0]] = v.C_a
    assert label_outcome(bad, v, tiny_spec, mesh) == FAILURE
    # interior-ring node in the sac does not trigger the extremity rule
    mid = far.copy()
    mid[mesh.rings[3][0]] = v.C_a
    assert label_outcome(mid, v, tiny_spec, mesh) == SUCCESS
    # node exactly on the shrunken sphere is not "inside" (strict inequality)
    edge = far.copy()
    edge[mesh.rings[0][0]] = v.C_a + np.array([0.5 * v.D_a - tiny_spec.R_w, 0.0, 0.0])
    assert label_outcome(edge, v, tiny_spec, mesh) == SUCCESS


def test_clinical_label_guard_band(space, demo_mu, tiny_spec):
    v = build_vessel(demo_mu, space)
    mesh = generate_stent(tiny_spec)
    base = np.zeros_like(mesh.nodes)
    base[:, 2] = np.linspace(0, 10, len(mesh.nodes))
    # far upstream of the neck: both rules agree on success
    assert clinical_label(base, v, tiny_spec, mesh) == SUCCESS
    # slide the stent so the first ring center sits just inside the guard
    # band but every node stays outside the aneurysm sphere: the sac rule
    # passes while the landing-zone rule flags the deployment
    _, hi = neck_interval(v)
    shifted = base.copy()
    c0 = base[mesh.rings[0]].mean(axis=0)
    shifted[:, 2] += (hi + NECK_MARGIN - 1.0) - c0[2]
    assert label_outcome(shifted, v, tiny_spec, mesh) == SUCCESS
    assert clinical_label(shifted, v, tiny_spec, mesh) == FAILURE


def test_crimped_pitch_conserves_chord_length(tiny_spec):
    """The crimped beam chord must equal the free-helix beam chord."""
    R_c = 0.45
    dtheta = 2 * np.pi / (tiny_spec.N_w // 2)
    free_chord2 = (2 * (tiny_spec.R_s + tiny_spec.R_w) * np.sin(dtheta / 2)) ** 2 + (
        tiny_spec.L_s / tiny_spec.N_cells
    ) ** 2
    p = crimped_pitch(tiny_spec, R_c)
    crimped_chord2 = (2 * (R_c + tiny_spec.R_w) * np.sin(dtheta / 2)) ** 2 + p**2
    assert crimped_chord2 == pytest.approx(free_chord2, rel=1e-14)
    assert p > tiny_spec.L_s / tiny_spec.N_cells  # crimping elongates


def test_crimped_pitch_matches_fe_crimp(tiny_spec):
    cfg = SolverConfig()
    from stentrom.solver import crimp

    mesh = generate_stent(tiny_spec)
    state = crimp(mesh, cfg)
    centers = mesh.ring_centers(state.positions)
    fe_pitch = np.diff(centers[:, 2]).mean()
    assert crimped_pitch(tiny_spec, cfg.R_crimped) == pytest.approx(fe_pitch, abs=1e-3)


def test_geometric_c0_shape(tiny_spec):
    c0 = geometric_c0(tiny_spec, 0.45)
    assert len(c0.points) == tiny_spec.N_cells + 1
    p = crimped_pitch(tiny_spec, 0.45)
    np.testing.assert_allclose(c0.segment_lengths, p, atol=1e-12)
    # centered on the free stent midpoint
    mid = 0.5 * (c0.points[0, 2] + c0.points[-1, 2])
    assert mid == pytest.approx(0.5 * tiny_spec.L_s)


def test_mu_cl_is_deterministic_and_well_formed(space, demo_mu, tiny_spec):
    a = mu_cl_from_mu_B(demo_mu, space, tiny_spec, 0.45, n_cl=4)
    b = mu_cl_from_mu_B(demo_mu, space, tiny_spec, 0.45, n_cl=4)
    np.testing.assert_array_equal(a, b)  # bitwise reproducible
    assert a.shape == (2 * 4 + 3,)
    np.testing.assert_array_equal(a[-3:], [demo_mu[2], demo_mu[3], demo_mu[4]])


def test_extract_mu_cl_equal_arc_points(space, demo_mu):
    v = build_vessel(demo_mu, space)
    pts = np.zeros((9, 3))
    pts[:, 2] = np.linspace(5.0, 21.0, 9)
    mu = extract_mu_cl(CenterlinePath(points=pts), 5, v)
    Q = mu[:10].reshape(5, 2)
    np.testing.assert_allclose(Q[:, 1], np.linspace(5.0, 21.0, 5), atol=1e-9)
    np.testing.assert_allclose(Q[:, 0], 0.0, atol=1e-12)
    with pytest.raises(ConfigError):
        extract_mu_cl(CenterlinePath(points=pts), 1, v)


# -- campaign storage ----------------------------------------------------------


def test_load_synthetic_campaign(synthetic_campaign, tiny_spec, space):
    ds = load_dataset(synthetic_campaign)
    assert len(ds.samples) == 40
    assert ds.stent == tiny_spec
    assert ds.space == space
    assert ds.n_cl == 3
    assert len(ds.converged_samples) == 40
    labels = {s.label for s in ds.samples}
    assert labels == {SUCCESS, FAILURE}
    for s in ds.samples:
        assert s.u_h.shape == (3 * tiny_spec.n_nodes,)
        assert s.mu_cl.shape == (9,)


def test_failed_samples_are_recorded(tmp_path, tiny_spec, space):
    root = write_synthetic_campaign(tmp_path / "c", 6, tiny_spec, space, fail_indices={2, 4})
    ds = load_dataset(root)
    assert len(ds.samples) == 6
    assert len(ds.converged_samples) == 4
    bad = [s for s in ds.samples if not s.converged]
    assert {s.index for s in bad} == {2, 4}
    assert all(s.u_h is None and s.error for s in bad)


def test_assemble_snapshots_success_only(synthetic_campaign):
    ds = load_dataset(synthetic_campaign)
    S, MU_B, MU_CL = assemble_snapshots(ds)
    n_succ = len(ds.successes)
    assert S.shape[1] == n_succ and MU_B.shape == (n_succ, 6) and MU_CL.shape == (n_succ, 9)
    # restriction by explicit indices
    first_two = [s.index for s in ds.successes[:2]]
    S2, _, _ = assemble_snapshots(ds, indices=np.array(first_two))
    assert S2.shape[1] == 2
    np.testing.assert_array_equal(S2, S[:, :2])


def test_assemble_snapshots_empty_raises(tiny_spec, space):
    ds = HFDataset(samples=[], space=space, stent=tiny_spec, n_cl=3)
    with pytest.raises(DataError):
        assemble_snapshots(ds)


def test_make_split_disjoint_and_deterministic(synthetic_campaign):
    ds = load_dataset(synthetic_campaign)
    make_split(ds, 30, seed=3)
    assert len(ds.train_idx) == 30 and len(ds.test_idx) == 10
    assert set(ds.train_idx).isdisjoint(ds.test_idx)
    ds2 = load_dataset(synthetic_campaign)
    make_split(ds2, 30, seed=3)
    np.testing.assert_array_equal(ds.train_idx, ds2.train_idx)
    with pytest.raises(ConfigError):
        make_split(ds, 40)


def test_run_campaign_refuses_mixed_plan(tmp_path, tiny_spec, space):
    root = write_synthetic_campaign(tmp_path / "c", 4, tiny_spec, space)
    manifest = json.loads((root / "manifest.json").read_text())
    manifest["plan"][0][0] += 1.0
    (root / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))
    with pytest.raises(DataError):
        run_campaign(space, 4, tiny_spec, SolverConfig(), root)


def test_load_dataset_requires_manifest(tmp_path):
    with pytest.raises(DataError):
        load_dataset(tmp_path)
