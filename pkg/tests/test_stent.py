"""Braided lattice generation: counts, winding rule, crossings, rings."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stentrom.errors import GeometryError
from stentrom.stent import StentSpec, generate_stent


def test_default_counts():
    mesh = generate_stent(StentSpec())
    assert len(mesh.nodes) == 3408
    assert len(mesh.beams) == 3360
    assert len(mesh.crossings) == 1704
    assert mesh.n_rings == 71


def test_nodes_on_winding_cylinder():
    spec = StentSpec()
    mesh = generate_stent(spec)
    radii = np.linalg.norm(mesh.nodes[:, :2], axis=1)
    assert np.max(np.abs(radii - (spec.R_s + spec.R_w))) < 1e-12


def test_node_positions_match_winding_formula():
    """Independent re-derivation of every node from the helix equations."""
    spec = StentSpec(N_w=12, N_cells=9)
    mesh = generate_stent(spec)
    half = spec.N_w // 2
    dtheta = 2 * np.pi / half
    r = spec.R_s + spec.R_w
    k = 0
    for orient in (1, -1):
        for n in range(half):
            for i in range(spec.N_cells + 1):
                ang = orient * i * dtheta + n * dtheta
                expected = (r * np.cos(ang), r * np.sin(ang), i * spec.L_s / spec.N_cells)
                np.testing.assert_allclose(mesh.nodes[k], expected, atol=1e-12)
                k += 1
    assert k == spec.n_nodes


def test_axial_stations_span_length():
    spec = StentSpec(N_w=8, N_cells=5)
    mesh = generate_stent(spec)
    z = np.unique(np.round(mesh.nodes[:, 2], 12))
    np.testing.assert_allclose(z, np.linspace(0, spec.L_s, spec.N_cells + 1), atol=1e-12)


def test_crossing_pairs_are_coincident_and_cross_family():
    spec = StentSpec(N_w=16, N_cells=11)
    mesh = generate_stent(spec)
    a, b = mesh.crossings[:, 0], mesh.crossings[:, 1]
    gaps = np.linalg.norm(mesh.nodes[a] - mesh.nodes[b], axis=1)
    assert np.max(gaps) < 1e-9
    half_nodes = (spec.N_w // 2) * (spec.N_cells + 1)
    assert np.all(a < half_nodes) and np.all(b >= half_nodes)


def test_crossings_found_by_brute_force_match():
    spec = StentSpec(N_w=8, N_cells=4)
    mesh = generate_stent(spec)
    half_nodes = (spec.N_w // 2) * (spec.N_cells + 1)
    brute = set()
    for i in range(half_nodes):
        for j in range(half_nodes, len(mesh.nodes)):
            if np.linalg.norm(mesh.nodes[i] - mesh.nodes[j]) < 1e-9:
                brute.add((i, j))
    assert brute == {tuple(pair) for pair in mesh.crossings}


def test_beams_connect_consecutive_nodes_of_one_wire():
    spec = StentSpec(N_w=8, N_cells=6)
    mesh = generate_stent(spec)
    lengths = np.linalg.norm(mesh.nodes[mesh.beams[:, 1]] - mesh.nodes[mesh.beams[:, 0]], axis=1)
    # all helix chords are congruent
    assert np.ptp(lengths) < 1e-12
    dz = mesh.nodes[mesh.beams[:, 1], 2] - mesh.nodes[mesh.beams[:, 0], 2]
    np.testing.assert_allclose(dz, spec.L_s / spec.N_cells, atol=1e-12)


def test_rings_partition_nodes():
    mesh = generate_stent(StentSpec(N_w=10, N_cells=7))
    all_ids = np.sort(np.concatenate(mesh.rings))
    np.testing.assert_array_equal(all_ids, np.arange(len(mesh.nodes)))
    for i, ring in enumerate(mesh.rings):
        z = mesh.nodes[ring, 2]
        assert np.ptp(z) < 1e-12


def test_ring_centers_on_axis():
    mesh = generate_stent(StentSpec())
    centers = mesh.ring_centers()
    assert np.max(np.abs(centers[:, :2])) < 1e-12
    assert np.all(np.diff(centers[:, 2]) > 0)


@given(
    n_w=st.integers(2, 12).map(lambda k: 2 * k),
    n_cells=st.integers(1, 15),
)
@settings(max_examples=40, deadline=None)
def test_counts_formula_property(n_w, n_cells):
    spec = StentSpec(N_w=n_w, N_cells=n_cells)
    mesh = generate_stent(spec)
    assert len(mesh.nodes) == n_w * (n_cells + 1)
    assert len(mesh.beams) == n_w * n_cells
    assert len(mesh.crossings) == (n_w // 2) * (n_cells + 1)
    radii = np.linalg.norm(mesh.nodes[:, :2], axis=1)
    assert np.max(np.abs(radii - (spec.R_s + spec.R_w))) < 1e-12


@pytest.mark.parametrize(
    "kwargs",
    [
        {"N_w": 3},
        {"N_w": 7},
        {"N_w": 2},
        {"R_s": 0.0},
        {"R_w": -0.1},
        {"L_s": 0.0},
        {"N_cells": 0},
        {"nu": 0.5},
        {"nu": 0.0},
    ],
)
def test_invalid_specs_rejected(kwargs):
    with pytest.raises(GeometryError):
        StentSpec(**kwargs)
