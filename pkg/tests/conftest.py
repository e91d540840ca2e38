"""Shared fixtures: small stent specs and a synthetic (FE-free) campaign."""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np
import pytest

from stentrom.dataset import (
    FAILURE,
    SUCCESS,
    ParamSpace,
    lhs_plan,
    mu_cl_from_mu_B,
    y_ca_interval,
)
from stentrom.solver import SolverConfig
from stentrom.stent import StentSpec


@pytest.fixture(scope="session")
def tiny_spec() -> StentSpec:
    return StentSpec(N_w=8, N_cells=6)


@pytest.fixture(scope="session")
def coarse_spec() -> StentSpec:
    return StentSpec(N_w=16, N_cells=20)


@pytest.fixture(scope="session")
def space() -> ParamSpace:
    return ParamSpace()


@pytest.fixture(scope="session")
def demo_mu() -> np.ndarray:
    return np.array([4.0, 60.0, 3.0, 7.5, 4.2, 0.4])


def synthetic_label(mu_B: np.ndarray) -> int:
    """Deterministic separable labeling rule used by the synthetic campaign:
    high aneurysm offsets (relative to the admissible interval) fail."""
    lo, hi = y_ca_interval(mu_B[2], mu_B[3])
    return FAILURE if (mu_B[4] - lo) / (hi - lo) > 0.55 else SUCCESS


def synthetic_displacement(mu_B: np.ndarray, n_h: int) -> np.ndarray:
    """Smooth deterministic displacement field standing in for an FE result."""
    rng = np.random.default_rng(1234)  # fixed projection, not per-sample noise
    W1 = rng.normal(size=(n_h, 8))
    W2 = rng.normal(size=(8, 6))
    g = np.asarray(mu_B, dtype=float) / np.array([8.0, 120.0, 4.0, 10.0, 7.0, 1.0])
    return W1 @ np.tanh(W2 @ g)


def write_synthetic_campaign(
    root: Path,
    n_samples: int,
    spec: StentSpec,
    space: ParamSpace,
    n_cl: int = 3,
    fail_indices: set[int] | None = None,
) -> Path:
    """Write a campaign directory with synthetic displacements and labels.

    File formats are identical to a real campaign; only the physics is fake.
    `fail_indices` marks samples as non-converged.
    """
    root.mkdir(parents=True, exist_ok=True)
    plan = lhs_plan(space, n_samples)
    cfg = SolverConfig()
    manifest = {
        "n_samples": n_samples,
        "n_cl": n_cl,
        "grid_spacing": 0.15,
        "space": asdict(space),
        "stent": asdict(spec),
        "solver": asdict(cfg),
        "plan": [list(map(float, row)) for row in plan],
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))
    n_h = 3 * spec.n_nodes
    for i, mu_B in enumerate(plan):
        sdir = root / f"sample_{i:04d}"
        sdir.mkdir(exist_ok=True)
        mu_cl = mu_cl_from_mu_B(mu_B, space, spec, cfg.R_crimped, n_cl)
        record = {"index": i, "converged": True, "label": None, "error": None, "runtime": 0.0}
        if fail_indices and i in fail_indices:
            record.update(converged=False, error="NumericalError: synthetic failure")
        else:
            record["label"] = int(synthetic_label(mu_B))
            u_h = synthetic_displacement(mu_B, n_h)
            (sdir / "u_h.bin").write_bytes(np.ascontiguousarray(u_h, dtype="<f8").tobytes())
        mu_payload = {"mu_B": list(map(float, mu_B)), "mu_cl": list(map(float, mu_cl)), "n_cl": n_cl}
        (sdir / "mu.json").write_text(json.dumps(mu_payload, indent=1, sort_keys=True))
        (sdir / "label.json").write_text(json.dumps(record, indent=1, sort_keys=True))
    return root


@pytest.fixture(scope="session")
def synthetic_campaign(tmp_path_factory, tiny_spec, space) -> Path:
    root = tmp_path_factory.mktemp("campaign")
    return write_synthetic_campaign(root, 40, tiny_spec, space)


@pytest.fixture(scope="session")
def trained_dir(tmp_path_factory, synthetic_campaign, tiny_spec) -> Path:
    """Models + config trained (via the CLI) on the synthetic campaign."""
    from click.testing import CliRunner

    from stentrom.cli import main

    base = tmp_path_factory.mktemp("trained")
    config = base / "config.toml"
    config.write_text(
        "\n".join(
            [
                f'dataset_dir = "{synthetic_campaign}"',
                f'model_dir = "{base / "models"}"',
                f'report_dir = "{base / "reports"}"',
                "[stent]",
                f"N_w = {tiny_spec.N_w}",
                f"N_cells = {tiny_spec.N_cells}",
            ]
        )
    )
    result = CliRunner().invoke(main, ["train", "--config", str(config)])
    assert result.exit_code == 0, result.output
    return base
