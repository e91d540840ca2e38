"""Command-line pipeline: dataset campaigns, training, prediction, serving.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
error.
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import click
import numpy as np

from .classify import evaluation_report, load_bank, predict_label, report_table, save_bank, train_bank
from .config import PipelineConfig, load_config
from .dataset import (
    SUCCESS,
    assemble_snapshots,
    load_dataset,
    make_split,
    mu_cl_from_mu_B,
    run_campaign,
)
from .errors import ConfigError, DataError, NumericalError, StentromError
from .rom import ReducedModel, train_reduced_model

ROM_FILE = "rom.srom"
BANK_FILE = "classifiers.sclf"
SCHEMA_VERSION = 1


def _exit_code(exc: StentromError) -> int:
    if isinstance(exc, ConfigError):
        return 2
    if isinstance(exc, DataError):
        return 3
    if isinstance(exc, NumericalError):
        return 4
    return 1


def _fail(exc: StentromError):
    click.echo(f"error: {exc}", err=True)
    sys.exit(_exit_code(exc))


def _load_pipeline_config(config_path) -> PipelineConfig:
    if config_path is None:
        return PipelineConfig()
    return load_config(config_path)


@click.group()
def main():
    """Braided-stent deployment surrogate pipeline."""


@main.command()
@click.option("--config", "config_path", type=click.Path(), default=None, help="TOML/JSON pipeline config.")
@click.option("--n", "n_samples", type=int, required=True, help="Campaign size.")
@click.option("--seed", type=int, default=None, help="Override the sampling seed.")
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Override the dataset directory.")
@click.option("--workers", type=int, default=None, help="Parallel worker count.")
def generate(config_path, n_samples, seed, out_dir, workers):
    """Run (or resume) a high-fidelity deployment campaign."""
    try:
        cfg = _load_pipeline_config(config_path)
        space = cfg.space
        if seed is not None:
            from dataclasses import replace

            space = replace(space, seed=seed)
        dest = Path(out_dir) if out_dir else cfg.dataset_dir
        t0 = time.perf_counter()

        def progress(rec):
            status = "ok" if rec["converged"] else f"FAILED ({rec['error']})"
            click.echo(f"sample {rec['index']:4d}: {status}  [{rec['runtime']:.1f}s]")

        ds = run_campaign(
            space,
            n_samples,
            cfg.stent,
            cfg.solver,
            dest,
            n_cl=cfg.rom.n_cl,
            workers=workers or cfg.campaign.workers,
            grid_spacing=cfg.campaign.grid_spacing,
            progress=progress,
        )
        n_ok = len(ds.converged_samples)
        n_succ = len(ds.successes)
        click.echo(
            f"campaign complete: {n_ok}/{n_samples} converged, "
            f"{n_succ} successes, {time.perf_counter() - t0:.1f}s total"
        )
    except StentromError as exc:
        _fail(exc)


@main.command()
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--dataset", "dataset_dir", type=click.Path(), default=None)
@click.option("--out", "model_dir", type=click.Path(), default=None)
@click.option("--eps-pod", type=float, default=None)
@click.option("--predictors", type=click.Choice(["mu_B", "mu_cl"]), default=None)
@click.option("--ncl", type=int, default=None)
@click.option("--rank", "L_override", type=int, default=None, help="Fix the POD rank L.")
def train(config_path, dataset_dir, model_dir, eps_pod, predictors, ncl, L_override):
    """Train the classifier bank and the reduced-order model."""
    try:
        cfg = _load_pipeline_config(config_path)
        ds = load_dataset(Path(dataset_dir) if dataset_dir else cfg.dataset_dir)
        eps = cfg.rom.eps_pod if eps_pod is None else eps_pod
        kind = predictors or cfg.rom.predictor_kind
        n_cl = ncl or cfg.rom.n_cl
        if eps == 0:
            click.echo("warning: eps-pod 0 keeps the full rank", err=True)
        conv = ds.converged_samples
        if len(conv) < 3:
            raise DataError(f"need at least 3 converged samples, have {len(conv)}")
        labels = np.array([s.label for s in conv])
        if len(np.unique(labels)) < 2:
            raise DataError("dataset holds a single outcome class; cannot train classifiers")
        n_train = max(int(round(cfg.campaign.train_fraction * len(conv))), 2)
        n_train = min(n_train, len(conv) - 1)
        make_split(ds, n_train, seed=cfg.campaign.split_seed)

        train_set = set(ds.train_idx.tolist())
        Xb = np.stack([s.mu_B for s in conv])
        idx_train = np.array([i for i, s in enumerate(conv) if s.index in train_set])
        idx_test = np.array([i for i, s in enumerate(conv) if s.index not in train_set])
        bank = train_bank(Xb[idx_train], labels[idx_train], seed=cfg.classifier.seed)
        clf_report = evaluation_report(bank, Xb[idx_test], labels[idx_test])

        S, MU_B, MU_CL = assemble_snapshots(ds, indices=ds.train_idx)
        if S.shape[1] < 2:
            raise DataError("need at least 2 successful training samples for the ROM")
        if kind == "mu_cl":
            expected = 2 * n_cl + 3
            if MU_CL.shape[1] != expected:
                raise DataError(
                    f"stored mu_cl dimension {MU_CL.shape[1]} != 2*{n_cl}+3; regenerate with matching n_cl"
                )
        MU = MU_CL if kind == "mu_cl" else MU_B
        model = train_reduced_model(
            S,
            MU,
            eps,
            kind,
            n_cl=n_cl if kind == "mu_cl" else 0,
            criterion=cfg.rom.criterion,
            L_override=L_override or cfg.rom.L_override,
            seed=cfg.rom.seed,
        )

        dest = Path(model_dir) if model_dir else cfg.model_dir
        dest.mkdir(parents=True, exist_ok=True)
        model.save(dest / ROM_FILE)
        save_bank(bank, dest / BANK_FILE)
        report = {
            "schema_version": SCHEMA_VERSION,
            "L": model.basis.L,
            "eps_pod": eps,
            "predictor_kind": kind,
            "n_cl": n_cl,
            "n_train": int(len(idx_train)),
            "n_test": int(len(idx_test)),
            "n_snapshots": int(S.shape[1]),
            "singular_values": model.basis.singular_values.tolist(),
            "classifiers": clf_report,
            "space": {
                "y_P1": cfg.space.y_P1,
                "z_P1": cfg.space.z_P1,
                "D_v": cfg.space.D_v,
                "D_a": cfg.space.D_a,
                "y_ca": cfg.space.y_ca,
                "eta": cfg.space.eta,
                "z_end": cfg.space.z_end,
            },
        }
        cfg.report_dir.mkdir(parents=True, exist_ok=True)
        (cfg.report_dir / "training_report.json").write_text(json.dumps(report, indent=1))
        (dest / "training_report.json").write_text(json.dumps(report, indent=1))
        click.echo(f"trained ROM: L={model.basis.L}, predictors={kind}, {S.shape[1]} snapshots")
        click.echo(report_table(clf_report))
    except StentromError as exc:
        _fail(exc)


def _parse_mu(mu_text: str) -> np.ndarray:
    try:
        vals = np.array([float(v) for v in mu_text.replace(",", " ").split()])
    except ValueError as exc:
        raise ConfigError(f"could not parse --mu: {exc}") from exc
    if vals.size != 6:
        raise ConfigError(f"--mu needs 6 values [y_P1 z_P1 D_v D_a y_Ca eta], got {vals.size}")
    return vals


def predict_pipeline(cfg: PipelineConfig, model_dir: Path, mu_B: np.ndarray, force: bool = False) -> dict:
    """Classification-gated prediction shared by the CLI and the service."""
    for name in (ROM_FILE, BANK_FILE):
        if not (model_dir / name).exists():
            raise DataError(f"no trained model file {name} in {model_dir}")
    model = ReducedModel.load(model_dir / ROM_FILE)
    bank = load_bank(model_dir / BANK_FILE)
    best_kind = "SVM" if "SVM" in bank else next(iter(bank))
    t0 = time.perf_counter()
    verdict = predict_label(bank[best_kind], mu_B)
    out = {
        "schema_version": SCHEMA_VERSION,
        "classifier": best_kind,
        "label": "success" if verdict["label"] == SUCCESS else "failure",
        "score": verdict["score"],
    }
    if verdict["label"] == SUCCESS or force:
        if model.predictor_kind == "mu_cl":
            mu = mu_cl_from_mu_B(mu_B, cfg.space, cfg.stent, cfg.solver.R_crimped, model.n_cl)
        else:
            mu = mu_B
        pred = model.predict(mu)
        out["u_p"] = pred["u_p"]
        out["node_std"] = pred["node_std"]
        out["coeff_mean"] = pred["coeff_mean"]
        out["coeff_var"] = pred["coeff_var"]
        if force and verdict["label"] != SUCCESS:
            out["forced"] = True
    out["latency_ms"] = (time.perf_counter() - t0) * 1e3
    return out


@main.command()
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--models", "model_dir", type=click.Path(), default=None)
@click.option("--mu", "mu_text", type=str, required=True, help="Six values: y_P1 z_P1 D_v D_a y_Ca eta.")
@click.option("--force", is_flag=True, help="Emit the regression output even on predicted failure.")
def predict(config_path, model_dir, mu_text, force):
    """Classify a deployment and, on predicted success, predict its shape."""
    try:
        cfg = _load_pipeline_config(config_path)
        mu_B = _parse_mu(mu_text)
        dest = Path(model_dir) if model_dir else cfg.model_dir
        out = predict_pipeline(cfg, dest, mu_B, force=force)
        payload = dict(out)
        for key in ("u_p", "node_std", "coeff_mean", "coeff_var"):
            if key in payload:
                payload[key] = np.asarray(payload[key]).tolist()
        if "forced" in payload:
            payload["warning"] = "regression output forced despite predicted failure"
        click.echo(json.dumps(payload))
    except StentromError as exc:
        _fail(exc)


@main.command()
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--models", "model_dir", type=click.Path(), default=None)
@click.option("--host", type=str, default=None)
@click.option("--port", type=int, default=None)
def serve(config_path, model_dir, host, port):
    """Serve the prediction API and the interactive UI."""
    try:
        import uvicorn

        from .service import create_app

        cfg = _load_pipeline_config(config_path)
        dest = Path(model_dir) if model_dir else cfg.model_dir
        app = create_app(cfg, dest)
        uvicorn.run(app, host=host or cfg.service.host, port=port or cfg.service.port, log_level="warning")
    except StentromError as exc:
        _fail(exc)


if __name__ == "__main__":
    main()
