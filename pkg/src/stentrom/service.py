"""HTTP prediction service consumed by the browser UI.

Endpoints (all JSON, schema_version on every response):
  GET  /api/info      model metadata, parameter ranges, stent connectivity
  POST /api/predict   {mu: number[6], samples?, force?, f64?} -> gated prediction
  POST /api/vessel    geometry subset of mu_B -> triangulated vessel surface
  POST /api/classify  {mu: number[6]} -> label + score only

Models are loaded once at startup and treated as immutable; requests are
stateless and order-independent.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from fastapi import FastAPI
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .classify import load_bank, predict_label
from .config import PipelineConfig
from .dataset import SUCCESS, build_vessel, mu_cl_from_mu_B, y_ca_interval
from .errors import ConfigError, StentromError
from .rom import ReducedModel
from .stent import generate_stent

SCHEMA_VERSION = 1

ROM_FILE = "rom.srom"
BANK_FILE = "classifiers.sclf"


class PredictRequest(BaseModel):
    mu: list[float] = Field(..., description="[y_P1, z_P1, D_v, D_a, y_Ca, eta]")
    predictor: str | None = None
    samples: int = 0
    force: bool = False
    f64: bool = False
    seed: int = 0


class ClassifyRequest(BaseModel):
    mu: list[float]


class VesselRequest(BaseModel):
    y_P1: float
    z_P1: float
    D_v: float
    D_a: float
    y_Ca: float


def _floats(arr, f64: bool) -> list:
    a = np.asarray(arr, dtype=float if f64 else np.float32)
    return a.ravel().tolist()


def create_app(cfg: PipelineConfig, model_dir: Path, static_dir: Path | None = None) -> FastAPI:
    model = ReducedModel.load(Path(model_dir) / ROM_FILE)
    bank = load_bank(Path(model_dir) / BANK_FILE)
    clf_kind = "SVM" if "SVM" in bank else next(iter(bank))
    mesh = generate_stent(cfg.stent)
    space = cfg.space

    app = FastAPI(title="stentrom", docs_url=None, redoc_url=None)

    @app.exception_handler(StentromError)
    async def _domain_error(_request, exc: StentromError):
        return JSONResponse(status_code=400, content={"schema_version": SCHEMA_VERSION, "error": str(exc)})

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"schema_version": SCHEMA_VERSION, "error": str(exc)})

    def _check_mu(mu: list[float]) -> np.ndarray:
        arr = np.asarray(mu, dtype=float)
        if arr.shape != (6,) or not np.all(np.isfinite(arr)):
            raise ConfigError("mu must be 6 finite numbers")
        return arr

    @app.get("/api/info")
    def info():
        dv = space.D_v
        da = space.D_a
        lo0, _ = y_ca_interval(dv[0], da[0])
        _, hi1 = y_ca_interval(dv[1], da[1])
        return {
            "schema_version": SCHEMA_VERSION,
            "predictor_kind": model.predictor_kind,
            "n_cl": model.n_cl,
            "L": model.basis.L,
            "classifier": clf_kind,
            "classifiers": sorted(bank.keys()),
            "ranges": {
                "y_P1": list(space.y_P1),
                "z_P1": list(space.z_P1),
                "D_v": list(dv),
                "D_a": list(da),
                "y_Ca": [lo0, hi1],
                "eta": list(space.eta),
            },
            "z_end": space.z_end,
            "stent": {
                "n_nodes": cfg.stent.n_nodes,
                "n_beams": cfg.stent.n_beams,
                "R_w": cfg.stent.R_w,
                "R_s": cfg.stent.R_s,
                "L_s": cfg.stent.L_s,
                "nodes": _floats(mesh.nodes, False),
                "beams": mesh.beams.ravel().tolist(),
            },
        }

    @app.post("/api/classify")
    def classify_endpoint(req: ClassifyRequest):
        mu = _check_mu(req.mu)
        verdict = predict_label(bank[clf_kind], mu)
        return {
            "schema_version": SCHEMA_VERSION,
            "label": "success" if verdict["label"] == SUCCESS else "failure",
            "score": verdict["score"],
            "classifier": clf_kind,
        }

    @app.post("/api/predict")
    def predict_endpoint(req: PredictRequest):
        mu_B = _check_mu(req.mu)
        verdict = predict_label(bank[clf_kind], mu_B)
        out = {
            "schema_version": SCHEMA_VERSION,
            "label": "success" if verdict["label"] == SUCCESS else "failure",
            "score": verdict["score"],
            "classifier": clf_kind,
        }
        if verdict["label"] == SUCCESS or req.force:
            if model.predictor_kind == "mu_cl":
                mu = mu_cl_from_mu_B(mu_B, space, cfg.stent, cfg.solver.R_crimped, model.n_cl)
            else:
                mu = mu_B
            pred = model.predict(mu)
            nodes = mesh.nodes.ravel() + pred["u_p"]
            out["u_p"] = _floats(pred["u_p"], req.f64)
            out["nodes"] = _floats(nodes, req.f64)
            out["node_std"] = _floats(pred["node_std"], req.f64)
            if req.samples > 0:
                n = min(int(req.samples), 500)
                draws = model.sample_posterior(pred, n, seed=req.seed)
                out["samples"] = [_floats(mesh.nodes.ravel() + d, False) for d in draws]
            if req.force and verdict["label"] != SUCCESS:
                out["forced"] = True
        return out

    @app.post("/api/vessel")
    def vessel_endpoint(req: VesselRequest):
        mu = np.array([req.y_P1, req.z_P1, req.D_v, req.D_a, req.y_Ca, 0.0])
        vessel = build_vessel(mu, space)
        verts, tris = vessel.surface_mesh(n_circ=32, n_axial=120, n_sphere=32)
        return {
            "schema_version": SCHEMA_VERSION,
            "vertices": _floats(verts, False),
            "triangles": tris.ravel().tolist(),
            "centerline": _floats(vessel.polyline_points[:: max(len(vessel.polyline_points) // 200, 1)], False),
        }

    if static_dir is None:
        candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        static_dir = candidate if candidate.is_dir() else None
    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
