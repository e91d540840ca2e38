"""Deployment-parameter sampling, high-fidelity campaigns, and labeling.

mu_B = [y_P1, z_P1, D_v, D_a, y_Ca, eta] parametrizes one deployment:
vessel centerline curvature point P1 = (0, y_P1, z_P1), vessel/aneurysm
diameters, aneurysm center offset y_Ca above the centerline midpoint, and
the deployment site eta. The y_Ca offset is sampled through a relative neck
coordinate in [0, 1] mapped per sample to
[0.6*D_v/2 + 0.3*D_a, 0.9*(D_v/2 + D_a/2)], which always leaves a neck
opening; the stored plan carries the physical offset.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .centerline import CenterlinePath
from .errors import ConfigError, DataError, StentromError
from .solver import SolverConfig, run_deployment
from .stent import StentMesh, StentSpec, generate_stent
from .vessel import BezierCenterline, VesselModel

MU_B_NAMES = ("y_P1", "z_P1", "D_v", "D_a", "y_Ca", "eta")

SUCCESS, FAILURE = 1, 0

_MANIFEST = "manifest.json"


@dataclass(frozen=True)
class ParamSpace:
    """Sampling ranges of the six deployment parameters.

    y_ca is the relative neck coordinate in [0, 1] (see module docstring);
    z_end sets the vessel extent P2 = (0, 0, z_end), long enough for the
    elongated crimped stent to fit downstream of any eta in range.
    """

    y_P1: tuple[float, float] = (0.0, 40.0)
    z_P1: tuple[float, float] | None = None  # default: midpoint +/- 10 mm
    D_v: tuple[float, float] = (2.0, 4.0)
    D_a: tuple[float, float] = (5.0, 10.0)
    y_ca: tuple[float, float] = (0.0, 1.0)
    eta: tuple[float, float] = (0.25, 0.55)
    z_end: float = 120.0
    seed: int = 0

    def __post_init__(self):
        if self.z_P1 is None:
            mid = 0.5 * self.z_end
            object.__setattr__(self, "z_P1", (mid - 10.0, mid + 10.0))
        for name in ("y_P1", "z_P1", "D_v", "D_a", "y_ca", "eta"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ConfigError(f"range for {name} must have lower < upper, got ({lo}, {hi})")
        if self.z_end <= 0:
            raise ConfigError("z_end must be positive")
        if not (0.0 <= self.eta[0] and self.eta[1] <= 1.0):
            raise ConfigError("eta range must lie in [0, 1]")

    @property
    def ranges(self) -> list[tuple[float, float]]:
        return [self.y_P1, self.z_P1, self.D_v, self.D_a, self.y_ca, self.eta]


def y_ca_interval(D_v: float, D_a: float) -> tuple[float, float]:
    """Physical aneurysm-offset interval that keeps a neck opening."""
    return 0.6 * D_v / 2 + 0.3 * D_a, 0.9 * (D_v / 2 + D_a / 2)


def lhs_unit(n_samples: int, n_dims: int, seed: int) -> np.ndarray:
    """Latin hypercube design on the unit cube: one sample per stratum."""
    if n_samples < 2:
        raise ConfigError("LHS needs at least 2 samples")
    rng = np.random.default_rng(seed)
    u = np.empty((n_samples, n_dims))
    for j in range(n_dims):
        u[:, j] = (rng.permutation(n_samples) + rng.uniform(size=n_samples)) / n_samples
    return u


def lhs_plan(space: ParamSpace, n_samples: int) -> np.ndarray:
    """Physical mu_B plan (N_s x 6); deterministic for a fixed space seed.

    Every column is stratified in its own coordinate; the y_Ca column is
    stratified in the relative neck coordinate before mapping to mm.
    """
    u = lhs_unit(n_samples, 6, space.seed)
    plan = np.empty_like(u)
    for j, (lo, hi) in enumerate(space.ranges):
        plan[:, j] = lo + (hi - lo) * u[:, j]
    # map the relative neck coordinate to the physical offset
    lo, hi = np.vectorize(y_ca_interval)(plan[:, 2], plan[:, 3])
    plan[:, 4] = lo + (hi - lo) * plan[:, 4]
    return plan


def sub_plan(plan: np.ndarray, n: int, seed: int = 0, n_restarts: int = 20) -> np.ndarray:
    """Greedy maximin subset of the plan rows (with random restarts)."""
    plan = np.asarray(plan, dtype=float)
    if n >= len(plan):
        raise ConfigError(f"subset size {n} must be smaller than the plan ({len(plan)} rows)")
    if n < 1:
        raise ConfigError("subset size must be >= 1")
    # scale dimensions to comparable units before measuring distance
    span = plan.max(axis=0) - plan.min(axis=0)
    span[span == 0] = 1.0
    Z = plan / span
    d2 = np.sum((Z[:, None, :] - Z[None, :, :]) ** 2, axis=-1)
    rng = np.random.default_rng(seed)

    def greedy(start: int) -> tuple[np.ndarray, float]:
        chosen = [start]
        mind = d2[start].copy()
        mind[start] = -np.inf
        for _ in range(n - 1):
            nxt = int(np.argmax(mind))
            chosen.append(nxt)
            mind = np.minimum(mind, d2[nxt])
            mind[nxt] = -np.inf
        idx = np.array(chosen)
        if n == 1:
            return idx, np.inf
        sub = d2[np.ix_(idx, idx)]
        return idx, float(np.min(sub[np.triu_indices(n, 1)]))

    best_idx, best_score = None, -np.inf
    for start in rng.integers(0, len(plan), size=max(n_restarts, 1)):
        idx, score = greedy(int(start))
        if score > best_score:
            best_idx, best_score = idx, score
    return plan[best_idx]


def build_vessel(mu_B: np.ndarray, space: ParamSpace) -> VesselModel:
    """Vessel geometry for one parameter vector."""
    y_P1, z_P1, D_v, D_a, y_Ca, _eta = np.asarray(mu_B, dtype=float)
    cl = BezierCenterline(P0=(0.0, 0.0, 0.0), P1=(0.0, y_P1, z_P1), P2=(0.0, 0.0, space.z_end))
    C_a = cl.point(0.5) + np.array([0.0, y_Ca, 0.0])
    return VesselModel(centerline=cl, D_v=D_v, D_a=D_a, C_a=C_a)


NECK_MARGIN = 4.0  # mm of landing-zone clearance required on either side
# of the neck opening (interventional sizing guidance asks for roughly this
# much straight vessel beyond the neck before an extremity can anchor)


def neck_interval(vessel: VesselModel) -> tuple[float, float]:
    """Arc-length interval of the aneurysm neck opening on the centerline.

    The neck half-width is the half-chord of the aneurysm sphere where it
    meets the vessel wall; the interval is centered at the centerline point
    nearest the aneurysm center.
    """
    poly = vessel.polyline_points
    arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(poly, axis=0), axis=1))])
    s_neck = float(arc[np.argmin(np.linalg.norm(poly - vessel.C_a, axis=1))])
    h = float(vessel.C_a[1] - vessel.centerline.point(0.5)[1]) - 0.5 * vessel.D_v
    w = float(np.sqrt(max((0.5 * vessel.D_a) ** 2 - h * h, 0.0)))
    return s_neck - w, s_neck + w


def label_outcome(final_positions: np.ndarray, vessel: VesselModel, spec: StentSpec, mesh: StentMesh | None = None) -> int:
    """failure iff an extremity-ring node lies inside the aneurysm sphere.

    "Inside" uses the wire surface: ||C_a - x|| < D_a/2 - R_w.
    """
    mesh = mesh or generate_stent(spec)
    x = np.asarray(final_positions, dtype=float).reshape(-1, 3)
    ends = np.concatenate([mesh.rings[0], mesh.rings[-1]])
    dist = np.linalg.norm(x[ends] - vessel.C_a, axis=1)
    return FAILURE if np.any(dist < 0.5 * vessel.D_a - spec.R_w) else SUCCESS


def clinical_label(final_positions: np.ndarray, vessel: VesselModel, spec: StentSpec, mesh: StentMesh | None = None) -> int:
    """Campaign labeling rule: label_outcome plus a landing-zone check.

    A deployment also counts as a failure when an extremity ring center
    projects onto the centerline within the neck opening plus a NECK_MARGIN
    guard band. Against a rigid wall such a stent can look apposed, but a
    compliant wall would let an extremity that close to the opening slip
    into the sac, so clinically the deployment cannot be relied on; the
    guard band encodes the landing-zone clearance practitioners require.
    """
    mesh = mesh or generate_stent(spec)
    x = np.asarray(final_positions, dtype=float).reshape(-1, 3)
    if label_outcome(x, vessel, spec, mesh) == FAILURE:
        return FAILURE
    poly = vessel.polyline_points
    arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(poly, axis=0), axis=1))])
    lo, hi = neck_interval(vessel)
    for ring in (mesh.rings[0], mesh.rings[-1]):
        center = x[ring].mean(axis=0)
        s = float(arc[np.argmin(np.linalg.norm(poly - center, axis=1))])
        if lo - NECK_MARGIN <= s <= hi + NECK_MARGIN:
            return FAILURE
    return SUCCESS


def extract_mu_cl(CT: CenterlinePath, n_cl: int, vessel: VesselModel) -> np.ndarray:
    """Geometric predictor vector [y_Q1, z_Q1, ..., y_QNcl, z_QNcl, D_v, D_a, y_Ca].

    Q_i are n_cl points equally spaced by arc length along C_T, endpoints
    included. No FE solution is needed.
    """
    if n_cl < 2:
        raise ConfigError("n_cl must be >= 2")
    pts = CT.points
    arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
    targets = np.linspace(0.0, arc[-1], n_cl)
    idx = np.clip(np.searchsorted(arc, targets) - 1, 0, len(pts) - 2)
    seg = arc[idx + 1] - arc[idx]
    seg[seg == 0] = 1.0
    t = (targets - arc[idx]) / seg
    Q = pts[idx] + t[:, None] * (pts[idx + 1] - pts[idx])
    y_ca = float(vessel.C_a[1] - vessel.centerline.point(0.5)[1])
    return np.concatenate([Q[:, 1:3].ravel(), [vessel.D_v, vessel.D_a, y_ca]])


def crimped_pitch(spec: StentSpec, R_crimped: float) -> float:
    """Axial ring spacing of the crimped braid from wire-length conservation.

    Crimping preserves each beam's chord length and its circumferential
    angle step, so the crimped pitch follows from the free-helix chord
    geometry alone.
    """
    dtheta = 2 * np.pi / (spec.N_w // 2)
    R = spec.R_s + spec.R_w
    r = R_crimped + spec.R_w
    pitch = spec.L_s / spec.N_cells
    chord2 = (2 * R * np.sin(dtheta / 2)) ** 2 + pitch**2
    arg = chord2 - (2 * r * np.sin(dtheta / 2)) ** 2
    if arg <= 0:
        raise ConfigError("crimp radius incompatible with the wire geometry")
    return float(np.sqrt(arg))


def geometric_c0(spec: StentSpec, R_crimped: float) -> CenterlinePath:
    """Geometry-only model of the crimped stent centerline (z-aligned,
    centered on the free stent's midpoint, uniform crimped pitch)."""
    pitch = crimped_pitch(spec, R_crimped)
    L_c = spec.N_cells * pitch
    z0 = 0.5 * spec.L_s - 0.5 * L_c
    z = z0 + pitch * np.arange(spec.N_cells + 1)
    pts = np.zeros((spec.N_cells + 1, 3))
    pts[:, 2] = z
    return CenterlinePath(points=pts)


def mu_cl_from_mu_B(mu_B: np.ndarray, space: ParamSpace, spec: StentSpec, R_crimped: float, n_cl: int) -> np.ndarray:
    """mu_cl computed purely geometrically from mu_B (no FE run).

    Uses the geometric crimped centerline, projects it onto the vessel at
    eta, and samples the predictor points; bitwise-reproducible.
    """
    from .centerline import project_centerline

    vessel = build_vessel(mu_B, space)
    CT = project_centerline(geometric_c0(spec, R_crimped), vessel, float(np.asarray(mu_B).ravel()[5]))
    return extract_mu_cl(CT, n_cl, vessel)


@dataclass
class HFSample:
    """One high-fidelity campaign record."""

    index: int
    mu_B: np.ndarray
    mu_cl: np.ndarray | None
    u_h: np.ndarray | None
    label: int | None
    converged: bool
    runtime: float
    error: str | None = None


@dataclass
class HFDataset:
    """Campaign results plus the configuration that produced them."""

    samples: list[HFSample]
    space: ParamSpace
    stent: StentSpec
    n_cl: int
    train_idx: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    test_idx: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))

    @property
    def converged_samples(self) -> list[HFSample]:
        return [s for s in self.samples if s.converged]

    @property
    def successes(self) -> list[HFSample]:
        return [s for s in self.samples if s.converged and s.label == SUCCESS]


def assemble_snapshots(ds: HFDataset, indices: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Snapshot matrix S (N_h x N_success) plus matching mu_B and mu_cl rows.

    Only success-labeled, converged samples contribute columns; when
    `indices` is given, it further restricts to those sample indices.
    """
    keep = set(int(i) for i in indices) if indices is not None else None
    subset = [s for s in ds.successes if keep is None or s.index in keep]
    if not subset:
        raise DataError("no successful converged samples to assemble")
    S = np.stack([s.u_h for s in subset], axis=1)
    MU_B = np.stack([s.mu_B for s in subset])
    MU_CL = np.stack([s.mu_cl for s in subset])
    return S, MU_B, MU_CL


def make_split(ds: HFDataset, n_train: int, seed: int = 0) -> HFDataset:
    """Deterministic disjoint train/test split over converged samples.

    The split is stratified by outcome label: each class contributes to the
    train side in proportion to its size (largest-remainder rounding keeps
    the total at exactly n_train). With a ~20% failure rate a plain random
    split often leaves a test set with almost no failures, which makes
    classification metrics on the held-out set degenerate.
    """
    conv = ds.converged_samples
    idx = np.array([s.index for s in conv])
    if n_train >= len(idx):
        raise ConfigError(f"n_train {n_train} must be below the converged count {len(idx)}")
    labels = np.array([s.label for s in conv])
    rng = np.random.default_rng(seed)
    groups = [idx[labels == lab] for lab in np.unique(labels)]
    quota = np.array([n_train * len(g) / len(idx) for g in groups])
    take = np.floor(quota).astype(int)
    for j in np.argsort(-(quota - take))[: n_train - take.sum()]:
        take[j] += 1
    train, test = [], []
    for g, k in zip(groups, take):
        perm = rng.permutation(len(g))
        train.extend(g[perm[:k]])
        test.extend(g[perm[k:]])
    ds.train_idx = np.sort(np.array(train, dtype=int))
    ds.test_idx = np.sort(np.array(test, dtype=int))
    return ds


# -- campaign ------------------------------------------------------------------


def _sample_dir(root, index: int):
    from pathlib import Path

    return Path(root) / f"sample_{index:04d}"


def _run_sample(args) -> dict:
    """Worker entry: one crimp/position/deploy run, written atomically."""
    index, mu_B, space_dict, stent_dict, cfg_dict, root, n_cl, grid_spacing = args
    space = ParamSpace(**space_dict)
    spec = StentSpec(**stent_dict)
    cfg = SolverConfig(**cfg_dict)
    mesh = generate_stent(spec)
    vessel = build_vessel(mu_B, space)
    t0 = time.perf_counter()
    record = {"index": index, "converged": False, "label": None, "error": None}
    sdir = _sample_dir(root, index)
    sdir.mkdir(parents=True, exist_ok=True)
    mu_cl = None
    try:
        mu_cl = mu_cl_from_mu_B(mu_B, space, spec, cfg.R_crimped, n_cl)
        u_h, _state, _CT = run_deployment(mesh, vessel, float(mu_B[5]), cfg, grid_spacing=grid_spacing)
        x = mesh.nodes + u_h.reshape(-1, 3)
        label = clinical_label(x, vessel, spec, mesh)
        record.update(converged=True, label=int(label))
        tmp = sdir / "u_h.bin.tmp"
        tmp.write_bytes(np.ascontiguousarray(u_h, dtype="<f8").tobytes())
        tmp.rename(sdir / "u_h.bin")
    except StentromError as exc:
        record["error"] = f"{type(exc).__name__}: {exc}"
    record["runtime"] = time.perf_counter() - t0

    mu_payload = {"mu_B": list(map(float, mu_B)), "n_cl": n_cl}
    if mu_cl is not None:
        mu_payload["mu_cl"] = list(map(float, mu_cl))
    for name, payload in (("mu.json", mu_payload), ("label.json", record)):
        tmp = sdir / (name + ".tmp")
        tmp.write_text(json.dumps(payload, indent=1, sort_keys=True))
        tmp.rename(sdir / name)
    return record


def run_campaign(
    space: ParamSpace,
    n_samples: int,
    stent: StentSpec,
    cfg: SolverConfig,
    out_dir,
    n_cl: int = 3,
    workers: int = 1,
    grid_spacing: float = 0.15,
    progress=None,
) -> HFDataset:
    """Run (or resume) a high-fidelity campaign and return the dataset.

    Completed samples (a readable label.json) are skipped on rerun. Failed
    samples are recorded and the campaign continues.
    """
    from pathlib import Path

    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    plan = lhs_plan(space, n_samples)

    manifest = {
        "n_samples": n_samples,
        "n_cl": n_cl,
        "grid_spacing": grid_spacing,
        "space": asdict(space),
        "stent": asdict(stent),
        "solver": asdict(cfg),
        "plan": [list(map(float, row)) for row in plan],
    }
    mpath = root / _MANIFEST
    if mpath.exists():
        existing = json.loads(mpath.read_text())
        if existing["plan"] != manifest["plan"] or existing["stent"] != manifest["stent"]:
            raise DataError(f"{root}: existing campaign has a different plan; refusing to mix")
    else:
        mpath.write_text(json.dumps(manifest, indent=1, sort_keys=True))

    todo = []
    for i, row in enumerate(plan):
        if (_sample_dir(root, i) / "label.json").exists():
            continue
        todo.append((i, row, asdict(space), asdict(stent), asdict(cfg), root, n_cl, grid_spacing))

    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for rec in pool.map(_run_sample, todo):
                if progress:
                    progress(rec)
    else:
        for args in todo:
            rec = _run_sample(args)
            if progress:
                progress(rec)
    return load_dataset(root)


def load_dataset(root) -> HFDataset:
    """Read a campaign directory back into memory."""
    from pathlib import Path

    root = Path(root)
    mpath = root / _MANIFEST
    if not mpath.exists():
        raise DataError(f"{root}: no campaign manifest found")
    manifest = json.loads(mpath.read_text())
    space_dict = dict(manifest["space"])
    space_dict["z_P1"] = tuple(space_dict["z_P1"])
    for key in ("y_P1", "D_v", "D_a", "y_ca", "eta"):
        space_dict[key] = tuple(space_dict[key])
    space = ParamSpace(**space_dict)
    stent = StentSpec(**manifest["stent"])
    samples = []
    for i in range(manifest["n_samples"]):
        sdir = _sample_dir(root, i)
        lpath = sdir / "label.json"
        if not lpath.exists():
            continue
        rec = json.loads(lpath.read_text())
        mu = json.loads((sdir / "mu.json").read_text())
        u_h = None
        if rec["converged"]:
            u_h = np.frombuffer((sdir / "u_h.bin").read_bytes(), dtype="<f8").copy()
        samples.append(
            HFSample(
                index=i,
                mu_B=np.array(mu["mu_B"]),
                mu_cl=np.array(mu["mu_cl"]) if "mu_cl" in mu else None,
                u_h=u_h,
                label=rec["label"],
                converged=rec["converged"],
                runtime=rec.get("runtime", 0.0),
                error=rec.get("error"),
            )
        )
    return HFDataset(samples=samples, space=space, stent=stent, n_cl=manifest["n_cl"])
