"""Non-intrusive reduced-order model: POD basis from displacement snapshots
plus one independent Gaussian-process regressor per retained coefficient.

The POD truncation rank L is the smallest integer whose leading singular
values cover (1 - eps_pod) of the total, by plain singular-value sum by
default or by the sigma^2 energy criterion behind a switch.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, NumericalError
from .gpr import GPRModel, Standardizer, matern52_gram, train_igpr

_MAGIC = b"SROM"
_VERSION = 1

PREDICTOR_KINDS = ("mu_B", "mu_cl")


@dataclass
class ReducedBasis:
    """Truncated POD basis of a snapshot matrix."""

    V: np.ndarray  # (N_h, L), orthonormal columns
    singular_values: np.ndarray  # all N_s values, descending
    L: int
    eps_pod: float

    def project(self, u_h: np.ndarray) -> np.ndarray:
        """Reduced coordinates u_L = V^T u_h (accepts a vector or matrix)."""
        u_h = np.asarray(u_h, dtype=float)
        if u_h.shape[0] != self.V.shape[0]:
            raise ConfigError(f"u_h length {u_h.shape[0]} != basis dimension {self.V.shape[0]}")
        return self.V.T @ u_h

    def reconstruct(self, u_L: np.ndarray) -> np.ndarray:
        return self.V @ np.asarray(u_L, dtype=float)


def truncation_rank(singular_values: np.ndarray, eps_pod: float, criterion: str = "sigma") -> int:
    """Smallest L with cumulative coverage >= 1 - eps_pod."""
    s = np.asarray(singular_values, dtype=float)
    if criterion == "sigma":
        w = s
    elif criterion == "energy":
        w = s**2
    else:
        raise ConfigError(f"unknown truncation criterion {criterion!r}")
    total = w.sum()
    if total <= 0:
        raise DataError("snapshot matrix is zero")
    if eps_pod <= 0:
        # full retention: keep every numerically nonzero singular value
        tol = s[0] * max(len(s), 1) * np.finfo(float).eps
        return int(np.count_nonzero(s > tol))
    frac = np.cumsum(w) / total
    return int(np.searchsorted(frac, 1.0 - eps_pod) + 1)


def pod(S: np.ndarray, eps_pod: float, criterion: str = "sigma", L_override: int | None = None) -> ReducedBasis:
    """Thin SVD of the snapshot matrix, truncated per the coverage rule."""
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.size == 0:
        raise DataError("snapshot matrix must be a non-empty 2D array")
    if not np.all(np.isfinite(S)):
        raise DataError("snapshot matrix contains non-finite entries")
    try:
        U, sig, _ = np.linalg.svd(S, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from exc
    if L_override is not None:
        if not 1 <= L_override <= len(sig):
            raise ConfigError(f"L override {L_override} outside [1, {len(sig)}]")
        L = int(L_override)
    else:
        L = truncation_rank(sig, eps_pod, criterion)
    return ReducedBasis(V=U[:, :L].copy(), singular_values=sig, L=L, eps_pod=float(eps_pod))


def project(basis: ReducedBasis, u_h: np.ndarray) -> np.ndarray:
    return basis.project(u_h)


@dataclass
class ReducedModel:
    """POD basis + IGPR regressors from deployment parameters to coefficients."""

    basis: ReducedBasis
    regressors: list[GPRModel]
    predictor_kind: str  # "mu_B" or "mu_cl"
    n_cl: int = 0  # centerline sample count when predictor_kind == "mu_cl"

    def __post_init__(self):
        if self.predictor_kind not in PREDICTOR_KINDS:
            raise ConfigError(f"predictor kind must be one of {PREDICTOR_KINDS}")
        if len(self.regressors) != self.basis.L:
            raise ConfigError("regressor count must equal the basis rank L")

    @property
    def input_dim(self) -> int:
        return self.regressors[0].X.shape[1]

    @property
    def n_h(self) -> int:
        return self.basis.V.shape[0]

    def predict(self, mu_star: np.ndarray) -> dict:
        """Posterior prediction of the full-order displacement at mu_star.

        Returns u_p (N_h), coeff_mean/coeff_var (L), and node_std (N_n): the
        standard deviation of each node's 3D displacement vector, i.e. the
        square root of the trace of its 3x3 posterior covariance block
        (V diag(coeff_var) V^T is the full-order covariance).
        """
        mu = np.asarray(mu_star, dtype=float).ravel()
        if mu.size != self.input_dim:
            raise ConfigError(f"mu dimension {mu.size} != model input dimension {self.input_dim}")
        mean = np.empty(self.basis.L)
        var = np.empty(self.basis.L)
        for j, reg in enumerate(self.regressors):
            m, v = reg.predict(mu[None, :])
            mean[j] = m[0]
            var[j] = v[0]
        u_p = self.basis.reconstruct(mean)
        dof_var = (self.basis.V**2) @ var
        if self.n_h % 3 == 0:
            node_std = np.sqrt(dof_var.reshape(-1, 3).sum(axis=1))
        else:  # non-displacement field: per-DOF std
            node_std = np.sqrt(dof_var)
        return {"u_p": u_p, "coeff_mean": mean, "coeff_var": var, "node_std": node_std}

    def sample_posterior(self, prediction: dict, n_samples: int, seed: int = 0) -> np.ndarray:
        """Draw full-order displacement samples from the coefficient posterior."""
        rng = np.random.default_rng(seed)
        mean = np.asarray(prediction["coeff_mean"], dtype=float)
        std = np.sqrt(np.asarray(prediction["coeff_var"], dtype=float))
        draws = mean[None, :] + rng.standard_normal((n_samples, len(mean))) * std[None, :]
        return draws @ self.basis.V.T

    # -- serialization (little-endian binary container) ----------------------

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<H", _VERSION))
            fh.write(struct.pack("<B", PREDICTOR_KINDS.index(self.predictor_kind)))
            fh.write(struct.pack("<I", self.n_cl))
            fh.write(struct.pack("<I", self.basis.L))
            fh.write(struct.pack("<Q", self.n_h))
            fh.write(struct.pack("<I", self.input_dim))
            fh.write(struct.pack("<d", self.basis.eps_pod))
            sig = np.asarray(self.basis.singular_values, dtype="<f8")
            fh.write(struct.pack("<I", len(sig)))
            fh.write(sig.tobytes())
            fh.write(np.ascontiguousarray(self.basis.V, dtype="<f8").tobytes())
            for reg in self.regressors:
                _write_regressor(fh, reg)

    @classmethod
    def load(cls, path) -> "ReducedModel":
        with open(path, "rb") as fh:
            if fh.read(4) != _MAGIC:
                raise DataError(f"{path}: not a reduced-model file")
            (version,) = struct.unpack("<H", fh.read(2))
            if version != _VERSION:
                raise DataError(f"{path}: unsupported model version {version}")
            (kind_idx,) = struct.unpack("<B", fh.read(1))
            (n_cl,) = struct.unpack("<I", fh.read(4))
            (L,) = struct.unpack("<I", fh.read(4))
            (n_h,) = struct.unpack("<Q", fh.read(8))
            (d,) = struct.unpack("<I", fh.read(4))
            (eps_pod,) = struct.unpack("<d", fh.read(8))
            (n_sig,) = struct.unpack("<I", fh.read(4))
            sig = np.frombuffer(fh.read(8 * n_sig), dtype="<f8").copy()
            V = np.frombuffer(fh.read(8 * n_h * L), dtype="<f8").reshape(n_h, L).copy()
            regs = [_read_regressor(fh, d) for _ in range(L)]
        basis = ReducedBasis(V=V, singular_values=sig, L=L, eps_pod=eps_pod)
        return cls(basis=basis, regressors=regs, predictor_kind=PREDICTOR_KINDS[kind_idx], n_cl=n_cl)


def _write_regressor(fh, reg: GPRModel) -> None:
    n, d = reg.X.shape
    fh.write(struct.pack("<II", n, d))
    fh.write(struct.pack("<d", reg.sigma_k))
    fh.write(np.ascontiguousarray(reg.sigma_l, dtype="<f8").tobytes())
    fh.write(struct.pack("<d", reg.sigma_n))
    for arr in (reg.X, reg.x_std.mean, reg.x_std.scale, reg.y_std.mean, reg.y_std.scale, reg.alpha, reg.L_chol):
        fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _read_regressor(fh, d_expect: int) -> GPRModel:
    n, d = struct.unpack("<II", fh.read(8))
    if d != d_expect:
        raise DataError("regressor input dimension mismatch in model file")
    (sigma_k,) = struct.unpack("<d", fh.read(8))
    sigma_l = np.frombuffer(fh.read(8 * d), dtype="<f8").copy()
    (sigma_n,) = struct.unpack("<d", fh.read(8))
    X = np.frombuffer(fh.read(8 * n * d), dtype="<f8").reshape(n, d).copy()
    xm = np.frombuffer(fh.read(8 * d), dtype="<f8").copy()
    xs = np.frombuffer(fh.read(8 * d), dtype="<f8").copy()
    ym = np.frombuffer(fh.read(8), dtype="<f8").copy()
    ys = np.frombuffer(fh.read(8), dtype="<f8").copy()
    alpha = np.frombuffer(fh.read(8 * n), dtype="<f8").copy()
    L_chol = np.frombuffer(fh.read(8 * n * n), dtype="<f8").reshape(n, n).copy()
    return GPRModel(
        sigma_k=sigma_k,
        sigma_l=sigma_l,
        sigma_n=sigma_n,
        X=X,
        x_std=Standardizer(mean=xm, scale=xs),
        y_std=Standardizer(mean=ym, scale=ys),
        alpha=alpha,
        L_chol=L_chol,
    )


def train_reduced_model(
    S: np.ndarray,
    MU: np.ndarray,
    eps_pod: float,
    predictor_kind: str,
    n_cl: int = 0,
    criterion: str = "sigma",
    L_override: int | None = None,
    seed: int = 0,
) -> ReducedModel:
    """POD on the snapshots, then IGPR from parameters to coefficients.

    S columns are snapshots; MU rows are the matching parameter vectors.
    """
    S = np.asarray(S, dtype=float)
    MU = np.atleast_2d(np.asarray(MU, dtype=float))
    if S.shape[1] != MU.shape[0]:
        raise DataError(f"snapshot count {S.shape[1]} != parameter row count {MU.shape[0]}")
    basis = pod(S, eps_pod, criterion=criterion, L_override=L_override)
    Y = basis.project(S).T  # (N_train, L)
    regressors = train_igpr(MU, Y, seed=seed)
    return ReducedModel(basis=basis, regressors=regressors, predictor_kind=predictor_kind, n_cl=n_cl)
