"""Gaussian-process regression with a Matérn 5/2 kernel, written from first
principles: exact posterior via Cholesky, hyperparameters by maximizing the
log marginal likelihood with a log-space Nelder-Mead search and restarts.

One GPRModel maps a parameter vector to a single scalar output; a bank of
independent models (IGPR) covers multi-output targets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, cholesky
from scipy.optimize import minimize

from .errors import ConfigError, NumericalError

#: lower bound on the fitted noise standard deviation (standardized units)
NOISE_FLOOR = 1e-8

#: default number of seeded random restarts for hyperparameter fitting
N_RESTARTS = 5


def kernel_matern52(xi, xj, sigma_k: float, sigma_l) -> float:
    """Matérn 5/2 covariance of two points (standard closed form)."""
    if sigma_k <= 0 or np.any(np.asarray(sigma_l) <= 0):
        raise ConfigError("kernel hyperparameters must be positive")
    r = np.sqrt(np.sum((np.asarray(xi, dtype=float) - np.asarray(xj, dtype=float)) ** 2 / np.asarray(sigma_l) ** 2))
    s5r = np.sqrt(5.0) * r
    return float(sigma_k**2 * (1.0 + s5r + 5.0 * r**2 / 3.0) * np.exp(-s5r))


def matern52_gram(X1: np.ndarray, X2: np.ndarray, sigma_k: float, sigma_l) -> np.ndarray:
    """Gram matrix K[i, j] = k(X1[i], X2[j])."""
    if sigma_k <= 0 or np.any(np.asarray(sigma_l) <= 0):
        raise ConfigError("kernel hyperparameters must be positive")
    A = np.asarray(X1, dtype=float) / sigma_l
    B = np.asarray(X2, dtype=float) / sigma_l
    d2 = np.maximum(
        np.sum(A**2, axis=1)[:, None] + np.sum(B**2, axis=1)[None, :] - 2.0 * A @ B.T, 0.0
    )
    r = np.sqrt(d2)
    s5r = np.sqrt(5.0) * r
    return sigma_k**2 * (1.0 + s5r + 5.0 * d2 / 3.0) * np.exp(-s5r)


@dataclass
class Standardizer:
    """Affine map x -> (x - mean) / scale with a degenerate-scale floor."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        X = np.atleast_2d(np.asarray(X, dtype=float))
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale = np.where(scale < 1e-12, 1.0, scale)
        return cls(mean=mean, scale=scale)

    def transform(self, X):
        return (np.asarray(X, dtype=float) - self.mean) / self.scale

    def inverse(self, Z):
        return np.asarray(Z, dtype=float) * self.scale + self.mean


@dataclass
class GPRModel:
    """Trained single-output GP: kernel hyperparameters plus solve state."""

    sigma_k: float
    sigma_l: np.ndarray  # per-dimension lengthscales (all equal if isotropic)
    sigma_n: float
    X: np.ndarray  # standardized training inputs (N, d)
    x_std: Standardizer
    y_std: Standardizer
    alpha: np.ndarray = field(repr=False)  # K_y^{-1} y (standardized)
    L_chol: np.ndarray = field(repr=False)  # lower Cholesky factor of K_y

    def predict(self, Xq: np.ndarray, include_noise: bool = True):
        """Posterior mean and variance at query points, in original units."""
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        if Xq.shape[1] != self.X.shape[1]:
            raise ConfigError(f"query dimension {Xq.shape[1]} != trained dimension {self.X.shape[1]}")
        Z = self.x_std.transform(Xq)
        Ks = matern52_gram(self.X, Z, self.sigma_k, self.sigma_l)  # (N, q)
        mean_s = Ks.T @ self.alpha
        v = np.linalg.solve(self.L_chol, Ks)
        var_s = self.sigma_k**2 - np.sum(v**2, axis=0)
        np.maximum(var_s, 0.0, out=var_s)
        if include_noise:
            var_s = var_s + self.sigma_n**2
        scale = float(self.y_std.scale[0])
        return self.y_std.inverse(mean_s), var_s * scale**2


def _chol_ky(X: np.ndarray, sigma_k: float, sigma_l, sigma_n: float) -> np.ndarray:
    K = matern52_gram(X, X, sigma_k, sigma_l)
    n = len(X)
    jitter = 0.0
    for _ in range(6):
        try:
            return cholesky(K + (sigma_n**2 + jitter) * np.eye(n), lower=True)
        except np.linalg.LinAlgError:
            jitter = max(jitter * 10.0, 1e-10)
    raise NumericalError("covariance matrix is not positive definite (degenerate inputs?)")


def log_marginal_likelihood(X: np.ndarray, y: np.ndarray, sigma_k: float, sigma_l, sigma_n: float) -> float:
    L = _chol_ky(X, sigma_k, sigma_l, sigma_n)
    alpha = cho_solve((L, True), y)
    return float(-0.5 * y @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * len(y) * np.log(2 * np.pi))


def fit_gpr(
    X: np.ndarray,
    y: np.ndarray,
    seed: int = 0,
    n_restarts: int = N_RESTARTS,
    ard: bool = False,
) -> GPRModel:
    """Fit hyperparameters by log-space Nelder-Mead on the marginal likelihood.

    ard=False uses one isotropic lengthscale; ard=True one per input
    dimension.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if len(X) != len(y):
        raise ConfigError("X and y lengths differ")
    if len(X) < 2:
        raise ConfigError("GPR needs at least 2 training points")
    x_std = Standardizer.fit(X)
    y_std = Standardizer.fit(y[:, None])
    Z = x_std.transform(X)
    t = y_std.transform(y[:, None]).ravel()

    d = X.shape[1]
    n_l = d if ard else 1

    diffs = Z[:, None, :] - Z[None, :, :]
    med = np.median(np.linalg.norm(diffs, axis=-1)[np.triu_indices(len(Z), 1)])
    l0 = max(med, 1e-3)

    def unpack(theta):
        sk = np.exp(theta[0])
        sl = np.exp(theta[1 : 1 + n_l])
        if not ard:
            sl = np.full(d, sl[0])
        sn = max(np.exp(theta[-1]), NOISE_FLOOR)
        return sk, sl, sn

    def neg_lml(theta):
        if np.any(np.abs(theta) > 20):
            return 1e12
        sk, sl, sn = unpack(theta)
        try:
            return -log_marginal_likelihood(Z, t, sk, sl, sn)
        except NumericalError:
            return 1e12

    rng = np.random.default_rng(seed)
    base = np.concatenate([[0.0], np.full(n_l, np.log(l0)), [np.log(1e-2)]])
    best = None
    for trial in range(max(n_restarts, 1)):
        start = base if trial == 0 else base + rng.normal(0.0, 1.0, size=base.shape)
        res = minimize(neg_lml, start, method="Nelder-Mead", options={"xatol": 1e-4, "fatol": 1e-8, "maxiter": 2000})
        if best is None or res.fun < best.fun:
            best = res
    sk, sl, sn = unpack(best.x)
    L = _chol_ky(Z, sk, sl, sn)
    alpha = cho_solve((L, True), t)
    return GPRModel(
        sigma_k=float(sk),
        sigma_l=np.asarray(sl, dtype=float),
        sigma_n=float(sn),
        X=Z,
        x_std=x_std,
        y_std=y_std,
        alpha=alpha,
        L_chol=L,
    )


def make_gpr(X: np.ndarray, y: np.ndarray, sigma_k: float, sigma_l, sigma_n: float) -> GPRModel:
    """Build a model with given hyperparameters (no fitting)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    x_std = Standardizer.fit(X)
    y_std = Standardizer.fit(y[:, None])
    Z = x_std.transform(X)
    t = y_std.transform(y[:, None]).ravel()
    sl = np.full(X.shape[1], sigma_l) if np.isscalar(sigma_l) else np.asarray(sigma_l, dtype=float)
    sn = max(float(sigma_n), NOISE_FLOOR)
    L = _chol_ky(Z, sigma_k, sl, sn)
    alpha = cho_solve((L, True), t)
    return GPRModel(
        sigma_k=float(sigma_k),
        sigma_l=sl,
        sigma_n=sn,
        X=Z,
        x_std=x_std,
        y_std=y_std,
        alpha=alpha,
        L_chol=L,
    )


def train_igpr(X: np.ndarray, Y: np.ndarray, seed: int = 0, ard: bool = False) -> list[GPRModel]:
    """One independent GPR per output column of Y."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if Y.ndim != 2:
        raise ConfigError("Y must be a 2D matrix (N, L)")
    return [fit_gpr(X, Y[:, j], seed=seed + j, ard=ard) for j in range(Y.shape[1])]
