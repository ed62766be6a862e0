"""Sequential readout training with an ensemble Kalman filter (KalT-ESN).

The data estimate x and the column-major vectorized readout w are estimated
jointly. Each ensemble member carries its own reservoir state, driven by its
own analysed data estimate. Covariances are estimated from ensemble
anomalies; the augmented covariance is never formed, only the data block
P_xx and the weight/data cross block P_wx.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .reservoir import ReadoutWeights, Reservoir
from .ridge import solve_spd
from .timeseries import TimeSeries

logger = logging.getLogger(__name__)


class EnsembleDivergenceError(FloatingPointError):
    """A member of the ensemble became non-finite."""

    def __init__(self, message, step=None, member=None):
        super().__init__(message)
        self.step = step
        self.member = member


@dataclass(frozen=True)
class EnkfConfig:
    M: int = 300
    sigma_x2: float = 0.2
    sigma_w2: float = 0.2
    sigma_v2: float = 1.0
    inflation: float = 1.0
    perturb_observations: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.M < 2:
            raise ValueError(f"ensemble size must be >= 2, got {self.M}")
        for name in ("sigma_x2", "sigma_w2", "sigma_v2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.inflation >= 1.0:
            raise ValueError(f"inflation must be >= 1, got {self.inflation}")


@dataclass
class Ensemble:
    X_hat: np.ndarray     # (d, M) data estimates
    R_states: np.ndarray  # (n, M) per-member reservoir states
    W_flat: np.ndarray    # (d*n, M) vectorized readouts
    k: int = 0

    def __post_init__(self):
        M = self.X_hat.shape[1]
        if self.R_states.shape[1] != M or self.W_flat.shape[1] != M:
            raise ValueError("ensemble matrices must share the member count")

    @property
    def M(self) -> int:
        return self.X_hat.shape[1]

    @property
    def d(self) -> int:
        return self.X_hat.shape[0]

    @property
    def n(self) -> int:
        return self.R_states.shape[0]

    def mean_weights(self) -> ReadoutWeights:
        return ReadoutWeights(reshape_weights(self.W_flat.mean(axis=1), self.d, self.n))


def vectorize_weights(W) -> np.ndarray:
    """Column-major stacking: entry (i, j) lands at index ``j * d + i``."""
    return np.asarray(W, dtype=float).reshape(-1, order="F").copy()


def reshape_weights(w, d: int, n: int) -> np.ndarray:
    """Inverse of :func:`vectorize_weights`."""
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.size != d * n:
        raise ValueError(f"vector of length {w.size} cannot be reshaped to ({d}, {n})")
    return w.reshape((d, n), order="F").copy()


def init_ensemble(y1, res_template: Reservoir, cfg: EnkfConfig, rng=None) -> Ensemble:
    """Data members ~ N(y1, sigma_x2 I), zero reservoir states, weights ~ N(0, sigma_w2 I)."""
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    y1 = np.asarray(y1, dtype=float).reshape(-1)
    d, n = res_template.d, res_template.n
    if y1.shape[0] != d:
        raise ValueError(f"initial observation has dimension {y1.shape[0]}, reservoir expects {d}")
    X_hat = y1[:, None] + np.sqrt(cfg.sigma_x2) * rng.standard_normal((d, cfg.M))
    W_flat = np.sqrt(cfg.sigma_w2) * rng.standard_normal((d * n, cfg.M))
    return Ensemble(X_hat=X_hat, R_states=np.zeros((n, cfg.M)), W_flat=W_flat, k=0)


def _apply_members(W_flat: np.ndarray, states: np.ndarray, d: int) -> np.ndarray:
    # member i readout is W_flat[:, i] reshaped column-major: W_i[a, b] = W_flat[b*d + a, i]
    n, M = states.shape
    return np.einsum("bam,bm->am", W_flat.reshape(n, d, M), states)


def forecast_step(ens: Ensemble, res: Reservoir) -> tuple[np.ndarray, np.ndarray]:
    """Advance every member's reservoir with its data estimate and read out the data forecast.

    Member reservoir states are updated in place. The weight forecast is the
    identity, so the returned ``W_f`` is ``ens.W_flat`` itself.

    Raises:
        EnsembleDivergenceError: if any member forecast is non-finite.
    """
    if ens.d != res.d or ens.n != res.n:
        raise ValueError(f"ensemble (d={ens.d}, n={ens.n}) does not match reservoir (d={res.d}, n={res.n})")
    ens.R_states = res.advance(ens.R_states, ens.X_hat)
    X_f = _apply_members(ens.W_flat, ens.R_states, ens.d)
    bad = ~np.all(np.isfinite(X_f), axis=0)
    if bad.any():
        member = int(np.flatnonzero(bad)[0])
        raise EnsembleDivergenceError(
            f"non-finite forecast for member {member} at step {ens.k}", step=ens.k, member=member
        )
    return X_f, ens.W_flat


def analysis_step(X_f, W_f, y_obs, cfg: EnkfConfig, rng=None) -> tuple[np.ndarray, np.ndarray]:
    """Kalman update of the data and weight ensembles from one observation.

    Gains are ``K_x = P_xx (P_xx + Sigma_v)^{-1}`` and ``K_w = P_wx (P_xx + Sigma_v)^{-1}``,
    with ``P_wx`` the weight/data cross covariance. Every member is corrected
    with its own innovation ``y - x_f``; with ``cfg.perturb_observations`` the
    observation is perturbed per member by N(0, Sigma_v) draws from ``rng``.
    """
    X_f = np.asarray(X_f, dtype=float)
    W_f = np.asarray(W_f, dtype=float)
    y_obs = np.asarray(y_obs, dtype=float).reshape(-1)
    d, M = X_f.shape
    if M < 2:
        raise ValueError("analysis needs at least two members")
    if y_obs.shape[0] != d:
        raise ValueError(f"observation has dimension {y_obs.shape[0]}, forecast has {d}")

    E_x = X_f - X_f.mean(axis=1, keepdims=True)
    E_w = W_f - W_f.mean(axis=1, keepdims=True)
    P_xx = E_x @ E_x.T / (M - 1)
    P_wx = E_w @ E_x.T / (M - 1)

    S = P_xx + cfg.sigma_v2 * np.eye(d)
    # K = P S^{-1}  <=>  K^T = S^{-1} P^T; one factorization serves both gains
    gains_T = solve_spd(S, np.hstack([P_xx.T, P_wx.T]), jitter=cfg.sigma_v2)
    K_x = gains_T[:, :d].T
    K_w = gains_T[:, d:].T

    if cfg.perturb_observations:
        rng = np.random.default_rng(cfg.seed) if rng is None else rng
        Y = y_obs[:, None] + np.sqrt(cfg.sigma_v2) * rng.standard_normal((d, M))
    else:
        Y = y_obs[:, None]
    innovation = Y - X_f
    X_hat = X_f + K_x @ innovation
    W_hat = W_f + K_w @ innovation

    if cfg.inflation != 1.0:
        X_hat = _inflate(X_hat, cfg.inflation)
        W_hat = _inflate(W_hat, cfg.inflation)
    return X_hat, W_hat


def _inflate(E: np.ndarray, factor: float) -> np.ndarray:
    mean = E.mean(axis=1, keepdims=True)
    return mean + factor * (E - mean)


@dataclass
class KaltDiagnostics:
    """Per-assimilation-step traces, one row per analysis."""

    x_mean: list = field(default_factory=list)
    innovation_norm: list = field(default_factory=list)
    x_spread: list = field(default_factory=list)
    w_spread: list = field(default_factory=list)

    def record(self, X_f, X_hat, W_hat, y_obs):
        self.innovation_norm.append(float(np.linalg.norm(y_obs - X_f.mean(axis=1))))
        self.x_mean.append(X_hat.mean(axis=1))
        self.x_spread.append(float(np.sqrt(np.mean(X_hat.var(axis=1, ddof=1)))))
        self.w_spread.append(float(np.sqrt(np.mean(W_hat.var(axis=1, ddof=1)))))

    def __len__(self):
        return len(self.innovation_norm)

    def to_csv(self, path) -> None:
        """``step,innovation_norm,x_spread,w_spread,x_mean_0..`` with step = k + 1 (1-based analysis time)."""
        d = len(self.x_mean[0]) if self.x_mean else 0
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "innovation_norm", "x_spread", "w_spread"]
                            + [f"x_mean_{i}" for i in range(d)])
            for k in range(len(self)):
                writer.writerow([k + 1, repr(self.innovation_norm[k]), repr(self.x_spread[k]),
                                 repr(self.w_spread[k])] + [repr(float(v)) for v in self.x_mean[k]])


def train_kalt(noisy: TimeSeries, res: Reservoir, cfg: EnkfConfig, spinup: int = 0,
               return_ensemble: bool = False):
    """Train a readout from noisy observations ``y(t_1..t_N)``.

    Runs ``N - 1`` forecast/analysis cycles and returns the reshaped mean of
    the final weight ensemble together with a :class:`KaltDiagnostics`. The
    reservoir's own state is not touched.

    With ``spinup > 0`` the member reservoirs start from the state reached by
    driving with the first ``spinup`` observations instead of from zero, and
    assimilation begins at observation ``spinup``; this mirrors the ridge
    washout.

    Raises:
        EnsembleDivergenceError: carries the step index of the first non-finite member.
    """
    if len(noisy) < 2:
        raise ValueError("KalT training needs at least two observations")
    if noisy.d != res.d:
        raise ValueError(f"data dimension {noisy.d} does not match reservoir input dimension {res.d}")

    if not 0 <= spinup < len(noisy) - 1:
        raise ValueError(f"spinup must lie in [0, {len(noisy) - 1}), got {spinup}")

    rng = np.random.default_rng(cfg.seed)
    Y = noisy.values
    ens = init_ensemble(Y[:, spinup], res, cfg, rng=rng)
    if spinup:
        r = np.zeros(res.n)
        for k in range(spinup):
            r = res.advance(r, Y[:, k])
        ens.R_states[:] = r[:, None]
    diag = KaltDiagnostics()
    for k in range(spinup, len(noisy) - 1):
        ens.k = k
        X_f, W_f = forecast_step(ens, res)
        X_hat, W_hat = analysis_step(X_f, W_f, Y[:, k + 1], cfg, rng=rng)
        if not (np.all(np.isfinite(X_hat)) and np.all(np.isfinite(W_hat))):
            raise EnsembleDivergenceError(f"non-finite analysis at step {k + 1}", step=k + 1)
        ens.X_hat, ens.W_flat = X_hat, W_hat
        ens.k = k + 1
        diag.record(X_f, X_hat, W_hat, Y[:, k + 1])

    weights = ens.mean_weights()
    if return_ensemble:
        return weights, diag, ens
    return weights, diag
