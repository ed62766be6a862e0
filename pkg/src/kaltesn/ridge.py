"""Batch readout training by Tikhonov-regularized least squares."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .reservoir import ReadoutWeights

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RidgeConfig:
    beta: float = 1e-6
    washout: int = 0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.washout < 0:
            raise ValueError(f"washout must be >= 0, got {self.washout}")


def solve_spd(A: np.ndarray, B: np.ndarray, jitter: float, retries: int = 3) -> np.ndarray:
    """Solve ``A X = B`` for symmetric positive-definite ``A`` by Cholesky.

    If the factorization fails, ``jitter * I`` is added and multiplied by 10 on
    each of up to ``retries`` further attempts.
    """
    A = 0.5 * (A + A.T)
    eye = np.eye(A.shape[0])
    extra = 0.0
    for attempt in range(retries + 1):
        try:
            factor = linalg.cho_factor(A + extra * eye, lower=True, check_finite=False)
            return linalg.cho_solve(factor, B, check_finite=False)
        except linalg.LinAlgError:
            extra = jitter * 10.0 ** (attempt + 1)
            logger.warning("Cholesky failed; retrying with added diagonal %.3g", extra)
    raise linalg.LinAlgError(f"matrix not positive definite after {retries} jitter escalations")


def train_ridge(R: np.ndarray, Y: np.ndarray, cfg: RidgeConfig = RidgeConfig()) -> ReadoutWeights:
    """``W_out = Y R^T (R R^T + beta I)^{-1}`` on the columns after ``cfg.washout``.

    Args:
        R: Reservoir states, shape (n, N).
        Y: Targets, shape (d, N).
    """
    R = np.atleast_2d(np.asarray(R, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if R.shape[1] != Y.shape[1]:
        raise ValueError(f"column count mismatch: R has {R.shape[1]}, Y has {Y.shape[1]}")
    if R.shape[1] <= cfg.washout:
        raise ValueError(f"need more than washout={cfg.washout} columns, got {R.shape[1]}")
    if not (np.all(np.isfinite(R)) and np.all(np.isfinite(Y))):
        raise ValueError("non-finite entries in training matrices")

    R = R[:, cfg.washout:]
    Y = Y[:, cfg.washout:]
    gram = R @ R.T
    gram[np.diag_indices_from(gram)] += cfg.beta
    # W_out^T = (R R^T + beta I)^{-1} R Y^T since the Gram matrix is symmetric
    W_out = solve_spd(gram, R @ Y.T, jitter=cfg.beta).T
    return ReadoutWeights(W_out)
