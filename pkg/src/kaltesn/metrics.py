"""Prediction error metrics and Monte-Carlo summaries."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .timeseries import TimeSeries


def _values(x) -> np.ndarray:
    if isinstance(x, TimeSeries):
        return x.values
    return np.atleast_2d(np.asarray(x, dtype=float))


def nrmse(truth, pred) -> float:
    """sqrt(sum_k |x_k - xhat_k|^2 / sum_k |x_k|^2)."""
    x, xh = _values(truth), _values(pred)
    if x.shape != xh.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {xh.shape}")
    denom = np.sum(x**2)
    if denom == 0:
        raise ValueError("truth is identically zero; NRMSE undefined")
    return float(np.sqrt(np.sum((x - xh) ** 2) / denom))


def pearson(truth, pred) -> float:
    """Correlation of two series.

    For d > 1 the coefficient is pooled: the time-centered inner products are
    summed over all components before normalizing, which reduces to the usual
    coefficient when d = 1.
    """
    x, xh = _values(truth), _values(pred)
    if x.shape != xh.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {xh.shape}")
    if x.shape[1] < 2:
        raise ValueError("need at least two samples")
    dx = x - x.mean(axis=1, keepdims=True)
    dxh = xh - xh.mean(axis=1, keepdims=True)
    nx, nxh = np.sqrt(np.sum(dx**2)), np.sqrt(np.sum(dxh**2))
    if nx == 0 or nxh == 0:
        raise ValueError("constant series; correlation undefined")
    return float(np.clip(np.sum(dx * dxh) / (nx * nxh), -1.0, 1.0))


class Summary(NamedTuple):
    median: float
    q25: float
    q75: float
    mean: float
    std: float


def monte_carlo_summary(values) -> Summary:
    """Median, quartiles (linear interpolation), mean and sample std (0 for one value)."""
    v = np.asarray(list(values), dtype=float)
    if v.size == 0:
        raise ValueError("no values to summarize")
    q25, med, q75 = np.percentile(v, [25, 50, 75])
    std = float(v.std(ddof=1)) if v.size > 1 else 0.0
    return Summary(float(med), float(q25), float(q75), float(v.mean()), std)
