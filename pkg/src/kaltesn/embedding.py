"""Delay embedding of scalar observations.

Column j of an embedded series is ``(s_j, s_{j+lag}, ..., s_{j+(m-1)lag})``:
oldest sample first, newest sample in the last row. The embedded series is
timestamped by its newest element, and :func:`unembed` reads the last row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .timeseries import TimeSeries


@dataclass(frozen=True)
class EmbeddingConfig:
    m: int = 10
    lag: int = 1

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"embedding dimension must be >= 1, got {self.m}")
        if self.lag < 1:
            raise ValueError(f"lag must be >= 1, got {self.lag}")


def delay_embed(series: TimeSeries, cfg: EmbeddingConfig = EmbeddingConfig()) -> TimeSeries:
    if series.d != 1:
        raise ValueError(f"delay embedding expects a scalar series, got d={series.d}")
    span = (cfg.m - 1) * cfg.lag
    N = len(series)
    if N < span + 1:
        raise ValueError(f"series of length {N} too short for m={cfg.m}, lag={cfg.lag}")
    s = series.values[0]
    count = N - span
    values = np.stack([s[i * cfg.lag: i * cfg.lag + count] for i in range(cfg.m)])
    return TimeSeries(values, series.dt, series.start_time + span * series.dt)


def unembed(embedded: TimeSeries) -> TimeSeries:
    return TimeSeries(embedded.values[-1:].copy(), embedded.dt, embedded.start_time)
