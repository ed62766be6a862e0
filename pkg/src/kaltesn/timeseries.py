"""Uniformly sampled multivariate time series and its CSV representation."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass
class TimeSeries:
    """A d-dimensional series sampled every ``dt`` time units.

    ``values`` has shape (d, N): column k is the sample at ``start_time + k * dt``.
    """

    values: np.ndarray
    dt: float
    start_time: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[np.newaxis, :]
        if values.ndim != 2:
            raise ValueError(f"values must be 2-D (d, N), got shape {values.shape}")
        if values.shape[1] < 1:
            raise ValueError("time series must contain at least one sample")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not np.all(np.isfinite(values)):
            raise ValueError("time series contains non-finite entries")
        self.values = values
        self.dt = float(self.dt)
        self.start_time = float(self.start_time)

    @property
    def d(self) -> int:
        return self.values.shape[0]

    def __len__(self) -> int:
        return self.values.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.start_time + np.arange(len(self)) * self.dt

    def slice(self, start: int, stop: int | None = None) -> "TimeSeries":
        """Columns ``start:stop`` with the start time shifted accordingly."""
        start = range(len(self))[start] if start < 0 else start
        return TimeSeries(self.values[:, start:stop], self.dt, self.start_time + start * self.dt)

    def to_csv(self, path) -> None:
        write_csv(self, path)


def write_csv(series: TimeSeries, path) -> None:
    """Write ``t,x0,x1,...`` rows, one per sample.

    Floats are written with ``repr`` so a read-back is bit exact.
    """
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"x{i}" for i in range(series.d)])
        for t, column in zip(series.times, series.values.T):
            writer.writerow([repr(float(t))] + [repr(float(v)) for v in column])


def read_csv(path, columns=None, rtol: float = 1e-9) -> TimeSeries:
    """Read a series written by :func:`write_csv` (or any file with a ``t`` column).

    Args:
        path: CSV file with a header row and a time column named ``t``.
        columns: Column names to load; all non-time columns by default.
        rtol: Relative tolerance on the uniformity of the time steps.

    Raises:
        ValueError: Missing columns, empty or non-numeric cells, fewer than two
            rows, or non-uniform sampling.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = [row for row in reader if row]

    if "t" not in header:
        raise ValueError(f"{path}: no time column 't' in header {header}")
    if columns is None:
        columns = [h for h in header if h != "t"]
    elif isinstance(columns, str):
        columns = [columns]
    missing = [c for c in columns if c not in header]
    if missing:
        raise ValueError(f"{path}: missing column(s) {missing}")
    if len(rows) < 2:
        raise ValueError(f"{path}: need at least two rows to infer dt")

    idx = [header.index("t")] + [header.index(c) for c in columns]
    data = np.empty((len(rows), len(idx)))
    for r, row in enumerate(rows):
        for c, j in enumerate(idx):
            try:
                data[r, c] = float(row[j])
            except (IndexError, ValueError):
                raise ValueError(f"{path}: bad cell at row {r + 2}, column {header[j]!r}") from None
    if not np.all(np.isfinite(data)):
        raise ValueError(f"{path}: NaN or infinite cells")

    t = data[:, 0]
    steps = np.diff(t)
    dt = (t[-1] - t[0]) / (len(t) - 1)
    if dt <= 0 or np.any(np.abs(steps - dt) > rtol * abs(dt) + 1e-12 * np.abs(t[1:]).max()):
        raise ValueError(f"{path}: time column is not uniformly sampled")
    # Prefer the first step when it is consistent: keeps repr round-trips exact.
    return TimeSeries(data[:, 1:].T.copy(), float(steps[0]), float(t[0]))
