"""Benchmark flows, a fixed-step RK4 integrator, noise injection and a traffic surrogate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .timeseries import TimeSeries


@dataclass(frozen=True)
class LorenzParams:
    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 8.0 / 3.0


@dataclass(frozen=True)
class RosslerParams:
    a: float = 0.5
    b: float = 2.0
    c: float = 4.0
    # True selects the variant with dx/dt = -y - x in place of -y - z.
    literal_form: bool = False


def lorenz_rhs(x, p: LorenzParams = LorenzParams()) -> np.ndarray:
    x0, x1, x2 = x
    return np.array([p.sigma * (x1 - x0), x0 * (p.rho - x2) - x1, x0 * x1 - p.beta * x2])


def rossler_rhs(x, p: RosslerParams = RosslerParams()) -> np.ndarray:
    x0, x1, x2 = x
    first = -x1 - x0 if p.literal_form else -x1 - x2
    return np.array([first, x0 + p.a * x1, p.b + x2 * (x0 - p.c)])


def integrate_rk4(rhs, x0, dt: float, steps: int) -> TimeSeries:
    """Classical fixed-step RK4; column k of the result is the state after k steps.

    Raises:
        FloatingPointError: on a non-finite state, with the offending step index.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    x = np.asarray(x0, dtype=float).copy()
    out = np.empty((x.size, steps + 1))
    out[:, 0] = x
    h2 = 0.5 * dt
    for k in range(1, steps + 1):
        k1 = rhs(x)
        k2 = rhs(x + h2 * k1)
        k3 = rhs(x + h2 * k2)
        k4 = rhs(x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise FloatingPointError(f"integration produced a non-finite state at step {k}")
        out[:, k] = x
    return TimeSeries(out, dt, 0.0)


def lorenz_series(length: int, dt: float = 0.02, x0=(1.0, 1.0, 1.0), transient: int = 1000,
                  params: LorenzParams = LorenzParams()) -> TimeSeries:
    """``length`` samples of the Lorenz flow after discarding ``transient`` steps."""
    traj = integrate_rk4(lambda x: lorenz_rhs(x, params), x0, dt, transient + length - 1)
    return TimeSeries(traj.values[:, transient:], dt, 0.0)


def rossler_series(length: int, dt: float = 0.1, x0=(1.0, 1.0, 0.0), transient: int = 1000,
                   params: RosslerParams = RosslerParams()) -> TimeSeries:
    traj = integrate_rk4(lambda x: rossler_rhs(x, params), x0, dt, transient + length - 1)
    return TimeSeries(traj.values[:, transient:], dt, 0.0)


def add_noise(series: TimeSeries, sigma_v2: float, seed) -> TimeSeries:
    """Add i.i.d. N(0, sigma_v2) to every entry."""
    if sigma_v2 < 0:
        raise ValueError("noise variance must be >= 0")
    if sigma_v2 == 0:
        return TimeSeries(series.values.copy(), series.dt, series.start_time)
    rng = np.random.default_rng(seed)
    noise = np.sqrt(sigma_v2) * rng.standard_normal(series.values.shape)
    return TimeSeries(series.values + noise, series.dt, series.start_time)


def traffic_profile(hours) -> np.ndarray:
    """Noise-free hourly vehicle count at time ``hours`` (0 = Monday 00:00).

    Two Gaussian rush-hour peaks (08:00 and 17:00) over a night-time floor,
    scaled by 1.0 on weekdays and 0.55 on weekends:

        base(h) = 20 + 160 exp(-(h - 8)^2 / (2 * 1.5^2)) + 200 exp(-(h - 17)^2 / (2 * 2^2)) + 60 sin^2(pi h / 24)
    """
    hours = np.asarray(hours, dtype=float)
    h = np.mod(hours, 24.0)
    day = np.floor(np.mod(hours, 168.0) / 24.0)
    base = (20.0
            + 160.0 * np.exp(-((h - 8.0) ** 2) / (2 * 1.5**2))
            + 200.0 * np.exp(-((h - 17.0) ** 2) / (2 * 2.0**2))
            + 60.0 * np.sin(np.pi * h / 24.0) ** 2)
    weekly = np.where(day >= 5, 0.55, 1.0)
    return base * weekly


def traffic_surrogate(days: float, dt_hours: float = 1.0, seed=0, jitter: float = 0.05) -> TimeSeries:
    """Synthetic hourly traffic volume: ``traffic_profile * (1 + jitter * N(0, 1))``, clamped at zero."""
    count = int(round(days * 24.0 / dt_hours))
    if count < 1:
        raise ValueError("surrogate needs at least one sample")
    t = np.arange(count) * dt_hours
    rng = np.random.default_rng(seed)
    values = traffic_profile(t) * (1.0 + jitter * rng.standard_normal(count))
    return TimeSeries(np.maximum(values, 0.0)[np.newaxis, :], dt_hours, 0.0)
