"""Paired ridge-versus-KalT Monte-Carlo experiments.

Every trial builds one reservoir and one noisy training record, trains a
readout with each trainer on exactly that data, runs closed-loop prediction
from the end of the training record and scores it against the clean
continuation.
"""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .dynamics import RosslerParams, add_noise, lorenz_series, rossler_series, traffic_surrogate
from .embedding import EmbeddingConfig, delay_embed, unembed
from .enkf import EnkfConfig, EnsembleDivergenceError, KaltDiagnostics, train_kalt
from .metrics import monte_carlo_summary, nrmse, pearson
from .reservoir import DegenerateReservoirError, ReservoirConfig, build_reservoir, drive, predict_autonomous
from .ridge import RidgeConfig, train_ridge
from .timeseries import TimeSeries, read_csv

logger = logging.getLogger(__name__)

SYSTEMS = ("lorenz", "rossler", "traffic-surrogate", "csv-file")
TRAINERS = ("ridge", "kalt")

# Full-size hyperparameters per system, plus the test lengths and input scalings chosen here.
FULL_PROFILES = {
    "lorenz": dict(dt=0.02, n=500, p=0.01, train_len=6000, alpha=0.3, beta=1e-6, M=300,
                   sigma_x2=0.2, sigma_w2=0.2, test_len=500, input_scale=0.1, embed_m=1,
                   noise_levels=[0.1, 0.5, 1.0]),
    "rossler": dict(dt=0.1, n=500, p=0.01, train_len=1000, alpha=0.3, beta=1e-6, M=300,
                    sigma_x2=0.2, sigma_w2=0.2, test_len=300, input_scale=0.1, embed_m=1,
                    noise_levels=[0.05, 0.1]),
    "traffic-surrogate": dict(dt=1.0, n=4000, p=0.01, train_len=500, alpha=0.7, beta=1e-6, M=300,
                              sigma_x2=10.0, sigma_w2=1.0, test_len=70, input_scale=0.01, embed_m=10,
                              noise_levels=[100.0, 500.0]),
}
FULL_PROFILES["csv-file"] = dict(FULL_PROFILES["traffic-surrogate"])

# Desk-scale runs finish in minutes on one core. Chaotic systems are scored over
# the first 100 prediction steps; KalT uses a wider weight prior (sigma_w2) than the full profile.
DESK_OVERRIDES = {
    "lorenz": dict(n=300, train_len=4000, M=150, sigma_w2=1.0, test_len=100, trials=10),
    "rossler": dict(n=300, train_len=1000, M=150, sigma_w2=1.0, test_len=100, trials=10),
    "traffic-surrogate": dict(n=800, M=100, trials=10),
    "csv-file": dict(n=800, M=100, trials=10),
}


@dataclass
class ExperimentConfig:
    system: str = "lorenz"
    # reservoir
    n: int = 200
    p: float = 0.01
    spectral_radius: float = 0.9
    alpha: float = 0.3
    input_scale: float = 0.1
    # ridge
    beta: float = 1e-6
    washout: int = 100
    # KalT
    M: int = 100
    sigma_x2: float = 0.2
    sigma_w2: float = 0.2
    inflation: float = 1.0
    perturb_observations: bool = False
    kalt_warmup: str = "filtered"
    min_sigma_v2: float = 1e-6
    kalt_spinup: int = 100
    # embedding
    embed_m: int = 1
    embed_lag: int = 1
    # data
    dt: float = 0.02
    transient: int = 1000
    ic_jitter: float = 1.0
    csv_path: str | None = None
    csv_column: str | None = None
    # experiment
    noise_levels: list = field(default_factory=lambda: [0.1, 0.5, 1.0])
    trials: int = 10
    train_len: int = 2000
    test_len: int = 500
    seed: int = 0
    trainers: list = field(default_factory=lambda: list(TRAINERS))
    output_dir: str | None = None
    write_traces: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.system not in SYSTEMS:
            raise ValueError(f"unknown system {self.system!r}; choose from {SYSTEMS}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.noise_levels:
            raise ValueError("noise_levels must be nonempty")
        if any(s < 0 for s in self.noise_levels):
            raise ValueError("noise levels must be >= 0")
        if self.train_len < 2:
            raise ValueError("train_len must be >= 2")
        if self.test_len < 1:
            raise ValueError("test_len must be >= 1")
        if self.kalt_warmup not in ("filtered", "noisy"):
            raise ValueError("kalt_warmup must be 'filtered' or 'noisy'")
        bad = set(self.trainers) - set(TRAINERS)
        if bad or not self.trainers:
            raise ValueError(f"trainers must be a nonempty subset of {TRAINERS}, got {self.trainers}")
        if self.system == "csv-file" and not self.csv_path:
            raise ValueError("system 'csv-file' needs csv_path")
        if self.washout >= self.train_len - 1:
            raise ValueError("washout must leave training columns")
        # surface bad values early, before any worker starts
        self.reservoir_config(0)
        self.enkf_config(1.0, 0)
        RidgeConfig(self.beta, self.washout)
        EmbeddingConfig(self.embed_m, self.embed_lag)

    @classmethod
    def from_profile(cls, system: str, profile: str = "desk", **overrides) -> "ExperimentConfig":
        if profile not in ("desk", "full"):
            raise ValueError(f"unknown profile {profile!r}")
        if system not in FULL_PROFILES:
            raise ValueError(f"unknown system {system!r}")
        values = dict(FULL_PROFILES[system], system=system)
        if profile == "desk":
            values.update(DESK_OVERRIDES[system])
        values.update(overrides)
        return cls(**values)

    @classmethod
    def from_file(cls, path, **overrides) -> "ExperimentConfig":
        """JSON object; an optional ``profile`` key selects the base defaults for ``system``."""
        data = json.loads(Path(path).read_text())
        if not isinstance(data, dict):
            raise ValueError(f"{path}: config must be a JSON object")
        data.update({k: v for k, v in overrides.items() if v is not None})
        known = {f.name for f in fields(cls)} | {"profile"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"{path}: unknown config keys {sorted(unknown)}")
        profile = data.pop("profile", None)
        if profile is not None:
            return cls.from_profile(data.pop("system", "lorenz"), profile, **data)
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def d(self) -> int:
        return 3 if self.system in ("lorenz", "rossler") else self.embed_m

    def reservoir_config(self, seed: int) -> ReservoirConfig:
        return ReservoirConfig(n=self.n, d=self.d, p=self.p, spectral_radius_target=self.spectral_radius,
                               alpha=self.alpha, input_scale=self.input_scale, seed=seed)

    def enkf_config(self, sigma_v2: float, seed: int) -> EnkfConfig:
        return EnkfConfig(M=self.M, sigma_x2=self.sigma_x2, sigma_w2=self.sigma_w2,
                          sigma_v2=max(sigma_v2, self.min_sigma_v2), inflation=self.inflation,
                          perturb_observations=self.perturb_observations, seed=seed)


def trial_seeds(master_seed: int, trial: int) -> dict:
    """Independent integer seeds for one trial; trial i is rooted at ``master_seed + i``."""
    children = np.random.SeedSequence(master_seed + trial).spawn(4)
    names = ("reservoir", "noise", "enkf", "data")
    return {k: int(c.generate_state(1, np.uint32)[0]) for k, c in zip(names, children)}


def ingest_csv(path, column=None) -> TimeSeries:
    """Scalar series from one column of a ``t,...`` CSV file (first data column by default)."""
    series = read_csv(path, column)
    if series.d != 1:
        series = TimeSeries(series.values[:1], series.dt, series.start_time)
    return series


def system_series(cfg: ExperimentConfig, length: int, data_seed: int) -> TimeSeries:
    """``length`` clean samples of ``cfg.system`` (scalar for traffic and CSV sources)."""
    rng = np.random.default_rng(data_seed)
    if cfg.system == "lorenz":
        x0 = np.array([1.0, 1.0, 1.0]) + cfg.ic_jitter * rng.standard_normal(3)
        return lorenz_series(length, dt=cfg.dt, x0=x0, transient=cfg.transient)
    if cfg.system == "rossler":
        x0 = np.array([1.0, 1.0, 0.0]) + cfg.ic_jitter * rng.standard_normal(3)
        return rossler_series(length, dt=cfg.dt, x0=x0, transient=cfg.transient, params=RosslerParams())
    if cfg.system == "traffic-surrogate":
        return traffic_surrogate(length * cfg.dt / 24.0, dt_hours=cfg.dt, seed=data_seed)
    series = ingest_csv(cfg.csv_path, cfg.csv_column)
    if len(series) < length:
        raise ValueError(f"{cfg.csv_path}: {len(series)} samples, experiment needs {length}")
    return series.slice(0, length)


def clean_data(cfg: ExperimentConfig, data_seed: int) -> TimeSeries:
    """Ground truth covering training (plus embedding span) and test samples."""
    span = (cfg.embed_m - 1) * cfg.embed_lag if cfg.d != 3 else 0
    return system_series(cfg, cfg.train_len + cfg.test_len + span, data_seed)


def build_trial_reservoir(cfg: ExperimentConfig, seed: int, d: int | None = None, attempts: int = 10):
    """Build the reservoir for ``seed``, moving to ``seed + 1, ...`` past degenerate samples."""
    for offset in range(attempts):
        rc = cfg.reservoir_config(seed + offset)
        if d is not None:
            rc = replace(rc, d=d)
        try:
            return build_reservoir(rc), seed + offset
        except DegenerateReservoirError:
            logger.info("reservoir seed %d degenerate; resampling", seed + offset)
    raise DegenerateReservoirError(f"{attempts} consecutive degenerate reservoirs from seed {seed}")


@dataclass
class TrialResult:
    trial: int
    sigma_v2: float
    rows: list
    truth: TimeSeries | None = None
    predictions: dict = field(default_factory=dict)
    diagnostics: KaltDiagnostics | None = None


def run_trial(cfg: ExperimentConfig, sigma_v2: float, trial: int) -> TrialResult:
    seeds = trial_seeds(cfg.seed, trial)
    clean = clean_data(cfg, seeds["data"])
    embedded = cfg.d != 3
    span = (cfg.embed_m - 1) * cfg.embed_lag if embedded else 0

    noisy_raw = add_noise(clean.slice(0, cfg.train_len + span), sigma_v2, seeds["noise"])
    truth = clean.slice(cfg.train_len + span, cfg.train_len + span + cfg.test_len)
    noisy = delay_embed(noisy_raw, EmbeddingConfig(cfg.embed_m, cfg.embed_lag)) if embedded else noisy_raw

    res, res_seed = build_trial_reservoir(cfg, seeds["reservoir"])

    result = TrialResult(trial, sigma_v2, rows=[], truth=truth)
    for trainer in cfg.trainers:
        row = dict(sigma_v2=sigma_v2, trial=trial, trainer=trainer, status="ok",
                   nrmse=float("nan"), pearson=float("nan"), reservoir_seed=res_seed)
        try:
            res.reset()
            if trainer == "ridge":
                states = drive(res, noisy.slice(0, len(noisy) - 1))
                weights = train_ridge(states, noisy.values[:, 1:], RidgeConfig(cfg.beta, cfg.washout))
                warmup = noisy
            else:
                weights, diag = train_kalt(noisy, res, cfg.enkf_config(sigma_v2, seeds["enkf"]), spinup=cfg.kalt_spinup)
                result.diagnostics = diag
                warmup = _filtered_series(noisy, diag) if cfg.kalt_warmup == "filtered" else noisy
            res.reset()
            pred = predict_autonomous(res, weights, warmup, cfg.test_len)
            if embedded:
                pred = unembed(pred)
            result.predictions[trainer] = pred
            row["nrmse"] = nrmse(truth, pred)
            try:
                row["pearson"] = pearson(truth, pred)
            except ValueError:
                row["pearson"] = float("nan")
        except (EnsembleDivergenceError, FloatingPointError, np.linalg.LinAlgError, ValueError) as exc:
            logger.warning("trial %d (sigma_v2=%g, %s) failed: %s", trial, sigma_v2, trainer, exc)
            row["status"] = "failed"
        result.rows.append(row)
    return result


def _filtered_series(noisy: TimeSeries, diag: KaltDiagnostics) -> TimeSeries:
    """Observations up to the first assimilated step, then the analysed ensemble means."""
    head = len(noisy) - len(diag)
    filtered = np.column_stack([noisy.values[:, :head]] + [m[:, None] for m in diag.x_mean])
    return TimeSeries(filtered, noisy.dt, noisy.start_time)


RESULT_FIELDS = ["sigma_v2", "trial", "trainer", "status", "nrmse", "pearson", "reservoir_seed"]
SUMMARY_FIELDS = ["sigma_v2", "trainer", "trials", "failures",
                  "nrmse_median", "nrmse_q25", "nrmse_q75", "nrmse_mean", "nrmse_std",
                  "pearson_median", "pearson_q25", "pearson_q75", "pearson_mean", "pearson_std"]


def summarize(rows: list) -> list:
    """One row per (noise level, trainer); failed trials are excluded but counted."""
    out = []
    keys = sorted({(r["sigma_v2"], r["trainer"]) for r in rows}, key=lambda k: (k[0], TRAINERS.index(k[1])))
    for sigma_v2, trainer in keys:
        group = [r for r in rows if r["sigma_v2"] == sigma_v2 and r["trainer"] == trainer]
        ok = [r for r in group if r["status"] == "ok"]
        summary = dict(sigma_v2=sigma_v2, trainer=trainer, trials=len(group), failures=len(group) - len(ok))
        for metric in ("nrmse", "pearson"):
            vals = [r[metric] for r in ok if np.isfinite(r[metric])]
            stats = monte_carlo_summary(vals) if vals else [float("nan")] * 5
            for name, v in zip(("median", "q25", "q75", "mean", "std"), stats):
                summary[f"{metric}_{name}"] = v
        out.append(summary)
    return out


def _write_rows(path: Path, fieldnames: list, rows: list) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def write_prediction_csv(path, truth: TimeSeries, predictions: dict) -> None:
    """``t,truth_0..,<trainer>_0..`` rows for plotting."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = ["t"] + [f"truth_{i}" for i in range(truth.d)]
        for name in predictions:
            header += [f"{name}_{i}" for i in range(truth.d)]
        writer.writerow(header)
        for k, t in enumerate(truth.times):
            line = [repr(float(t))] + [repr(float(v)) for v in truth.values[:, k]]
            for pred in predictions.values():
                line += [repr(float(v)) for v in pred.values[:, k]]
            writer.writerow(line)


def _noise_dir(out: Path, sigma_v2: float) -> Path:
    return out / f"sigma2_{sigma_v2:g}"


def _run_one(args):
    cfg, sigma_v2, trial = args
    return run_trial(cfg, sigma_v2, trial)


def run_experiment(cfg: ExperimentConfig) -> tuple[list, list]:
    """Run every (noise level, trial) pair; returns (per-trial rows, summary rows).

    With ``cfg.output_dir`` set, writes ``results.csv``, ``summary.csv``,
    ``config.json`` and per-trial ``prediction_<trial>.csv`` /
    ``diagnostics_<trial>.csv`` under ``sigma2_<level>/``.
    """
    jobs = [(cfg, s, t) for s in cfg.noise_levels for t in range(cfg.trials)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(job) for job in jobs]
    results.sort(key=lambda r: (cfg.noise_levels.index(r.sigma_v2), r.trial))

    rows = [row for r in results for row in r.rows]
    summary = summarize(rows)

    if cfg.output_dir:
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_rows(out / "results.csv", RESULT_FIELDS, rows)
        _write_rows(out / "summary.csv", SUMMARY_FIELDS, summary)
        (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
        if cfg.write_traces:
            for r in results:
                sub = _noise_dir(out, r.sigma_v2)
                sub.mkdir(exist_ok=True)
                if r.predictions:
                    write_prediction_csv(sub / f"prediction_{r.trial}.csv", r.truth, r.predictions)
                if r.diagnostics is not None:
                    r.diagnostics.to_csv(sub / f"diagnostics_{r.trial}.csv")
    return rows, summary
