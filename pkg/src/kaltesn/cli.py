"""Command-line entry point: ``kaltesn {generate,train,predict,evaluate,sweep}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .dynamics import add_noise
from .embedding import EmbeddingConfig, delay_embed, unembed
from .enkf import train_kalt
from .experiment import (SYSTEMS, TRAINERS, ExperimentConfig, _filtered_series, build_trial_reservoir,
                         run_experiment, system_series, trial_seeds)
from .metrics import nrmse, pearson
from .reservoir import ReadoutWeights, drive, load_reservoir, predict_autonomous
from .ridge import RidgeConfig, train_ridge
from .timeseries import TimeSeries, read_csv, write_csv

logger = logging.getLogger("kaltesn")


class CliError(Exception):
    pass


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def load_config(args) -> ExperimentConfig:
    overrides = {}
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.noise is not None:
        overrides["noise_levels"] = args.noise
    if getattr(args, "trainer", None) and args.trainer != "both":
        overrides["trainers"] = [args.trainer]
    if getattr(args, "workers", None):
        overrides["workers"] = args.workers
    if args.out is not None:
        overrides["output_dir"] = args.out

    if args.config:
        if args.system:
            overrides["system"] = args.system
        if args.profile:
            overrides["profile"] = args.profile
        return ExperimentConfig.from_file(args.config, **overrides)
    return ExperimentConfig.from_profile(args.system or "lorenz", args.profile or "desk", **overrides)


def cmd_generate(args, cfg: ExperimentConfig) -> int:
    seeds = trial_seeds(cfg.seed, 0)
    series = system_series(cfg, args.length or cfg.train_len + cfg.test_len, seeds["data"])
    sigma_v2 = cfg.noise_levels[0] if args.noise is not None else 0.0
    if sigma_v2 > 0:
        series = add_noise(series, sigma_v2, seeds["noise"])
    out = Path(args.out or "series.csv")
    write_csv(series, out)
    print(f"wrote {len(series)} samples (d={series.d}, sigma_v2={sigma_v2:g}) to {out}")
    return 0


def _model_input(series: TimeSeries, cfg: ExperimentConfig) -> TimeSeries:
    if cfg.embed_m > 1:
        if series.d != 1:
            raise CliError(f"embedding expects a scalar series, data has d={series.d}")
        return delay_embed(series, EmbeddingConfig(cfg.embed_m, cfg.embed_lag))
    return series


def cmd_train(args, cfg: ExperimentConfig) -> int:
    data = _model_input(read_csv(args.data), cfg)
    res, _ = build_trial_reservoir(cfg, trial_seeds(cfg.seed, 0)["reservoir"], d=data.d)
    out = Path(args.out or "model")
    out.mkdir(parents=True, exist_ok=True)
    trainer = args.trainer if args.trainer in TRAINERS else "kalt"
    if trainer == "ridge":
        states = drive(res, data.slice(0, len(data) - 1))
        weights = train_ridge(states, data.values[:, 1:], RidgeConfig(cfg.beta, cfg.washout))
        warmup = data
    else:
        sigma_v2 = cfg.noise_levels[0]
        weights, diag = train_kalt(data, res, cfg.enkf_config(sigma_v2, trial_seeds(cfg.seed, 0)["enkf"]),
                                   spinup=cfg.kalt_spinup)
        diag.to_csv(out / "diagnostics.csv")
        warmup = _filtered_series(data, diag) if cfg.kalt_warmup == "filtered" else data
    res.reset()
    res.save(out / "reservoir.npz")
    np.save(out / "readout.npy", weights.W_out)
    write_csv(warmup, out / "warmup.csv")
    meta = dict(trainer=trainer, embed_m=cfg.embed_m, embed_lag=cfg.embed_lag, d=data.d)
    (out / "model.json").write_text(json.dumps(meta, indent=2) + "\n")
    print(f"trained {trainer} readout {weights.W_out.shape} -> {out}")
    return 0


def cmd_predict(args, cfg: ExperimentConfig) -> int:
    model = Path(args.model)
    meta = json.loads((model / "model.json").read_text())
    res = load_reservoir(model / "reservoir.npz")
    weights = ReadoutWeights(np.load(model / "readout.npy"))
    warmup = read_csv(args.warmup) if args.warmup else read_csv(model / "warmup.csv")
    if args.warmup and meta["embed_m"] > 1:
        warmup = delay_embed(warmup, EmbeddingConfig(meta["embed_m"], meta["embed_lag"]))
    pred = predict_autonomous(res, weights, warmup, args.horizon)
    if meta["embed_m"] > 1:
        pred = unembed(pred)
    out = Path(args.out or "prediction.csv")
    write_csv(pred, out)
    print(f"wrote {args.horizon}-step prediction to {out}")
    return 0


def cmd_evaluate(args, cfg) -> int:
    truth = read_csv(args.truth)
    pred = read_csv(args.prediction)
    if len(truth) < len(pred):
        raise CliError("truth series is shorter than the prediction")
    offset = int(round((pred.start_time - truth.start_time) / truth.dt)) if args.align else 0
    if offset < 0 or offset + len(pred) > len(truth):
        raise CliError("prediction does not lie within the truth series")
    truth = truth.slice(offset, offset + len(pred))
    scores = {"nrmse": nrmse(truth, pred)}
    try:
        scores["pearson"] = pearson(truth, pred)
    except ValueError:
        scores["pearson"] = None
    print(json.dumps(scores))
    return 0


def cmd_sweep(args, cfg: ExperimentConfig) -> int:
    if cfg.output_dir is None:
        cfg = replace(cfg, output_dir="results")
    _, summary = run_experiment(cfg)
    for row in summary:
        print(f"sigma_v2={row['sigma_v2']:<8g} {row['trainer']:<6} nrmse median={row['nrmse_median']:.4f} "
              f"pearson median={row['pearson_median']:.4f} failures={row['failures']}")
    print(f"results in {cfg.output_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--system", choices=SYSTEMS)
    common.add_argument("--profile", choices=("desk", "full"))
    common.add_argument("--noise", type=_floats, help="comma-separated measurement-noise variances")
    common.add_argument("--trials", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--out")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="kaltesn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="write a (noisy) benchmark series to CSV")
    p.add_argument("--length", type=int)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", parents=[common], help="train one readout on a CSV series")
    p.add_argument("--data", required=True)
    p.add_argument("--trainer", choices=TRAINERS + ("both",), default="kalt")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", parents=[common], help="closed-loop prediction from a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--warmup", help="CSV driving the reservoir before prediction (default: the model's)")
    p.add_argument("--horizon", type=int, required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", parents=[common], help="NRMSE and Pearson of a prediction CSV")
    p.add_argument("--truth", required=True)
    p.add_argument("--prediction", required=True)
    p.add_argument("--no-align", dest="align", action="store_false",
                   help="compare from the first truth row instead of matching timestamps")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", parents=[common], help="paired Monte-Carlo noise sweep")
    p.add_argument("--trainer", choices=TRAINERS + ("both",), default="both")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args) if args.command != "evaluate" else None
        return args.func(args, cfg)
    except (CliError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
