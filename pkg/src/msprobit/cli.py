"""Command-line interface.

Subcommands: simulate | fit | predict | evaluate | experiment | summarize.
Every command with a --seed flag is end-to-end deterministic: the same
inputs and seed produce byte-identical output files. Timing goes to
stderr so it never perturbs the artifacts.

Exit codes: 0 success, 1 validation/config error, 2 sampler or numerical
error, 3 filesystem error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np
from scipy.special import ndtr

from . import io
from .errors import ConfigError, MsprobitError
from .metrics import evaluate_splits, fit_standardizer
from .model import ChainConfig, Dataset
from .presets import SIM_PRESETS, chain_preset, experiment_preset, preset_names
from .sampler import DrawSet, mcse_mean, run_chains
from .simulate import ExperimentConfig, run_experiment, simulate_dataset


class _Parser(argparse.ArgumentParser):
    # usage problems are validation errors (exit 1), not argparse's default 2
    def error(self, message):
        raise ConfigError(message)


def _default_scales_path(dataset_path: str) -> str:
    root, _ = os.path.splitext(dataset_path)
    return root + ".scales.json"


def _load_dataset(args) -> Dataset:
    scales_path = args.scales or _default_scales_path(args.dataset)
    return io.read_dataset(args.dataset, scales_path)


def _json_value(x):
    x = float(x)
    return x if np.isfinite(x) else None


def _resolve_chain_config(args) -> tuple[ChainConfig, int]:
    """Merge preset/config-file/flags into one chain configuration.

    Precedence: explicit flags beat the file or preset, which beats
    defaults. --preset and --config are mutually exclusive.
    """
    if getattr(args, "preset", None) and getattr(args, "config", None):
        raise ConfigError("pass either --preset or --config, not both")
    if getattr(args, "preset", None):
        config, num_chains = chain_preset(args.preset), 1
    elif getattr(args, "config", None):
        config, num_chains = io.read_chain_config(args.config)
    else:
        config, num_chains = ChainConfig(), 1
    if args.seed is not None:
        config = _with(config, seed=int(args.seed))
    if getattr(args, "chains", None) is not None:
        num_chains = int(args.chains)
        if num_chains < 1:
            raise ConfigError(f"--chains must be >= 1, got {num_chains}")
    return config, num_chains


def _with(config: ChainConfig, **kw) -> ChainConfig:
    from dataclasses import replace

    return replace(config, **kw)


def _out_path(args, name: str) -> str:
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


# -- simulate --------------------------------------------------------------


def cmd_simulate(args):
    if args.preset and args.config:
        raise ConfigError("pass either --preset or --config, not both")
    if args.preset:
        if args.preset not in SIM_PRESETS:
            raise ConfigError(
                f"unknown preset {args.preset!r}; choose from "
                f"{', '.join(preset_names())}"
            )
        doc = dict(SIM_PRESETS[args.preset])
    elif args.config:
        with open(args.config) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{args.config}: invalid JSON: {exc}") from None
    else:
        raise ConfigError("simulate needs --preset or --config")

    allowed = {
        "num_scales",
        "obs_per_scale",
        "num_features",
        "num_thresholds",
        "min_per_class",
        "seed",
    }
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ConfigError(f"unknown simulate config key(s): {', '.join(unknown)}")
    seed = args.seed if args.seed is not None else int(doc.get("seed", 0))
    try:
        sim = simulate_dataset(
            int(doc["num_scales"]),
            int(doc["obs_per_scale"]),
            int(doc["num_features"]),
            tuple(int(t) for t in doc["num_thresholds"]),
            int(doc.get("min_per_class", 1)),
            np.random.default_rng(np.random.SeedSequence(seed)),
        )
    except KeyError as exc:
        raise ConfigError(f"simulate config is missing key {exc}") from None

    dataset = sim.pooled_dataset()
    io.write_dataset(
        _out_path(args, "dataset.csv"), _out_path(args, "dataset.scales.json"), dataset
    )
    io.write_truth(
        _out_path(args, "truth.json"),
        sim.beta_true,
        {s.scale_id: g for s, g in zip(sim.scales, sim.gammas_true)},
        y_star=np.concatenate(sim.y_star_true),
    )
    print(f"wrote {dataset.num_obs} observations on {len(sim.scales)} scales to {args.out}")


# -- fit -------------------------------------------------------------------


def _summary_doc(draws: DrawSet, acceptance: bool) -> dict:
    beta = draws.beta_draws
    doc = {
        "num_draws": len(draws),
        "num_chains": int(np.unique(draws.chain_ids).size),
        "beta": {
            "mean": [float(v) for v in beta.mean(axis=0)],
            "sd": [float(v) for v in beta.std(axis=0)],
            "mcse": [_json_value(mcse_mean(beta[:, j])) for j in range(beta.shape[1])],
        },
        "gamma": {
            str(s.scale_id): {
                "mean": [float(v) for v in draws.gamma_draws_for(s.scale_id).mean(axis=0)],
                "sd": [float(v) for v in draws.gamma_draws_for(s.scale_id).std(axis=0)],
            }
            for s in draws.scales
        },
        # 1-based coefficient indices from most to least certain
        "beta_by_sd": [
            int(j) + 1 for j in np.argsort(beta.std(axis=0), kind="stable")
        ],
    }
    if acceptance:
        doc["acceptance_rates"] = {
            str(sid): _json_value(rate) for sid, rate in draws.accept_rate.items()
        }
    return doc


def cmd_fit(args):
    dataset = _load_dataset(args)
    config, num_chains = _resolve_chain_config(args)
    if args.standardize:
        mean, sd = fit_standardizer(dataset.features)
        from dataclasses import replace as _replace

        dataset = _replace(dataset, features=(dataset.features - mean) / sd)
        io.write_standardizer(_out_path(args, "standardization.json"), mean, sd)

    t0 = time.monotonic()
    draws = run_chains(dataset, config, num_chains)
    elapsed = time.monotonic() - t0
    print(f"sampling took {elapsed:.1f}s", file=sys.stderr)

    io.write_draws(_out_path(args, "draws.csv"), draws)
    io.atomic_write_text(
        _out_path(args, "fit_summary.json"),
        json.dumps(_summary_doc(draws, acceptance=True), indent=2, sort_keys=True)
        + "\n",
    )
    rates = ", ".join(
        f"scale {sid}: {rate:.3f}" for sid, rate in sorted(draws.accept_rate.items())
    )
    print(f"stored {len(draws)} draws; acceptance {rates}")


# -- predict ---------------------------------------------------------------


def cmd_predict(args):
    draws = io.read_draws(args.draws)
    dataset = _load_dataset(args)
    target = int(args.scale)
    if all(s.scale_id != target for s in draws.scales):
        raise ConfigError(
            f"draws cover scales {[s.scale_id for s in draws.scales]}, "
            f"not target scale {target}"
        )
    scale = next(s for s in draws.scales if s.scale_id == target)

    X = dataset.features
    if args.transform:
        mean, sd = io.read_standardizer(args.transform)
        if mean.size != X.shape[1]:
            raise ConfigError(
                f"standardizer has {mean.size} columns, dataset has {X.shape[1]}"
            )
        X = (X - mean) / sd

    scores = X @ draws.beta_draws.T  # (n, M)
    gam = draws.gamma_draws_for(target)  # (M, C-1)
    n, m = scores.shape
    cdf = np.empty((n, scale.num_classes + 1, m))
    cdf[:, 0, :] = 0.0
    cdf[:, -1, :] = 1.0
    for c in range(scale.num_thresholds):
        cdf[:, c + 1, :] = ndtr(gam[:, c][None, :] - scores)
    probs = np.diff(cdf, axis=1).mean(axis=2)  # posterior-averaged (n, C)
    map_class = np.argmax(probs, axis=1) + 1
    rank = scores.mean(axis=1)

    header = ["row", "scale_id", "label", "rank_score", "map_class"] + [
        f"prob_{c}" for c in range(1, scale.num_classes + 1)
    ]
    rows = (
        [
            str(i + 1),
            str(int(dataset.scale_ids[i])),
            str(int(dataset.labels[i])),
            io.format_float(rank[i]),
            str(int(map_class[i])),
        ]
        + [io.format_float(v) for v in probs[i]]
        for i in range(n)
    )
    io._write_rows(_out_path(args, "predictions.csv"), header, rows)
    print(f"wrote {n} predictions on scale {target}")


# -- evaluate --------------------------------------------------------------


def cmd_evaluate(args):
    dataset = _load_dataset(args)
    fraction = args.fraction
    splits = args.splits
    if args.preset and args.config:
        raise ConfigError("pass either --preset or --config, not both")
    if args.config:
        with open(args.config) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{args.config}: invalid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{args.config}: config must be a JSON object")
        doc_fraction = doc.pop("split_fraction", None)
        doc_splits = doc.pop("num_splits", None)
        fraction = fraction if fraction is not None else doc_fraction
        splits = splits if splits is not None else doc_splits
        config, num_chains = io.chain_config_from_dict(doc)
        if args.seed is not None:
            config = _with(config, seed=int(args.seed))
        if args.chains is not None:
            num_chains = int(args.chains)
    else:
        config, num_chains = _resolve_chain_config(args)
    if fraction is None:
        fraction = 2.0 / 3.0
    if splits is None:
        splits = 10

    report = evaluate_splits(
        dataset,
        float(fraction),
        int(splits),
        config,
        np.random.default_rng(np.random.SeedSequence(int(config.seed))),
        num_chains=num_chains,
        standardize=bool(args.standardize),
    )
    io.write_table(_out_path(args, "eval_long.csv"), io.LONG_HEADER, report.long_rows)
    io.write_table(_out_path(args, "eval_diff.csv"), io.DIFF_HEADER, report.diff_rows)
    print(
        f"evaluated {report.num_splits} splits: "
        f"{len(report.long_rows)} metric rows, {len(report.diff_rows)} diff rows"
    )


# -- experiment ------------------------------------------------------------


def _experiment_config_from_file(path: str, seed_override) -> ExperimentConfig:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    allowed = {
        "replications",
        "num_scales",
        "obs_per_scale",
        "num_features",
        "num_thresholds",
        "min_per_class",
        "num_chains",
        "seed",
        "chain",
    }
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ConfigError(f"unknown experiment config key(s): {', '.join(unknown)}")
    chain_doc = doc.get("chain", {})
    if not isinstance(chain_doc, dict):
        raise ConfigError("chain must be an object")
    chain_config, chain_nc = io.chain_config_from_dict(chain_doc)
    seed = seed_override if seed_override is not None else int(doc.get("seed", 0))
    try:
        return ExperimentConfig(
            replications=int(doc["replications"]),
            num_scales=int(doc["num_scales"]),
            obs_per_scale=int(doc["obs_per_scale"]),
            num_features=int(doc["num_features"]),
            num_thresholds=tuple(int(t) for t in doc["num_thresholds"]),
            min_per_class=int(doc.get("min_per_class", 1)),
            chain_config=chain_config,
            num_chains=int(doc.get("num_chains", chain_nc)),
            seed=int(seed),
        )
    except KeyError as exc:
        raise ConfigError(f"experiment config is missing key {exc}") from None


def cmd_experiment(args):
    if args.preset and args.config:
        raise ConfigError("pass either --preset or --config, not both")
    if args.preset:
        config = experiment_preset(
            args.preset, seed=args.seed if args.seed is not None else 0
        )
    elif args.config:
        config = _experiment_config_from_file(args.config, args.seed)
    else:
        raise ConfigError("experiment needs --preset or --config")

    def progress(r, total):
        print(f"replication {r}/{total} done", file=sys.stderr)

    t0 = time.monotonic()
    report = run_experiment(config, progress=progress)
    print(f"experiment took {time.monotonic() - t0:.1f}s", file=sys.stderr)

    io.write_table(
        _out_path(args, "experiment_summary.csv"), io.SUMMARY_HEADER, report.summary_rows
    )
    io.write_table(
        _out_path(args, "experiment_ratios.csv"), io.RATIO_HEADER, report.ratio_rows
    )
    io.write_table(
        _out_path(args, "experiment_draws.csv"), io.DRAW_HEADER, report.draw_rows
    )
    failures = [
        {"replication": f.replication, "stage": f.stage, "message": f.message}
        for f in report.failures
    ]
    io.atomic_write_text(
        _out_path(args, "experiment_failures.json"),
        json.dumps(failures, indent=2, sort_keys=True) + "\n",
    )
    print(
        f"{report.completed_replications}/{config.replications} replications "
        f"completed, {len(report.failures)} failed"
    )


# -- summarize -------------------------------------------------------------


def cmd_summarize(args):
    draws = io.read_draws(args.draws)
    doc = _summary_doc(draws, acceptance=False)
    lines = [f"{'parameter':<14} {'mean':>14} {'sd':>14}"]
    beta = doc["beta"]
    for j, (m, s) in enumerate(zip(beta["mean"], beta["sd"]), start=1):
        lines.append(f"{'beta_' + str(j):<14} {m:>14.6g} {s:>14.6g}")
    for sid in sorted(doc["gamma"], key=int):
        g = doc["gamma"][sid]
        for j, (m, s) in enumerate(zip(g["mean"], g["sd"]), start=1):
            name = f"gamma_{sid}_{j}"
            lines.append(f"{name:<14} {m:>14.6g} {s:>14.6g}")
    lines.append(
        "beta by increasing posterior sd: "
        + ", ".join(str(j) for j in doc["beta_by_sd"])
    )
    print("\n".join(lines))
    if args.out is not None:
        io.atomic_write_text(
            _out_path(args, "summary.json"),
            json.dumps(doc, indent=2, sort_keys=True) + "\n",
        )


# -- parser ----------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="msprobit", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, *, dataset=False, chain=False, preset=True):
        if dataset:
            p.add_argument("dataset", help="dataset CSV path")
            p.add_argument(
                "--scales",
                default=None,
                help="scale sidecar JSON (default: <dataset>.scales.json)",
            )
        if preset:
            p.add_argument("--preset", default=None, help="named configuration")
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="random seed override")
        if chain:
            p.add_argument("--chains", type=int, default=None, help="chain count")
        p.add_argument("--out", default=".", help="output directory")
        return p

    p = common(sub.add_parser("simulate", help="generate a synthetic dataset"))
    p.set_defaults(func=cmd_simulate)

    p = common(
        sub.add_parser("fit", help="run the Gibbs sampler"), dataset=True, chain=True
    )
    p.add_argument(
        "--standardize",
        action="store_true",
        help="standardize features before fitting; writes standardization.json",
    )
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="posterior class probabilities on a scale")
    p.add_argument("draws", help="draws CSV from fit")
    p.add_argument("dataset", help="dataset CSV path")
    p.add_argument("--scales", default=None, help="scale sidecar JSON")
    p.add_argument("--scale", type=int, required=True, help="target scale id")
    p.add_argument(
        "--transform",
        default=None,
        help="standardization.json from a fit run to apply to features",
    )
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_predict)

    p = common(
        sub.add_parser("evaluate", help="repeated train/test split comparison"),
        dataset=True,
        chain=True,
    )
    p.add_argument("--fraction", type=float, default=None, help="training fraction")
    p.add_argument("--splits", type=int, default=None, help="number of splits")
    p.add_argument(
        "--standardize",
        action="store_true",
        help="standardize features per split from training rows only",
    )
    p.set_defaults(func=cmd_evaluate)

    p = common(sub.add_parser("experiment", help="replication study on synthetic data"))
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("summarize", help="posterior summary of a draws file")
    p.add_argument("draws", help="draws CSV from fit")
    p.add_argument("--out", default=None, help="also write summary.json here")
    p.set_defaults(func=cmd_summarize)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.func(args)
        return 0
    except MsprobitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return getattr(exc, "exit_code", 1)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
