"""File formats: dataset CSV + scale sidecar, draw CSV, report CSVs, and
JSON configs. All floating-point output uses 17 significant digits so a
written value round-trips exactly; writes go through a temp file and a
rename so readers never see a partial file.
"""

from __future__ import annotations

import csv
import json
import os
from typing import Iterable

import numpy as np

from .errors import ConfigError, DatasetValidationError
from .model import ChainConfig, Dataset, Prior, ScaleSpec, validate_dataset
from .sampler import DrawSet


def format_float(x) -> str:
    x = float(x)
    if np.isnan(x):
        return ""
    return "%.17g" % x


def parse_float(s: str) -> float:
    return float("nan") if s == "" else float(s)


def atomic_write_text(path: str, text: str):
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_rows(path: str, header: list[str], rows: Iterable[Iterable]):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(row))
    atomic_write_text(path, "\n".join(lines) + "\n")


# -- dataset ---------------------------------------------------------------


def write_dataset(path: str, sidecar_path: str, dataset: Dataset):
    """Dataset CSV (scale_id, label, f1..fp) plus a JSON sidecar mapping
    scale_id to its class count."""
    p = dataset.num_features
    header = ["scale_id", "label"] + [f"f{j}" for j in range(1, p + 1)]
    rows = (
        [str(int(dataset.scale_ids[i])), str(int(dataset.labels[i]))]
        + [format_float(v) for v in dataset.features[i]]
        for i in range(dataset.num_obs)
    )
    _write_rows(path, header, rows)
    sidecar = {
        "scales": {str(s.scale_id): s.num_classes for s in dataset.scales}
    }
    atomic_write_text(sidecar_path, json.dumps(sidecar, indent=2, sort_keys=True) + "\n")


def read_dataset(path: str, sidecar_path: str) -> Dataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["scale_id", "label"]:
            raise DatasetValidationError(
                [f"{path}: header must start with scale_id,label"]
            )
        feat_names = header[2:]
        scale_ids, labels, feats = [], [], []
        for ln, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DatasetValidationError(
                    [f"{path} line {ln}: expected {len(header)} fields, got {len(row)}"]
                )
            try:
                scale_ids.append(int(row[0]))
                labels.append(int(row[1]))
                feats.append([parse_float(v) for v in row[2:]])
            except ValueError as exc:
                raise DatasetValidationError(
                    [f"{path} line {ln}: {exc}"]
                ) from None

    with open(sidecar_path) as fh:
        sidecar = json.load(fh)
    try:
        scales = tuple(
            ScaleSpec(scale_id=int(sid), num_classes=int(c))
            for sid, c in sorted(sidecar["scales"].items(), key=lambda kv: int(kv[0]))
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetValidationError(
            [f"bad scale sidecar {sidecar_path}: {exc}"]
        ) from None

    features = np.asarray(feats, dtype=float).reshape(len(feats), len(feat_names))
    return validate_dataset(
        Dataset(
            features=features,
            labels=np.asarray(labels, dtype=int),
            scale_ids=np.asarray(scale_ids, dtype=int),
            scales=scales,
        )
    )


# -- draws -----------------------------------------------------------------


def gamma_column_names(scales: tuple[ScaleSpec, ...]) -> list[str]:
    names = []
    for s in scales:
        names.extend(f"gamma_{s.scale_id}_{j}" for j in range(1, s.num_thresholds + 1))
    return names


def write_draws(path: str, draws: DrawSet):
    """One row per stored draw: chain_id, iteration, beta_*, then the
    threshold columns scale by scale."""
    p = draws.beta_draws.shape[1]
    header = (
        ["chain_id", "iteration"]
        + [f"beta_{j}" for j in range(1, p + 1)]
        + gamma_column_names(draws.scales)
    )
    gamma_mat = (
        np.concatenate(draws.gamma_draws, axis=1)
        if draws.gamma_draws
        else np.empty((len(draws), 0))
    )

    def rows():
        for m in range(len(draws)):
            yield (
                [str(int(draws.chain_ids[m])), str(int(draws.iteration_ids[m]))]
                + [format_float(v) for v in draws.beta_draws[m]]
                + [format_float(v) for v in gamma_mat[m]]
            )

    _write_rows(path, header, rows())


def read_draws(path: str) -> DrawSet:
    """Rebuild a draw set from CSV; acceptance counters are not stored in
    the file and come back zero."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["chain_id", "iteration"]:
            raise ConfigError(f"{path}: header must start with chain_id,iteration")
        beta_cols = [h for h in header if h.startswith("beta_")]
        gamma_groups: dict[int, int] = {}
        for h in header:
            if h.startswith("gamma_"):
                _, sid, j = h.split("_")
                gamma_groups[int(sid)] = max(gamma_groups.get(int(sid), 0), int(j))
        data = [row for row in reader]

    p = len(beta_cols)
    scales = tuple(
        ScaleSpec(scale_id=sid, num_classes=k + 1)
        for sid, k in sorted(gamma_groups.items())
    )
    m = len(data)
    chain_ids = np.array([int(r[0]) for r in data], dtype=int)
    iteration_ids = np.array([int(r[1]) for r in data], dtype=int)
    beta = np.array(
        [[parse_float(v) for v in r[2 : 2 + p]] for r in data], dtype=float
    ).reshape(m, p)
    gammas = []
    off = 2 + p
    for s in scales:
        k = s.num_thresholds
        gammas.append(
            np.array(
                [[parse_float(v) for v in r[off : off + k]] for r in data],
                dtype=float,
            ).reshape(m, k)
        )
        off += k
    return DrawSet(
        beta_draws=beta,
        gamma_draws=tuple(gammas),
        scales=scales,
        chain_ids=chain_ids,
        iteration_ids=iteration_ids,
        accept_counts={s.scale_id: 0 for s in scales},
        proposal_counts={s.scale_id: 0 for s in scales},
    )


# -- generic report tables -------------------------------------------------

LONG_HEADER = ["split_id", "model", "scale_id", "metric", "draw_id", "value"]
DIFF_HEADER = ["split_id", "scale_id", "metric", "mean_multi", "mean_single", "diff"]
SUMMARY_HEADER = ["replication", "model", "scale_id", "metric", "value"]
RATIO_HEADER = ["replication", "scale_id", "metric", "single", "multi", "ratio"]
DRAW_HEADER = ["replication", "model", "scale_id", "metric", "draw_id", "value"]


def _format_cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format_float(v)


def write_table(path: str, header: list[str], rows: Iterable[tuple]):
    _write_rows(path, header, ([_format_cell(v) for v in row] for row in rows))


def read_table(path: str) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]


# -- configs ---------------------------------------------------------------


def chain_config_from_dict(doc: dict) -> tuple[ChainConfig, int]:
    """Build a chain configuration from a JSON document; returns the config
    and the chain count (default 1). Unknown keys are rejected."""
    allowed = {
        "prior",
        "proposal_sd",
        "burn_in",
        "thinning",
        "stored_draws",
        "seed",
        "num_chains",
    }
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    prior_doc = doc.get("prior", {})
    if not isinstance(prior_doc, dict):
        raise ConfigError("prior must be an object")
    bad = sorted(set(prior_doc) - {"mean", "precision"})
    if bad:
        raise ConfigError(f"unknown prior key(s): {', '.join(bad)}")
    prior = Prior(
        mean=prior_doc.get("mean", 0.0),
        precision=prior_doc.get("precision", 1.0),
    )
    proposal_sd = doc.get("proposal_sd", 0.5)
    if isinstance(proposal_sd, dict):
        proposal_sd = {int(k): float(v) for k, v in proposal_sd.items()}
    else:
        proposal_sd = float(proposal_sd)
    try:
        config = ChainConfig(
            prior=prior,
            proposal_sd=proposal_sd,
            burn_in=int(doc.get("burn_in", 50_000)),
            thinning=int(doc.get("thinning", 100)),
            stored_draws=int(doc.get("stored_draws", 500)),
            seed=int(doc.get("seed", 0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad chain config: {exc}") from None
    num_chains = int(doc.get("num_chains", 1))
    if num_chains < 1:
        raise ConfigError(f"num_chains must be >= 1, got {num_chains}")
    return config, num_chains


def read_chain_config(path: str) -> tuple[ChainConfig, int]:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return chain_config_from_dict(doc)


def write_standardizer(path: str, mean: np.ndarray, scale: np.ndarray):
    doc = {
        "mean": [float(v) for v in np.asarray(mean).ravel()],
        "scale": [float(v) for v in np.asarray(scale).ravel()],
    }
    atomic_write_text(path, json.dumps(doc, indent=2) + "\n")


def read_standardizer(path: str) -> tuple[np.ndarray, np.ndarray]:
    with open(path) as fh:
        doc = json.load(fh)
    try:
        mean = np.asarray([float(v) for v in doc["mean"]], dtype=float)
        scale = np.asarray([float(v) for v in doc["scale"]], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: bad standardizer file: {exc}") from None
    if mean.shape != scale.shape or np.any(scale <= 0):
        raise ConfigError(f"{path}: mean/scale must match and scale must be > 0")
    return mean, scale


def write_truth(path: str, beta: np.ndarray, gammas: dict[int, np.ndarray], y_star=None):
    doc = {
        "beta": [float(v) for v in np.asarray(beta).ravel()],
        "gammas": {
            str(sid): [float(v) for v in np.asarray(g).ravel()]
            for sid, g in gammas.items()
        },
    }
    if y_star is not None:
        doc["y_star"] = [float(v) for v in np.asarray(y_star).ravel()]
    atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_truth(path: str) -> tuple[np.ndarray, dict[int, np.ndarray]]:
    with open(path) as fh:
        doc = json.load(fh)
    beta = np.asarray(doc["beta"], dtype=float)
    gammas = {int(sid): np.asarray(g, dtype=float) for sid, g in doc["gammas"].items()}
    return beta, gammas
