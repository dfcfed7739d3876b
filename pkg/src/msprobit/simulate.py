"""Synthetic data generation and the parameter-recovery experiment driver.

The generator draws one shared coefficient vector, then per-scale feature
matrices, thresholds, and latent responses, resampling thresholds and
responses together until every class on every scale is populated. The
experiment driver fits per-scale single-scale models plus one multi-scale
model per replication and reports RMSE against the simulation truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, MsprobitError, SimulationError
from .model import ChainConfig, Dataset, ScaleSpec
from .sampler import DrawSet, run_chains

_MAX_REDRAWS = 10_000
_THRESHOLD_VARIANCE = 5.0


@dataclass(frozen=True)
class SimTruth:
    """Ground truth and data from one simulation run.

    Per-scale tuples are indexed in scale order; labels[k] is derived from
    y_star_true[k] by interval lookup against gammas_true[k].
    """

    beta_true: np.ndarray
    gammas_true: tuple[np.ndarray, ...]
    y_star_true: tuple[np.ndarray, ...]
    features: tuple[np.ndarray, ...]
    labels: tuple[np.ndarray, ...]
    scales: tuple[ScaleSpec, ...]

    def scale_dataset(self, scale_id: int) -> Dataset:
        for k, s in enumerate(self.scales):
            if s.scale_id == scale_id:
                return Dataset(
                    features=self.features[k],
                    labels=self.labels[k],
                    scale_ids=np.full(self.labels[k].size, scale_id, dtype=int),
                    scales=(s,),
                )
        raise KeyError(f"no scale with id {scale_id}")

    def pooled_dataset(self) -> Dataset:
        return Dataset(
            features=np.concatenate(self.features),
            labels=np.concatenate(self.labels),
            scale_ids=np.concatenate(
                [
                    np.full(y.size, s.scale_id, dtype=int)
                    for y, s in zip(self.labels, self.scales)
                ]
            ),
            scales=self.scales,
        )


def labels_from_latent(y_star: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """1-based interval lookup of latent values against sorted thresholds."""
    return 1 + np.searchsorted(gamma, y_star, side="left")


def simulate_dataset(
    S: int,
    n: int,
    p: int,
    num_thresholds,
    k: int,
    rng: np.random.Generator,
) -> SimTruth:
    """Generate multi-scale ordinal data from the model's own assumptions.

    Shared coefficients ~ N_p(0, I) drawn once. Per scale: an (n, p)
    standard-normal feature matrix, then repeatedly: thresholds as sorted
    iid Normal(0, variance 5) values, latents ~ N(x.beta, 1), labels by
    interval lookup, until every class has at least k observations.
    """
    num_thresholds = tuple(int(t) for t in num_thresholds)
    if len(num_thresholds) != S:
        raise ConfigError(
            f"num_thresholds has {len(num_thresholds)} entries for S={S}"
        )
    if S < 1 or n < 1 or p < 1 or k < 1 or any(t < 1 for t in num_thresholds):
        raise ConfigError(
            f"invalid simulation shape: S={S}, n={n}, p={p}, "
            f"num_thresholds={num_thresholds}, k={k}"
        )
    if any(n < k * (t + 1) for t in num_thresholds):
        raise ConfigError(
            f"n={n} cannot hold {k} instances of every class for "
            f"num_thresholds={num_thresholds}"
        )

    beta = rng.standard_normal(p)
    gammas, y_stars, features, labels, scales = [], [], [], [], []
    for s_index in range(S):
        num_classes = num_thresholds[s_index] + 1
        X = rng.standard_normal((n, p))
        eta = X @ beta
        for attempt in range(_MAX_REDRAWS):
            gamma = np.sort(
                rng.normal(0.0, math.sqrt(_THRESHOLD_VARIANCE), num_thresholds[s_index])
            )
            if gamma.size > 1 and not np.all(np.diff(gamma) > 0):
                continue
            y_star = eta + rng.standard_normal(n)
            y = labels_from_latent(y_star, gamma)
            counts = np.bincount(y, minlength=num_classes + 1)[1:]
            if np.all(counts >= k):
                break
        else:
            raise SimulationError(
                f"scale {s_index + 1}: {_MAX_REDRAWS} consecutive threshold "
                f"draws left some class below {k} instances; increase n or "
                "reduce the number of classes"
            )
        gammas.append(gamma)
        y_stars.append(y_star)
        features.append(X)
        labels.append(y)
        scales.append(ScaleSpec(scale_id=s_index + 1, num_classes=num_classes))

    return SimTruth(
        beta_true=beta,
        gammas_true=tuple(gammas),
        y_star_true=tuple(y_stars),
        features=tuple(features),
        labels=tuple(labels),
        scales=tuple(scales),
    )


def rmse(estimate, truth) -> float:
    """Root mean squared componentwise difference of two equal-length vectors."""
    a = np.asarray(estimate, dtype=float).reshape(-1)
    b = np.asarray(truth, dtype=float).reshape(-1)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def per_draw_rmse(draw_matrix: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """rmse of every row of an (M, d) draw matrix against one truth vector."""
    truth = np.asarray(truth, dtype=float).reshape(1, -1)
    if draw_matrix.shape[1] != truth.shape[1]:
        raise ValueError(
            f"draw matrix width {draw_matrix.shape[1]} vs truth "
            f"length {truth.shape[1]}"
        )
    return np.sqrt(np.mean((draw_matrix - truth) ** 2, axis=1))


@dataclass(frozen=True)
class ExperimentConfig:
    """Descriptor for a replication experiment.

    chain_config.seed is ignored; every fit gets its own seed derived from
    `seed` and the replication index, so replications are independent and
    the whole experiment is reproducible from one number.
    """

    replications: int
    num_scales: int
    obs_per_scale: int
    num_features: int
    num_thresholds: tuple[int, ...]
    min_per_class: int = 1
    chain_config: ChainConfig = field(default_factory=ChainConfig)
    num_chains: int = 1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(
            self, "num_thresholds", tuple(int(t) for t in self.num_thresholds)
        )
        if int(self.replications) < 1:
            raise ConfigError("replications must be >= 1")


@dataclass(frozen=True)
class ReplicationFailure:
    replication: int
    stage: str
    message: str


@dataclass(frozen=True)
class ExperimentReport:
    """Long-format experiment results.

    summary_rows: (replication, model, scale_id, metric, value) over the
      full model x scale grid; gamma_rmse is NaN where a single-scale model
      has no thresholds for that scale.
    ratio_rows: (replication, scale_id, metric, single, multi, multi/single).
    draw_rows: (replication, model, scale_id, metric, draw_id, value) for
      every defined model/scale combination, one row per stored draw.
    """

    config: ExperimentConfig
    summary_rows: list[tuple]
    ratio_rows: list[tuple]
    draw_rows: list[tuple]
    failures: list[ReplicationFailure]

    @property
    def completed_replications(self) -> int:
        failed = {f.replication for f in self.failures}
        return int(self.config.replications) - len(failed)


def _fit_seed(child: np.random.SeedSequence) -> int:
    return int(child.generate_state(1, np.uint64)[0])


def run_experiment(config: ExperimentConfig, progress=None) -> ExperimentReport:
    """Simulate/fit/score `replications` times and collect RMSE comparisons.

    Per replication: one multi-scale fit on the pooled data and one
    single-scale fit per scale on that scale's data, all against the same
    simulation truth. A failed replication is recorded in the failure
    census and skipped; its rows are absent from the report.
    """
    summary_rows: list[tuple] = []
    ratio_rows: list[tuple] = []
    draw_rows: list[tuple] = []
    failures: list[ReplicationFailure] = []
    S = int(config.num_scales)

    for r in range(1, int(config.replications) + 1):
        children = np.random.SeedSequence([int(config.seed), r]).spawn(2 + S)
        stage = "simulate"
        try:
            sim = simulate_dataset(
                S,
                int(config.obs_per_scale),
                int(config.num_features),
                config.num_thresholds,
                int(config.min_per_class),
                np.random.default_rng(children[0]),
            )
            fits: dict[str, DrawSet] = {}
            stage = "fit-multi"
            fits["multi"] = run_chains(
                sim.pooled_dataset(),
                replace(config.chain_config, seed=_fit_seed(children[1])),
                int(config.num_chains),
            )
            for k, s in enumerate(sim.scales):
                stage = f"fit-single-{s.scale_id}"
                fits[f"single-{s.scale_id}"] = run_chains(
                    sim.scale_dataset(s.scale_id),
                    replace(config.chain_config, seed=_fit_seed(children[2 + k])),
                    int(config.num_chains),
                )
            stage = "metrics"
            rep_summary, rep_ratios, rep_draws = _score_replication(r, sim, fits)
        except MsprobitError as exc:
            failures.append(ReplicationFailure(r, stage, str(exc)))
            continue
        summary_rows.extend(rep_summary)
        ratio_rows.extend(rep_ratios)
        draw_rows.extend(rep_draws)
        if progress is not None:
            progress(r, config.replications)

    return ExperimentReport(
        config=config,
        summary_rows=summary_rows,
        ratio_rows=ratio_rows,
        draw_rows=draw_rows,
        failures=failures,
    )


def _score_replication(r: int, sim: SimTruth, fits: dict[str, DrawSet]):
    """RMSE rows for one replication; see ExperimentReport for layouts."""
    summary, ratios, draws = [], [], []
    mean_beta: dict[str, float] = {}
    mean_gamma: dict[tuple[str, int], float] = {}

    for model, drawset in fits.items():
        beta_rmse = per_draw_rmse(drawset.beta_draws, sim.beta_true)
        mean_beta[model] = float(beta_rmse.mean())
        own_scales = (
            sim.scales
            if model == "multi"
            else tuple(s for s in sim.scales if f"single-{s.scale_id}" == model)
        )
        for s in own_scales:
            k = next(i for i, sc in enumerate(sim.scales) if sc is s)
            gamma_rmse = per_draw_rmse(
                drawset.gamma_draws_for(s.scale_id), sim.gammas_true[k]
            )
            mean_gamma[(model, s.scale_id)] = float(gamma_rmse.mean())
            draws.extend(
                (r, model, s.scale_id, "gamma_rmse", d, float(v))
                for d, v in enumerate(gamma_rmse)
            )
            draws.extend(
                (r, model, s.scale_id, "beta_rmse", d, float(v))
                for d, v in enumerate(beta_rmse)
            )

    for model in fits:
        for s in sim.scales:
            summary.append((r, model, s.scale_id, "beta_rmse", mean_beta[model]))
            summary.append(
                (
                    r,
                    model,
                    s.scale_id,
                    "gamma_rmse",
                    mean_gamma.get((model, s.scale_id), float("nan")),
                )
            )

    for s in sim.scales:
        single = f"single-{s.scale_id}"
        for metric, lookup in (
            ("beta_rmse", mean_beta.get(single)),
            ("gamma_rmse", mean_gamma.get((single, s.scale_id))),
        ):
            multi_val = (
                mean_beta["multi"]
                if metric == "beta_rmse"
                else mean_gamma[("multi", s.scale_id)]
            )
            ratios.append(
                (r, s.scale_id, metric, lookup, multi_val, multi_val / lookup)
            )
    return summary, ratios, draws
