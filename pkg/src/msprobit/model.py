"""Domain types: datasets on multiple ordinal scales, parameters, priors,
and sampler configuration.

All types are immutable value objects once constructed. Labels are 1-based
everywhere they cross an API boundary. Threshold vectors use the open
boundary convention: class 1 covers (-inf, g_1], class C covers
(g_{C-1}, +inf), and only the C-1 interior thresholds are parameters.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .distributions import std_normal_quantile
from .errors import ConfigError, DatasetValidationError, InitializationError


@dataclass(frozen=True)
class ScaleSpec:
    """One ordinal scale: its integer id and class count (>= 2)."""

    scale_id: int
    num_classes: int

    def __post_init__(self):
        if int(self.num_classes) < 2:
            raise ValueError(
                f"scale {self.scale_id}: num_classes must be >= 2, "
                f"got {self.num_classes}"
            )
        object.__setattr__(self, "scale_id", int(self.scale_id))
        object.__setattr__(self, "num_classes", int(self.num_classes))

    @property
    def num_thresholds(self) -> int:
        return self.num_classes - 1


@dataclass(frozen=True)
class Dataset:
    """Observations from one or more scales sharing a feature space.

    features: (n, p) float matrix.
    labels:   (n,) integer labels, 1-based within each observation's scale.
    scale_ids:(n,) integer scale membership of each observation.
    scales:   the declared ScaleSpec list (order fixes reporting order).
    """

    features: np.ndarray
    labels: np.ndarray
    scale_ids: np.ndarray
    scales: tuple[ScaleSpec, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "features", np.ascontiguousarray(self.features, dtype=float)
        )
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=int))
        object.__setattr__(self, "scale_ids", np.asarray(self.scale_ids, dtype=int))
        object.__setattr__(self, "scales", tuple(self.scales))

    @property
    def num_obs(self) -> int:
        return self.features.shape[0]

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    def scale(self, scale_id: int) -> ScaleSpec:
        for s in self.scales:
            if s.scale_id == scale_id:
                return s
        raise KeyError(f"no scale with id {scale_id}")

    def rows_for_scale(self, scale_id: int) -> np.ndarray:
        return np.flatnonzero(self.scale_ids == scale_id)

    def restrict_to_scale(self, scale_id: int) -> "Dataset":
        """Single-scale view used to fit per-scale baseline models."""
        rows = self.rows_for_scale(scale_id)
        return Dataset(
            features=self.features[rows],
            labels=self.labels[rows],
            scale_ids=self.scale_ids[rows],
            scales=(self.scale(scale_id),),
        )

    def subset(self, rows: np.ndarray) -> "Dataset":
        rows = np.asarray(rows, dtype=int)
        return Dataset(
            features=self.features[rows],
            labels=self.labels[rows],
            scale_ids=self.scale_ids[rows],
            scales=self.scales,
        )


@dataclass(frozen=True)
class ParamDraw:
    """One sampler state: shared coefficients plus per-scale thresholds.

    gammas[k] belongs to scales[k] of the dataset that produced the draw and
    has length num_classes - 1. Strict threshold ordering is enforced at
    construction; nothing in the package can emit an unordered draw.
    """

    beta: np.ndarray
    gammas: tuple[np.ndarray, ...]

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        gammas = tuple(np.asarray(g, dtype=float) for g in self.gammas)
        for k, g in enumerate(gammas):
            if g.size > 1 and not np.all(np.diff(g) > 0):
                raise ValueError(
                    f"thresholds for scale index {k} not strictly increasing: {g}"
                )
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "gammas", gammas)


@dataclass(frozen=True)
class LatentState:
    """Current augmented latent values, one per observation."""

    y_star: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "y_star", np.asarray(self.y_star, dtype=float))


@dataclass(frozen=True)
class Prior:
    """Gaussian prior on the shared coefficients.

    mean may be a scalar (broadcast over all p coefficients) or a p-vector.
    precision may be a positive scalar, meaning that multiple of the
    identity, or a full SPD matrix.
    """

    mean: float | np.ndarray = 0.0
    precision: float | np.ndarray = 1.0

    def mean_vector(self, p: int) -> np.ndarray:
        m = np.asarray(self.mean, dtype=float)
        if m.ndim == 0:
            return np.full(p, float(m))
        if m.shape != (p,):
            raise ConfigError(f"prior mean has shape {m.shape}, expected ({p},)")
        return m

    def precision_matrix(self, p: int) -> np.ndarray:
        prec = np.asarray(self.precision, dtype=float)
        if prec.ndim == 0:
            if not prec > 0:
                raise ConfigError(f"scalar prior precision must be > 0, got {prec}")
            return float(prec) * np.eye(p)
        if prec.shape != (p, p):
            raise ConfigError(
                f"prior precision has shape {prec.shape}, expected ({p}, {p})"
            )
        return prec


@dataclass(frozen=True)
class ChainConfig:
    """Everything run_chain needs besides the data.

    proposal_sd is the standard deviation of the threshold random-walk
    proposal, either one value for all scales or a mapping scale_id -> sd.
    Total sweeps = burn_in + thinning * stored_draws.
    """

    prior: Prior = field(default_factory=Prior)
    proposal_sd: float | dict[int, float] = 0.5
    burn_in: int = 50_000
    thinning: int = 100
    stored_draws: int = 500
    seed: int = 0
    init_beta: np.ndarray | None = None
    init_gammas: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        if int(self.burn_in) < 0:
            raise ConfigError(f"burn_in must be >= 0, got {self.burn_in}")
        if int(self.thinning) < 1:
            raise ConfigError(f"thinning must be >= 1, got {self.thinning}")
        if int(self.stored_draws) < 1:
            raise ConfigError(f"stored_draws must be >= 1, got {self.stored_draws}")
        if self.init_gammas is not None:
            for g in self.init_gammas:
                arr = np.asarray(g, dtype=float)
                if arr.size > 1 and not np.all(np.diff(arr) > 0):
                    raise ConfigError(
                        f"init_gammas not strictly increasing: {arr}"
                    )

    @property
    def total_sweeps(self) -> int:
        return int(self.burn_in) + int(self.thinning) * int(self.stored_draws)

    def proposal_sd_for(self, scale_id: int) -> float:
        if isinstance(self.proposal_sd, dict):
            try:
                sd = float(self.proposal_sd[scale_id])
            except KeyError:
                raise ConfigError(
                    f"no proposal_sd entry for scale {scale_id}"
                ) from None
        else:
            sd = float(self.proposal_sd)
        if not sd > 0:
            raise ConfigError(f"proposal_sd for scale {scale_id} must be > 0")
        return sd


def validate_dataset(raw: Dataset, allow_zero_columns: bool = False) -> Dataset:
    """Check every Dataset invariant, reporting all violations at once.

    Returns the dataset unchanged when clean. A feature column that is
    exactly zero in every row is rejected unless allow_zero_columns is set,
    in which case it is only warned about.
    """
    violations: list[str] = []
    X, y, sid = raw.features, raw.labels, raw.scale_ids

    if X.ndim != 2:
        violations.append(f"features must be 2-d, got shape {X.shape}")
    n = X.shape[0] if X.ndim == 2 else 0
    if y.shape != (n,):
        violations.append(f"labels shape {y.shape} does not match {n} feature rows")
    if sid.shape != (n,):
        violations.append(
            f"scale_ids shape {sid.shape} does not match {n} feature rows"
        )
    if violations:
        raise DatasetValidationError(violations)

    if not np.all(np.isfinite(X)):
        rows = np.flatnonzero(~np.isfinite(X).all(axis=1))
        violations.append(f"non-finite feature values in rows {rows.tolist()}")

    ids = {s.scale_id for s in raw.scales}
    if len(ids) != len(raw.scales):
        violations.append("duplicate scale_id in scales declaration")
    unknown = np.flatnonzero(~np.isin(sid, list(ids)))
    if unknown.size:
        violations.append(
            f"rows {unknown.tolist()} reference undeclared scale ids "
            f"{sorted(set(sid[unknown].tolist()))}"
        )

    for s in raw.scales:
        rows = np.flatnonzero(sid == s.scale_id)
        labels = y[rows]
        bad = rows[(labels < 1) | (labels > s.num_classes)]
        if bad.size:
            violations.append(
                f"rows {bad.tolist()}: label outside 1..{s.num_classes} "
                f"on scale {s.scale_id}"
            )

    if n:
        zero_cols = np.flatnonzero(~X.any(axis=0))
        if zero_cols.size:
            msg = f"feature columns {zero_cols.tolist()} are constant zero"
            if allow_zero_columns:
                warnings.warn(msg)
            else:
                violations.append(msg + " (pass allow_zero_columns to override)")

    if violations:
        raise DatasetValidationError(violations)
    return raw


def evenly_spaced_thresholds(num_classes: int) -> np.ndarray:
    """Fallback starting thresholds: num_classes - 1 points even on [-1, 1]."""
    k = num_classes - 1
    if k == 1:
        return np.zeros(1)
    return np.linspace(-1.0, 1.0, k)


def default_init(dataset: Dataset, prior: Prior):
    """Starting state: beta at the prior mean, thresholds at the
    standard-normal quantiles of each scale's empirical cumulative class
    frequencies.

    Raises when any scale has an empty class, since that puts a quantile at
    infinity; the error suggests evenly spaced thresholds on [-1, 1].
    """
    beta = prior.mean_vector(dataset.num_features)
    gammas = []
    for s in dataset.scales:
        rows = dataset.rows_for_scale(s.scale_id)
        counts = np.bincount(dataset.labels[rows], minlength=s.num_classes + 1)[1:]
        empty = np.flatnonzero(counts == 0) + 1
        if rows.size == 0 or empty.size:
            which = empty.tolist() if rows.size else "all"
            raise InitializationError(
                f"scale {s.scale_id} has empty classes {which}; supply "
                "init_gammas explicitly, e.g. evenly spaced thresholds on "
                "[-1, 1] (evenly_spaced_thresholds)"
            )
        cum = np.cumsum(counts[:-1]) / rows.size
        g = np.asarray(std_normal_quantile(cum), dtype=float).reshape(-1)
        # Defensive: spread any tied quantiles so the draw stays valid.
        for c in range(1, g.size):
            if g[c] <= g[c - 1]:
                g[c] = g[c - 1] + 1e-3
        gammas.append(g)
    return beta, tuple(gammas)
