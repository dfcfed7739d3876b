"""Three-block Gibbs sampler for multi-scale ordinal probit.

Each sweep updates, in order: the per-scale thresholds (blocked random-walk
Metropolis-Hastings with sequential truncated-normal proposals), the
augmented latents (exact truncated-normal conditionals), and the shared
coefficients (conjugate Gaussian). The threshold move integrates the
latents out, so its acceptance ratio depends only on the observed labels;
the latent block immediately afterwards redraws every latent under the
accepted thresholds.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .distributions import (
    draw_mvn_given_cholesky,
    log_interval_mass,
    sample_mvn_from_precision,
    sample_truncated_normal,
    sample_truncated_normal_many,
)
from .errors import (
    ConfigError,
    LinearAlgebraError,
    MsprobitError,
    SamplerPanicError,
    TuningError,
)
from .model import (
    ChainConfig,
    Dataset,
    LatentState,
    ParamDraw,
    Prior,
    ScaleSpec,
    default_init,
    validate_dataset,
)

_NEG_INF = float("-inf")


@dataclass(frozen=True)
class DrawSet:
    """Stored posterior draws from one or more chains.

    beta_draws has shape (M, p); gamma_draws[k] has shape (M, C_k - 1) and
    belongs to scales[k]. chain_ids and iteration_ids record provenance per
    stored draw. Acceptance bookkeeping keeps raw counts so the reported
    rate is exactly accepted / proposed.
    """

    beta_draws: np.ndarray
    gamma_draws: tuple[np.ndarray, ...]
    scales: tuple[ScaleSpec, ...]
    chain_ids: np.ndarray
    iteration_ids: np.ndarray
    accept_counts: dict[int, int]
    proposal_counts: dict[int, int]

    def __post_init__(self):
        m = self.beta_draws.shape[0]
        if len(self.gamma_draws) != len(self.scales):
            raise ValueError("gamma_draws and scales disagree on scale count")
        for g, s in zip(self.gamma_draws, self.scales):
            if g.shape != (m, s.num_thresholds):
                raise ValueError(
                    f"gamma draws for scale {s.scale_id} have shape {g.shape}, "
                    f"expected ({m}, {s.num_thresholds})"
                )
        if self.chain_ids.shape != (m,) or self.iteration_ids.shape != (m,):
            raise ValueError("provenance arrays must have one entry per draw")

    def __len__(self) -> int:
        return self.beta_draws.shape[0]

    def __getitem__(self, i: int) -> ParamDraw:
        return ParamDraw(
            beta=self.beta_draws[i],
            gammas=tuple(g[i] for g in self.gamma_draws),
        )

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def draws(self) -> list[ParamDraw]:
        """Draws as a list of validated ParamDraw objects."""
        return list(self)

    @property
    def accept_rate(self) -> dict[int, float]:
        # nan when no proposals happened, e.g. draws reloaded from disk
        return {
            sid: (
                self.accept_counts[sid] / self.proposal_counts[sid]
                if self.proposal_counts[sid] > 0
                else float("nan")
            )
            for sid in self.proposal_counts
        }

    def gamma_draws_for(self, scale_id: int) -> np.ndarray:
        for g, s in zip(self.gamma_draws, self.scales):
            if s.scale_id == scale_id:
                return g
        raise KeyError(f"no scale with id {scale_id}")

    @staticmethod
    def concatenate(parts: list["DrawSet"]) -> "DrawSet":
        first = parts[0]
        for part in parts[1:]:
            if part.scales != first.scales:
                raise ValueError("cannot concatenate DrawSets with different scales")
        acc: dict[int, int] = {}
        prop: dict[int, int] = {}
        for part in parts:
            for sid in part.proposal_counts:
                acc[sid] = acc.get(sid, 0) + part.accept_counts[sid]
                prop[sid] = prop.get(sid, 0) + part.proposal_counts[sid]
        return DrawSet(
            beta_draws=np.concatenate([p.beta_draws for p in parts]),
            gamma_draws=tuple(
                np.concatenate([p.gamma_draws[k] for p in parts])
                for k in range(len(first.scales))
            ),
            scales=first.scales,
            chain_ids=np.concatenate([p.chain_ids for p in parts]),
            iteration_ids=np.concatenate([p.iteration_ids for p in parts]),
            accept_counts=acc,
            proposal_counts=prop,
        )


def _edges(gamma: np.ndarray) -> np.ndarray:
    return np.concatenate(([_NEG_INF], gamma, [np.inf]))


def draw_beta(
    latent: LatentState, dataset: Dataset, prior: Prior, rng: np.random.Generator
) -> np.ndarray:
    """Exact conjugate draw of the shared coefficients given the latents.

    Posterior precision is prior precision + X'X and the mean solves
    (prior precision + X'X) m = prior_precision @ mu0 + X'y*; one
    factorization serves both the solve and the noise transform.
    """
    X = dataset.features
    p = dataset.num_features
    xtx = X.T @ X
    precision = prior.precision_matrix(p) + xtx
    b = prior.precision_matrix(p) @ prior.mean_vector(p) + X.T @ latent.y_star
    return sample_mvn_from_precision(b, precision, rng)


def draw_latents(
    params: ParamDraw, dataset: Dataset, rng: np.random.Generator
) -> LatentState:
    """Redraw every augmented latent from its truncated-normal conditional."""
    eta = dataset.features @ params.beta
    lowers, uppers = _latent_bounds(dataset, params.gammas)
    y_star = sample_truncated_normal_many(eta, 1.0, lowers, uppers, rng)
    return LatentState(y_star=y_star)


def _latent_bounds(dataset: Dataset, gammas) -> tuple[np.ndarray, np.ndarray]:
    n = dataset.num_obs
    lowers = np.empty(n)
    uppers = np.empty(n)
    for k, s in enumerate(dataset.scales):
        rows = dataset.rows_for_scale(s.scale_id)
        if rows.size == 0:
            continue
        edges = _edges(gammas[k])
        labels = dataset.labels[rows]
        lowers[rows] = edges[labels - 1]
        uppers[rows] = edges[labels]
    return lowers, uppers


def gamma_log_acceptance_ratio(
    current: np.ndarray,
    proposed: np.ndarray,
    eta: np.ndarray,
    labels: np.ndarray,
    proposal_sd: float,
) -> float:
    """Log MH ratio for a blocked threshold move on one scale.

    eta and labels cover only the observations of that scale. The ratio is
    the label-likelihood ratio times the correction for the sequential
    truncated-normal proposal: the normal kernels cancel, leaving the
    forward over reverse truncation normalizers. Returns -inf for a
    zero-density proposal and +inf for a zero-density current state (the
    caller treats the latter as a panic).

    The reverse move regenerates threshold c inside (current c-1,
    proposed c+1), so a proposal with proposed c+1 <= current c cannot be
    undone; its reverse density is zero and the move must be rejected.
    """
    current = np.asarray(current, dtype=float)
    proposed = np.asarray(proposed, dtype=float)
    cur_edges = _edges(current)
    prop_edges = _edges(proposed)
    ll_cur = np.sum(
        log_interval_mass(cur_edges[labels - 1] - eta, cur_edges[labels] - eta)
    )
    ll_prop = np.sum(
        log_interval_mass(prop_edges[labels - 1] - eta, prop_edges[labels] - eta)
    )
    if ll_cur == _NEG_INF:
        return math.inf
    if current.size > 1 and bool(np.any(current[:-1] >= proposed[1:])):
        return _NEG_INF

    sd = float(proposal_sd)
    below_prop = np.concatenate(([_NEG_INF], proposed[:-1]))
    above_cur = np.concatenate((current[1:], [np.inf]))
    below_cur = np.concatenate(([_NEG_INF], current[:-1]))
    above_prop = np.concatenate((proposed[1:], [np.inf]))
    log_fwd = np.sum(
        log_interval_mass((below_prop - current) / sd, (above_cur - current) / sd)
    )
    log_rev = np.sum(
        log_interval_mass((below_cur - proposed) / sd, (above_prop - proposed) / sd)
    )
    return float(ll_prop - ll_cur + log_fwd - log_rev)


def _propose_gammas(
    current: np.ndarray, proposal_sd: float, rng: np.random.Generator
) -> np.ndarray:
    """Sequential truncated-normal proposal; ordering holds by construction.

    Threshold c is proposed between the freshly proposed c-1 and the
    previous-iteration c+1.
    """
    k = current.size
    proposed = np.empty(k)
    var = float(proposal_sd) ** 2
    lower = _NEG_INF
    for c in range(k):
        upper = current[c + 1] if c + 1 < k else np.inf
        proposed[c] = sample_truncated_normal(current[c], var, (lower, upper), rng)
        lower = proposed[c]
    return proposed


def mh_update_gammas(
    scale: ScaleSpec,
    current: np.ndarray,
    latent: LatentState,
    dataset: Dataset,
    beta: np.ndarray,
    proposal_sd: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, bool]:
    """One blocked MH update of a scale's threshold vector.

    The move marginalizes the latents out, so `latent` enters only the
    panic diagnostics; callers redraw latents right after this step.
    """
    current = np.asarray(current, dtype=float)
    rows = dataset.rows_for_scale(scale.scale_id)
    eta = dataset.features[rows] @ np.asarray(beta, dtype=float)
    labels = dataset.labels[rows]
    return _mh_step(scale, current, eta, labels, float(proposal_sd), rng, latent)


def _mh_step(
    scale: ScaleSpec,
    current: np.ndarray,
    eta: np.ndarray,
    labels: np.ndarray,
    proposal_sd: float,
    rng: np.random.Generator,
    latent: LatentState | None = None,
) -> tuple[np.ndarray, bool]:
    proposed = _propose_gammas(current, proposal_sd, rng)
    log_ratio = gamma_log_acceptance_ratio(current, proposed, eta, labels, proposal_sd)
    u = rng.uniform()
    if math.isnan(log_ratio) or log_ratio == math.inf:
        raise SamplerPanicError(
            "zero-probability or undefined state in threshold update: "
            f"scale={scale.scale_id} current={current.tolist()} "
            f"proposed={proposed.tolist()} log_ratio={log_ratio} "
            f"eta_range=({eta.min() if eta.size else 'na'}, "
            f"{eta.max() if eta.size else 'na'}) "
            f"latent={'present' if latent is not None else 'none'}"
        )
    if log_ratio >= 0.0:
        accepted = True
    elif log_ratio == _NEG_INF or u == 0.0:
        accepted = False
    else:
        accepted = math.log(u) <= log_ratio
    return (proposed if accepted else current), accepted


class _GibbsKernel:
    """Precomputed per-dataset machinery shared by run_chain and the tuner.

    The posterior precision of the coefficients never changes across
    sweeps, so its Cholesky factor is computed once.
    """

    def __init__(self, dataset: Dataset, config: ChainConfig):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            validate_dataset(dataset, allow_zero_columns=True)
        self.dataset = dataset
        self.config = config
        X = dataset.features
        p = dataset.num_features
        self.prior_mean = config.prior.mean_vector(p)
        prior_prec = config.prior.precision_matrix(p)
        try:
            self.chol = np.linalg.cholesky(prior_prec + X.T @ X)
        except np.linalg.LinAlgError as exc:
            raise LinearAlgebraError(
                "posterior precision factorization failed; prior precision "
                "must be symmetric positive definite"
            ) from exc
        self.lam_mu = prior_prec @ self.prior_mean
        self.scale_rows = [
            dataset.rows_for_scale(s.scale_id) for s in dataset.scales
        ]
        self.scale_labels = [
            dataset.labels[rows] for rows in self.scale_rows
        ]
        for s, rows in zip(dataset.scales, self.scale_rows):
            if rows.size == 0:
                raise ConfigError(
                    f"scale {s.scale_id} declared but has no observations"
                )

    def initial_state(self):
        config, dataset = self.config, self.dataset
        if config.init_beta is not None:
            beta = np.asarray(config.init_beta, dtype=float).copy()
            if beta.shape != (dataset.num_features,):
                raise ConfigError(
                    f"init_beta shape {beta.shape} does not match "
                    f"p={dataset.num_features}"
                )
        else:
            beta = default_init(dataset, config.prior)[0]
        if config.init_gammas is not None:
            gammas = [np.asarray(g, dtype=float).copy() for g in config.init_gammas]
            if len(gammas) != len(dataset.scales):
                raise ConfigError(
                    f"init_gammas has {len(gammas)} vectors for "
                    f"{len(dataset.scales)} scales"
                )
            for g, s in zip(gammas, dataset.scales):
                if g.shape != (s.num_thresholds,):
                    raise ConfigError(
                        f"init_gammas for scale {s.scale_id} has shape "
                        f"{g.shape}, expected ({s.num_thresholds},)"
                    )
        else:
            gammas = [g.copy() for g in default_init(dataset, config.prior)[1]]
        return beta, gammas

    def sweep(self, beta, gammas, proposal_sds, rng):
        """One full sweep; mutates gammas in place, returns (beta, accepts)."""
        dataset = self.dataset
        eta = dataset.features @ beta
        accepts = []
        for k, s in enumerate(dataset.scales):
            gammas[k], acc = _mh_step(
                s,
                gammas[k],
                eta[self.scale_rows[k]],
                self.scale_labels[k],
                proposal_sds[k],
                rng,
            )
            accepts.append(acc)
        lowers, uppers = _latent_bounds(dataset, gammas)
        y_star = sample_truncated_normal_many(eta, 1.0, lowers, uppers, rng)
        b = self.lam_mu + dataset.features.T @ y_star
        beta = draw_mvn_given_cholesky(self.chol, b, rng)
        self._check_state(beta, gammas, y_star, lowers, uppers)
        return beta, accepts

    def _check_state(self, beta, gammas, y_star, lowers, uppers):
        ok = np.all(np.isfinite(beta))
        ok = ok and all(np.all(np.diff(g) > 0) for g in gammas if g.size > 1)
        ok = ok and bool(np.all((y_star > lowers) & (y_star < uppers)))
        if not ok:
            raise SamplerPanicError(
                f"post-sweep invariant violated: beta={np.asarray(beta).tolist()} "
                f"gammas={[g.tolist() for g in gammas]} "
                f"latent_range=({y_star.min()}, {y_star.max()})"
            )

    def proposal_sds(self) -> list[float]:
        return [
            self.config.proposal_sd_for(s.scale_id) for s in self.dataset.scales
        ]


def _run_single_chain(
    dataset: Dataset, config: ChainConfig, chain_id: int, seed_seq
) -> DrawSet:
    kernel = _GibbsKernel(dataset, config)
    rng = np.random.default_rng(seed_seq)
    beta, gammas = kernel.initial_state()
    sds = kernel.proposal_sds()

    total = config.total_sweeps
    burn_in = int(config.burn_in)
    thinning = int(config.thinning)
    stored = int(config.stored_draws)
    p = dataset.num_features

    beta_draws = np.empty((stored, p))
    gamma_draws = [
        np.empty((stored, s.num_thresholds)) for s in dataset.scales
    ]
    iteration_ids = np.empty(stored, dtype=int)
    acc_counts = {s.scale_id: 0 for s in dataset.scales}
    prop_counts = {s.scale_id: 0 for s in dataset.scales}

    out = 0
    for m in range(1, total + 1):
        try:
            beta, accepts = kernel.sweep(beta, gammas, sds, rng)
        except MsprobitError as exc:
            raise type(exc)(f"sweep {m}: {exc}") from exc
        for s, acc in zip(dataset.scales, accepts):
            prop_counts[s.scale_id] += 1
            acc_counts[s.scale_id] += int(acc)
        if m > burn_in and (m - burn_in) % thinning == 0:
            beta_draws[out] = beta
            for k in range(len(gammas)):
                gamma_draws[k][out] = gammas[k]
            iteration_ids[out] = m
            out += 1

    return DrawSet(
        beta_draws=beta_draws,
        gamma_draws=tuple(gamma_draws),
        scales=dataset.scales,
        chain_ids=np.full(stored, chain_id, dtype=int),
        iteration_ids=iteration_ids,
        accept_counts=acc_counts,
        proposal_counts=prop_counts,
    )


def run_chain(dataset: Dataset, config: ChainConfig) -> DrawSet:
    """Run one chain: burn_in + thinning * stored_draws sweeps, keeping
    every thinning-th post-burn-in state. Deterministic given config.seed.
    """
    seed_seq = np.random.SeedSequence(int(config.seed)).spawn(1)[0]
    return _run_single_chain(dataset, config, chain_id=0, seed_seq=seed_seq)


def run_chains(dataset: Dataset, config: ChainConfig, num_chains: int) -> DrawSet:
    """Run independent chains on split sub-streams and concatenate them.

    Chain i consumes child i of SeedSequence(seed), so a single chain here
    is bit-identical to run_chain with the same config.
    """
    if int(num_chains) < 1:
        raise ConfigError(f"num_chains must be >= 1, got {num_chains}")
    children = np.random.SeedSequence(int(config.seed)).spawn(int(num_chains))
    parts = []
    for i, child in enumerate(children):
        try:
            parts.append(_run_single_chain(dataset, config, i, child))
        except MsprobitError as exc:
            raise type(exc)(f"chain {i}: {exc}") from exc
    return DrawSet.concatenate(parts)


def mcse_mean(samples: np.ndarray) -> float:
    """Monte Carlo standard error of the sample mean via batch means."""
    x = np.asarray(samples, dtype=float).reshape(-1)
    if x.size < 4:
        raise ValueError("need at least 4 samples for a batch-means MCSE")
    batch = int(math.sqrt(x.size))
    nb = x.size // batch
    means = x[: nb * batch].reshape(nb, batch).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(nb))


_BRACKET_WINDOW = 200
_CONFIRM_WINDOW = 1000
_RATE_TOLERANCE = 0.03
_MAX_WINDOWS = 20


def tune_proposal(
    dataset: Dataset, config: ChainConfig, target_rate: float = 0.234
) -> dict[int, float]:
    """Pilot-tune the per-scale proposal sd toward a target acceptance rate.

    Doubles or halves each scale's sd per 200-sweep window until the target
    is bracketed, then bisects geometrically, confirming with 1000-sweep
    windows; a scale is done when a confirmation window lands within 0.03
    of the target. Pilot sweeps are never stored. Raises TuningError with
    the full rate trajectory if any scale is still unsettled after 20
    windows.
    """
    if not 0.0 < float(target_rate) < 1.0:
        raise ConfigError(f"target_rate must be in (0,1), got {target_rate}")
    target = float(target_rate)
    kernel = _GibbsKernel(dataset, config)
    rng = np.random.default_rng(np.random.SeedSequence([int(config.seed), 0x7459]))
    beta, gammas = kernel.initial_state()
    sds = kernel.proposal_sds()

    n_scales = len(dataset.scales)
    lo = [None] * n_scales  # largest sd seen with rate above target
    hi = [None] * n_scales  # smallest sd seen with rate below target
    done = [False] * n_scales
    in_band = [False] * n_scales  # last window landed within tolerance
    trajectory: list[dict] = []

    for window in range(_MAX_WINDOWS):
        # Short windows while some scale still hunts for a bracket; long
        # confirmation windows once every open scale is bracketed or sitting
        # in band, so the stopping decision has a usefully small rate SE.
        bracketing = any(
            not done[k] and not in_band[k] and (lo[k] is None or hi[k] is None)
            for k in range(n_scales)
        )
        size = _BRACKET_WINDOW if bracketing else _CONFIRM_WINDOW
        acc = np.zeros(n_scales)
        for _ in range(size):
            beta, accepts = kernel.sweep(beta, gammas, sds, rng)
            acc += accepts
        rates = acc / size
        trajectory.append(
            {
                "window": window,
                "size": size,
                "sds": list(sds),
                "rates": rates.tolist(),
            }
        )
        for k in range(n_scales):
            if done[k]:
                continue
            rate = rates[k]
            if abs(rate - target) <= _RATE_TOLERANCE:
                in_band[k] = True
                if size >= _CONFIRM_WINDOW:
                    done[k] = True
                continue
            in_band[k] = False
            if rate > target:
                lo[k] = sds[k] if lo[k] is None else max(lo[k], sds[k])
                sds[k] = (
                    math.sqrt(lo[k] * hi[k]) if hi[k] is not None else sds[k] * 2.0
                )
            else:
                hi[k] = sds[k] if hi[k] is None else min(hi[k], sds[k])
                sds[k] = (
                    math.sqrt(lo[k] * hi[k]) if lo[k] is not None else sds[k] / 2.0
                )
        if all(done):
            break
    if not all(done):
        stuck = [
            dataset.scales[k].scale_id for k in range(n_scales) if not done[k]
        ]
        raise TuningError(
            f"proposal tuning did not settle for scales {stuck} within "
            f"{_MAX_WINDOWS} windows; trajectory: {trajectory}"
        )
    return {s.scale_id: sds[k] for k, s in enumerate(dataset.scales)}
