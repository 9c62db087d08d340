"""SGD training loops for the three methods.

``vse_ens`` pairs the adaptive sampler with an unweighted hinge update,
``warp`` pairs rejection sampling with a rank-weighted hinge, and
``opt_auc`` pairs a uniform sampler with a logistic update.  A run is
strictly sequential and fully determined by its seed; independent runs may
execute in parallel.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .model import Dataset, EmbeddingModel, Triplet, gaussian_init, score_all
from .samplers import (
    RankingCache,
    SamplerConfig,
    TrialCounter,
    draw_negative_adaptive,
    draw_negative_uniform,
    draw_negative_warp,
    draw_positive,
    on_draw,
    refresh_cache,
)

METHODS = ("vse_ens", "warp", "opt_auc")

# epochs to convergence observed for each method; callers override freely
DEFAULT_EPOCHS = {"vse_ens": 200, "warp": 150, "opt_auc": 800}


@dataclass(frozen=True)
class RankWeighting:
    """Rank-to-loss transform L(r) = sum_{j=1..r} xi_j.

    ``harmonic`` uses xi_j = 1/j (emphasizes the top of the list);
    ``mean_rank`` uses the constant xi_j = 1/(|A|-1).  Both sequences are
    non-increasing and non-negative.
    """

    kind: str = "harmonic"

    def __post_init__(self):
        if self.kind not in ("harmonic", "mean_rank"):
            raise ConfigError(f"unknown rank weighting {self.kind!r}")

    def xi(self, num_annotations: int) -> np.ndarray:
        """Importance weights xi_j for j = 1..|A|-1."""
        n = num_annotations
        if n < 2:
            raise ConfigError("rank weighting needs at least 2 annotations")
        if self.kind == "harmonic":
            return 1.0 / np.arange(1, n, dtype=np.float64)
        return np.full(n - 1, 1.0 / (n - 1))

    def loss_table(self, num_annotations: int) -> np.ndarray:
        """L(r) for r = 0..|A|-1, with L(0) = 0."""
        return np.concatenate(([0.0], np.cumsum(self.xi(num_annotations))))


@dataclass(frozen=True)
class TrainConfig:
    eta: float = 0.01
    reg: float = 0.01
    k: int = 100
    epochs: int | None = None  # None resolves to the per-method default
    method: str = "vse_ens"
    init_std: float = 0.01
    seed: int = 42
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    weighting: RankWeighting = field(default_factory=RankWeighting)
    exact_rank: bool = False  # exact violation rank instead of the estimator

    def __post_init__(self):
        if not self.eta > 0.0:
            raise ConfigError(f"eta must be positive, got {self.eta}")
        if self.reg < 0.0:
            raise ConfigError(f"reg must be non-negative, got {self.reg}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}, expected one of {METHODS}")
        if self.epochs is not None and self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if not self.init_std > 0.0:
            raise ConfigError(f"init_std must be positive, got {self.init_std}")

    def resolved_epochs(self) -> int:
        return self.epochs if self.epochs is not None else DEFAULT_EPOCHS[self.method]


@dataclass
class EpochStats:
    epoch: int
    updates: int
    skipped: int
    mean_trials: float
    wall_time: float
    mean_margin_violation: float
    sampler_ns_per_draw: float = 0.0


@dataclass
class TrainState:
    """Mutable cross-epoch state: the RNG stream, the sampler's ranking
    cache (adaptive method only), and the rank-weight lookup table."""

    rng: np.random.Generator
    cache: RankingCache | None = None
    loss_table: np.ndarray | None = None
    epoch: int = 0
    draws: int = 0


def hinge_update(
    model: EmbeddingModel, triplet: Triplet, eta: float, reg: float, weight: float = 1.0
) -> float:
    """One SGD step on weight * |1 - s_i(a_p) + s_i(a_n)|_+.

    If the margin is not violated nothing changes, regularization included.
    Otherwise the three touched rows move along the gradient computed from
    their pre-update values, each shrunk by eta * reg.  Returns the
    pre-update margin violation (0 when inactive).
    """
    vi = model.image_factors[triplet.image]
    vp = model.annotation_factors[triplet.positive]
    vn = model.annotation_factors[triplet.negative]
    violation = 1.0 - float(vi @ vp) + float(vi @ vn)
    if violation <= 0.0:
        return 0.0
    step = eta * weight
    keep = 1.0 - eta * reg
    vi_old = vi.copy()
    vi *= keep
    vi += step * (vp - vn)  # vp, vn still hold their pre-update values
    vp *= keep
    vp += step * vi_old
    vn *= keep
    vn -= step * vi_old
    return violation


def logistic_update(model: EmbeddingModel, triplet: Triplet, eta: float, reg: float) -> float:
    """One SGD step on -ln sigma(s_p - s_n) with L2 on the touched rows.

    The common gradient multiplier is sigma(-(s_p - s_n)), evaluated in the
    numerically safe branch for either sign.  Returns the hinge-style
    margin violation max(0, 1 - s_p + s_n) as a diagnostic.
    """
    vi = model.image_factors[triplet.image]
    vp = model.annotation_factors[triplet.positive]
    vn = model.annotation_factors[triplet.negative]
    x = float(vi @ vp) - float(vi @ vn)
    if x >= 0.0:
        e = np.exp(-x)
        multiplier = e / (1.0 + e)
    else:
        multiplier = 1.0 / (1.0 + np.exp(x))
    step = eta * multiplier
    keep = 1.0 - eta * reg
    vi_old = vi.copy()
    vi *= keep
    vi += step * (vp - vn)
    vp *= keep
    vp += step * vi_old
    vn *= keep
    vn -= step * vi_old
    return max(0.0, 1.0 - x)


def warp_rank_estimate(trials: int, num_annotations: int) -> int:
    """Approximate violation rank floor((|A| - 1) / trials).

    One trial means an immediate violator, hence a high rank; the domain is
    1 <= trials <= |A| - 1, so the estimate is always >= 1.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    return (num_annotations - 1) // trials


def exact_violation_rank(model: EmbeddingModel, dataset: Dataset, i: int, a_p: int) -> int:
    """Exact count of non-positive annotations with 1 + s_i(a_n) > s_i(a_p).

    O(|A| k); intended for tiny problems and for validating the estimator.
    """
    scores = score_all(model, i)
    violating = (1.0 + scores) > scores[a_p]
    violating[list(dataset.positives[i])] = False
    return int(np.count_nonzero(violating))


def init_train_state(
    model: EmbeddingModel, dataset: Dataset, config: TrainConfig, rng: np.random.Generator
) -> TrainState:
    """Sampler state for a fresh run; builds the initial ranking cache for
    the adaptive method and the L(r) table for WARP."""
    state = TrainState(rng=rng)
    if config.method == "vse_ens":
        state.cache = refresh_cache(model)
    if config.method == "warp":
        state.loss_table = config.weighting.loss_table(dataset.num_annotations)
    return state


def train_epoch(
    model: EmbeddingModel,
    dataset: Dataset,
    method: str,
    config: TrainConfig,
    state: TrainState,
) -> EpochStats:
    """Run |pairs| scheduled updates: positive draw, method-specific
    negative draw, method-specific SGD step.

    WARP skips the update when its sampler finds no violator, so
    updates + skipped always equals the schedule length.  The negative-draw
    section is timed per epoch to expose the sampler's per-draw cost.
    """
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}, expected one of {METHODS}")
    if model.num_images != dataset.num_images or model.num_annotations != dataset.num_annotations:
        raise ConfigError("model dimensions do not match the dataset")
    rng = state.rng
    sampler_cfg = config.sampler
    eta, reg = config.eta, config.reg
    counter = TrialCounter()
    scheduled = dataset.num_pairs
    updates = 0
    skipped = 0
    margin_sum = 0.0
    sampler_ns = 0
    start = time.perf_counter()
    if method == "vse_ens":
        for _ in range(scheduled):
            i, a_p = draw_positive(dataset, rng)
            t0 = time.perf_counter_ns()
            state.cache = on_draw(state.cache, model, sampler_cfg)
            a_n = draw_negative_adaptive(
                model, state.cache, dataset, i, sampler_cfg, rng, counter
            )
            sampler_ns += time.perf_counter_ns() - t0
            margin_sum += hinge_update(model, Triplet(i, a_p, a_n), eta, reg, 1.0)
            updates += 1
    elif method == "warp":
        loss_table = state.loss_table
        n_ann = dataset.num_annotations
        for _ in range(scheduled):
            i, a_p = draw_positive(dataset, rng)
            t0 = time.perf_counter_ns()
            a_n, trials = draw_negative_warp(model, dataset, i, a_p, rng, counter)
            sampler_ns += time.perf_counter_ns() - t0
            if a_n is None:
                skipped += 1
                continue
            if config.exact_rank:
                rank = max(1, exact_violation_rank(model, dataset, i, a_p))
            else:
                rank = warp_rank_estimate(trials, n_ann)
            margin_sum += hinge_update(
                model, Triplet(i, a_p, a_n), eta, reg, float(loss_table[rank])
            )
            updates += 1
    else:  # opt_auc
        for _ in range(scheduled):
            i, a_p = draw_positive(dataset, rng)
            t0 = time.perf_counter_ns()
            a_n = draw_negative_uniform(dataset, i, rng)
            sampler_ns += time.perf_counter_ns() - t0
            counter.candidate_evaluations += 1
            counter.accepted += 1
            margin_sum += logistic_update(model, Triplet(i, a_p, a_n), eta, reg)
            updates += 1
    wall = time.perf_counter() - start
    state.epoch += 1
    state.draws += scheduled
    return EpochStats(
        epoch=state.epoch,
        updates=updates,
        skipped=skipped,
        mean_trials=counter.mean_trials,
        wall_time=wall,
        mean_margin_violation=margin_sum / max(updates, 1),
        sampler_ns_per_draw=sampler_ns / max(scheduled, 1),
    )


def train(dataset: Dataset, config: TrainConfig) -> tuple:
    """Gaussian-init a model and run the configured number of epochs.

    Returns (model, per-epoch stats).  The RNG stream that initializes the
    factors also drives every sampler draw, so the whole run is reproducible
    from the seed alone.
    """
    epochs = config.resolved_epochs()
    rng = np.random.default_rng(config.seed)
    model = gaussian_init(
        dataset.num_images, dataset.num_annotations, config.k, config.init_std, rng
    )
    state = init_train_state(model, dataset, config, rng)
    stats = [train_epoch(model, dataset, config.method, config, state) for _ in range(epochs)]
    return model, stats
