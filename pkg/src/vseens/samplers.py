"""Negative samplers: adaptive rank-based, WARP rejection, and uniform.

The adaptive sampler draws a rank from a truncated exponential distribution
and a factor dimension proportional to |v_if| * sigma_f, then reads the
annotation at that rank straight out of a pre-sorted per-dimension ordering.
The orderings are refreshed every ``refresh_interval`` draws, so the
amortized per-draw cost stays O(k) instead of O(|A| log |A|).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .model import Dataset, EmbeddingModel, FactorStats, compute_factor_stats


@dataclass(frozen=True)
class SamplerConfig:
    """Knobs for the adaptive sampler.

    ``lambda_`` shapes the rank distribution as a fraction of the
    dictionary: ranks are drawn with p(r) proportional to
    exp(-r / (lambda_ * |A|)), truncated to 1..|A|.  Small values
    concentrate draws on the top-ranked (hardest) negatives.
    ``refresh_interval`` of None means ceil(|A| * log2 |A|) draws between
    ranking-cache refreshes.  ``max_rejects`` caps redraws when a sampled
    negative collides with one of the image's positives.
    """

    lambda_: float = 0.1
    refresh_interval: int | None = None
    max_rejects: int = 100

    def __post_init__(self):
        if not self.lambda_ > 0.0:
            raise ConfigError(f"lambda must be positive, got {self.lambda_}")
        if self.refresh_interval is not None and self.refresh_interval < 1:
            raise ConfigError(f"refresh_interval must be >= 1, got {self.refresh_interval}")
        if self.max_rejects < 0:
            raise ConfigError(f"max_rejects must be >= 0, got {self.max_rejects}")

    def refresh_interval_for(self, num_annotations: int) -> int:
        if self.refresh_interval is not None:
            return self.refresh_interval
        if num_annotations < 2:
            return 1
        return max(1, math.ceil(num_annotations * math.log2(num_annotations)))


@dataclass
class RankingCache:
    """Per-dimension annotation orderings plus the factor statistics they
    were computed from.

    ``order[f]`` is a permutation of 0..|A|-1 sorted by the snapshot's
    annotation factor f, descending, ties broken by ascending annotation
    index.  The cache is immutable between refreshes (only ``age`` ticks),
    so it may be shared by concurrent readers.
    """

    order: np.ndarray  # (k, |A|) int64
    stats: FactorStats
    age: int = 0


class TrialCounter:
    """Counts candidate evaluations versus accepted negatives."""

    __slots__ = ("accepted", "candidate_evaluations")

    def __init__(self):
        self.accepted = 0
        self.candidate_evaluations = 0

    @property
    def mean_trials(self) -> float:
        return self.candidate_evaluations / max(self.accepted, 1)

    def __repr__(self):
        return (
            f"TrialCounter(accepted={self.accepted}, "
            f"candidate_evaluations={self.candidate_evaluations})"
        )


def draw_positive(dataset: Dataset, rng: np.random.Generator) -> tuple:
    """Uniform draw of one (image, annotation) pair from the training set."""
    if dataset.num_pairs == 0:
        raise ConfigError("cannot sample from an empty dataset")
    return dataset.pairs[int(rng.integers(dataset.num_pairs))]


def draw_rank(config: SamplerConfig, num_annotations: int, rng: np.random.Generator) -> int:
    """Rank r in 1..|A| with p(r) proportional to exp(-r / (lambda * |A|)).

    Inverse-CDF of the truncated geometric form; expm1/log1p keep the
    computation stable for both near-degenerate and near-uniform shapes.
    """
    n = num_annotations
    if n < 1:
        raise ConfigError("num_annotations must be >= 1")
    if n == 1:
        return 1
    beta = 1.0 / (config.lambda_ * n)
    # F(r) = (1 - q^r) / (1 - q^n) with q = exp(-beta)
    tail = -math.expm1(-beta * n)  # 1 - q^n
    u = rng.random()
    r = math.ceil(math.log1p(-u * tail) / -beta)
    return min(max(r, 1), n)


def rank_pmf(config: SamplerConfig, num_annotations: int) -> np.ndarray:
    """Exact pmf of :func:`draw_rank` over ranks 1..|A| (index r-1)."""
    n = num_annotations
    beta = 1.0 / (config.lambda_ * n)
    # shift by the max exponent so the normalization never underflows
    log_w = -beta * np.arange(1, n + 1, dtype=np.float64)
    w = np.exp(log_w - log_w.max())
    return w / w.sum()


def draw_dimension(
    model: EmbeddingModel, stats: FactorStats, i: int, rng: np.random.Generator
) -> int:
    """Factor dimension f with probability |v_if| * sigma_f (normalized).

    Falls back to a uniform draw when every weight is zero (zero image row
    or all-constant annotation factors).
    """
    weights = np.abs(model.image_factors[i]) * stats.sigma
    total = weights.sum()
    if total <= 0.0:
        return int(rng.integers(model.k))
    cdf = np.cumsum(weights)
    return int(np.searchsorted(cdf, rng.random() * total, side="right"))


def refresh_cache(model: EmbeddingModel, drawn_at: int = 0) -> RankingCache:
    """Sort every factor dimension and snapshot the factor statistics.

    O(k * |A| * log |A|); callers amortize it via :func:`on_draw`.
    """
    stats = compute_factor_stats(model, drawn_at=drawn_at)
    # stable argsort of the negated column: descending values, ties by
    # ascending annotation index
    order = np.argsort(-model.annotation_factors, axis=0, kind="stable").T
    return RankingCache(order=np.ascontiguousarray(order), stats=stats, age=0)


def on_draw(cache: RankingCache, model: EmbeddingModel, config: SamplerConfig) -> RankingCache:
    """Tick the cache age; rebuild the cache once it reaches the refresh
    interval.  Between refreshes the orderings stay frozen even if the
    model has moved."""
    cache.age += 1
    if cache.age >= config.refresh_interval_for(model.num_annotations):
        return refresh_cache(model, drawn_at=cache.stats.drawn_at + cache.age)
    return cache


def draw_negative_adaptive(
    model: EmbeddingModel,
    cache: RankingCache,
    dataset: Dataset,
    i: int,
    config: SamplerConfig,
    rng: np.random.Generator,
    counter: TrialCounter | None = None,
    reject_positives: bool = True,
) -> int:
    """Adaptive negative draw for image i.

    Draws a rank r and a dimension f, then returns the annotation at sorted
    position r (1-based) of the cached ordering for f when v_if >= 0, or at
    position |A| - r + 1 when v_if < 0.  Candidates that collide with a
    positive of i are redrawn up to ``max_rejects`` times, after which the
    draw falls back to uniform over the non-positives.  Cost per draw is
    O(k), refreshes excluded.

    ``reject_positives=False`` disables collision rejection entirely; it
    exists so tests can compare the raw draw distribution against the
    analytic mixture.
    """
    n = dataset.num_annotations
    positives = dataset.positives[i]
    if reject_positives and len(positives) >= n:
        raise ConfigError(f"image {i} has every annotation as a positive")
    vi = model.image_factors[i]
    order = cache.order
    for _ in range(config.max_rejects + 1):
        r = draw_rank(config, n, rng)
        f = draw_dimension(model, cache.stats, i, rng)
        if vi[f] >= 0.0:  # sgn(0) counts as +1
            a = int(order[f, r - 1])
        else:
            a = int(order[f, n - r])  # 1-based position |A| - r + 1
        if counter is not None:
            counter.candidate_evaluations += 1
        if not reject_positives or a not in positives:
            if counter is not None:
                counter.accepted += 1
            return a
    a = draw_negative_uniform(dataset, i, rng)
    if counter is not None:
        counter.candidate_evaluations += 1
        counter.accepted += 1
    return a


def draw_negative_warp(
    model: EmbeddingModel,
    dataset: Dataset,
    i: int,
    a_p: int,
    rng: np.random.Generator,
    counter: TrialCounter | None = None,
) -> tuple:
    """Rejection-sample a violating negative for (i, a_p).

    Uniform non-positive candidates are scored until one satisfies
    1 + s_i(a_n) > s_i(a_p).  Gives up after |A| - 1 trials and returns
    (None, trials); failure is a value, the caller skips the update.
    """
    vi = model.image_factors[i]
    annotation_factors = model.annotation_factors
    s_p = float(vi @ annotation_factors[a_p])
    max_trials = dataset.num_annotations - 1
    trials = 0
    while trials < max_trials:
        a_n = draw_negative_uniform(dataset, i, rng)
        trials += 1
        if counter is not None:
            counter.candidate_evaluations += 1
        if 1.0 + float(vi @ annotation_factors[a_n]) > s_p:
            if counter is not None:
                counter.accepted += 1
            return a_n, trials
    return None, trials


def draw_negative_uniform(dataset: Dataset, i: int, rng: np.random.Generator) -> int:
    """Uniform draw over the annotations that are not positives of image i."""
    n = dataset.num_annotations
    positives = dataset.positives[i]
    if len(positives) >= n:
        raise ConfigError(f"image {i} has every annotation as a positive")
    # rejection is exact and fast while positives are sparse; the dense
    # fallback keeps the draw uniform when they are not
    for _ in range(64):
        a = int(rng.integers(n))
        if a not in positives:
            return a
    complement = [a for a in range(n) if a not in positives]
    return complement[int(rng.integers(len(complement)))]
