"""Embedding model, scoring functions, and factor statistics.

Images and annotations live in one k-dimensional factor space; relevance is
the inner product of an image row and an annotation row.  The transformed
score rescales annotation factors by their per-dimension statistics; it
differs from the plain score only by a per-image constant, so both induce
the same annotation ordering.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


def _check_index(idx: int, bound: int, what: str) -> None:
    if not 0 <= idx < bound:
        raise IndexError(f"{what} index {idx} out of range [0, {bound})")


@dataclass
class EmbeddingModel:
    """Joint factor matrices: one k-dim row per image and per annotation.

    Both matrices are float64 and must stay finite; SGD updates mutate the
    rows in place.  Concurrent readers are safe only while no writer is
    active; one training run owns the model exclusively.
    """

    image_factors: np.ndarray
    annotation_factors: np.ndarray

    def __post_init__(self):
        self.image_factors = np.ascontiguousarray(self.image_factors, dtype=np.float64)
        self.annotation_factors = np.ascontiguousarray(self.annotation_factors, dtype=np.float64)
        if self.image_factors.ndim != 2 or self.annotation_factors.ndim != 2:
            raise ValueError("factor matrices must be 2-dimensional")
        if self.image_factors.shape[1] != self.annotation_factors.shape[1]:
            raise ValueError(
                "image and annotation factors must share the embedding dimension, got "
                f"{self.image_factors.shape[1]} and {self.annotation_factors.shape[1]}"
            )

    @property
    def num_images(self) -> int:
        return self.image_factors.shape[0]

    @property
    def num_annotations(self) -> int:
        return self.annotation_factors.shape[0]

    @property
    def k(self) -> int:
        return self.image_factors.shape[1]

    def copy(self) -> "EmbeddingModel":
        return EmbeddingModel(self.image_factors.copy(), self.annotation_factors.copy())

    def all_finite(self) -> bool:
        return bool(
            np.isfinite(self.image_factors).all() and np.isfinite(self.annotation_factors).all()
        )


@dataclass
class FactorStats:
    """Per-dimension mean and population standard deviation of the
    annotation factors, snapshotted at draw counter ``drawn_at``."""

    mu: np.ndarray
    sigma: np.ndarray
    drawn_at: int = 0


@dataclass(frozen=True)
class Dataset:
    """Positive image-annotation pairs with per-image positive sets.

    Indices are dense, pairs are unique, and every image has at least one
    positive; use :meth:`from_pairs` to build a validated instance.
    """

    num_images: int
    num_annotations: int
    pairs: tuple
    positives: tuple

    @classmethod
    def from_pairs(cls, num_images: int, num_annotations: int, pairs) -> "Dataset":
        pairs = tuple((int(i), int(a)) for i, a in pairs)
        if num_images < 1 or num_annotations < 1:
            raise ConfigError("dataset needs at least one image and one annotation")
        seen = set()
        positives = [set() for _ in range(num_images)]
        for i, a in pairs:
            if not 0 <= i < num_images:
                raise ConfigError(f"image index {i} out of range [0, {num_images})")
            if not 0 <= a < num_annotations:
                raise ConfigError(f"annotation index {a} out of range [0, {num_annotations})")
            if (i, a) in seen:
                raise ConfigError(f"duplicate pair ({i}, {a})")
            seen.add((i, a))
            positives[i].add(a)
        for i, pos in enumerate(positives):
            if not pos:
                raise ConfigError(f"image {i} has no positive pair")
        return cls(num_images, num_annotations, pairs, tuple(frozenset(p) for p in positives))

    @property
    def num_pairs(self) -> int:
        return len(self.pairs)


@dataclass(slots=True)
class Triplet:
    """One SGD event: an image, one of its positives, and a negative."""

    image: int
    positive: int
    negative: int

    def is_valid(self, dataset: Dataset) -> bool:
        return (
            self.positive in dataset.positives[self.image]
            and self.negative not in dataset.positives[self.image]
            and self.positive != self.negative
        )


def gaussian_init(
    num_images: int,
    num_annotations: int,
    k: int,
    std: float,
    rng: np.random.Generator,
) -> EmbeddingModel:
    """Fresh model with every factor drawn from N(0, std^2).

    Image rows are drawn before annotation rows, so the layout is
    reproducible from the generator state alone.
    """
    if k < 1:
        raise ConfigError(f"embedding dimension must be >= 1, got {k}")
    image = rng.normal(0.0, std, size=(num_images, k))
    annotation = rng.normal(0.0, std, size=(num_annotations, k))
    return EmbeddingModel(image, annotation)


def score(model: EmbeddingModel, i: int, a: int) -> float:
    """Inner product of image row i and annotation row a."""
    _check_index(i, model.num_images, "image")
    _check_index(a, model.num_annotations, "annotation")
    return float(model.image_factors[i] @ model.annotation_factors[a])


def score_all(model: EmbeddingModel, i: int) -> np.ndarray:
    """Scores of image i against every annotation, as a length-|A| vector."""
    _check_index(i, model.num_images, "image")
    return model.annotation_factors @ model.image_factors[i]


def compute_factor_stats(model: EmbeddingModel, drawn_at: int = 0) -> FactorStats:
    """Population mean/stddev of each annotation-factor dimension.

    Population form (divide by |A|) keeps sigma defined for a single
    annotation; recomputation on an unchanged model is exact.
    """
    mu = model.annotation_factors.mean(axis=0)
    sigma = model.annotation_factors.std(axis=0)  # ddof=0, population form
    return FactorStats(mu=mu, sigma=sigma, drawn_at=drawn_at)


def transformed_score(model: EmbeddingModel, stats: FactorStats, i: int, a: int) -> float:
    """Rescaled score sum_f p(f|i) * sgn(v_if) * (v_af - mu_f) / sigma_f
    with p(f|i) = |v_if| * sigma_f.

    Dimensions with sigma_f = 0 contribute nothing (their weight p(f|i) is
    zero).  Equals ``score(model, i, a)`` minus a constant that depends on
    the image only, so rankings under both scores agree.  sgn(0) is +1.
    """
    _check_index(i, model.num_images, "image")
    _check_index(a, model.num_annotations, "annotation")
    vi = model.image_factors[i]
    va = model.annotation_factors[a]
    weight = np.abs(vi) * stats.sigma  # p(f|i)
    sign = np.where(vi >= 0.0, 1.0, -1.0)
    safe_sigma = np.where(stats.sigma > 0.0, stats.sigma, 1.0)
    standardized = np.where(stats.sigma > 0.0, (va - stats.mu) / safe_sigma, 0.0)
    return float(np.sum(weight * sign * standardized))


def transformed_score_all(model: EmbeddingModel, stats: FactorStats, i: int) -> np.ndarray:
    """Transformed scores of image i against every annotation."""
    _check_index(i, model.num_images, "image")
    vi = model.image_factors[i]
    weight = np.abs(vi) * stats.sigma
    sign = np.where(vi >= 0.0, 1.0, -1.0)
    safe_sigma = np.where(stats.sigma > 0.0, stats.sigma, 1.0)
    standardized = np.where(
        stats.sigma > 0.0, (model.annotation_factors - stats.mu) / safe_sigma, 0.0
    )
    return standardized @ (weight * sign)
