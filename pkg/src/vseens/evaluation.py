"""Leave-one-out splitting and ranking metrics.

One positive annotation per eligible image is held out; metrics rank it
against every candidate annotation (the image's remaining training
positives are excluded by default).  With a single held-out item per image,
Rec@N is exactly N * Pre@N and average precision reduces to the reciprocal
rank.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .model import Dataset, EmbeddingModel, score_all


@dataclass(frozen=True)
class Split:
    """Leave-one-out partition: a training dataset plus one held-out
    (image, annotation) pair per eligible image."""

    train: Dataset
    test: tuple
    seed: int


@dataclass(frozen=True)
class MetricsReport:
    pre5: float
    rec5: float
    pre10: float
    rec10: float
    map: float
    auc: float

    def as_dict(self) -> dict:
        return {
            "pre5": self.pre5,
            "rec5": self.rec5,
            "pre10": self.pre10,
            "rec10": self.rec10,
            "map": self.map,
            "auc": self.auc,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict())


def leave_one_out_split(dataset: Dataset, seed: int) -> Split:
    """Hold out one uniformly chosen positive per image with >= 2 positives.

    Images with a single positive stay train-only, so the training set
    keeps at least one positive per image.
    """
    rng = np.random.default_rng(seed)
    held_out = set()
    test = []
    for i in range(dataset.num_images):
        positives = sorted(dataset.positives[i])
        if len(positives) < 2:
            continue
        a = positives[int(rng.integers(len(positives)))]
        held_out.add((i, a))
        test.append((i, a))
    train_pairs = [pair for pair in dataset.pairs if pair not in held_out]
    train = Dataset.from_pairs(dataset.num_images, dataset.num_annotations, train_pairs)
    return Split(train=train, test=tuple(test), seed=seed)


def rank_annotations(model: EmbeddingModel, image: int, exclusions=()) -> np.ndarray:
    """Annotation indices sorted by score descending, ties by ascending
    index, with ``exclusions`` dropped."""
    scores = score_all(model, image)
    order = np.argsort(-scores, kind="stable")
    if len(exclusions) == 0:
        return order
    keep = np.ones(model.num_annotations, dtype=bool)
    keep[list(exclusions)] = False
    return order[keep[order]]


def precision_recall_at(ranked, held_out: int, n: int) -> tuple:
    """Per-image (Pre@N, Rec@N) for a single held-out annotation."""
    if n < 1:
        raise ConfigError(f"N must be >= 1, got {n}")
    hit = 1.0 if held_out in list(ranked[:n]) else 0.0
    return hit / n, hit


def average_precision(ranked, relevant) -> float:
    """AveP over an explicit ranking: precision at each relevant position
    times the recall step 1/|relevant|."""
    relevant = set(relevant)
    if not relevant:
        return 0.0
    hits = 0
    total = 0.0
    for position, annotation in enumerate(ranked, start=1):
        if int(annotation) in relevant:
            hits += 1
            total += hits / position
    return total / len(relevant)


def mean_average_precision(results) -> float:
    """Mean AveP over (ranked, held_out) pairs, one per test image."""
    values = [average_precision(ranked, {held_out}) for ranked, held_out in results]
    if not values:
        raise ConfigError("cannot average over an empty test set")
    return float(np.mean(values))


def auc(results) -> float:
    """Mean pairwise-ordering AUC over (held_out_score, negative_scores)
    pairs; equal scores earn half credit."""
    values = []
    for held_score, negative_scores in results:
        negative_scores = np.asarray(negative_scores, dtype=np.float64)
        if negative_scores.size == 0:
            values.append(1.0)
            continue
        below = np.count_nonzero(negative_scores < held_score)
        ties = np.count_nonzero(negative_scores == held_score)
        values.append((below + 0.5 * ties) / negative_scores.size)
    if not values:
        raise ConfigError("cannot average over an empty test set")
    return float(np.mean(values))


def evaluate(
    model: EmbeddingModel,
    train: Dataset,
    test,
    exclude_train_positives: bool = True,
) -> MetricsReport:
    """Score every test image against its candidate annotations and report
    Pre/Rec@{5,10}, MAP, and AUC.

    Vectorized over test images; per-image results are identical to
    composing :func:`rank_annotations` with the per-image metric operations
    (the test suite cross-checks this).  Evaluation is read-only on the
    model and independent of image order.
    """
    test = list(test)
    if not test:
        raise ConfigError("empty test set")
    images = np.fromiter((i for i, _ in test), dtype=np.int64, count=len(test))
    held = np.fromiter((a for _, a in test), dtype=np.int64, count=len(test))
    num_annotations = model.num_annotations
    scores = model.image_factors[images] @ model.annotation_factors.T
    candidates = np.ones((len(test), num_annotations), dtype=bool)
    if exclude_train_positives:
        for row, image in enumerate(images):
            positives = train.positives[int(image)]
            if positives:
                candidates[row, list(positives)] = False
    rows = np.arange(len(test))
    if not candidates[rows, held].all():
        raise ConfigError("a held-out annotation is excluded from its own candidate set")
    held_scores = scores[rows, held]
    greater = ((scores > held_scores[:, None]) & candidates).sum(axis=1)
    equal = (scores == held_scores[:, None]) & candidates
    ties_before = (equal & (np.arange(num_annotations)[None, :] < held[:, None])).sum(axis=1)
    # rank of the held-out item among candidates, ties by ascending index
    rank = 1 + greater + ties_before
    ties = equal.sum(axis=1) - 1  # the held-out item ties with itself
    num_negatives = candidates.sum(axis=1) - 1
    below = num_negatives - greater - ties
    auc_values = np.where(
        num_negatives > 0, (below + 0.5 * ties) / np.maximum(num_negatives, 1), 1.0
    )
    hits5 = (rank <= 5).mean()
    hits10 = (rank <= 10).mean()
    return MetricsReport(
        pre5=float(hits5 / 5),
        rec5=float(hits5),
        pre10=float(hits10 / 10),
        rec10=float(hits10),
        map=float((1.0 / rank).mean()),
        auc=float(auc_values.mean()),
    )
