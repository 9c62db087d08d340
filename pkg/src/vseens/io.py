"""File formats: pairs TSV, token tables, synthetic data, checkpoints, logs.

Everything is UTF-8 text so artifacts stay inspectable and diff-able.
Token-to-index mappings are assigned by first appearance and recorded in
token tables so downstream commands can reuse a consistent index space.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ParseError
from .model import Dataset, EmbeddingModel

MODEL_MAGIC = "VSEENS"
MODEL_FORMAT_VERSION = 1
TRIAL_LOG_HEADER = ("epoch", "mean_trials", "updates", "skipped", "wall_time_seconds")
BENCH_HEADER = ("method", "epoch", "mean_trials", "per_draw_ns")


@dataclass(frozen=True)
class PairsData:
    """A parsed pairs file: the dataset plus its token tables and the
    number of duplicate lines that were dropped."""

    dataset: Dataset
    image_tokens: tuple
    annotation_tokens: tuple
    duplicates: int


def _parse_pair_lines(path):
    """Yield (line_number, image_token, annotation_token) from a pairs TSV.

    Lines starting with '#' are comments; anything else must be exactly two
    non-empty tab-separated tokens.
    """
    with open(path, "r", encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise ParseError(
                    path, line_number, f"expected 2 tab-separated fields, got {len(fields)}"
                )
            image_token, annotation_token = fields
            if not image_token or not annotation_token:
                raise ParseError(path, line_number, "empty token")
            yield line_number, image_token, annotation_token


def _resolve(token, table, index, path, line_number, what):
    if token in index:
        return index[token]
    if table is not None:
        raise ParseError(path, line_number, f"unknown {what} token {token!r}")
    index[token] = len(index)
    return index[token]


def load_pairs(path, image_tokens=None, annotation_tokens=None) -> PairsData:
    """Parse a pairs file into a dense-index dataset.

    Without token tables, indices follow first appearance; with tables, the
    given mapping is enforced and unknown tokens are parse errors.
    Duplicate pairs are dropped and counted.
    """
    image_index = (
        {t: j for j, t in enumerate(image_tokens)} if image_tokens is not None else {}
    )
    annotation_index = (
        {t: j for j, t in enumerate(annotation_tokens)} if annotation_tokens is not None else {}
    )
    pairs = []
    seen = set()
    duplicates = 0
    for line_number, image_token, annotation_token in _parse_pair_lines(path):
        i = _resolve(image_token, image_tokens, image_index, path, line_number, "image")
        a = _resolve(
            annotation_token, annotation_tokens, annotation_index, path, line_number, "annotation"
        )
        if (i, a) in seen:
            duplicates += 1
            continue
        seen.add((i, a))
        pairs.append((i, a))
    if not pairs:
        raise ConfigError(f"{path}: no pairs found")
    num_images = len(image_index)
    num_annotations = len(annotation_index)
    dataset = Dataset.from_pairs(num_images, num_annotations, pairs)
    by_index = sorted(image_index, key=image_index.get)
    ann_by_index = sorted(annotation_index, key=annotation_index.get)
    return PairsData(
        dataset=dataset,
        image_tokens=tuple(by_index),
        annotation_tokens=tuple(ann_by_index),
        duplicates=duplicates,
    )


def load_test_pairs(path, image_tokens, annotation_tokens):
    """Parse held-out pairs against existing token tables.

    Returns a plain pair list: a test file has no per-image coverage
    guarantees, so it is not a Dataset.
    """
    image_index = {t: j for j, t in enumerate(image_tokens)}
    annotation_index = {t: j for j, t in enumerate(annotation_tokens)}
    pairs = []
    for line_number, image_token, annotation_token in _parse_pair_lines(path):
        if image_token not in image_index:
            raise ParseError(path, line_number, f"unknown image token {image_token!r}")
        if annotation_token not in annotation_index:
            raise ParseError(path, line_number, f"unknown annotation token {annotation_token!r}")
        pairs.append((image_index[image_token], annotation_index[annotation_token]))
    if not pairs:
        raise ConfigError(f"{path}: no pairs found")
    return pairs


def write_pairs(path, pairs, image_tokens, annotation_tokens) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i, a in pairs:
            fh.write(f"{image_tokens[i]}\t{annotation_tokens[a]}\n")


def default_tokens(prefix: str, count: int) -> tuple:
    return tuple(f"{prefix}{j}" for j in range(count))


def write_token_table(path, tokens) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for j, token in enumerate(tokens):
            fh.write(f"{j}\t{token}\n")


def read_token_table(path):
    tokens = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            fields = line.rstrip("\r\n").split("\t")
            if len(fields) != 2 or not fields[1]:
                raise ParseError(path, line_number, "expected '<index>\\t<token>'")
            if fields[0] != str(line_number - 1):
                raise ParseError(path, line_number, f"expected index {line_number - 1}")
            tokens.append(fields[1])
    if not tokens:
        raise ConfigError(f"{path}: empty token table")
    return tuple(tokens)


def gen_synthetic(
    num_images: int,
    num_annotations: int,
    true_rank: int,
    positives_per_image: int,
    noise: float,
    seed: int,
):
    """Planted low-rank dataset with known ground truth.

    Ground-truth factors are standard normal at ``true_rank`` dimensions;
    each image's positives are its top-scoring annotations under the
    planted model.  With probability ``noise`` a positive is independently
    swapped for a uniform random annotation (redrawn on collision so each
    image keeps exactly ``positives_per_image`` distinct positives).

    Returns (dataset, planted model); with noise 0 the planted model ranks
    every held-out positive above all negatives.
    """
    if num_images < 1 or num_annotations < 1:
        raise ConfigError("need at least one image and one annotation")
    if true_rank < 1:
        raise ConfigError(f"true_rank must be >= 1, got {true_rank}")
    if not 1 <= positives_per_image < num_annotations:
        raise ConfigError(
            f"positives_per_image must be in [1, {num_annotations}), got {positives_per_image}"
        )
    if not 0.0 <= noise <= 1.0:
        raise ConfigError(f"noise must be in [0, 1], got {noise}")
    rng = np.random.default_rng(seed)
    truth = EmbeddingModel(
        rng.standard_normal((num_images, true_rank)),
        rng.standard_normal((num_annotations, true_rank)),
    )
    scores = truth.image_factors @ truth.annotation_factors.T
    top = np.argsort(-scores, axis=1, kind="stable")[:, :positives_per_image]
    pairs = []
    for i in range(num_images):
        chosen = [int(a) for a in top[i]]
        members = set(chosen)
        if noise > 0.0:
            for slot, original in enumerate(chosen):
                if rng.random() >= noise:
                    continue
                members.discard(original)
                replacement = int(rng.integers(num_annotations))
                while replacement in members:
                    replacement = int(rng.integers(num_annotations))
                chosen[slot] = replacement
                members.add(replacement)
        pairs.extend((i, a) for a in chosen)
    dataset = Dataset.from_pairs(num_images, num_annotations, pairs)
    return dataset, truth


def _fmt(value: float) -> str:
    # repr of a Python float is the shortest string that round-trips the
    # exact float64 value
    return repr(float(value))


def save_model(path, model: EmbeddingModel) -> None:
    """Text checkpoint: header line, then image rows, then annotation rows."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(
            f"{MODEL_MAGIC} {MODEL_FORMAT_VERSION} "
            f"{model.num_images} {model.num_annotations} {model.k}\n"
        )
        for matrix in (model.image_factors, model.annotation_factors):
            for row in matrix:
                fh.write(" ".join(_fmt(v) for v in row))
                fh.write("\n")


def load_model(path) -> EmbeddingModel:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 5 or header[0] != MODEL_MAGIC:
            raise ParseError(path, 1, "not a model checkpoint")
        if header[1] != str(MODEL_FORMAT_VERSION):
            raise ParseError(path, 1, f"unsupported checkpoint version {header[1]}")
        try:
            num_images, num_annotations, k = (int(x) for x in header[2:])
        except ValueError as exc:
            raise ParseError(path, 1, f"bad header counts: {exc}") from None
        if num_images < 1 or num_annotations < 1 or k < 1:
            raise ParseError(path, 1, "header counts must be positive")
        rows = np.empty((num_images + num_annotations, k), dtype=np.float64)
        for row_number in range(num_images + num_annotations):
            line = fh.readline()
            line_number = row_number + 2
            if not line:
                raise ParseError(path, line_number, "unexpected end of file")
            fields = line.split()
            if len(fields) != k:
                raise ParseError(path, line_number, f"expected {k} values, got {len(fields)}")
            try:
                rows[row_number] = [float(x) for x in fields]
            except ValueError as exc:
                raise ParseError(path, line_number, str(exc)) from None
    if not np.isfinite(rows).all():
        raise ParseError(path, 1, "checkpoint contains non-finite values")
    return EmbeddingModel(rows[:num_images], rows[num_images:])


def write_trial_log(path, epoch_stats) -> None:
    """CSV of per-epoch sampler-cost rows."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRIAL_LOG_HEADER)
        for s in epoch_stats:
            writer.writerow([s.epoch, _fmt(s.mean_trials), s.updates, s.skipped, _fmt(s.wall_time)])


def write_bench_log(path, rows) -> None:
    """CSV with one row per (method, epoch): mean trials and per-draw cost."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(BENCH_HEADER)
        for method, epoch, mean_trials, per_draw_ns in rows:
            writer.writerow([method, epoch, _fmt(mean_trials), _fmt(per_draw_ns)])


def write_metrics(path, report) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report.to_json())
        fh.write("\n")


def read_metrics(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
