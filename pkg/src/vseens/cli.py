"""Subcommand CLI wiring the pipeline: gen, split, train, eval, bench.

Every command is a thin composition of library operations, so a pipeline
run through the CLI produces byte-identical artifacts (wall-clock fields
aside) to the same calls made directly.  Exit codes: 0 success, 1 I/O
error, 2 configuration or parse error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import io as vio
from .errors import ConfigError
from .evaluation import evaluate, leave_one_out_split
from .samplers import SamplerConfig
from .training import RankWeighting, TrainConfig, train

_METHOD_BY_FLAG = {"vse-ens": "vse_ens", "warp": "warp", "opt-auc": "opt_auc"}


def _add_sampler_flags(parser):
    parser.add_argument("--lambda", dest="lambda_", type=float, default=0.1,
                        help="rank-distribution shape, as a fraction of |A| (default 0.1)")
    parser.add_argument("--refresh-interval", type=int, default=None,
                        help="draws between ranking-cache refreshes (default |A|*log2|A|)")
    parser.add_argument("--max-rejects", type=int, default=100,
                        help="redraw cap when an adaptive draw hits a positive (default 100)")


def _add_train_flags(parser):
    parser.add_argument("--eta", type=float, default=0.01, help="learning rate (default 0.01)")
    parser.add_argument("--reg", type=float, default=0.01, help="L2 coefficient (default 0.01)")
    parser.add_argument("--k", type=int, default=100, help="embedding dimension (default 100)")
    parser.add_argument("--init-std", type=float, default=0.01,
                        help="stddev of the Gaussian factor init (default 0.01)")
    parser.add_argument("--weighting", choices=("harmonic", "mean-rank"), default="harmonic",
                        help="WARP rank weighting (default harmonic)")
    _add_sampler_flags(parser)


def _add_token_flags(parser):
    parser.add_argument("--image-tokens", default=None,
                        help="image token table pinning the index space")
    parser.add_argument("--annotation-tokens", default=None,
                        help="annotation token table pinning the index space")


def _read_tables(args):
    image_tokens = vio.read_token_table(args.image_tokens) if args.image_tokens else None
    annotation_tokens = (
        vio.read_token_table(args.annotation_tokens) if args.annotation_tokens else None
    )
    return image_tokens, annotation_tokens


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _train_config(args, method: str, epochs) -> TrainConfig:
    sampler = SamplerConfig(
        lambda_=args.lambda_,
        refresh_interval=args.refresh_interval,
        max_rejects=args.max_rejects,
    )
    return TrainConfig(
        eta=args.eta,
        reg=args.reg,
        k=args.k,
        epochs=epochs,
        method=method,
        init_std=args.init_std,
        seed=args.seed,
        sampler=sampler,
        weighting=RankWeighting(args.weighting.replace("-", "_")),
    )


def cmd_gen(args) -> int:
    dataset, truth = vio.gen_synthetic(
        num_images=args.images,
        num_annotations=args.annotations,
        true_rank=args.true_rank,
        positives_per_image=args.positives,
        noise=args.noise,
        seed=args.seed,
    )
    out = _out_dir(args)
    image_tokens = vio.default_tokens("i", dataset.num_images)
    annotation_tokens = vio.default_tokens("a", dataset.num_annotations)
    vio.write_pairs(out / "pairs.tsv", dataset.pairs, image_tokens, annotation_tokens)
    vio.write_token_table(out / "image_tokens.tsv", image_tokens)
    vio.write_token_table(out / "annotation_tokens.tsv", annotation_tokens)
    vio.save_model(out / "truth.txt", truth)
    return 0


def cmd_split(args) -> int:
    image_tokens, annotation_tokens = _read_tables(args)
    data = vio.load_pairs(args.pairs, image_tokens, annotation_tokens)
    split = leave_one_out_split(data.dataset, args.seed)
    out = _out_dir(args)
    vio.write_pairs(out / "train.tsv", split.train.pairs, data.image_tokens, data.annotation_tokens)
    vio.write_pairs(out / "test.tsv", split.test, data.image_tokens, data.annotation_tokens)
    vio.write_token_table(out / "image_tokens.tsv", data.image_tokens)
    vio.write_token_table(out / "annotation_tokens.tsv", data.annotation_tokens)
    return 0


def cmd_train(args) -> int:
    image_tokens, annotation_tokens = _read_tables(args)
    data = vio.load_pairs(args.train, image_tokens, annotation_tokens)
    config = _train_config(args, _METHOD_BY_FLAG[args.method], args.epochs)
    model, stats = train(data.dataset, config)
    out = _out_dir(args)
    vio.save_model(out / "model.txt", model)
    vio.write_trial_log(out / "trials.csv", stats)
    vio.write_token_table(out / "image_tokens.tsv", data.image_tokens)
    vio.write_token_table(out / "annotation_tokens.tsv", data.annotation_tokens)
    return 0


def cmd_eval(args) -> int:
    model = vio.load_model(args.model)
    image_tokens, annotation_tokens = _read_tables(args)
    data = vio.load_pairs(args.train, image_tokens, annotation_tokens)
    test = vio.load_test_pairs(args.test, data.image_tokens, data.annotation_tokens)
    if (
        model.num_images != data.dataset.num_images
        or model.num_annotations != data.dataset.num_annotations
    ):
        raise ConfigError(
            f"model is {model.num_images}x{model.num_annotations} but the pairs resolve to "
            f"{data.dataset.num_images}x{data.dataset.num_annotations}; pass the token tables "
            "the model was trained with"
        )
    report = evaluate(
        model,
        data.dataset,
        test,
        exclude_train_positives=not args.include_train_positives,
    )
    print(report.to_json())
    if args.out:
        vio.write_metrics(_out_dir(args) / "metrics.json", report)
    return 0


def cmd_bench(args) -> int:
    if args.train:
        dataset = vio.load_pairs(args.train).dataset
    elif args.synthetic:
        dataset, _ = vio.gen_synthetic(
            num_images=args.images,
            num_annotations=args.annotations,
            true_rank=args.true_rank,
            positives_per_image=args.positives,
            noise=args.noise,
            seed=args.seed,
        )
    else:
        raise ConfigError("bench needs --train or --synthetic")
    rows = []
    for flag, method in _METHOD_BY_FLAG.items():
        config = _train_config(args, method, args.epochs)
        _, stats = train(dataset, config)
        rows.extend((flag, s.epoch, s.mean_trials, s.sampler_ns_per_draw) for s in stats)
    vio.write_bench_log(_out_dir(args) / "bench.csv", rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vseens",
        description="Train and benchmark joint image-annotation embeddings "
        "with adaptive, WARP, and uniform negative samplers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a planted synthetic dataset")
    p.add_argument("--images", type=int, required=True)
    p.add_argument("--annotations", type=int, required=True)
    p.add_argument("--true-rank", type=int, default=8)
    p.add_argument("--positives", type=int, default=10, help="positives per image")
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("split", help="leave-one-out train/test split of a pairs file")
    p.add_argument("--pairs", required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)
    _add_token_flags(p)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train one method on a pairs file")
    p.add_argument("--train", required=True)
    p.add_argument("--method", choices=tuple(_METHOD_BY_FLAG), default="vse-ens")
    p.add_argument("--epochs", type=int, default=None,
                   help="default: 200 vse-ens, 150 warp, 800 opt-auc")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)
    _add_train_flags(p)
    _add_token_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="rank held-out annotations and report metrics")
    p.add_argument("--model", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--include-train-positives", action="store_true",
                   help="rank training positives as candidates too")
    p.add_argument("--out", default=None)
    _add_token_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="train all three methods and log sampler costs")
    p.add_argument("--train", default=None)
    p.add_argument("--synthetic", action="store_true")
    p.add_argument("--images", type=int, default=500)
    p.add_argument("--annotations", type=int, default=500)
    p.add_argument("--true-rank", type=int, default=8)
    p.add_argument("--positives", type=int, default=10)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)
    _add_train_flags(p)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
