"""Command-line entry points for the title-generation pipeline."""
from __future__ import annotations

import argparse
import json
import sys

from . import corpus, evalharness, ranker, selfimprove
from .generator import GeneratorError
from .metrics import aggregate, score_pair


def _overrides(pairs: list[str] | None) -> dict[str, str]:
    overrides = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise SystemExit(f"--set expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        overrides[key.strip()] = value.strip()
    return overrides


def _config_from_args(args: argparse.Namespace, extra: dict[str, str] | None = None) -> evalharness.PipelineConfig:
    overrides = _overrides(getattr(args, "set", None))
    overrides.update(extra or {})
    if getattr(args, "config", None):
        return evalharness.load_config(args.config, overrides=overrides)
    return evalharness.parse_config_lines([], overrides=overrides)


def _backend_overrides(args: argparse.Namespace) -> dict[str, str]:
    extra: dict[str, str] = {}
    if getattr(args, "mock", False):
        extra["backends.baseline.kind"] = "mock"
        extra["backends.baseline.seed"] = str(args.seed)
        if getattr(args, "inject_gold_at", None) is not None:
            extra["backends.baseline.inject_gold_at"] = str(args.inject_gold_at)
    elif getattr(args, "endpoint", None):
        extra["backends.baseline.kind"] = "http"
        extra["backends.baseline.endpoint"] = args.endpoint
    return extra


def cmd_ingest(args: argparse.Namespace) -> int:
    split = corpus.load_split(args.input, name=args.split)
    counts = split.per_language_counts()
    print(f"{args.input}: {len(split)} posts")
    for language in corpus.LANGUAGES:
        print(f"  {language}: {counts[language]}")
    if args.output:
        corpus.save_split(split, args.output)
        print(f"wrote normalized copy to {args.output}")
    return 0


def cmd_format(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    split = corpus.load_split(args.input, name=args.split)
    examples = corpus.format_split(split, config.prefixes, config.budget)
    corpus.write_formatted(examples, args.output)
    print(f"formatted {len(examples)} posts -> {args.output}")
    return 0


def cmd_rank(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    written = 0
    with open(args.input, "r", encoding="utf-8") as src, open(args.output, "w", encoding="utf-8") as dst:
        for line in src:
            if not line.strip():
                continue
            record = json.loads(line)
            best, result = ranker.select_best(
                record["candidates"], damping=config.damping, tol=config.tol, max_iter=config.max_iter
            )
            dst.write(
                json.dumps(
                    {
                        "id": record["id"],
                        "best": best,
                        "scores": list(result.scores),
                        "iterations": result.iterations,
                    },
                    ensure_ascii=False,
                    sort_keys=True,
                )
                + "\n"
            )
            written += 1
    print(f"ranked {written} candidate sets -> {args.output}")
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    split = corpus.load_split(args.references, name=args.split)
    gold_by_id = {post.id: post for post in split.records}
    by_language: dict[str, list] = {}
    with open(args.predictions, "r", encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            record = json.loads(line)
            post = gold_by_id.get(record["id"])
            if post is None:
                raise SystemExit(f"prediction id {record['id']!r} not present in references")
            prediction = record.get("prediction", record.get("best"))
            if prediction is None:
                raise SystemExit(f"prediction record {record['id']!r} has no prediction/best field")
            by_language.setdefault(post.language, []).append(score_pair(post.title, prediction))
    report = evalharness.RunReport(
        config_digest="score",
        rows=(evalharness.ReportRow(label=args.label, report=aggregate(by_language)),),
    )
    print(evalharness.emit_report(report, "table", path=args.table), end="")
    if args.machine:
        evalharness.emit_report(report, "machine", path=args.machine)
    return 0


def cmd_augment(args: argparse.Namespace) -> int:
    extra = _backend_overrides(args)
    config = _config_from_args(args, extra)
    split = corpus.load_split(args.input, name=args.split)
    examples = corpus.format_split(split, config.prefixes, config.budget)
    gold_by_input = {example.input: example.gold for example in examples}
    backend = evalharness.make_backend(config.backends["baseline"], gold_by_input)
    k = args.k if args.k is not None else config.k_self_improve
    try:
        pairs, manifest = selfimprove.augment(
            examples,
            backend,
            k=k,
            parallelism=args.parallelism,
            metric=config.metric,
            max_new_tokens=config.max_new_tokens,
        )
    except (selfimprove.AugmentationError, GeneratorError) as exc:
        print(f"augmentation failed: {exc}", file=sys.stderr)
        return 1
    selfimprove.write_augmented(pairs, args.output)
    trainer_path = args.trainer_output or f"{args.output}.train.jsonl"
    selfimprove.write_trainer_view(pairs, trainer_path)
    if args.handoff:
        try:
            ack = selfimprove.handoff_finetune(manifest, trainer_path, args.handoff)
        except selfimprove.HandoffError as exc:
            print(f"handoff failed: {exc}", file=sys.stderr)
            return 1
        print(f"trainer acknowledged: {ack}")
    manifest_path = args.manifest or f"{args.output}.manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as handle:
        handle.write(manifest.to_json() + "\n")
    print(
        f"augmented {manifest.record_count} examples (k={k}, mean ROUGE-L F1 "
        f"{manifest.mean_rouge_l_f1:.4f}) -> {args.output}"
    )
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    extra = _backend_overrides(args)
    if args.no_post_rank:
        extra["post_rank"] = "false"
    config = _config_from_args(args, extra)
    split_path = args.input or config.splits.get("test")
    if not split_path:
        raise SystemExit("no test split: pass a positional input path or set splits.test in the config")
    split = corpus.load_split(split_path, name=args.split)
    k_values = [int(k) for k in args.sweep.split(",")] if args.sweep else None
    try:
        if args.ablation:
            report = evalharness.run_ablation(config, split)
        else:
            report = evalharness.run_evaluate(config, split, k_values=k_values, checkpoint_path=args.checkpoint_file)
    except GeneratorError as exc:
        # completed posts are already in the checkpoint file; rerun to resume
        print(f"evaluation aborted: {exc}", file=sys.stderr)
        return 1
    print(evalharness.emit_report(report, "table", path=args.table), end="")
    if args.machine:
        evalharness.emit_report(report, "machine", path=args.machine)
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    with open(args.input, "r", encoding="utf-8") as handle:
        report = evalharness.parse_machine(handle.read())
    print(evalharness.emit_report(report, "table", path=args.output, value=args.value), end="")
    return 0


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config entry")


def _add_backend_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--mock", action="store_true", help="use the deterministic offline backend")
    parser.add_argument("--seed", type=int, default=0, help="mock backend seed")
    parser.add_argument("--inject-gold-at", type=int, default=None, help="mock knob: place the gold title at this index")
    parser.add_argument("--endpoint", help="HTTP generation endpoint")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="titlegen", description="Stack Overflow title generation pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse and validate a post dataset")
    p.add_argument("input")
    p.add_argument("--split", default="train", choices=corpus.SPLIT_NAMES)
    p.add_argument("--output", help="write a normalized copy")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("format", help="serialize posts to model inputs")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--split", default="train", choices=corpus.SPLIT_NAMES)
    _add_config_flags(p)
    p.set_defaults(func=cmd_format)

    p = sub.add_parser("rank", help="pick the best candidate per record")
    p.add_argument("input", help="jsonl of {id, candidates:[...]}")
    p.add_argument("output")
    _add_config_flags(p)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("score", help="ROUGE-score predictions against references")
    p.add_argument("references", help="post dataset (gold titles)")
    p.add_argument("predictions", help="jsonl of {id, prediction}")
    p.add_argument("--split", default="test", choices=corpus.SPLIT_NAMES)
    p.add_argument("--label", default="model")
    p.add_argument("--table", help="write the table report here")
    p.add_argument("--machine", help="write the machine report here")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("augment", help="self-improvement dataset augmentation")
    p.add_argument("input", help="post dataset to augment")
    p.add_argument("output", help="augmented jsonl output")
    p.add_argument("--split", default="train", choices=corpus.SPLIT_NAMES)
    p.add_argument("-k", type=int, default=None, help="candidates per example")
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--trainer-output", help="trainer-view (input/gold) output path")
    p.add_argument("--manifest", help="manifest output path")
    p.add_argument("--handoff", metavar="ENDPOINT", help="announce the dataset to this trainer endpoint")
    _add_config_flags(p)
    _add_backend_flags(p)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("evaluate", help="end-to-end pipeline evaluation")
    p.add_argument("input", nargs="?", help="test split (defaults to splits.test from the config)")
    p.add_argument("--split", default="test", choices=corpus.SPLIT_NAMES)
    p.add_argument("--sweep", help="comma-separated candidate counts, e.g. 10,20,30")
    p.add_argument("--ablation", action="store_true", help="run the 2x2 component grid")
    p.add_argument("--no-post-rank", action="store_true")
    p.add_argument("--checkpoint-file", help="resumable progress file")
    p.add_argument("--table", help="write the table report here")
    p.add_argument("--machine", help="write the machine report here")
    _add_config_flags(p)
    _add_backend_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="render a machine report as a table")
    p.add_argument("input", help="machine-format report file")
    p.add_argument("--output", help="write the table here")
    p.add_argument("--value", default="f1", choices=("f1", "recall"))
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (corpus.CorpusError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
