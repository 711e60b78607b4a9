"""Sidecar command line: init a checkpoint, serve it, or fine-tune offline."""
from __future__ import annotations

import argparse
import json
import sys

from .training import TrainingError, finetune, init_checkpoint


def cmd_init(args: argparse.Namespace) -> int:
    path = init_checkpoint(args.out, dataset_path=args.dataset, seed=args.seed)
    print(f"initialized checkpoint at {path}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import ServiceState, create_app

    state = ServiceState()
    state.load(args.checkpoint)
    app = create_app(state)
    print(f"serving {state.model_id} on {args.host}:{args.port}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_finetune(args: argparse.Namespace) -> int:
    try:
        result = finetune(
            checkpoint_in=args.checkpoint,
            dataset_path=args.dataset,
            checkpoint_out=args.out,
            epochs=args.epochs,
            stage=args.stage,
            learning_rate=args.learning_rate,
            batch_size=args.batch_size,
            seed=args.seed,
        )
    except TrainingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    summary = {
        "checkpoint": result.checkpoint_path,
        "epochs": result.epochs,
        "steps": result.steps,
        "loss_before": result.loss_before,
        "loss_after": result.loss_after,
    }
    if args.summary:
        with open(args.summary, "w", encoding="utf-8") as handle:
            json.dump(summary, handle, indent=2, sort_keys=True)
            handle.write("\n")
    print(json.dumps(summary, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="titlegen-sidecar", description="Inference sidecar for title generation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="create a randomly initialized checkpoint")
    p.add_argument("--out", required=True)
    p.add_argument("--dataset", help="build the vocabulary from this input/gold jsonl")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("serve", help="serve /generate and /health")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("finetune", help="fine-tune a checkpoint on an input/gold dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=None, help="override the stage default")
    p.add_argument("--stage", choices=("initial", "self_improve"), default="self_improve")
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--summary", help="write a JSON training summary here")
    p.set_defaults(func=cmd_finetune)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
