"""Command-line front end: train, export, serve."""
from __future__ import annotations

import argparse
import sys

from .errors import GlueError
from .export import export_for_serving
from .training import TrainConfig, train


def _cmd_train(args: argparse.Namespace) -> int:
    config = TrainConfig(
        train_path=args.train,
        output_dir=args.out,
        base_model=args.base_model,
        validation_path=args.validation,
        source_max_len=args.source_max_len,
        target_max_len=args.target_max_len,
        max_steps=args.max_steps,
        checkpoint_every=args.checkpoint_every,
        adapter_rank=args.adapter_rank,
        adapter_alpha=args.adapter_alpha,
        quantize_base=args.quantize_base,
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        seed=args.seed,
    )
    result = train(config)
    print(f"loss {result.initial_loss:.4f} -> {result.final_loss:.4f}")
    if result.validation_loss is not None:
        print(f"validation loss {result.validation_loss:.4f}")
    for checkpoint in result.checkpoints:
        print(f"checkpoint: {checkpoint}")
    print(f"loss log: {result.loss_log}")
    return 0


def _cmd_export(args: argparse.Namespace) -> int:
    artifact = export_for_serving(args.checkpoint, out_dir=args.out, int8=args.int8)
    print(f"artifact: {artifact}")
    print(f"instructions: {artifact / 'serve.md'}")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    from .serve import main as serve_main

    serve_argv = ["--artifact", args.artifact, "--host", args.host, "--port", str(args.port)]
    if args.int8:
        serve_argv.append("--int8")
    serve_main(serve_argv)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="finetune-glue", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("train", help="fine-tune adapters on exported records")
    p.add_argument("--train", required=True, help="instruction records (JSON Lines)")
    p.add_argument("--out", required=True, help="checkpoint output directory")
    p.add_argument("--validation", help="held-out records for a final loss")
    p.add_argument("--base-model", default="tiny-byte-lm", dest="base_model")
    p.add_argument("--source-max-len", type=int, default=750, dest="source_max_len")
    p.add_argument("--target-max-len", type=int, default=1024, dest="target_max_len")
    p.add_argument("--max-steps", type=int, default=1000, dest="max_steps")
    p.add_argument("--checkpoint-every", type=int, default=500, dest="checkpoint_every")
    p.add_argument("--adapter-rank", type=int, default=8, dest="adapter_rank")
    p.add_argument("--adapter-alpha", type=float, default=16.0, dest="adapter_alpha")
    p.add_argument("--quantize-base", action="store_true", dest="quantize_base")
    p.add_argument("--learning-rate", type=float, default=1e-3, dest="learning_rate")
    p.add_argument("--batch-size", type=int, default=4, dest="batch_size")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("export", help="merge adapters into a servable artifact")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", help="artifact directory (default: sibling 'serving')")
    p.add_argument("--int8", action="store_true", help="also write int8 weights")
    p.set_defaults(func=_cmd_export)

    p = sub.add_parser("serve", help="run a chat-completions server on an artifact")
    p.add_argument("--artifact", required=True)
    p.add_argument("--int8", action="store_true")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8211)
    p.set_defaults(func=_cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except GlueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
