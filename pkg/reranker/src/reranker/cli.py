"""`reranker` command line: biencoder training, dense retrieval,
crossencoder training, and reranking. Flags mirror the corpus toolkit
(`--task`, `--k`, `--meta`); run files share its prediction schema."""

import argparse
import json
import sys
from pathlib import Path

from .data import load_dictionary, load_mentions, read_jsonl, write_jsonl
from .train import (
    TrainConfig,
    load_checkpoint,
    rerank,
    retrieve_dense,
    save_checkpoint,
    train_biencoder,
    train_crossencoder,
)


def _common(p, with_dev=False):
    p.add_argument("--mentions", required=True, help="mentions jsonl")
    if with_dev:
        p.add_argument("--dev", required=True, help="dev mentions jsonl")
    p.add_argument("--dictionary", required=True, nargs="+",
                   help="one or more dictionary.<lang>.jsonl files")
    p.add_argument("--task", choices=("multilingual", "crosslingual"),
                   default="multilingual")
    p.add_argument("--meta", action="store_true",
                   help="prepend title/date meta to contexts")


def _train_flags(p, lr):
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--lr", type=float, default=lr)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--warmup", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reranker")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-bi", help="train the biencoder retriever")
    _common(p, with_dev=True)
    _train_flags(p, lr=1e-5)
    p.add_argument("--out", required=True, help="checkpoint path")

    p = sub.add_parser("retrieve", help="dense top-k retrieval to run.jsonl")
    _common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train-cross", help="train the crossencoder reranker")
    _common(p)
    _train_flags(p, lr=2e-5)
    p.add_argument("--run", required=True, help="retrieval run.jsonl")
    p.add_argument("--out", required=True)

    p = sub.add_parser("rerank", help="rerank a run with a crossencoder")
    _common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--run", required=True)
    p.add_argument("--out", required=True)
    return parser


def _config(args, **extra) -> TrainConfig:
    fields = {}
    for name in ("epochs", "lr", "batch_size", "warmup", "seed"):
        if hasattr(args, name):
            fields[name] = getattr(args, name)
    fields["use_meta"] = args.meta
    fields.update(extra)
    return TrainConfig(**fields)


def cmd_train_bi(args) -> None:
    config = _config(args)
    model, vocab, log = train_biencoder(
        load_mentions(args.mentions), load_mentions(args.dev),
        load_dictionary(args.dictionary), args.task, config,
    )
    save_checkpoint(model, vocab, config, log, args.out)
    print(f"train-bi: best epoch {log.best_epoch}, "
          f"dev R@1 {log.best_metric:.4f} -> {args.out}")


def cmd_retrieve(args) -> None:
    model, vocab, config, _ = load_checkpoint(args.model)
    config.use_meta = args.meta
    records = retrieve_dense(model, vocab, load_mentions(args.mentions),
                             load_dictionary(args.dictionary), args.task,
                             args.k, config)
    n = write_jsonl(args.out, records)
    print(f"retrieve: {n} mentions -> {args.out}")


def cmd_train_cross(args) -> None:
    config = _config(args)
    model, vocab, log = train_crossencoder(
        list(read_jsonl(args.run)), load_mentions(args.mentions),
        load_dictionary(args.dictionary), args.task, config,
    )
    save_checkpoint(model, vocab, config, log, args.out)
    print(f"train-cross: best epoch {log.best_epoch}, "
          f"train acc {log.best_metric:.4f}, skipped {log.skipped} "
          f"-> {args.out}")


def cmd_rerank(args) -> None:
    model, vocab, config, _ = load_checkpoint(args.model)
    config.use_meta = args.meta
    records = rerank(model, vocab, list(read_jsonl(args.run)),
                     load_mentions(args.mentions),
                     load_dictionary(args.dictionary), args.task, config)
    n = write_jsonl(args.out, records)
    print(f"rerank: {n} mentions -> {args.out}")


_COMMANDS = {
    "train-bi": cmd_train_bi,
    "retrieve": cmd_retrieve,
    "train-cross": cmd_train_cross,
    "rerank": cmd_rerank,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _COMMANDS[args.command](args)
    except (ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
