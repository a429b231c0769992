"""Command line for dump extraction and the optional fine-tuning pass."""

from __future__ import annotations

import argparse
import sys

from .extract import ExtractorConfig, extract
from .finetune import FinetuneConfig, finetune_with_codeswitch


def _read_vocab(path: str | None, corpus_path: str) -> list[str]:
    if path:
        with open(path, encoding="utf-8") as handle:
            return [line.strip() for line in handle if line.strip()]
    seen: dict[str, None] = {}
    with open(corpus_path, encoding="utf-8") as handle:
        for line in handle:
            for token in line.split():
                seen.setdefault(token, None)
    return list(seen)


def _cmd_extract(args) -> int:
    config = ExtractorConfig(
        model=args.model,
        layer=args.layer,
        max_sentences=args.max_sentences,
        pooling=args.pooling,
        rng_seed=args.seed,
        max_length=args.max_length,
    )
    vocab = _read_vocab(args.vocab, args.corpus)
    coverage = extract(args.corpus, vocab, config, args.out, coverage_path=args.coverage)
    covered = sum(1 for emitted, _ in coverage.values() if emitted)
    print(f"extracted records for {covered}/{len(vocab)} words -> {args.out}", file=sys.stderr)
    return 0


def _cmd_finetune(args) -> int:
    config = FinetuneConfig(
        model=args.model,
        steps=args.steps,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        mask_probability=args.mask_probability,
        max_length=args.max_length,
        rng_seed=args.seed,
        include_original=args.include_original,
    )
    result = finetune_with_codeswitch(args.corpus, args.switched_corpus, config, args.out_dir)
    status = "diverged" if result.diverged else "ok"
    print(
        f"{status}: {result.steps_run} steps, final loss {result.final_loss}, "
        f"checkpoint at {result.checkpoint_dir}",
        file=sys.stderr,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctxextract", description="Contextual occurrence-dump extraction"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="dump per-occurrence hidden states")
    p.add_argument("--model", required=True, help="model directory or identifier")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", help="word list file (default: every corpus token)")
    p.add_argument("--layer", type=int, default=1, help="0 = embedding layer")
    p.add_argument("--max-sentences", type=int, default=10)
    p.add_argument("--pooling", choices=["mean", "first"], default="mean")
    p.add_argument("--max-length", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--coverage", help="sidecar path (default: <out>.coverage)")
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("finetune", help="short masked-LM pass on a switched corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--switched-corpus", required=True)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--learning-rate", type=float, default=5e-5)
    p.add_argument("--mask-probability", type=float, default=0.15)
    p.add_argument("--max-length", type=int, default=128)
    p.add_argument("--include-original", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_finetune)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, ValueError, OSError) as exc:
        print(f"ctxextract: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
