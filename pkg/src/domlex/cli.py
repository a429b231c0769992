"""Command-line entry points; each subcommand wraps one stage.

Exit codes: 0 success, 1 usage error, 2 data error, 3 stage failure.
"""

from __future__ import annotations

import argparse
import sys

from .align import SelfLearnConfig, map_space, save_alignment_model, self_learn
from .anchors import align_anchors, build_anchor_table, load_occurrence_dump
from .codeswitch import (
    CodeSwitchConfig,
    build_frequency_table,
    read_corpus,
    switch_corpus_file,
)
from .errors import DataFormatError, PipelineStageError
from .interpolate import InterpolationConfig, translate_all, tune_lambda
from .pipeline import load_pipeline_config, run_pipeline, sweep_codeswitch
from .retrieval import evaluate_p_at_1, induce
from .spring import (
    SpringTrainConfig,
    load_spring_network,
    save_loss_log,
    save_spring_network,
    train_spring,
    unify,
)
from .store import (
    DEFAULT_NORMALIZATION,
    load_dictionary,
    load_embeddings,
    normalize,
    save_embeddings,
)

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_STAGE = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _self_learn_config(args) -> SelfLearnConfig:
    return SelfLearnConfig(
        metric=args.metric,
        csls_k=args.csls_k,
        max_iterations=args.max_iterations,
        convergence_tolerance=args.tolerance,
        stochastic_keep_probability=args.keep_probability,
        rng_seed=args.seed,
        init_vocab_cutoff=args.init_cutoff,
        use_whitening=args.whiten,
        reweight_exponent=args.reweight,
    )


def _add_self_learn_flags(parser) -> None:
    parser.add_argument("--metric", choices=["cosine", "csls"], default="csls")
    parser.add_argument("--csls-k", type=int, default=10)
    parser.add_argument("--max-iterations", type=int, default=100)
    parser.add_argument("--tolerance", type=float, default=1e-6)
    parser.add_argument("--keep-probability", type=float, default=0.9)
    parser.add_argument("--init-cutoff", type=int, default=4000)
    parser.add_argument("--whiten", action="store_true")
    parser.add_argument("--reweight", type=float, default=0.0)
    parser.add_argument("--seed", type=int, default=0)


def _cmd_align(args) -> int:
    src = normalize(load_embeddings(args.src, expected_dim=args.dim or None), args.normalization)
    tgt = normalize(load_embeddings(args.tgt, expected_dim=args.dim or None), args.normalization)
    model = self_learn(src, tgt, _self_learn_config(args))
    save_alignment_model(model, args.model_out)
    if args.mapped_src:
        save_embeddings(map_space(src, model, "src"), args.mapped_src)
    if args.mapped_tgt:
        save_embeddings(map_space(tgt, model, "tgt"), args.mapped_tgt)
    return 0


def _cmd_anchor(args) -> int:
    src_dump = load_occurrence_dump(args.src_dump)
    tgt_dump = load_occurrence_dump(args.tgt_dump)
    src_vocab = (
        load_embeddings(args.src_vocab).vocab
        if args.src_vocab
        else _dump_vocab(src_dump)
    )
    tgt_vocab = (
        load_embeddings(args.tgt_vocab).vocab
        if args.tgt_vocab
        else _dump_vocab(tgt_dump)
    )
    src_table = build_anchor_table(src_dump, src_vocab, max_contexts=args.max_contexts, rng_seed=args.seed)
    tgt_table = build_anchor_table(tgt_dump, tgt_vocab, max_contexts=args.max_contexts, rng_seed=args.seed)
    mapped_src, mapped_tgt, model = align_anchors(
        src_table, tgt_table, _self_learn_config(args), normalization=args.normalization
    )
    save_embeddings(mapped_src, args.mapped_src)
    save_embeddings(mapped_tgt, args.mapped_tgt)
    if args.model_out:
        save_alignment_model(model, args.model_out)
    return 0


def _dump_vocab(dump):
    from .store import Vocabulary

    return Vocabulary.from_words(dump.words())


def _cmd_spring(args) -> int:
    src = load_embeddings(args.src_mapped)
    tgt = load_embeddings(args.tgt_mapped)
    induced = induce(src, tgt, metric=args.metric, k=args.csls_k)
    config = SpringTrainConfig(
        negatives_per_pair=args.negatives,
        pair_count=args.pairs,
        epochs=args.epochs,
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        rng_seed=args.seed,
    )
    training = train_spring(src, tgt, induced, config)
    save_spring_network(training.network, args.out)
    if args.loss_log:
        save_loss_log(training.epoch_losses, args.loss_log)
    return 0


def _cmd_translate(args) -> int:
    src = load_embeddings(args.unified_src)
    tgt = load_embeddings(args.unified_tgt)
    from .spring import UnifiedSpace

    unified_src = UnifiedSpace(space=src, side="src")
    unified_tgt = UnifiedSpace(space=tgt, side="tgt")
    anchors_src = load_embeddings(args.anchors_src) if args.anchors_src else None
    anchors_tgt = load_embeddings(args.anchors_tgt) if args.anchors_tgt else None
    if args.words:
        with open(args.words, encoding="utf-8") as handle:
            words = [line.strip() for line in handle if line.strip()]
    else:
        words = list(src.vocab.words)
    lambda_weight = args.lambda_weight
    if args.tune and anchors_src is not None:
        lambda_weight = tune_lambda(
            words, unified_src, unified_tgt, anchors_src, anchors_tgt,
            metric=args.metric_term, missing_anchor_policy=args.missing_anchor_policy,
        )
        print(f"tuned lambda = {lambda_weight}", file=sys.stderr)
    config = InterpolationConfig(
        lambda_weight=lambda_weight if anchors_src is not None else 0.0,
        metric=args.metric_term,
        missing_anchor_policy=args.missing_anchor_policy,
    )
    results = translate_all(
        words, unified_src, unified_tgt, anchors_src, anchors_tgt,
        config=config, top_n=args.top_n,
    )
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for word in words:
            if word not in results:
                continue
            for target, score in results[word].candidates:
                out.write(f"{word}\t{target}\t{score!r}\n")
    finally:
        if args.out:
            out.close()
    return 0


def _cmd_codeswitch(args) -> int:
    dictionary = load_dictionary(args.dict, name="codeswitch")
    table = build_frequency_table(
        read_corpus(args.general_corpus), read_corpus(args.domain_corpus)
    )
    config = CodeSwitchConfig(alpha=args.alpha, beta=args.beta, gamma=args.gamma, rng_seed=args.seed)
    report = switch_corpus_file(args.corpus, args.out, dictionary, table, config)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as handle:
            handle.write(report.to_json() + "\n")
    else:
        print(report.to_json(), file=sys.stderr)
    return 0


def _cmd_eval(args) -> int:
    gold = load_dictionary(args.gold, name="gold")
    predictions = {}
    with open(args.pred, encoding="utf-8") as handle:
        for line in handle:
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) < 2:
                raise DataFormatError(f"{args.pred}: bad prediction line {line!r}")
            predictions.setdefault(fields[0], fields[1])
    report = evaluate_p_at_1(predictions, gold)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(report.to_tsv())
    print(report.to_json())
    return 0


def _cmd_run(args) -> int:
    config = load_pipeline_config(args.config)
    if args.output_dir:
        config.output_dir = args.output_dir
    result = run_pipeline(config)
    if result.report is not None:
        print(result.report.to_json())
    print(f"manifest: {result.output_dir / 'manifest.json'}")
    return 0


def _cmd_sweep(args) -> int:
    def grid(text, default):
        return tuple(float(v) for v in text.split(",")) if text else default

    from .pipeline import SWEEP_ALPHA_GRID, SWEEP_BETA_GRID, SWEEP_GAMMA_GRID

    manifests = sweep_codeswitch(
        args.corpus,
        args.dict,
        args.general_corpus,
        args.domain_corpus,
        args.out_dir,
        alpha_grid=grid(args.alpha_grid, SWEEP_ALPHA_GRID),
        beta_grid=grid(args.beta_grid, SWEEP_BETA_GRID),
        gamma_grid=grid(args.gamma_grid, SWEEP_GAMMA_GRID),
        seed=args.seed,
    )
    print(f"wrote {len(manifests)} manifests under {args.out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="domlex", description="Domain bilingual lexicon induction toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("align", help="unsupervised alignment of two static spaces")
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--dim", type=int, default=0, help="expected dimension (0 = infer)")
    p.add_argument("--normalization", default=DEFAULT_NORMALIZATION)
    p.add_argument("--model-out", required=True)
    p.add_argument("--mapped-src")
    p.add_argument("--mapped-tgt")
    _add_self_learn_flags(p)
    p.set_defaults(func=_cmd_align)

    p = sub.add_parser("anchor", help="build and align average-anchor tables from dumps")
    p.add_argument("--src-dump", required=True)
    p.add_argument("--tgt-dump", required=True)
    p.add_argument("--src-vocab", help="vector file whose vocabulary restricts the anchors")
    p.add_argument("--tgt-vocab")
    p.add_argument("--max-contexts", type=int, default=10)
    p.add_argument("--normalization", default=DEFAULT_NORMALIZATION)
    p.add_argument("--mapped-src", required=True)
    p.add_argument("--mapped-tgt", required=True)
    p.add_argument("--model-out")
    _add_self_learn_flags(p)
    p.set_defaults(func=_cmd_anchor)

    p = sub.add_parser("spring", help="train the contrastive spring network")
    p.add_argument("--src-mapped", required=True)
    p.add_argument("--tgt-mapped", required=True)
    p.add_argument("--metric", choices=["cosine", "csls"], default="csls")
    p.add_argument("--csls-k", type=int, default=10)
    p.add_argument("--negatives", type=int, default=10)
    p.add_argument("--pairs", type=int, default=None)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--loss-log")
    p.set_defaults(func=_cmd_spring)

    p = sub.add_parser("translate", help="rank translations with similarity interpolation")
    p.add_argument("--unified-src", required=True)
    p.add_argument("--unified-tgt", required=True)
    p.add_argument("--anchors-src")
    p.add_argument("--anchors-tgt")
    p.add_argument("--words", help="file of source words (default: whole vocabulary)")
    p.add_argument("--lambda", dest="lambda_weight", type=float, default=0.5)
    p.add_argument("--tune", action="store_true", help="tune lambda by round-trip retention")
    p.add_argument("--metric-term", choices=["cosine", "csls"], default="cosine")
    p.add_argument(
        "--missing-anchor-policy",
        choices=["static-only-fallback", "skip"],
        default="static-only-fallback",
    )
    p.add_argument("--top-n", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_translate)

    p = sub.add_parser("codeswitch", help="replace dictionary-covered tokens in a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--dict", required=True)
    p.add_argument("--general-corpus", required=True)
    p.add_argument("--domain-corpus", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.set_defaults(func=_cmd_codeswitch)

    p = sub.add_parser("eval", help="precision@1 against a gold dictionary")
    p.add_argument("--pred", required=True, help="tab-separated source/target predictions")
    p.add_argument("--gold", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("run", help="run the full pipeline from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="replacement-ratio sweep for codeswitch")
    p.add_argument("--corpus", required=True)
    p.add_argument("--dict", required=True)
    p.add_argument("--general-corpus", required=True)
    p.add_argument("--domain-corpus", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--alpha-grid")
    p.add_argument("--beta-grid")
    p.add_argument("--gamma-grid")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_sweep)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except PipelineStageError as exc:
        print(f"domlex: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except (DataFormatError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"domlex: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    raise SystemExit(main())
