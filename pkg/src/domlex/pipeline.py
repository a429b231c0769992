"""End-to-end orchestration from a config file, with a reproducibility manifest.

Configs are flat INI files with one section per stage (see README for a
worked example).  Every run writes a ``manifest.json`` recording the
config snapshot, stage timings, and the sha256 of every output file;
re-running with the same config and seed reproduces the same hashes.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .align import SelfLearnConfig, map_space, save_alignment_model, self_learn
from .anchors import (
    DEFAULT_MAX_CONTEXTS,
    align_anchors,
    build_anchor_table,
    load_occurrence_dump,
)
from .codeswitch import (
    CodeSwitchConfig,
    build_frequency_table,
    read_corpus,
    switch_corpus_file,
)
from .errors import PipelineStageError
from .interpolate import (
    DEFAULT_LAMBDA_GRID,
    InterpolationConfig,
    translate_all,
    tune_lambda,
)
from .retrieval import EvalReport, evaluate_p_at_1, induce
from .spring import SpringTrainConfig, save_loss_log, save_spring_network, train_spring, unify
from .store import (
    DEFAULT_NORMALIZATION,
    KIND_CONTEXTUAL_ANCHOR,
    load_dictionary,
    load_embeddings,
    normalize,
    save_embeddings,
)

# Replacement-ratio grids for the sweep helper.
SWEEP_ALPHA_GRID = (0.4, 0.5, 0.6, 0.8, 0.9, 1.0)
SWEEP_BETA_GRID = SWEEP_ALPHA_GRID
SWEEP_GAMMA_GRID = tuple(round(0.1 * i, 1) for i in range(1, 11))

DEFAULT_STATIC_DIM = 300
DEFAULT_CONTEXTUAL_DIM = 1024
DEFAULT_VALIDATION_LIMIT = 200


@dataclass
class PipelineConfig:
    src_embeddings: str = ""
    tgt_embeddings: str = ""
    src_dump: str | None = None
    tgt_dump: str | None = None
    gold_dictionary: str | None = None
    validation_words: str | None = None
    output_dir: str = "out"
    seed: int = 0
    normalization: str = DEFAULT_NORMALIZATION
    static_dim: int = DEFAULT_STATIC_DIM  # 0 disables the check
    contextual_dim: int = DEFAULT_CONTEXTUAL_DIM  # 0 disables the check
    max_contexts: int = DEFAULT_MAX_CONTEXTS
    validation_limit: int = DEFAULT_VALIDATION_LIMIT
    top_n: int = 1
    self_learn: SelfLearnConfig = field(default_factory=SelfLearnConfig)
    spring: SpringTrainConfig = field(default_factory=SpringTrainConfig)
    interpolation: InterpolationConfig = field(default_factory=InterpolationConfig)
    tune_interpolation: bool = True

    def validate(self) -> None:
        required = {"src_embeddings": self.src_embeddings, "tgt_embeddings": self.tgt_embeddings}
        for name, value in required.items():
            if not value:
                raise ValueError(f"config is missing {name}")
            if not Path(value).exists():
                raise FileNotFoundError(f"{name} not found: {value}")
        for name in ("src_dump", "tgt_dump", "gold_dictionary", "validation_words"):
            value = getattr(self, name)
            if value and not Path(value).exists():
                raise FileNotFoundError(f"{name} not found: {value}")


def _get(section, key, cast, default):
    if section is None or key not in section:
        return default
    raw = section[key]
    if cast is bool:
        return raw.strip().lower() in ("1", "true", "yes", "on")
    return cast(raw)


def load_pipeline_config(path: str) -> PipelineConfig:
    parser = configparser.ConfigParser()
    with open(path, encoding="utf-8") as handle:
        parser.read_file(handle)
    data = parser["data"] if parser.has_section("data") else None
    pipe = parser["pipeline"] if parser.has_section("pipeline") else None
    sl = parser["self_learn"] if parser.has_section("self_learn") else None
    sp = parser["spring"] if parser.has_section("spring") else None
    it = parser["interpolation"] if parser.has_section("interpolation") else None

    seed = _get(pipe, "seed", int, 0)
    self_learn_config = SelfLearnConfig(
        metric=_get(sl, "metric", str, "csls"),
        csls_k=_get(sl, "csls_k", int, 10),
        max_iterations=_get(sl, "max_iterations", int, 100),
        convergence_tolerance=_get(sl, "convergence_tolerance", float, 1e-6),
        stochastic_keep_probability=_get(sl, "stochastic_keep_probability", float, 0.9),
        rng_seed=_get(sl, "rng_seed", int, seed),
        init_vocab_cutoff=_get(sl, "init_vocab_cutoff", int, 4000),
        use_whitening=_get(sl, "use_whitening", bool, False),
        reweight_exponent=_get(sl, "reweight_exponent", float, 0.0),
    )
    spring_config = SpringTrainConfig(
        negatives_per_pair=_get(sp, "negatives_per_pair", int, 10),
        pair_count=_get(sp, "pair_count", int, None),
        epochs=_get(sp, "epochs", int, 50),
        learning_rate=_get(sp, "learning_rate", float, 1e-3),
        batch_size=_get(sp, "batch_size", int, 128),
        rng_seed=_get(sp, "rng_seed", int, seed),
        resample_negatives=_get(sp, "resample_negatives", bool, True),
        share_networks=_get(sp, "share_networks", bool, False),
        hidden_width=_get(sp, "hidden_width", int, None),
    )
    grid_text = _get(it, "lambda_grid", str, None)
    grid = (
        tuple(float(v) for v in grid_text.split(",")) if grid_text else DEFAULT_LAMBDA_GRID
    )
    interpolation_config = InterpolationConfig(
        lambda_weight=_get(it, "lambda", float, 0.5),
        lambda_grid=grid,
        metric=_get(it, "metric", str, "cosine"),
        missing_anchor_policy=_get(it, "missing_anchor_policy", str, "static-only-fallback"),
        csls_k=_get(it, "csls_k", int, 10),
    )
    config = PipelineConfig(
        src_embeddings=_get(data, "src_embeddings", str, ""),
        tgt_embeddings=_get(data, "tgt_embeddings", str, ""),
        src_dump=_get(data, "src_dump", str, None),
        tgt_dump=_get(data, "tgt_dump", str, None),
        gold_dictionary=_get(data, "gold_dictionary", str, None),
        validation_words=_get(data, "validation_words", str, None),
        output_dir=_get(data, "output_dir", str, "out"),
        seed=seed,
        normalization=_get(pipe, "normalization", str, DEFAULT_NORMALIZATION),
        static_dim=_get(pipe, "static_dim", int, DEFAULT_STATIC_DIM),
        contextual_dim=_get(pipe, "contextual_dim", int, DEFAULT_CONTEXTUAL_DIM),
        max_contexts=_get(pipe, "max_contexts", int, DEFAULT_MAX_CONTEXTS),
        validation_limit=_get(pipe, "validation_limit", int, DEFAULT_VALIDATION_LIMIT),
        top_n=_get(pipe, "top_n", int, 1),
        self_learn=self_learn_config,
        spring=spring_config,
        interpolation=interpolation_config,
        tune_interpolation=_get(it, "tune", bool, True),
    )
    return config


def _config_snapshot(config: PipelineConfig) -> dict:
    snapshot = {}
    for key, value in vars(config).items():
        if hasattr(value, "__dict__"):
            snapshot[key] = {k: _plain(v) for k, v in vars(value).items()}
        else:
            snapshot[key] = _plain(value)
    return snapshot


def _plain(value):
    if isinstance(value, tuple):
        return list(value)
    return value


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class RunManifest:
    toolkit_version: str
    seed: int
    config: dict
    stages: list[dict] = field(default_factory=list)
    outputs: dict[str, str] = field(default_factory=dict)
    status: str = "running"
    failed_stage: str | None = None

    def record_output(self, root: Path, path: Path) -> None:
        self.outputs[str(path.relative_to(root))] = sha256_file(path)

    def to_json(self) -> str:
        return json.dumps(
            {
                "toolkit_version": self.toolkit_version,
                "seed": self.seed,
                "status": self.status,
                "failed_stage": self.failed_stage,
                "stages": self.stages,
                "outputs": self.outputs,
                "config": self.config,
            },
            indent=2,
            sort_keys=True,
        )

    def write(self, root: Path) -> None:
        (root / "manifest.json").write_text(self.to_json() + "\n", encoding="utf-8")


@dataclass
class PipelineResult:
    manifest: RunManifest
    report: EvalReport | None
    output_dir: Path


class _StageRunner:
    def __init__(self, manifest: RunManifest, root: Path):
        self.manifest = manifest
        self.root = root

    def run(self, name: str, func):
        start = time.perf_counter()
        try:
            result = func()
        except Exception as exc:
            self.manifest.stages.append(
                {"name": name, "seconds": time.perf_counter() - start}
            )
            self.manifest.status = "failed"
            self.manifest.failed_stage = name
            self.manifest.write(self.root)
            raise PipelineStageError(name, exc) from exc
        self.manifest.stages.append({"name": name, "seconds": time.perf_counter() - start})
        return result


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    """Execute every stage the config enables and write all artifacts.

    Stage order: load/normalize statics, self-learning alignment, mapping,
    anchor construction and alignment (when dumps are given), spring
    training, lambda tuning (when anchors and validation words exist),
    translation, and P@1 evaluation (when a gold dictionary is given).
    Anchor-free configs degrade to static-only retrieval.
    """
    config.validate()
    root = Path(config.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        toolkit_version=__version__, seed=config.seed, config=_config_snapshot(config)
    )
    stages = _StageRunner(manifest, root)
    static_dim = config.static_dim or None
    contextual_dim = config.contextual_dim or None

    def load_statics():
        src = load_embeddings(config.src_embeddings, expected_dim=static_dim)
        tgt = load_embeddings(config.tgt_embeddings, expected_dim=static_dim)
        return normalize(src, config.normalization), normalize(tgt, config.normalization)

    src_norm, tgt_norm = stages.run("load-static", load_statics)

    model = stages.run("self-learn", lambda: self_learn(src_norm, tgt_norm, config.self_learn))
    model_path = root / "alignment_model.txt"
    save_alignment_model(model, model_path)
    manifest.record_output(root, model_path)

    def map_statics():
        src_mapped = map_space(src_norm, model, "src")
        tgt_mapped = map_space(tgt_norm, model, "tgt")
        save_embeddings(src_mapped, root / "mapped_src.vec")
        save_embeddings(tgt_mapped, root / "mapped_tgt.vec")
        return src_mapped, tgt_mapped

    src_mapped, tgt_mapped = stages.run("map-static", map_statics)
    manifest.record_output(root, root / "mapped_src.vec")
    manifest.record_output(root, root / "mapped_tgt.vec")

    induced = stages.run(
        "induce",
        lambda: induce(
            src_mapped, tgt_mapped, metric=config.self_learn.metric, k=config.self_learn.csls_k
        ),
    )
    induced_path = root / "induced.tsv"
    with open(induced_path, "w", encoding="utf-8") as handle:
        for i, j, score in induced.pairs:
            src_word = src_mapped.vocab.word_at(i)
            tgt_word = tgt_mapped.vocab.word_at(j)
            handle.write(f"{src_word}\t{tgt_word}\t{score!r}\n")
    manifest.record_output(root, induced_path)

    anchors_src = anchors_tgt = None
    if config.src_dump and config.tgt_dump:
        def build_anchors():
            src_dump = load_occurrence_dump(config.src_dump)
            tgt_dump = load_occurrence_dump(config.tgt_dump)
            for name, dump in (("src", src_dump), ("tgt", tgt_dump)):
                if contextual_dim and dump.dim != contextual_dim:
                    raise ValueError(
                        f"{name} dump dimension {dump.dim} does not match expected {contextual_dim}"
                    )
            src_table = build_anchor_table(
                src_dump, src_norm.vocab, max_contexts=config.max_contexts, rng_seed=config.seed
            )
            tgt_table = build_anchor_table(
                tgt_dump, tgt_norm.vocab, max_contexts=config.max_contexts, rng_seed=config.seed
            )
            mapped_src, mapped_tgt, anchor_model = align_anchors(
                src_table, tgt_table, config.self_learn, normalization=config.normalization
            )
            save_embeddings(mapped_src, root / "anchors_src.vec")
            save_embeddings(mapped_tgt, root / "anchors_tgt.vec")
            save_alignment_model(anchor_model, root / "anchor_model.txt")
            return mapped_src, mapped_tgt

        anchors_src, anchors_tgt = stages.run("align-anchors", build_anchors)
        for name in ("anchors_src.vec", "anchors_tgt.vec", "anchor_model.txt"):
            manifest.record_output(root, root / name)

    def fit_spring():
        training = train_spring(src_mapped, tgt_mapped, induced, config.spring)
        save_spring_network(training.network, root / "spring.txt")
        save_loss_log(training.epoch_losses, root / "spring_loss.tsv")
        return training

    training = stages.run("train-spring", fit_spring)
    manifest.record_output(root, root / "spring.txt")
    manifest.record_output(root, root / "spring_loss.tsv")

    unified_src = unify(src_mapped, training.network, "src")
    unified_tgt = unify(tgt_mapped, training.network, "tgt")

    interpolation = config.interpolation
    if anchors_src is not None and config.tune_interpolation:
        def pick_lambda():
            if config.validation_words:
                with open(config.validation_words, encoding="utf-8") as handle:
                    words = [line.strip() for line in handle if line.strip()]
            else:
                words = list(unified_src.space.vocab.words[: config.validation_limit])
            lam = tune_lambda(
                words,
                unified_src,
                unified_tgt,
                anchors_src,
                anchors_tgt,
                grid=interpolation.lambda_grid,
                metric=interpolation.metric,
                missing_anchor_policy=interpolation.missing_anchor_policy,
                csls_k=interpolation.csls_k,
            )
            return lam

        tuned = stages.run("tune-lambda", pick_lambda)
        interpolation = InterpolationConfig(
            lambda_weight=tuned,
            lambda_grid=interpolation.lambda_grid,
            metric=interpolation.metric,
            missing_anchor_policy=interpolation.missing_anchor_policy,
            csls_k=interpolation.csls_k,
        )
    manifest.config["interpolation"]["lambda_weight"] = interpolation.lambda_weight

    gold = load_dictionary(config.gold_dictionary, name="gold") if config.gold_dictionary else None

    def run_translate():
        if gold is not None:
            words = list(gold.entries)
        else:
            words = list(unified_src.space.vocab.words)
        if anchors_src is not None:
            results = translate_all(
                words, unified_src, unified_tgt, anchors_src, anchors_tgt,
                config=interpolation, top_n=config.top_n,
            )
        else:
            static_only = InterpolationConfig(
                lambda_weight=0.0,
                metric=interpolation.metric,
                missing_anchor_policy=interpolation.missing_anchor_policy,
                csls_k=interpolation.csls_k,
            )
            results = translate_all(
                words, unified_src, unified_tgt, None, None,
                config=static_only, top_n=config.top_n,
            )
        with open(root / "translations.tsv", "w", encoding="utf-8") as handle:
            for word in words:
                if word not in results:
                    continue
                for target, score in results[word].candidates:
                    handle.write(f"{word}\t{target}\t{score!r}\n")
        return results

    results = stages.run("translate", run_translate)
    manifest.record_output(root, root / "translations.tsv")

    report = None
    if gold is not None:
        def run_eval():
            predictions = {
                word: result.top() for word, result in results.items() if result.candidates
            }
            return evaluate_p_at_1(predictions, gold)

        report = stages.run("evaluate", run_eval)
        (root / "eval.tsv").write_text(report.to_tsv(), encoding="utf-8")
        (root / "eval.json").write_text(report.to_json() + "\n", encoding="utf-8")
        manifest.record_output(root, root / "eval.tsv")
        manifest.record_output(root, root / "eval.json")

    manifest.status = "ok"
    manifest.write(root)
    return PipelineResult(manifest=manifest, report=report, output_dir=root)


def sweep_codeswitch(
    corpus_path: str,
    dictionary_path: str,
    general_corpus_path: str,
    domain_corpus_path: str,
    output_dir: str,
    alpha_grid: tuple[float, ...] = SWEEP_ALPHA_GRID,
    beta_grid: tuple[float, ...] = SWEEP_BETA_GRID,
    gamma_grid: tuple[float, ...] = SWEEP_GAMMA_GRID,
    seed: int = 0,
) -> list[Path]:
    """One switched corpus + manifest per (alpha, beta, gamma) grid point."""
    root = Path(output_dir)
    root.mkdir(parents=True, exist_ok=True)
    dictionary = load_dictionary(dictionary_path, name="codeswitch")
    table = build_frequency_table(
        read_corpus(general_corpus_path), read_corpus(domain_corpus_path)
    )
    manifests = []
    for alpha in alpha_grid:
        for beta in beta_grid:
            for gamma in gamma_grid:
                tag = f"a{alpha}_b{beta}_g{gamma}"
                point_dir = root / tag
                point_dir.mkdir(exist_ok=True)
                config = CodeSwitchConfig(alpha=alpha, beta=beta, gamma=gamma, rng_seed=seed)
                out_path = point_dir / "switched.txt"
                report = switch_corpus_file(corpus_path, str(out_path), dictionary, table, config)
                manifest = RunManifest(
                    toolkit_version=__version__,
                    seed=seed,
                    config={
                        "alpha": alpha,
                        "beta": beta,
                        "gamma": gamma,
                        "corpus": corpus_path,
                        "dictionary": dictionary_path,
                    },
                )
                manifest.record_output(point_dir, out_path)
                manifest.config["report"] = report.summary()
                manifest.status = "ok"
                manifest.write(point_dir)
                manifests.append(point_dir / "manifest.json")
    return manifests
