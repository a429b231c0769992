import json

import numpy as np
import pytest

from synth import random_orthogonal
from domlex.cli import main
from domlex.errors import PipelineStageError
from domlex.pipeline import (
    PipelineConfig,
    load_pipeline_config,
    run_pipeline,
    sweep_codeswitch,
)
from domlex.store import EmbeddingSpace, Vocabulary, save_embeddings


def write_fixture(tmp_path, n=120, static_dim=12, anchor_dim=16, seed=0):
    """Rotated static spaces + rotated anchor dumps + identity gold dictionary."""
    rng = np.random.default_rng(seed)
    base = rng.normal(size=(n, static_dim))
    q = random_orthogonal(static_dim, rng)
    src_words = [f"s{i:03d}" for i in range(n)]
    tgt_words = [f"t{i:03d}" for i in range(n)]
    save_embeddings(
        EmbeddingSpace(vocab=Vocabulary.from_words(src_words), matrix=base),
        str(tmp_path / "src.vec"),
    )
    save_embeddings(
        EmbeddingSpace(vocab=Vocabulary.from_words(tgt_words), matrix=base @ q),
        str(tmp_path / "tgt.vec"),
    )

    anchor_base = rng.normal(size=(n, anchor_dim))
    q2 = random_orthogonal(anchor_dim, rng)
    for name, words, rows in (
        ("src.dump", src_words, anchor_base),
        ("tgt.dump", tgt_words, anchor_base @ q2),
    ):
        with open(tmp_path / name, "w", encoding="utf-8") as handle:
            handle.write(f"#dim {anchor_dim} layer 1\n")
            for sid, (word, row) in enumerate(zip(words, rows)):
                values = " ".join(repr(float(v)) for v in row)
                handle.write(f"{word}\t{sid}\t{values}\n")

    with open(tmp_path / "gold.tsv", "w", encoding="utf-8") as handle:
        for s, t in zip(src_words, tgt_words):
            handle.write(f"{s}\t{t}\n")
    return src_words, tgt_words


def write_config(tmp_path, out_dir, with_dumps=True, seed=0):
    lines = [
        "[data]",
        f"src_embeddings = {tmp_path / 'src.vec'}",
        f"tgt_embeddings = {tmp_path / 'tgt.vec'}",
        f"gold_dictionary = {tmp_path / 'gold.tsv'}",
        f"output_dir = {out_dir}",
    ]
    if with_dumps:
        lines += [
            f"src_dump = {tmp_path / 'src.dump'}",
            f"tgt_dump = {tmp_path / 'tgt.dump'}",
        ]
    lines += [
        "",
        "[pipeline]",
        f"seed = {seed}",
        "static_dim = 12",
        "contextual_dim = 16",
        "validation_limit = 60",
        "",
        "[self_learn]",
        "max_iterations = 15",
        "",
        "[spring]",
        "epochs = 4",
        "learning_rate = 0.01",
        "",
        "[interpolation]",
        "lambda_grid = 0.0,0.5,1.0",
    ]
    path = tmp_path / ("run.ini" if with_dumps else "run_static.ini")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)


class TestRunPipeline:
    def test_full_fixture_reaches_high_precision(self, tmp_path):
        write_fixture(tmp_path)
        config = load_pipeline_config(write_config(tmp_path, tmp_path / "out"))
        result = run_pipeline(config)
        assert result.report is not None
        assert result.report.p_at_1 >= 0.99
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["status"] == "ok"
        stage_names = [s["name"] for s in manifest["stages"]]
        assert "align-anchors" in stage_names and "tune-lambda" in stage_names

    def test_static_only_degradation(self, tmp_path):
        write_fixture(tmp_path)
        config = load_pipeline_config(write_config(tmp_path, tmp_path / "out", with_dumps=False))
        result = run_pipeline(config)
        assert result.report is not None
        assert result.report.p_at_1 >= 0.99
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        stage_names = [s["name"] for s in manifest["stages"]]
        assert "align-anchors" not in stage_names and "tune-lambda" not in stage_names

    def test_identical_runs_produce_identical_hashes(self, tmp_path):
        write_fixture(tmp_path)
        first = run_pipeline(load_pipeline_config(write_config(tmp_path, tmp_path / "a")))
        second = run_pipeline(load_pipeline_config(write_config(tmp_path, tmp_path / "b")))
        assert first.manifest.outputs == second.manifest.outputs
        assert set(first.manifest.outputs) >= {
            "alignment_model.txt",
            "mapped_src.vec",
            "mapped_tgt.vec",
            "induced.tsv",
            "spring.txt",
            "translations.tsv",
            "eval.json",
        }

    def test_stage_failure_reports_stage_and_partial_manifest(self, tmp_path):
        write_fixture(tmp_path)
        # corrupt the target dump header so the anchor stage fails
        (tmp_path / "tgt.dump").write_text("#dim nope layer 1\n", encoding="utf-8")
        config = load_pipeline_config(write_config(tmp_path, tmp_path / "out"))
        with pytest.raises(PipelineStageError) as err:
            run_pipeline(config)
        assert err.value.stage == "align-anchors"
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["status"] == "failed"
        assert manifest["failed_stage"] == "align-anchors"

    def test_missing_input_rejected_before_running(self, tmp_path):
        config = PipelineConfig(
            src_embeddings=str(tmp_path / "absent.vec"),
            tgt_embeddings=str(tmp_path / "absent.vec"),
            output_dir=str(tmp_path / "out"),
        )
        with pytest.raises(FileNotFoundError):
            run_pipeline(config)


class TestSweep:
    def test_one_manifest_per_grid_point(self, tmp_path):
        (tmp_path / "corpus.txt").write_text("the cat sat\nscalpel suture\n", encoding="utf-8")
        (tmp_path / "dict.tsv").write_text("cat\t猫\nscalpel\t手术刀\n", encoding="utf-8")
        (tmp_path / "general.txt").write_text("the cat sat the\n", encoding="utf-8")
        (tmp_path / "domain.txt").write_text("scalpel suture\n", encoding="utf-8")
        manifests = sweep_codeswitch(
            str(tmp_path / "corpus.txt"),
            str(tmp_path / "dict.tsv"),
            str(tmp_path / "general.txt"),
            str(tmp_path / "domain.txt"),
            str(tmp_path / "sweep"),
            alpha_grid=(0.4, 1.0),
            beta_grid=(0.5,),
            gamma_grid=(0.5, 1.0),
            seed=1,
        )
        assert len(manifests) == 4
        for path in manifests:
            data = json.loads(path.read_text())
            assert data["status"] == "ok"
            assert "switched.txt" in data["outputs"]


class TestCli:
    def test_align_and_eval_round_trip(self, tmp_path, capsys):
        write_fixture(tmp_path, n=80)
        code = main(
            [
                "align",
                "--src", str(tmp_path / "src.vec"),
                "--tgt", str(tmp_path / "tgt.vec"),
                "--model-out", str(tmp_path / "model.txt"),
                "--mapped-src", str(tmp_path / "mapped_src.vec"),
                "--mapped-tgt", str(tmp_path / "mapped_tgt.vec"),
                "--max-iterations", "10",
            ]
        )
        assert code == 0
        code = main(
            [
                "translate",
                "--unified-src", str(tmp_path / "mapped_src.vec"),
                "--unified-tgt", str(tmp_path / "mapped_tgt.vec"),
                "--lambda", "0.0",
                "--top-n", "1",
                "--out", str(tmp_path / "pred.tsv"),
            ]
        )
        assert code == 0
        code = main(
            [
                "eval",
                "--pred", str(tmp_path / "pred.tsv"),
                "--gold", str(tmp_path / "gold.tsv"),
            ]
        )
        assert code == 0
        summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert summary["p_at_1"] >= 0.99
        assert summary["evaluated"] == 80

    def test_codeswitch_alpha_zero_identity(self, tmp_path):
        corpus = tmp_path / "corpus.txt"
        corpus.write_text("the cat sat\non the mat\n", encoding="utf-8")
        (tmp_path / "dict.tsv").write_text("cat\t猫\n", encoding="utf-8")
        (tmp_path / "general.txt").write_text("the cat sat on the mat\n", encoding="utf-8")
        (tmp_path / "domain.txt").write_text("scalpel\n", encoding="utf-8")
        out = tmp_path / "switched.txt"
        code = main(
            [
                "codeswitch",
                "--corpus", str(corpus),
                "--dict", str(tmp_path / "dict.tsv"),
                "--general-corpus", str(tmp_path / "general.txt"),
                "--domain-corpus", str(tmp_path / "domain.txt"),
                "--alpha", "0", "--beta", "1", "--gamma", "1",
                "--seed", "3",
                "--out", str(out),
                "--report", str(tmp_path / "report.json"),
            ]
        )
        assert code == 0
        assert out.read_bytes() == corpus.read_bytes()
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["tokens_replaced"] == 0

    def test_run_subcommand(self, tmp_path, capsys):
        write_fixture(tmp_path)
        config_path = write_config(tmp_path, tmp_path / "out")
        assert main(["run", "--config", config_path]) == 0
        out = capsys.readouterr().out
        assert '"p_at_1"' in out

    def test_usage_error_exit_code(self):
        assert main(["align", "--src", "only"]) == 1

    def test_data_error_exit_code(self, tmp_path):
        missing = str(tmp_path / "missing.vec")
        assert main(
            ["align", "--src", missing, "--tgt", missing, "--model-out", str(tmp_path / "m")]
        ) == 2

    def test_stage_failure_exit_code(self, tmp_path):
        write_fixture(tmp_path)
        (tmp_path / "tgt.dump").write_text("#dim nope layer 1\n", encoding="utf-8")
        config_path = write_config(tmp_path, tmp_path / "out")
        assert main(["run", "--config", config_path]) == 3
