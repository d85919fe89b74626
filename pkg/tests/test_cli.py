"""End-to-end CLI runs on a small synthetic WAV corpus."""

import json
import shutil

import numpy as np
import pytest

from audiotag.cli import (
    compare_runs,
    config_hash,
    derive_seed,
    load_config,
    main,
    run_experiment,
)
from audiotag.dataset import write_wav
from synthdata import make_corpus

TINY_TAGGER = {
    "context": 3,
    "noise_frames": 6,
    "hidden_sizes": [16, 8],
    "epochs": 3,
    "batch_size": 64,
    "train_stride": 10,
    "predict_stride": 4,
    "validation_fraction": 0.0,
    "patience": 5,
}


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    records, chunks = make_corpus(24, seed=5, n_folds=2)
    lines = []
    for rec in records:
        labels = "".join(sorted(rec.tags.labels))
        lines.append("%s,%s,%d" % (rec.chunk_id, labels, rec.fold))
        write_wav(root / (rec.chunk_id + ".wav"), chunks[rec.chunk_id].samples)
    (root / "chunks.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return root


def write_config(path, corpus_dir, out_dir, family="dnn", **extra):
    config = {
        "dataset": {"chunk_csv": str(corpus_dir / "chunks.csv")},
        "family": family,
        "folds": [0, 1],
        "seed": 77,
        "output_dir": str(out_dir),
        "tagger": dict(TINY_TAGGER),
        "dae": {
            "context_frames": 3,
            "encoder_hidden": [16],
            "bottleneck": 8,
            "decoder_hidden": [16],
            "epochs": 2,
            "batch_size": 64,
        },
        "gmm": {"n_components": 2, "n_iters": 5},
        "svm": {"reg_a": 1.0, "epochs": 60, "max_outer_iters": 5, "frame_stride": 40},
    }
    config.update(extra)
    path.write_text(json.dumps(config), encoding="utf-8")
    return config


class TestSeedDerivation:
    def test_stable_and_distinct(self):
        assert derive_seed(1, "tagger") == derive_seed(1, "tagger")
        assert derive_seed(1, "tagger") != derive_seed(1, "dae")
        assert derive_seed(1, "tagger") != derive_seed(2, "tagger")


class TestConfigValidation:
    def test_missing_dataset_is_config_error(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"output_dir": "x"}), encoding="utf-8")
        assert main(["run", "--config", str(path)]) == 2

    def test_unknown_family_rejected(self, tmp_path, corpus_dir):
        path = tmp_path / "bad.json"
        write_config(path, corpus_dir, tmp_path / "out", family="cnn")
        assert main(["run", "--config", str(path)]) == 2

    def test_bad_tagger_key_rejected_before_compute(self, tmp_path, corpus_dir):
        path = tmp_path / "bad.json"
        config = write_config(path, corpus_dir, tmp_path / "out")
        config["tagger"]["not_a_field"] = 1
        path.write_text(json.dumps(config), encoding="utf-8")
        assert main(["run", "--config", str(path)]) == 2

    def test_missing_chunk_csv_is_config_error(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(
            json.dumps({"dataset": {"chunk_csv": "/nope.csv"}, "output_dir": "x"}),
            encoding="utf-8",
        )
        assert main(["run", "--config", str(path)]) == 2

    def test_missing_wav_is_data_error(self, tmp_path, corpus_dir):
        broken = tmp_path / "broken"
        broken.mkdir()
        text = (corpus_dir / "chunks.csv").read_text(encoding="utf-8")
        (broken / "chunks.csv").write_text(text + "ghost,c,0\n", encoding="utf-8")
        for wav in corpus_dir.glob("*.wav"):
            shutil.copy(wav, broken / wav.name)
        path = tmp_path / "cfg.json"
        write_config(path, broken, tmp_path / "out")
        assert main(["run", "--config", str(path)]) == 3


class TestDnnExperiment:
    def test_run_produces_artifact_tree_and_report(self, tmp_path, corpus_dir):
        out = tmp_path / "out"
        cfg_path = tmp_path / "cfg.json"
        write_config(cfg_path, corpus_dir, out)
        config = load_config(cfg_path)
        report = run_experiment(config)

        assert (out / "models" / "dnn-fold0.model").exists()
        assert (out / "scores" / "dnn-fold0.csv").exists()
        assert (out / "reports" / "dnn-report.csv").exists()
        assert (out / "manifest.json").exists()
        assert set(report.per_tag_eer) == set("bcfmopv")
        # separable corpus, tiny budget: still should be far better than chance
        assert report.average_eer < 0.35

    def test_rerun_is_bit_reproducible(self, tmp_path, corpus_dir):
        out = tmp_path / "out"
        cfg_path = tmp_path / "cfg.json"
        write_config(cfg_path, corpus_dir, out)
        config = load_config(cfg_path)
        run_experiment(config)
        first = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
        run_experiment(config)
        second = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
        assert first["config_hash"] == second["config_hash"] == config_hash(config)
        assert first["files"] == second["files"]

    def test_dataset_directory_not_mutated(self, tmp_path, corpus_dir):
        before = sorted(p.name for p in corpus_dir.iterdir())
        cfg_path = tmp_path / "cfg.json"
        write_config(cfg_path, corpus_dir, tmp_path / "out")
        run_experiment(load_config(cfg_path))
        assert sorted(p.name for p in corpus_dir.iterdir()) == before


class TestOtherFamilies:
    def test_gmm_family_produces_table_shaped_report(self, tmp_path, corpus_dir):
        cfg_path = tmp_path / "cfg.json"
        write_config(cfg_path, corpus_dir, tmp_path / "out", family="gmm")
        report = run_experiment(load_config(cfg_path))
        assert set(report.per_tag_eer) == set("bcfmopv")
        assert (tmp_path / "out" / "models" / "gmm-fold0.json").exists()

    def test_dae_dnn_family_writes_dae_artifacts(self, tmp_path, corpus_dir):
        cfg_path = tmp_path / "cfg.json"
        write_config(cfg_path, corpus_dir, tmp_path / "out", family="dae+dnn")
        report = run_experiment(load_config(cfg_path))
        assert (tmp_path / "out" / "models" / "dae-fold0.model").exists()
        assert (tmp_path / "out" / "models" / "dnn-dae-fold0.model").exists()
        assert not np.isnan(report.average_eer)

    def test_chunksvm_family_runs(self, tmp_path, corpus_dir):
        cfg_path = tmp_path / "cfg.json"
        write_config(cfg_path, corpus_dir, tmp_path / "out", family="chunksvm",
                     feature_kind="mfcc")
        report = run_experiment(load_config(cfg_path))
        assert (tmp_path / "out" / "models" / "chunksvm-fold0.json").exists()
        assert not np.isnan(report.average_eer)

    def test_misvm_family_runs(self, tmp_path, corpus_dir):
        cfg_path = tmp_path / "cfg.json"
        write_config(cfg_path, corpus_dir, tmp_path / "out", family="misvm",
                     feature_kind="mfcc")
        report = run_experiment(load_config(cfg_path))
        assert (tmp_path / "out" / "models" / "misvm-fold0.json").exists()
        assert not np.isnan(report.average_eer)


class TestSubcommands:
    def test_extract_predict_evaluate_chain(self, tmp_path, corpus_dir, capsys):
        out = tmp_path / "out"
        cfg_path = tmp_path / "cfg.json"
        write_config(cfg_path, corpus_dir, out)
        assert main(["extract-features", "--config", str(cfg_path)]) == 0
        assert main(["train-dnn", "--config", str(cfg_path), "--fold", "0"]) == 0

        scores_csv = tmp_path / "scores.csv"
        assert main([
            "predict", "--config", str(cfg_path),
            "--model", str(out / "models" / "dnn-fold0.model"),
            "--output", str(scores_csv),
        ]) == 0
        assert scores_csv.exists()

        assert main([
            "evaluate", "--scores", str(scores_csv),
            "--chunks", str(corpus_dir / "chunks.csv"),
            "--fold", "0", "--system", "dnn",
            "--output", str(tmp_path / "eval.csv"),
        ]) == 0
        out_text = capsys.readouterr().out
        assert "| dnn |" in out_text

    def test_compare_reports(self, tmp_path, corpus_dir):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        cfg_a, cfg_b = tmp_path / "a.json", tmp_path / "b.json"
        write_config(cfg_a, corpus_dir, out_a)
        write_config(cfg_b, corpus_dir, out_b, family="gmm")
        run_experiment(load_config(cfg_a))
        run_experiment(load_config(cfg_b))

        table = compare_runs([
            str(out_a / "reports" / "dnn-report.csv"),
            str(out_b / "reports" / "gmm-report.csv"),
        ])
        assert table[0][0] == "system"
        assert len(table) == 4  # header, two systems, one delta row
        base = [float(v) for v in table[1][1:]]
        other = [float(v) for v in table[2][1:]]
        deltas = [float(v) for v in table[3][1:]]
        for b, o, d in zip(base, other, deltas):
            assert d == pytest.approx(o - b, abs=1e-9)

    def test_compare_with_itself_gives_zero_deltas(self, tmp_path, corpus_dir):
        out = tmp_path / "out"
        cfg = tmp_path / "cfg.json"
        write_config(cfg, corpus_dir, out)
        run_experiment(load_config(cfg))
        report = str(out / "reports" / "dnn-report.csv")
        table = compare_runs([report, report])
        assert all(float(v) == 0.0 for v in table[-1][1:])

    def test_compare_needs_two_reports(self):
        with pytest.raises(Exception):
            compare_runs(["only-one.csv"])
