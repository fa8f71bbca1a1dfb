"""CLI subcommands through their public entry point."""

import json

import numpy as np
import pytest

from mbfdetect.cli import main
from mbfdetect.fileio import read_features_csv, read_report
from mbfdetect.mbfa import write_mbfa_file

from test_mbfa import random_records


@pytest.fixture()
def mbfa_file(tmp_path):
    path = tmp_path / "responses.mbfa"
    write_mbfa_file(path, random_records(60, layer_sizes=(40, 20, 10), seed=2))
    return path


def run(argv, capsys):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestExtractTrainDetectEval:
    def test_full_file_workflow(self, tmp_path, mbfa_file, capsys):
        feats = tmp_path / "feats.csv"
        model = tmp_path / "model.json"
        verdicts = tmp_path / "verdicts.csv"
        report = tmp_path / "report.json"

        code, out, _ = run(["extract", "--input", mbfa_file, "--output", feats,
                            "--T", 8], capsys)
        assert code == 0
        _, _, _, matrix = read_features_csv(feats)
        assert matrix.shape == (60, 24)

        code, out, _ = run(["train", "--features", feats, "--output", model,
                            "--seed", 3], capsys)
        assert code == 0

        code, out, _ = run(["detect", "--model", model, "--features", feats,
                            "--output", verdicts], capsys)
        assert code == 0
        lines = verdicts.read_text().strip().splitlines()
        assert lines[0] == "sample_id,posterior,verdict"
        assert len(lines) == 61

        code, out, _ = run(["eval", "--model", model, "--features", feats,
                            "--output", report], capsys)
        assert code == 0
        doc = read_report(report)
        assert doc["kind"] == "eval-report"
        assert 0.0 <= doc["auroc"] <= 1.0

    def test_detect_dimension_mismatch_fails_cleanly(self, tmp_path, mbfa_file, capsys):
        feats8 = tmp_path / "feats8.csv"
        feats4 = tmp_path / "feats4.csv"
        model = tmp_path / "model.json"
        run(["extract", "--input", mbfa_file, "--output", feats8, "--T", 8], capsys)
        run(["extract", "--input", mbfa_file, "--output", feats4, "--T", 4], capsys)
        run(["train", "--features", feats8, "--output", model], capsys)
        code, _, err = run(["detect", "--model", model, "--features", feats4,
                            "--output", tmp_path / "v.csv"], capsys)
        assert code == 2
        parsed = json.loads(err.strip().splitlines()[-1])
        assert "dimension" in parsed["message"]

    def test_bad_magic_fails_cleanly(self, tmp_path, capsys):
        bad = tmp_path / "bad.mbfa"
        bad.write_bytes(b"JUNKJUNKJUNK")
        code, _, err = run(["extract", "--input", bad,
                            "--output", tmp_path / "x.csv"], capsys)
        assert code == 2
        parsed = json.loads(err.strip().splitlines()[-1])
        assert parsed["error"] == "MbfaBadMagic"


class TestVerifyTheorem1:
    def test_report_contains_predictions(self, tmp_path, capsys):
        out = tmp_path / "t1.json"
        code, stdout, _ = run(["verify-theorem1", "--c", 2, "--n", 1, "--m", 10000,
                               "--trials", 150, "--seed", 4, "--output", out], capsys)
        assert code == 0
        assert "predicted_mean 0.0088623" in stdout
        doc = read_report(out)
        assert doc["predicted_mean"] == pytest.approx(0.0088623, abs=5e-8)


class TestKstestAndStats:
    def test_kstest_separates_groups(self, tmp_path, mbfa_file, capsys):
        feats = tmp_path / "feats.csv"
        run(["extract", "--input", mbfa_file, "--output", feats, "--T", 8], capsys)
        out = tmp_path / "ks.json"
        code, stdout, _ = run(["kstest", "--features", feats, "--group-a", "clean",
                               "--group-b", "adversarial", "--output", out], capsys)
        assert code == 0
        doc = read_report(out)
        assert 0.0 <= doc["average_p"] <= 1.0
        assert len(doc["per_dimension_p"]) == 24

    def test_stats_csv(self, tmp_path, mbfa_file, capsys):
        feats = tmp_path / "feats.csv"
        run(["extract", "--input", mbfa_file, "--output", feats, "--T", 8], capsys)
        out = tmp_path / "stats.csv"
        code, _, _ = run(["stats", "--features", feats, "--output", out], capsys)
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "group,attack_id,dimension,mean,std,count"
        assert len(lines) > 24


class TestSchemaVersioning:
    def test_newer_major_model_rejected(self, tmp_path, mbfa_file, capsys):
        feats = tmp_path / "feats.csv"
        model = tmp_path / "model.json"
        run(["extract", "--input", mbfa_file, "--output", feats, "--T", 4], capsys)
        run(["train", "--features", feats, "--output", model], capsys)
        doc = json.loads(model.read_text())
        doc["schema_version"] = "2.0"
        model.write_text(json.dumps(doc))
        code, _, err = run(["detect", "--model", model, "--features", feats,
                            "--output", tmp_path / "v.csv"], capsys)
        assert code == 2
        parsed = json.loads(err.strip().splitlines()[-1])
        assert parsed["error"] == "SchemaVersionError"

    def test_newer_major_report_rejected(self, tmp_path):
        from mbfdetect.fileio import SchemaVersionError, read_report, write_report
        path = tmp_path / "r.json"
        write_report(path, "eval-report", {"auroc": 1.0})
        doc = json.loads(path.read_text())
        doc["schema_version"] = "3.1"
        path.write_text(json.dumps(doc))
        with pytest.raises(SchemaVersionError):
            read_report(path)


@pytest.mark.slow
class TestDemo:
    def test_demo_deterministic(self, tmp_path, capsys):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        code, _, _ = run(["demo", "--attack", "bim", "--seed", 7, "--quick",
                          "--outdir", out_a], capsys)
        assert code == 0
        code, _, _ = run(["demo", "--attack", "bim", "--seed", 7, "--quick",
                          "--outdir", out_b], capsys)
        assert code == 0
        for name in ("report.json", "statistics.csv", "desk_bim.mbfa",
                     "desk_bim_features.csv"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

    def test_demo_report_shape(self, tmp_path, capsys):
        out = tmp_path / "demo"
        code, _, _ = run(["demo", "--attack", "bim", "--seed", 11, "--quick",
                          "--outdir", out], capsys)
        assert code == 0
        doc = read_report(out / "report.json")
        assert doc["kind"] == "desk-demo"
        assert "non_transfer/bim" in doc["experiments"]
        assert "data_transfer/bim" in doc["experiments"]
        assert any(cell["test"] == "H2.1" for cell in doc["hypothesis_tests"])
