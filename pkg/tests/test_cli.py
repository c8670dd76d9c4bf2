from __future__ import annotations

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from postscreen.cli import main

from .conftest import FIXTURES_DIR, hindi_config_tree


@pytest.fixture
def runner():
    return CliRunner()


def write_config(tmp_path, tree, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(tree), encoding="utf-8")
    return path


class TestTrainCommand:
    def test_train_writes_model_and_report(self, runner, data_env, tmp_path):
        out = tmp_path / "run"
        config_path = write_config(tmp_path, hindi_config_tree(str(out)))
        result = runner.invoke(main, ["train", "--config", str(config_path)])
        assert result.exit_code == 0, result.output
        assert "weighted F1: 1.0000" in result.output
        assert (out / "model.json").is_file()
        assert (out / "report_validation_coarse.json").is_file()
        assert (out / "report_validation_fine.txt").is_file()
        assert (out / "manifest.json").is_file()

    def test_manifest_contents(self, runner, data_env, tmp_path):
        out = tmp_path / "run"
        config_path = write_config(tmp_path, hindi_config_tree(str(out)))
        result = runner.invoke(main, ["train", "--config", str(config_path)])
        assert result.exit_code == 0
        manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["command"] == "train"
        assert manifest["seed"] == 7
        assert len(manifest["config_hash"]) == 64
        assert set(manifest["inputs"]) == {"train", "validation"}
        for entry in manifest["inputs"].values():
            assert len(entry["sha256"]) == 64

    def test_grid_search_emits_log_and_keeps_best(self, runner, data_env, tmp_path):
        out = tmp_path / "grid"
        tree = hindi_config_tree(str(out))
        tree["grid"] = {"learning_rate": [0.1, 0.01]}
        config_path = write_config(tmp_path, tree)
        result = runner.invoke(main, ["train", "--config", str(config_path)])
        assert result.exit_code == 0, result.output
        assert "grid search: 2 candidates" in result.output
        lines = (out / "grid_log.jsonl").read_text(encoding="utf-8").splitlines()
        assert len(lines) == 2
        entries = [json.loads(line) for line in lines]
        assert sum(1 for e in entries if e.get("selected")) == 1

    def test_missing_embeddings_is_config_error(self, runner, data_env, tmp_path):
        tree = hindi_config_tree(str(tmp_path / "x"))
        tree["features"]["embed"] = True
        tree["paths"].pop("embeddings")
        config_path = write_config(tmp_path, tree)
        result = runner.invoke(main, ["train", "--config", str(config_path)])
        assert result.exit_code == 1
        assert "paths.embeddings" in result.output

    def test_flag_overrides_win_over_file(self, runner, data_env, tmp_path):
        out = tmp_path / "override"
        config_path = write_config(tmp_path, hindi_config_tree(str(tmp_path / "ignored")))
        result = runner.invoke(
            main,
            ["train", "--config", str(config_path), "--output-dir", str(out),
             "--set", "training.epochs=5"],
        )
        assert result.exit_code == 0, result.output
        manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["config"]["training"]["epochs"] == 5
        assert manifest["config"]["output_dir"] == str(out)

    def test_determinism_byte_identical_artifacts(self, runner, data_env, tmp_path):
        out = tmp_path / "det"
        config_path = write_config(tmp_path, hindi_config_tree(str(out)))
        artifacts = ["model.json", "report_validation_coarse.json",
                     "report_validation_fine.json", "manifest.json"]

        def run_and_snapshot():
            result = runner.invoke(main, ["train", "--config", str(config_path)])
            assert result.exit_code == 0, result.output
            return {name: (out / name).read_bytes() for name in artifacts}

        first = run_and_snapshot()
        second = run_and_snapshot()
        assert first == second


class TestEvaluateCommand:
    def test_prints_weighted_f1(self, runner, data_env, tmp_path, trained_hindi):
        config, trained = trained_hindi
        out = tmp_path / "eval"
        tree = hindi_config_tree(str(out))
        config_path = write_config(tmp_path, tree)
        result = runner.invoke(
            main,
            ["evaluate", "--config", str(config_path), "--model", trained.model_path,
             "--split", "test"],
        )
        assert result.exit_code == 0, result.output
        assert "weighted F1: 1.0000" in result.output
        assert (out / "report_test_coarse.json").is_file()

    def test_json_flag_machine_readable_only(self, runner, data_env, tmp_path,
                                             trained_hindi):
        _, trained = trained_hindi
        config_path = write_config(tmp_path, hindi_config_tree(str(tmp_path / "e2")))
        result = runner.invoke(
            main,
            ["evaluate", "--config", str(config_path), "--model", trained.model_path,
             "--split", "test", "--json"],
        )
        assert result.exit_code == 0, result.output
        body = json.loads(result.output)
        assert body["coarse"]["weighted_f1"] == 1.0

    def test_tampered_model_checksum_error(self, runner, data_env, tmp_path,
                                           trained_hindi):
        _, trained = trained_hindi
        tampered = tmp_path / "tampered.json"
        body = Path(trained.model_path).read_text(encoding="utf-8")
        tampered.write_text(
            body.replace('"positive_label":"hostile"', '"positive_label":"HOSTILE"', 1),
            encoding="utf-8",
        )
        config_path = write_config(tmp_path, hindi_config_tree(str(tmp_path / "e3")))
        result = runner.invoke(
            main,
            ["evaluate", "--config", str(config_path), "--model", str(tampered),
             "--split", "test"],
        )
        assert result.exit_code == 1
        assert "checksum" in result.output

    def test_library_call_equivalence_byte_for_byte(self, runner, data_env, tmp_path,
                                                    trained_hindi):
        config, trained = trained_hindi
        out = tmp_path / "eq"
        config_path = write_config(tmp_path, hindi_config_tree(str(out)))
        names = ("report_test_coarse.json", "report_test_coarse.txt",
                 "report_test_fine.json", "report_test_fine.txt", "manifest.json")
        result = runner.invoke(
            main,
            ["evaluate", "--config", str(config_path), "--model", trained.model_path,
             "--split", "test"],
        )
        assert result.exit_code == 0
        cli_bytes = {name: (out / name).read_bytes() for name in names}

        from postscreen.config import load_config
        from postscreen.runs import run_evaluate

        for name in names:
            (out / name).unlink()
        lib_config = load_config(config_path)
        run_evaluate(lib_config, trained.model_path, "test")
        lib_bytes = {name: (out / name).read_bytes() for name in names}
        assert cli_bytes == lib_bytes


class TestPredictCommand:
    def test_predictions_file(self, runner, data_env, tmp_path, trained_hindi):
        _, trained = trained_hindi
        out = tmp_path / "pred"
        config_path = write_config(tmp_path, hindi_config_tree(str(out)))
        result = runner.invoke(
            main,
            ["predict", "--config", str(config_path), "--model", trained.model_path,
             "--input", "hindi_test.tsv"],
        )
        assert result.exit_code == 0, result.output
        assert "20 rows predicted, 0 warnings" in result.output
        lines = (out / "predictions.tsv").read_text(encoding="utf-8").splitlines()
        assert len(lines) == 21
        header = lines[0].split("\t")
        assert header[:4] == ["id", "coarse", "fine", "score"]
        assert "score_offensive" in header
        ids = [line.split("\t")[0] for line in lines[1:]]
        first_data_id = (FIXTURES_DIR / "hindi_test.tsv").read_text(
            encoding="utf-8"
        ).splitlines()[1].split("\t")[0]
        assert ids[0] == first_data_id  # input order preserved

    def test_malformed_rows_skipped_with_warning_count(self, runner, data_env,
                                                       tmp_path, trained_hindi):
        _, trained = trained_hindi
        bad_input = tmp_path / "input.tsv"
        bad_input.write_text(
            "id\ttext\nx1\tकुछ पाठ\nbroken-line\nx2\tऔर पाठ\n", encoding="utf-8"
        )
        out = tmp_path / "pred2"
        config_path = write_config(tmp_path, hindi_config_tree(str(out)))
        result = runner.invoke(
            main,
            ["predict", "--config", str(config_path), "--model", trained.model_path,
             "--input", str(bad_input)],
        )
        assert result.exit_code == 0, result.output
        assert "2 rows predicted, 1 warnings" in result.output

    def test_empty_text_rows_predictable(self, runner, data_env, tmp_path,
                                         trained_hindi):
        _, trained = trained_hindi
        empty_input = tmp_path / "empty.tsv"
        empty_input.write_text("id\ttext\ne1\t\n", encoding="utf-8")
        out = tmp_path / "pred3"
        config_path = write_config(tmp_path, hindi_config_tree(str(out)))
        result = runner.invoke(
            main,
            ["predict", "--config", str(config_path), "--model", trained.model_path,
             "--input", str(empty_input)],
        )
        assert result.exit_code == 0, result.output
        assert "1 rows predicted" in result.output

    def test_columns_resolved_by_header_names(self, runner, data_env, tmp_path,
                                              trained_hindi):
        _, trained = trained_hindi
        swapped = tmp_path / "swapped.tsv"
        swapped.write_text("text\tid\nकुछ पाठ\tz9\n", encoding="utf-8")
        out = tmp_path / "pred4"
        config_path = write_config(tmp_path, hindi_config_tree(str(out)))
        result = runner.invoke(
            main,
            ["predict", "--config", str(config_path), "--model", trained.model_path,
             "--input", str(swapped)],
        )
        assert result.exit_code == 0, result.output
        lines = (out / "predictions.tsv").read_text(encoding="utf-8").splitlines()
        assert lines[1].split("\t")[0] == "z9"


class TestPreprocessCommand:
    def test_cleaned_file(self, runner, data_env, tmp_path):
        out = tmp_path / "prep"
        config_path = write_config(tmp_path, hindi_config_tree(str(out)))
        result = runner.invoke(
            main, ["preprocess", "--config", str(config_path), "--split", "train"]
        )
        assert result.exit_code == 0, result.output
        assert "cleaned 60 rows" in result.output
        lines = (out / "cleaned.tsv").read_text(encoding="utf-8").splitlines()
        assert lines[0].split("\t") == ["id", "tokens", "mentions", "urls",
                                        "hashtags", "emojis"]
        assert len(lines) == 61


class TestAblateCommand:
    def test_eight_rows_and_determinism(self, runner, data_env, tmp_path):
        out = tmp_path / "ab"
        tree = hindi_config_tree(str(out))
        tree["training"]["epochs"] = 8
        config_path = write_config(tmp_path, tree)
        result = runner.invoke(main, ["ablate", "--config", str(config_path)])
        assert result.exit_code == 0, result.output
        tables = json.loads((out / "ablation.json").read_text(encoding="utf-8"))
        assert set(tables) == {"coarse", "fine"}
        assert len(tables["coarse"]["rows"]) == 8
        first = (out / "ablation.json").read_bytes()
        result = runner.invoke(main, ["ablate", "--config", str(config_path)])
        assert result.exit_code == 0
        assert (out / "ablation.json").read_bytes() == first


class TestEnsembleAndAudit:
    def _train_two(self, runner, tmp_path):
        paths = []
        for seed in (7, 8):
            out = tmp_path / f"m{seed}"
            tree = hindi_config_tree(str(out))
            tree["seed"] = seed
            config_path = write_config(tmp_path, tree, name=f"c{seed}.json")
            result = runner.invoke(main, ["train", "--config", str(config_path)])
            assert result.exit_code == 0, result.output
            paths.append(str(out / "model.json"))
        return paths

    def test_ensemble_command(self, runner, data_env, tmp_path):
        members = self._train_two(runner, tmp_path)
        out = tmp_path / "ens"
        config_path = write_config(tmp_path, hindi_config_tree(str(out)))
        result = runner.invoke(
            main,
            ["ensemble", "--config", str(config_path),
             "--member", members[0], "--member", members[1]],
        )
        assert result.exit_code == 0, result.output
        assert "rule: majority" in result.output
        assert "weighted F1: 1.0000" in result.output

    def test_audit_command(self, runner, data_env, tmp_path):
        members = self._train_two(runner, tmp_path)
        out = tmp_path / "aud"
        config_path = write_config(tmp_path, hindi_config_tree(str(out)))
        result = runner.invoke(
            main,
            ["audit", "--config", str(config_path),
             "--model", members[0], "--model", members[1], "--split", "test"],
        )
        assert result.exit_code == 0, result.output
        assert "0 unanimous disagreements" in result.output
        assert (out / "disagreements.tsv").is_file()


class TestErrorPaths:
    def test_missing_config_file_exit_1(self, runner):
        result = runner.invoke(main, ["train", "--config", "/nope/missing.json"])
        assert result.exit_code == 1
        assert "config" in result.output

    def test_invalid_field_named_in_error(self, runner, data_env, tmp_path):
        tree = hindi_config_tree(str(tmp_path / "x"))
        tree["training"]["loss"] = "squared"
        config_path = write_config(tmp_path, tree)
        result = runner.invoke(main, ["train", "--config", str(config_path)])
        assert result.exit_code == 1
        assert "loss" in result.output

    def test_data_error_exit_2(self, runner, data_env, tmp_path):
        bad = tmp_path / "bad.tsv"
        bad.write_text("id\ttext\tlabel\n1\tx\twrong_label\n", encoding="utf-8")
        tree = hindi_config_tree(str(tmp_path / "y"))
        tree["paths"]["train"] = str(bad)
        config_path = write_config(tmp_path, tree)
        result = runner.invoke(main, ["train", "--config", str(config_path)])
        assert result.exit_code == 2
        assert "wrong_label" in result.output
