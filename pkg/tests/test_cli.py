"""
Command-line workflow: init, generate, fit, predict, denoise, spectrum, sweep
Run with: pytest tests/test_cli.py -v
"""

import csv
import json

import pytest
from pathlib import Path
import sys

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root / "src"))

from markov_embedding.cli import SPECTRUM_COLUMNS, main
from markov_embedding.storage import read_dataset, read_json


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


@pytest.fixture
def generated(workdir):
    code = main([
        "generate", "--model", "finite", "--d-E", "2", "--L", "3", "--T", "40",
        "--sigma", "0.001", "--seed", "3",
    ])
    assert code == 0
    return workdir


class TestInit:
    def test_creates_config(self, workdir, capsys):
        assert main(["init"]) == 0
        assert (workdir / "embedding.config.yml").exists()
        assert "[OK]" in capsys.readouterr().out

    def test_refuses_to_overwrite(self, workdir, capsys):
        main(["init"])
        assert main(["init"]) == 1
        assert "[WARN]" in capsys.readouterr().err
        assert main(["init", "--force"]) == 0


class TestGenerate:
    def test_writes_three_files(self, generated):
        train = read_dataset(generated / "train.json")
        assert (train.L, train.T, train.d) == (3, 40, 2)
        assert train.noise_sigma == 0.001
        assert read_json(generated / "train.json")["clean_reference"] == "train_clean.json"
        test, clean = read_dataset(generated / "test.json", with_clean=True)
        assert test.L == 1 and clean is not None

    def test_noise_free_files_are_identical(self, workdir):
        assert main(["generate", "--d-E", "2", "--L", "2", "--T", "20", "--sigma", "0"]) == 0
        assert (workdir / "train.json").read_bytes() == (workdir / "train_clean.json").read_bytes()

    def test_invalid_parameters(self, workdir, capsys):
        assert main(["generate", "--model", "spin-boson", "--gamma", "5", "--T", "20"]) == 1
        assert "underdamped" in capsys.readouterr().err

    def test_uses_config(self, workdir):
        (workdir / "exp.yml").write_text(
            "model:\n  kind: finite\n  d_E: 2\ndataset:\n  L: 2\n  T: 25\n  sigma: 0\n  seed: 5\n",
            encoding="utf-8",
        )
        assert main(["generate", "--config", "exp.yml", "--T", "30"]) == 0
        train = read_dataset(workdir / "train.json")
        assert (train.L, train.T) == (2, 30)
        assert train.metadata["seed"] == 5

    def test_complex_alpha(self, workdir):
        for alpha in ("1.1,0.3", "1.1+0.3j"):
            code = main([
                "generate", "--model", "jc", "--alpha", alpha, "--n-levels", "6",
                "--L", "1", "--T", "10", "--sigma", "0",
            ])
            assert code == 0
            alpha_meta = read_dataset(workdir / "train.json").metadata["alpha"]
            assert alpha_meta == pytest.approx([1.1, 0.3])

    def test_bad_alpha(self, workdir, capsys):
        with pytest.raises(SystemExit):
            main(["generate", "--model", "jc", "--alpha", "big"])
        assert "--alpha" in capsys.readouterr().err

    def test_spin_boson_convergence_flag(self, workdir, capsys):
        base = ["generate", "--model", "spin-boson", "--L", "1", "--T", "100", "--check-convergence"]
        assert main(base) == 0
        assert main(base + ["--n-levels", "2", "--convergence-tol", "1e-6"]) == 1
        assert "has not converged" in capsys.readouterr().err

    def test_missing_config(self, workdir, capsys):
        assert main(["generate", "--config", "nope.yml"]) == 1
        assert "init" in capsys.readouterr().err


class TestFitAndPredict:
    def test_fit_report(self, generated, capsys):
        code = main([
            "fit", "--data", "train.json", "--K", "5",
            "--out-model", "model.json", "--report", "report.json",
        ])
        assert code == 0
        assert "r = " in capsys.readouterr().out
        report = read_json(generated / "report.json")
        assert 1 <= report["r"] <= 16
        assert report["natural_rank"] == 16
        assert report["threshold"]["sigma"] == 0.001
        assert len(report["eigenvalues"]) == report["r"]
        assert "spectrum_match" in report
        rates = report["continuous_rates"]
        assert len(rates) == report["r"]
        assert all(rate is None or rate[0] < 1e-2 for rate in rates)
        model = read_json(generated / "model.json")
        assert model["kind"] == "model" and len(model["fingerprint"]) == 64

    def test_threshold_from_config_and_flags(self, generated):
        (generated / "fit.yml").write_text("fit:\n  K: 5\n  sigma: 0.002\n", encoding="utf-8")
        assert main(["fit", "--config", "fit.yml", "--data", "train.json", "--report", "a.json"]) == 0
        assert read_json(generated / "a.json")["threshold"]["sigma"] == 0.002
        code = main([
            "fit", "--config", "fit.yml", "--data", "train.json", "--sigma", "0.0015",
            "--report", "b.json",
        ])
        assert code == 0
        assert read_json(generated / "b.json")["threshold"]["sigma"] == 0.0015

    def test_no_signal(self, generated, capsys):
        assert main(["fit", "--data", "train.json", "--K", "5", "--sigma", "10"]) == 1
        assert "[ERROR] no signal above noise threshold" in capsys.readouterr().err

    def test_K_not_below_T(self, generated, capsys):
        assert main(["fit", "--data", "train.json", "--K", "40"]) == 1
        assert "[ERROR]" in capsys.readouterr().err

    def test_select_K(self, generated):
        code = main([
            "fit", "--data", "train.json", "--select-K", "3", "5", "60",
            "--validation", "test.json", "--report", "report.json",
        ])
        assert code == 0
        selection = read_json(generated / "report.json")["memory_depth_selection"]
        assert selection["best_K"] in (3, 5)
        assert "60" in selection["failures"]

    def test_select_K_needs_validation(self, generated, capsys):
        assert main(["fit", "--data", "train.json", "--select-K", "3", "5"]) == 1
        assert "--validation" in capsys.readouterr().err

    def test_predict(self, generated):
        assert main(["fit", "--data", "train.json", "--K", "5", "--out-model", "model.json"]) == 0
        assert main(["predict", "--model", "model.json", "--data", "test.json", "--report"]) == 0
        rows = _read_csv(generated / "prediction.csv")
        assert len(rows) == 35
        assert list(rows[0]) == [
            "trajectory", "step", "pred_x", "pred_y", "pred_z", "data_x", "data_y", "data_z",
        ]
        assert rows[0]["step"] == "5"
        report = read_json(generated / "prediction.json")
        assert report["evaluated_steps"] == 35
        assert report["dist_test_clean"] < 0.2
        assert report["dist_test_data"] < 0.2

    def test_predict_beyond_data(self, generated):
        main(["fit", "--data", "train.json", "--K", "5", "--out-model", "model.json"])
        code = main([
            "predict", "--model", "model.json", "--data", "test.json",
            "--horizon", "50", "--out-csv", "long.csv", "--report", "long_report.json",
        ])
        assert code == 0
        rows = _read_csv(generated / "long.csv")
        assert len(rows) == 50
        assert rows[-1]["data_x"] == ""
        assert read_json(generated / "long_report.json")["evaluated_steps"] == 35

    def test_predict_rejects_bad_horizon(self, generated, capsys):
        main(["fit", "--data", "train.json", "--K", "5", "--out-model", "model.json"])
        assert main(["predict", "--model", "model.json", "--data", "test.json", "--horizon", "0"]) == 1
        assert "--horizon" in capsys.readouterr().err


class TestDenoiseAndSpectrum:
    def test_denoise(self, generated, capsys):
        assert main(["denoise", "--data", "train.json", "--K", "5", "--out", "den.json"]) == 0
        assert "rank" in capsys.readouterr().out
        denoised = read_dataset(generated / "den.json")
        assert denoised.trajectories.shape == (3, 40, 2, 2)
        assert 1 <= denoised.metadata["denoised_rank"] <= 16

    def test_denoise_noise_free_is_unchanged(self, workdir):
        main(["generate", "--d-E", "2", "--L", "2", "--T", "20", "--sigma", "0"])
        assert main(["denoise", "--data", "train.json", "--K", "5", "--out", "den.json"]) == 0
        assert (workdir / "den.json").read_bytes() == (workdir / "train.json").read_bytes()

    def test_spectrum(self, generated):
        main(["fit", "--data", "train.json", "--K", "5", "--out-model", "model.json"])
        assert main(["spectrum", "--model", "model.json", "--data", "train.json"]) == 0
        rows = _read_csv(generated / "spectrum.csv")
        assert list(rows[0]) == SPECTRUM_COLUMNS
        assert len(rows) >= 16
        assert sum(1 for r in rows if r["source"] == "matched") >= 1

    def test_corrupt_model_file(self, generated, capsys):
        (generated / "model.json").write_text("{}", encoding="utf-8")
        assert main(["spectrum", "--model", "model.json", "--data", "train.json"]) == 1
        assert "format_version" in capsys.readouterr().err


class TestSweep:
    def test_small_memory_depth_sweep(self, workdir):
        code = main(["sweep", "fig3b", "--K", "5", "--sigma", "0", "--seeds", "0", "--out", "b.csv"])
        assert code == 0
        rows = _read_csv(workdir / "b.csv")
        assert len(rows) == 1
        assert list(rows[0]) == [
            "K", "sigma", "seed", "status", "r", "dist_clean", "dist_noisy", "runtime_s", "error",
        ]
        assert rows[0]["status"] == "ok"

    def test_failing_cells_are_reported(self, workdir, capsys):
        code = main([
            "sweep", "table1", "--d-E", "2", "--sigma", "0.01", "--T", "50", "--seeds", "0",
        ])
        assert code == 0
        rows = _read_csv(workdir / "table1.csv")
        assert rows[0]["status"] == "failed"
        assert "1 failed" in capsys.readouterr().out

    def test_spectrum_sweep_rejects_other_grids(self, workdir, capsys):
        assert main(["sweep", "fig3c", "--K", "5"]) == 1
        assert "only accepts --sigma" in capsys.readouterr().err


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "markov-embedding" in capsys.readouterr().out


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
