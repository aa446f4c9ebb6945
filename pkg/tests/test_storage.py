"""
Dataset and model files
Run with: pytest tests/test_storage.py -v
"""

import json

import pytest
from pathlib import Path
import sys

import numpy as np

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root / "src"))

from markov_embedding.embedding import ThresholdConfig, fit
from markov_embedding.errors import FileFormatError
from markov_embedding.models import FiniteEnvConfig, simulate_experiment
from markov_embedding.storage import (
    FORMAT_VERSION,
    decode_complex,
    encode_complex,
    file_fingerprint,
    model_to_dict,
    read_dataset,
    read_json,
    read_model,
    write_csv,
    write_dataset,
    write_json,
    write_model,
)

from test_embedding import depolarizing_dataset


@pytest.fixture
def experiment():
    return simulate_experiment(FiniteEnvConfig(d_E=2, generator_seed=1), 2, 20, 0.01, seed=1)


class TestComplexEncoding:
    def test_pairs(self):
        assert encode_complex(np.array([1 + 2j, -0.5j])) == [[1.0, 2.0], [0.0, -0.5]]
        assert np.array_equal(decode_complex([[1.0, 2.0], [0.0, -0.5]]), np.array([1 + 2j, -0.5j]))

    def test_bad_shapes(self):
        with pytest.raises(FileFormatError):
            decode_complex([1.0, 2.0, 3.0])
        with pytest.raises(FileFormatError):
            decode_complex([[1.0, 2.0]], shape=(2,))


class TestDatasetFiles:
    def test_roundtrip_is_exact(self, tmp_path, experiment):
        path = write_dataset(tmp_path / "train.json", experiment.train_noisy)
        loaded = read_dataset(path)
        assert np.array_equal(loaded.trajectories, experiment.train_noisy.trajectories)
        assert loaded.noise_sigma == 0.01
        assert loaded.metadata["kind"] == "finite"
        assert loaded.metadata["seed"] == 1

    def test_rewrite_is_byte_identical(self, tmp_path, experiment):
        first = write_dataset(tmp_path / "a.json", experiment.train_noisy)
        second = write_dataset(tmp_path / "b.json", read_dataset(first))
        assert first.read_bytes() == second.read_bytes()

    def test_layout(self, tmp_path, experiment):
        path = write_dataset(tmp_path / "train.json", experiment.train_noisy)
        data = json.loads(path.read_text(encoding="utf-8"))
        assert data["format_version"] == FORMAT_VERSION
        assert data["kind"] == "dataset"
        assert (data["L"], data["T"], data["d"]) == (2, 20, 2)
        assert len(data["trajectories"][0][0][0][0]) == 2

    def test_clean_reference(self, tmp_path, experiment):
        clean_path = write_dataset(tmp_path / "train_clean.json", experiment.train_clean)
        path = write_dataset(tmp_path / "train.json", experiment.train_noisy, clean_path=clean_path)
        assert read_json(path)["clean_reference"] == "train_clean.json"
        noisy, clean = read_dataset(path, with_clean=True)
        assert np.array_equal(clean.trajectories, experiment.train_clean.trajectories)

    def test_inline_clean_twin(self, tmp_path, experiment):
        path = write_dataset(tmp_path / "test.json", experiment.test_noisy, clean=experiment.test_clean)
        _, clean = read_dataset(path, with_clean=True)
        assert np.array_equal(clean.trajectories, experiment.test_clean.trajectories)

    def test_noise_free_dataset_is_its_own_twin(self, tmp_path):
        clean = simulate_experiment(FiniteEnvConfig(d_E=2), 1, 10, 0.0, seed=0).train_noisy
        path = write_dataset(tmp_path / "train.json", clean, clean_path=tmp_path / "other.json")
        assert "clean_reference" not in read_json(path)
        ds, twin = read_dataset(path, with_clean=True)
        assert twin is ds

    def test_missing_reference_warns(self, tmp_path, experiment):
        path = write_dataset(
            tmp_path / "train.json", experiment.train_noisy, clean_path=tmp_path / "gone.json"
        )
        _, clean = read_dataset(path, with_clean=True)
        assert clean is None

    def test_wrong_version(self, tmp_path, experiment):
        path = write_dataset(tmp_path / "train.json", experiment.train_noisy)
        data = read_json(path)
        data["format_version"] = 99
        write_json(path, data)
        with pytest.raises(FileFormatError, match="format_version"):
            read_dataset(path)

    def test_declared_shape_mismatch(self, tmp_path, experiment):
        path = write_dataset(tmp_path / "train.json", experiment.train_noisy)
        data = read_json(path)
        data["T"] = 21
        write_json(path, data)
        with pytest.raises(FileFormatError, match="declared shape"):
            read_dataset(path)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(FileFormatError):
            read_dataset(path)

    def test_model_file_is_not_a_dataset(self, tmp_path):
        model_path = write_model(tmp_path / "model.json", fit(depolarizing_dataset(), 1))
        with pytest.raises(FileFormatError, match="expected a dataset"):
            read_dataset(model_path)


class TestModelFiles:
    def test_roundtrip(self, tmp_path):
        model = fit(depolarizing_dataset(), 2, ThresholdConfig(floor=1e-10))
        path = write_model(tmp_path / "model.json", model, fingerprint="abc", variant="projected")
        loaded, header = read_model(path)
        assert loaded.r == model.r and loaded.K == 2 and loaded.d == 2
        assert np.array_equal(loaded.eigenvalues, model.eigenvalues)
        assert np.array_equal(loaded.E, model.E)
        assert np.array_equal(loaded.D, model.D)
        assert loaded.threshold == model.threshold
        assert header == {"fingerprint": "abc", "variant": "projected", "project": False}

    def test_broken_encoder_rejected(self, tmp_path):
        model = fit(depolarizing_dataset(), 1)
        data = model_to_dict(model)
        data["E"] = encode_complex(1.001 * model.E)
        path = write_json(tmp_path / "model.json", data)
        with pytest.raises(FileFormatError, match="ED - I"):
            read_model(path)

    def test_unsorted_eigenvalues_rejected(self, tmp_path):
        model = fit(depolarizing_dataset(), 1)
        data = model_to_dict(model)
        order = [3, 2, 1, 0]
        data["eigenvalues"] = encode_complex(model.eigenvalues[order])
        data["E"] = encode_complex(model.E[order])
        data["D"] = encode_complex(model.D[:, order])
        path = write_json(tmp_path / "model.json", data)
        with pytest.raises(FileFormatError, match="descending modulus"):
            read_model(path)

    def test_missing_field(self, tmp_path):
        data = model_to_dict(fit(depolarizing_dataset(), 1))
        del data["D"]
        path = write_json(tmp_path / "model.json", data)
        with pytest.raises(FileFormatError, match="missing field"):
            read_model(path)


class TestHelpers:
    def test_fingerprint_tracks_content(self, tmp_path):
        a = tmp_path / "a.txt"
        a.write_text("one", encoding="utf-8")
        first = file_fingerprint(a)
        assert len(first) == 64
        a.write_text("two", encoding="utf-8")
        assert file_fingerprint(a) != first

    def test_csv_column_order(self, tmp_path):
        path = write_csv(tmp_path / "out.csv", ["b", "a"], [{"a": 1, "b": 2, "c": 3}])
        assert path.read_text(encoding="utf-8") == "b,a\n2,1\n"

    def test_atomic_write_leaves_no_temp_files(self, tmp_path):
        write_json(tmp_path / "x.json", {"k": 1})
        assert [p.name for p in tmp_path.iterdir()] == ["x.json"]
