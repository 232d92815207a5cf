import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from coughscreen.emb1 import write_emb1
from coughscreen.errors import DimensionMismatch, MissingFeatures, TooFewSamples
from coughscreen.prep import (
    Dataset,
    ScalerParams,
    fit_scaler,
    load_manifest,
    transform,
    transform_dataset,
    write_manifest,
)


def _two_pass_mean_var(column: np.ndarray) -> tuple[float, float]:
    """Oracle: textbook two-pass mean and population variance."""
    mean = sum(column) / len(column)
    var = sum((x - mean) ** 2 for x in column) / len(column)
    return mean, var


class TestFitScaler:
    def test_two_point_column(self):
        data = Dataset(np.array([[0.0], [2.0]]), np.array([0, 1]), ["a", "b"])
        scaler = fit_scaler(data)
        assert scaler.mean[0] == 1.0
        assert scaler.std[0] == 1.0

    def test_constant_column_gets_zero_std(self):
        data = Dataset(np.array([[5.0], [5.0], [5.0]]), np.array([0, 1, 0]),
                       ["a", "b", "c"])
        scaler = fit_scaler(data)
        assert scaler.mean[0] == 5.0
        assert scaler.std[0] == 0.0

    def test_matches_two_pass_oracle(self):
        rng = np.random.default_rng(11)
        feats = rng.normal(3.0, 2.5, (100, 3))
        data = Dataset(feats, rng.integers(0, 2, 100), [str(i) for i in range(100)])
        scaler = fit_scaler(data)
        for d in range(3):
            mean, var = _two_pass_mean_var(feats[:, d])
            assert scaler.mean[d] == pytest.approx(mean, abs=1e-9)
            assert scaler.std[d] == pytest.approx(np.sqrt(var), abs=1e-9)

    def test_single_row_rejected(self):
        data = Dataset(np.array([[1.0, 2.0]]), np.array([1]), ["only"])
        with pytest.raises(TooFewSamples):
            fit_scaler(data)


class TestTransform:
    def test_mean_vector_maps_to_zero(self):
        scaler = ScalerParams(np.array([2.0, 3.0]), np.array([1.5, 0.5]), fitted_on=10)
        out = transform(np.array([2.0, 3.0]), scaler, l2=False)
        assert np.allclose(out, 0.0)

    def test_l2_gives_unit_norm(self):
        scaler = ScalerParams(np.zeros(4), np.ones(4), fitted_on=5)
        out = transform(np.array([1.0, -2.0, 3.0, 0.5]), scaler, l2=True)
        assert np.linalg.norm(out) == pytest.approx(1.0, abs=1e-9)

    def test_three_four_five_triangle(self):
        scaler = ScalerParams(np.zeros(2), np.ones(2), fitted_on=2)
        out = transform(np.array([3.0, 4.0]), scaler, l2=True)
        assert np.allclose(out, [0.6, 0.8])

    def test_zero_vector_passes_through_l2(self):
        scaler = ScalerParams(np.ones(3), np.ones(3), fitted_on=2)
        out = transform(np.ones(3), scaler, l2=True)
        assert np.allclose(out, 0.0)

    def test_constant_column_divides_by_one(self):
        scaler = ScalerParams(np.array([5.0]), np.array([0.0]), fitted_on=3)
        out = transform(np.array([7.0]), scaler, l2=False)
        assert out[0] == 2.0

    def test_dimension_mismatch(self):
        scaler = ScalerParams(np.zeros(3), np.ones(3), fitted_on=2)
        with pytest.raises(DimensionMismatch):
            transform(np.zeros(4), scaler)

    # lattice-valued features: distinct values differ by >= 1e-3, keeping the
    # 1e-9 claims out of catastrophic-cancellation territory
    @given(hnp.arrays(np.float64, st.tuples(st.integers(3, 25), st.integers(1, 6)),
                      elements=st.integers(-50_000, 50_000).map(lambda v: v / 1000.0)))
    @settings(max_examples=40, deadline=None)
    def test_fit_transform_centers_and_scales(self, feats):
        ids = [str(i) for i in range(feats.shape[0])]
        data = Dataset(feats, np.zeros(feats.shape[0], dtype=int), ids)
        scaler = fit_scaler(data)
        out = transform(feats, scaler, l2=False)
        assert np.all(np.abs(out.mean(axis=0)) < 1e-9)
        non_constant = scaler.std > 0
        assert np.all(np.abs(out[:, non_constant].std(axis=0) - 1.0) < 1e-9)

    @given(hnp.arrays(np.float64, st.tuples(st.integers(2, 12), st.integers(2, 5)),
                      elements=st.floats(-10, 10)))
    @settings(max_examples=40, deadline=None)
    def test_l2_output_unit_norm_or_zero(self, feats):
        scaler = ScalerParams(np.zeros(feats.shape[1]), np.ones(feats.shape[1]),
                              fitted_on=2)
        out = transform(feats, scaler, l2=True)
        norms = np.linalg.norm(out, axis=1)
        assert np.all((np.abs(norms - 1.0) < 1e-9) | (norms == 0.0))


class TestDataset:
    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValueError, match="unique"):
            Dataset(np.zeros((2, 2)), np.array([0, 1]), ["x", "x"])

    def test_nan_rejected(self):
        with pytest.raises(ValueError, match="NaN"):
            Dataset(np.array([[np.nan, 0.0]]), np.array([0]), ["x"])

    def test_subset_preserves_order(self):
        data = Dataset(np.arange(6).reshape(3, 2), np.array([0, 1, 0]),
                       ["a", "b", "c"])
        sub = data.subset(["c", "a"])
        assert sub.ids == ["c", "a"]
        assert np.array_equal(sub.features[0], [4, 5])


class TestManifests:
    def test_inline_round_trip(self, tmp_path):
        path = tmp_path / "manifest.json"
        feats = np.array([[1.0, 2.0], [3.0, 4.0]])
        write_manifest(path, ["a", "b"], [0, 1], feats)
        data = load_manifest(path)
        assert data.ids == ["a", "b"]
        assert np.array_equal(data.features, feats)
        assert np.array_equal(data.labels, [0, 1])

    def test_emb1_paths_resolved_relative_to_manifest(self, tmp_path):
        write_emb1(tmp_path / "a.emb", np.array([[1.0, 2.0]], dtype=np.float32))
        (tmp_path / "manifest.json").write_text(json.dumps(
            [{"id": "a", "label": 1, "features": "a.emb"}]))
        data = load_manifest(tmp_path / "manifest.json")
        assert data.features.shape == (1, 2)

    def test_missing_feature_file(self, tmp_path):
        (tmp_path / "manifest.json").write_text(json.dumps(
            [{"id": "a", "label": 1, "features": "gone.emb"}]))
        with pytest.raises(MissingFeatures):
            load_manifest(tmp_path / "manifest.json")

    def test_multirow_feature_file_rejected(self, tmp_path):
        write_emb1(tmp_path / "a.emb", np.zeros((2, 3), dtype=np.float32))
        (tmp_path / "manifest.json").write_text(json.dumps(
            [{"id": "a", "label": 0, "features": "a.emb"}]))
        with pytest.raises(ValueError, match="1 row"):
            load_manifest(tmp_path / "manifest.json")

    def test_blind_manifest_has_no_labels(self, tmp_path):
        path = tmp_path / "manifest.json"
        write_manifest(path, ["a", "b"], None, np.zeros((2, 2)))
        data = load_manifest(path)
        assert data.labels is None

    def test_mixed_labels_rejected(self, tmp_path):
        (tmp_path / "manifest.json").write_text(json.dumps([
            {"id": "a", "label": 1, "features": [0.0]},
            {"id": "b", "label": None, "features": [0.0]},
        ]))
        with pytest.raises(ValueError, match="mixes"):
            load_manifest(tmp_path / "manifest.json")


def test_transform_dataset_keeps_ids_and_labels():
    data = Dataset(np.array([[1.0, 5.0], [3.0, 5.0]]), np.array([0, 1]), ["a", "b"])
    scaler = fit_scaler(data)
    out = transform_dataset(data, scaler, l2=False)
    assert out.ids == ["a", "b"]
    assert np.array_equal(out.labels, data.labels)
