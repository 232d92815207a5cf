import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coughscreen.errors import SingleClassLabels
from coughscreen.metrics import (
    GRID_SIZE,
    ScoredSet,
    auc_pairwise_oracle,
    roc_curve,
    specificity_at_sensitivity,
    threshold_grid,
    write_roc_csv,
    write_summary_json,
)


def scored(pos_scores, neg_scores) -> ScoredSet:
    scores = np.concatenate([pos_scores, neg_scores])
    labels = np.concatenate([np.ones(len(pos_scores)), np.zeros(len(neg_scores))])
    return ScoredSet(scores, labels)


@st.composite
def scored_sets(draw, min_size=2, max_size=60, quantized=False):
    n_pos = draw(st.integers(1, max_size // 2))
    n_neg = draw(st.integers(1, max_size // 2))
    if quantized:
        values = st.integers(0, GRID_SIZE - 1).map(lambda i: i / (GRID_SIZE - 1))
    else:
        values = st.floats(0.0, 1.0, allow_nan=False)
    pos = draw(st.lists(values, min_size=n_pos, max_size=n_pos))
    neg = draw(st.lists(values, min_size=n_neg, max_size=n_neg))
    return scored(np.array(pos), np.array(neg))


class TestGrid:
    def test_grid_has_10001_points_with_both_endpoints(self):
        grid = threshold_grid()
        assert grid.size == 10001
        assert grid[0] == 0.0 and grid[-1] == 1.0
        assert np.allclose(np.diff(grid), 1e-4)


class TestRocCurve:
    def test_perfect_separation_auc_one(self):
        s = scored([1.0, 1.0, 1.0], [0.0, 0.0])
        assert roc_curve(s).auc == pytest.approx(1.0, abs=1e-12)

    def test_all_scores_equal_auc_half(self):
        s = scored([0.5, 0.5], [0.5, 0.5, 0.5])
        assert roc_curve(s).auc == pytest.approx(0.5, abs=1e-12)

    def test_random_scores_match_pairwise_oracle(self):
        rng = np.random.default_rng(7)
        s = ScoredSet(rng.uniform(0, 1, 50), rng.integers(0, 2, 50))
        if s.n_positive == 0 or s.n_negative == 0:
            pytest.skip("degenerate draw")
        assert roc_curve(s).auc == pytest.approx(auc_pairwise_oracle(s), abs=1e-3)

    def test_endpoints_follow_ge_convention(self):
        s = scored([1.0, 0.7], [0.3, 1.0])
        curve = roc_curve(s)
        assert curve.fpr[0] == 1.0 and curve.tpr[0] == 1.0       # t = 0
        assert curve.tpr[-1] == 0.5                             # t = 1: only the 1.0 score
        assert curve.fpr[-1] == 0.5

    def test_rates_nonincreasing_in_threshold(self):
        rng = np.random.default_rng(3)
        s = ScoredSet(rng.uniform(0, 1, 200), rng.integers(0, 2, 200))
        curve = roc_curve(s)
        assert np.all(np.diff(curve.tpr) <= 0)
        assert np.all(np.diff(curve.fpr) <= 0)

    def test_single_class_rejected(self):
        with pytest.raises(SingleClassLabels):
            roc_curve(ScoredSet(np.array([0.1, 0.9]), np.array([1, 1])))

    def test_scores_outside_unit_interval_are_clamped(self):
        s = ScoredSet(np.array([5.0, -3.0]), np.array([1, 0]))
        assert roc_curve(s).auc == pytest.approx(1.0)

    @given(scored_sets(quantized=True))
    @settings(max_examples=60, deadline=None)
    def test_grid_auc_exact_on_grid_aligned_scores(self, s):
        # scores on the 1e-4 grid leave nothing between thresholds, so the
        # trapezoid over grid points equals the exact pairwise AUC
        assert roc_curve(s).auc == pytest.approx(auc_pairwise_oracle(s), abs=1e-9)

    @given(scored_sets())
    @settings(max_examples=60, deadline=None)
    def test_grid_auc_tracks_oracle_within_cell_collision_bound(self, s):
        # scores that collide inside one grid cell are indistinguishable to
        # the grid; the trapezoid can be off by at most half of each cell's
        # FPR x TPR rectangle
        curve = roc_curve(s)
        bound = 0.5 * float(np.sum(-np.diff(curve.fpr) * -np.diff(curve.tpr)))
        assert abs(curve.auc - auc_pairwise_oracle(s)) <= bound + 1e-9


class TestPairwiseOracle:
    def test_single_pair(self):
        assert auc_pairwise_oracle(scored([0.9], [0.1])) == 1.0

    def test_tie_gets_half_credit(self):
        assert auc_pairwise_oracle(scored([0.5], [0.5])) == 0.5

    def test_three_of_four_pairs_ordered(self):
        assert auc_pairwise_oracle(scored([0.8, 0.4], [0.6, 0.2])) == 0.75

    @given(scored_sets())
    @settings(max_examples=60, deadline=None)
    def test_label_swap_complements_auc(self, s):
        swapped = ScoredSet(s.scores, 1 - s.labels)
        assert auc_pairwise_oracle(swapped) == pytest.approx(
            1.0 - auc_pairwise_oracle(s), abs=1e-12)

    # lattice scores: floating-point tanh can merge values ~1 ulp apart,
    # so exact invariance needs inputs separated well above rounding scale
    @given(scored_sets(quantized=True))
    @settings(max_examples=60, deadline=None)
    def test_exactly_invariant_under_increasing_transform(self, s):
        transformed = ScoredSet(np.tanh(3.0 * s.scores) + 0.1 * s.scores, s.labels)
        assert auc_pairwise_oracle(transformed) == pytest.approx(
            auc_pairwise_oracle(s), abs=1e-12)


def _brute_force_spec_at_sens(s: ScoredSet, target: float):
    """Independent re-derivation: literal loop over all 10001 thresholds."""
    clamped = np.clip(s.scores, 0, 1)
    pos = clamped[s.labels == 1]
    neg = clamped[s.labels == 0]
    best = None
    for i in range(10001):
        t = i / 10000
        tpr = np.mean(pos >= t)
        spec = np.mean(neg < t)
        if tpr >= target and (best is None or spec >= best[0]):
            best = (spec, t)
    return best


class TestSpecificityAtSensitivity:
    def test_perfect_separation(self):
        s = scored([0.9, 0.8], [0.1, 0.2])
        spec, _ = specificity_at_sensitivity(s, 0.8)
        assert spec == 1.0

    def test_all_scores_equal_gives_zero_specificity(self):
        s = scored([0.5, 0.5], [0.5, 0.5])
        spec, _ = specificity_at_sensitivity(s, 0.8)
        assert spec == 0.0

    def test_matches_exhaustive_grid_evaluation(self):
        s = scored([0.9, 0.7, 0.3, 0.2, 0.1], [0.8, 0.4, 0.1, 0.05, 0.02])
        expected = _brute_force_spec_at_sens(s, 0.8)
        assert specificity_at_sensitivity(s, 0.8) == pytest.approx(expected)
        assert expected == (pytest.approx(0.6), pytest.approx(0.2))

    def test_ties_take_largest_threshold(self):
        s = scored([0.9, 0.8, 0.7, 0.6, 0.5], [0.1, 0.2])
        _, threshold = specificity_at_sensitivity(s, 0.8)
        # every t in (0.2, 0.6] has spec 1 and TPR >= 0.8; largest grid t wins
        assert threshold == pytest.approx(0.6)

    def test_target_validation(self):
        s = scored([0.9], [0.1])
        with pytest.raises(ValueError):
            specificity_at_sensitivity(s, 0.0)
        with pytest.raises(ValueError):
            specificity_at_sensitivity(s, 1.2)


class TestDumps:
    def test_roc_csv_layout(self, tmp_path):
        s = scored([0.9, 0.7], [0.2])
        path = tmp_path / "roc.csv"
        write_roc_csv(roc_curve(s), path)
        lines = path.read_text().splitlines()
        assert lines[0] == "threshold,fpr,tpr"
        assert len(lines) == 1 + 10001
        assert lines[1].startswith("0.0000,")
        assert lines[-1].startswith("1.0000,")

    def test_summary_json_records_decision_rule(self, tmp_path):
        import json
        path = tmp_path / "summary.json"
        write_summary_json(path, auc=0.9, sensitivity=0.8, specificity=0.7,
                           threshold=0.45)
        payload = json.loads(path.read_text())
        assert payload["decision_rule"] == "score >= threshold"
        assert payload["auc"] == 0.9
