import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from csps.diagnostics import (chain_agreement, confusion_matrix, iid_switch_reference,
                              misclassification_rate, mixing_ratio, scatter_pairs,
                              switch_rate_se, switch_rates, write_scatter)


def draws_from(entry_seq, c=1, P=2):
    T = len(entry_seq)
    m = np.ones((T, c, P), dtype=np.int8)
    m[:, 0, 1] = entry_seq
    return m


class TestSwitchRates:
    def test_constant(self):
        assert np.all(switch_rates(np.ones((10, 2, 3))) == 0)

    def test_alternating(self):
        assert switch_rates(draws_from([0, 1] * 10))[0, 1] == 1.0

    def test_iid_bernoulli(self):
        rng = np.random.default_rng(0)
        theta = 0.3
        s = switch_rates(draws_from((rng.random(200000) < theta).astype(int)))[0, 1]
        assert s == pytest.approx(2 * theta * (1 - theta), abs=0.005)

    @given(st.lists(st.integers(0, 1), min_size=2, max_size=60))
    def test_reversal_invariant(self, seq):
        m = draws_from(seq)
        np.testing.assert_array_equal(switch_rates(m), switch_rates(m[::-1]))

    def test_intercept_column_zero(self):
        assert np.all(switch_rates(draws_from([0, 1, 1, 0]))[:, 0] == 0)

    def test_too_few_draws(self):
        with pytest.raises(ValueError):
            switch_rates(np.ones((1, 1, 2)))


class TestReference:
    def test_values(self):
        np.testing.assert_allclose(iid_switch_reference(np.array([0.5, 0.0, 1.0])), [0.5, 0, 0])

    def test_se(self):
        assert switch_rate_se(np.array([0.5]), 101)[0] == pytest.approx(0.05)

    def test_mixing_ratio_of_iid_is_one(self):
        rng = np.random.default_rng(1)
        m = np.ones((50000, 2, 3), dtype=np.int8)
        m[:, :, 1:] = rng.random((50000, 2, 2)) < 0.4
        assert mixing_ratio(m) == pytest.approx(1.0, abs=0.03)

    def test_mixing_ratio_sticky_chain(self):
        seq = np.repeat([0, 1] * 50, 10)
        assert mixing_ratio(draws_from(seq)) < 0.2

    def test_mixing_ratio_nan_when_nothing_moves(self):
        assert np.isnan(mixing_ratio(np.ones((5, 1, 2))))


class TestAgreement:
    def test_identical(self):
        a = np.random.default_rng(0).random((3, 4))
        rep = chain_agreement(a, a)
        assert rep.max_abs_diff == 0 and rep.rms_diff == 0

    def test_single_difference(self):
        a = np.zeros((2, 3))
        b = a.copy()
        b[1, 2] = 0.1
        rep = chain_agreement(a, b)
        assert rep.max_abs_diff == pytest.approx(0.1)
        assert chain_agreement(b, a).max_abs_diff == rep.max_abs_diff

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            chain_agreement(np.zeros((2, 3)), np.zeros((3, 2)))

    def test_scatter_rows(self, tmp_path):
        pairs = scatter_pairs(np.arange(6.0).reshape(2, 3), np.zeros((2, 3)))
        assert pairs.shape == (4, 4)
        assert pairs[0].tolist() == [1, 1, 1.0, 0.0]
        write_scatter(tmp_path / "s.csv", pairs)
        lines = (tmp_path / "s.csv").read_text().splitlines()
        assert lines[0] == "row,col,x,y" and len(lines) == 5


class TestScores:
    def test_perfect(self):
        assert misclassification_rate([0, 1, 2], [0, 1, 2]) == 0

    def test_all_wrong(self):
        assert misclassification_rate([1, 2, 0], [0, 1, 2]) == 1

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            misclassification_rate([0, 1], [0])
        with pytest.raises(ValueError):
            confusion_matrix([0, 1], [0])

    @given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=50))
    def test_confusion_rows_are_truth_counts(self, pairs):
        pred, truth = map(np.array, zip(*pairs))
        cm = confusion_matrix(pred, truth, 4)
        np.testing.assert_array_equal(cm.sum(axis=1), np.bincount(truth, minlength=4))
        assert np.trace(cm) == np.sum(pred == truth)
