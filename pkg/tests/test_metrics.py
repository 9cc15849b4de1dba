import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rcclust.metrics import (
    COLUMN_TRUTH,
    ROW_TRUTH,
    ContingencyTable,
    ami,
    confusion_matrix,
    contingency,
    entropy,
    evaluate,
    expected_mi,
    macro_average,
    majority_map,
    mutual_information,
    purity,
    sensitivity_specificity,
    write_metrics_json,
)

TABLE_1 = np.array([[169, 50], [13, 2673]])
TABLE_2 = np.array([[169, 10, 40], [4, 33, 1304], [9, 5, 1331]])

labelings = st.lists(st.integers(0, 4), min_size=2, max_size=60)


def table_to_labels(counts):
    a, b = [], []
    for (i, j), c in np.ndenumerate(counts):
        a += [i] * c
        b += [j] * c
    return np.array(a), np.array(b)


def monte_carlo_mi(a, b, n_perm, seed):
    """MI of ``a`` against random shuffles of ``b``, computed in batches."""
    rng = np.random.default_rng(seed)
    n, r, c = a.size, a.max() + 1, b.max() + 1
    ra = np.bincount(a, minlength=r).astype(float)
    cb = np.bincount(b, minlength=c).astype(float)
    outer = np.outer(ra, cb)
    values = []
    for start in range(0, n_perm, 10_000):
        batch = min(10_000, n_perm - start)
        shuffled = rng.permuted(np.tile(b, (batch, 1)), axis=1)
        codes = a[None, :] * c + shuffled + (np.arange(batch) * r * c)[:, None]
        counts = np.bincount(codes.ravel(), minlength=batch * r * c).reshape(batch, r, c)
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = counts / n * np.log(n * counts / outer)
        values.append(np.nansum(np.where(counts > 0, terms, 0.0), axis=(1, 2)))
    return np.concatenate(values)


class TestContingency:
    def test_hand_count(self):
        assert contingency([0, 0, 0, 1], [0, 1, 0, 1]).counts.tolist() == [[2, 1], [0, 1]]

    def test_anti_diagonal(self):
        assert contingency([0, 0, 1, 1], [1, 1, 0, 0]).counts.tolist() == [[0, 2], [2, 0]]

    def test_margins(self):
        t = ContingencyTable(TABLE_2)
        assert t.row_sums.tolist() == [219, 1341, 1345]
        assert t.col_sums.tolist() == [182, 48, 2675]
        assert t.total == 2905

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            contingency([0, 1], [0])

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            ContingencyTable([[1, -1]])


class TestMutualInformation:
    def test_self_information(self):
        t = contingency([0, 0, 1, 1], [0, 0, 1, 1])
        assert mutual_information(t) == pytest.approx(math.log(2), rel=1e-15)

    def test_constant_side(self):
        assert mutual_information(contingency([0, 0, 0, 0], [0, 1, 2, 1])) == 0

    def test_hand_value(self):
        expected = 0.5 * math.log(4 / 3) + 0.25 * math.log(2 / 3) + 0.25 * math.log(2)
        assert expected == pytest.approx(0.2158, abs=5e-5)
        value = mutual_information(ContingencyTable([[2, 1], [0, 1]]))
        assert value == pytest.approx(expected, rel=1e-14)

    @given(labelings, st.randoms(use_true_random=False))
    def test_bounded_by_entropies(self, a, rnd):
        b = [rnd.randrange(3) for _ in a]
        t = contingency(a, b)
        mi = mutual_information(t)
        assert 0 <= mi <= min(entropy(t.row_sums), entropy(t.col_sums)) + 1e-12


class TestExpectedMi:
    def test_single_cluster_zero(self):
        assert expected_mi(ContingencyTable([[3, 4, 5]])) == 0

    def test_transpose_invariant(self):
        t = ContingencyTable(TABLE_2)
        assert expected_mi(t) == pytest.approx(expected_mi(t.transpose()), rel=1e-12)

    def test_monte_carlo_oracle(self):
        counts = np.random.default_rng(11).multinomial(60, np.full(20, 1 / 20)).reshape(5, 4)
        a, b = table_to_labels(counts)
        assert a.size == 60 and counts.shape == (5, 4)
        samples = monte_carlo_mi(a, b, 100_000, seed=0)
        stderr = samples.std(ddof=1) / math.sqrt(samples.size)
        assert abs(expected_mi(ContingencyTable(counts)) - samples.mean()) <= 3 * stderr

    @given(labelings, st.randoms(use_true_random=False))
    def test_below_entropies(self, a, rnd):
        b = [rnd.randrange(4) for _ in a]
        t = contingency(a, b)
        assert expected_mi(t) <= min(entropy(t.row_sums), entropy(t.col_sums)) + 1e-12


class TestAmi:
    def test_identical_exactly_one(self):
        labels = np.random.default_rng(0).integers(0, 5, 200)
        assert ami(labels, labels) == 1.0

    def test_bijective_relabel(self):
        labels = np.random.default_rng(1).integers(0, 4, 300)
        relabeled = np.array([7, 2, 9, 0])[labels]
        assert ami(labels, relabeled) == pytest.approx(1.0, abs=1e-12)

    def test_constant_labeling_zero(self):
        assert ami(np.zeros(50), np.random.default_rng(2).integers(0, 3, 50)) == 0.0
        assert ami(np.zeros(10), np.zeros(10)) == 0.0

    def test_independent_labelings_near_zero(self):
        scores = []
        for seed in range(20):
            rng = np.random.default_rng(seed)
            scores.append(ami(rng.integers(0, 3, 1000), rng.integers(0, 3, 1000)))
        assert abs(np.mean(scores)) <= 0.02

    @settings(max_examples=50)
    @given(labelings, st.randoms(use_true_random=False))
    def test_symmetric_and_bounded(self, a, rnd):
        b = [rnd.randrange(3) for _ in a]
        assert ami(a, b) == pytest.approx(ami(b, a), abs=1e-12)
        assert ami(a, b) <= 1 + 1e-12

    def test_details(self):
        d = ami([0, 0, 1, 1], [0, 1, 1, 1], details=True)
        assert set(d) == {"ami", "mi", "emi", "entropy_a", "entropy_b"}
        assert d["entropy_a"] == pytest.approx(math.log(2))


class TestMajorityMap:
    def test_identity(self):
        y = [0, 1, 2, 2, 1]
        assert majority_map(y, y) == {0: 0, 1: 1, 2: 2}

    def test_strict_majority(self):
        assert majority_map([5, 5, 5, 5], [0, 0, 0, 1]) == {5: 0}

    def test_tie_goes_to_smaller_class(self):
        assert majority_map([3, 3, 3, 3], [2, 1, 2, 1]) == {3: 1}


class TestConfusion:
    def test_perfect_is_diagonal(self):
        y = np.array([0, 1, 1, 2])
        cm = confusion_matrix(y, y, majority_map(y, y))
        assert cm.counts.tolist() == [[1, 0, 0], [0, 2, 0], [0, 0, 1]]

    def test_reproduces_table_1(self):
        truth, pred = table_to_labels(TABLE_1)
        cm = confusion_matrix(pred, truth, majority_map(pred, truth), ["COVID", "non-COVID"])
        assert cm.counts.tolist() == TABLE_1.tolist()
        assert cm.counts.sum() == 2905

    def test_unmapped_cluster(self):
        with pytest.raises(ValueError, match="no mapping"):
            confusion_matrix([0, 1], [0, 1], {0: 0})


class TestSensitivitySpecificity:
    def test_table_1_column_truth(self):
        sens, spec = sensitivity_specificity(TABLE_1, 0, COLUMN_TRUTH)
        assert sens == pytest.approx(169 / 182, rel=1e-15)
        assert spec == pytest.approx(2673 / 2723, rel=1e-15)
        assert abs(sens - 0.928) <= 0.0011 and abs(spec - 0.981) <= 0.0007

    def test_table_1_row_truth(self):
        sens, spec = sensitivity_specificity(TABLE_1, 0, ROW_TRUTH)
        assert sens == pytest.approx(0.7717, abs=5e-5)
        assert spec == pytest.approx(0.9952, abs=5e-5)

    def test_table_2_column_truth(self):
        sens = [sensitivity_specificity(TABLE_2, i, COLUMN_TRUTH)[0] for i in range(3)]
        np.testing.assert_allclose(sens, [0.9286, 0.6875, 0.4976], atol=5e-5)
        exact = (169 / 182 + 33 / 48 + 1331 / 2675) / 3
        assert macro_average(sens) == pytest.approx(exact, rel=1e-15)
        # 0.7046 is the mean of the four-digit roundings
        assert macro_average([0.9286, 0.6875, 0.4976]) == pytest.approx(0.7046, abs=5e-5)

    def test_perfect_diagonal(self):
        cm = np.diag([4, 5, 6])
        for convention in (ROW_TRUTH, COLUMN_TRUTH):
            for idx in range(3):
                assert sensitivity_specificity(cm, idx, convention) == (1.0, 1.0)

    def test_zero_denominator_is_undefined(self):
        assert sensitivity_specificity([[0, 0], [0, 5]], 0) == (None, 1.0)

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            sensitivity_specificity(TABLE_1, 2)
        with pytest.raises(ValueError):
            sensitivity_specificity(TABLE_1, 0, "diagonal")


class TestAverages:
    def test_reported_macro(self):
        assert round(macro_average([92.8, 68.75, 49.75]), 2) == 70.43

    def test_singleton(self):
        assert macro_average([0.3]) == 0.3

    def test_empty(self):
        with pytest.raises(ValueError):
            macro_average([])

    def test_purity(self):
        assert purity([0, 0, 1, 1], [0, 1, 1, 1]) == 0.75


class TestEvaluate:
    def test_schema_and_json(self, tmp_path):
        truth = np.array([0, 0, 1, 1, 2, 2])
        pred = np.array([1, 1, 0, 0, 0, 2])
        m = evaluate(pred, truth, ["a", "b", "c"])
        for key in ("ami", "mi", "emi", "entropy_a", "entropy_b", "confusion", "per_class"):
            assert key in m
        assert set(m["per_class"]) == {ROW_TRUTH, COLUMN_TRUTH}
        assert np.sum(m["confusion"]) == 6
        write_metrics_json(m, tmp_path / "m.json")
        assert json.loads((tmp_path / "m.json").read_text()) == m
