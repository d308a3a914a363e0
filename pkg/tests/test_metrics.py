from itertools import combinations

import numpy as np
import pytest

from blockpf.errors import EmptyInput, IndexSetMismatch, TooFewReplicates
from blockpf.metrics import RunRecord, ari, bias_variance, mse, mse_arrays
from blockpf.partitioning import Partition
from blockpf.rng import derive_stream


def set_partitions(n):
    """All partitions of {0..n-1} as label arrays."""
    if n == 0:
        return
    labels = np.zeros(n, dtype=int)

    def rec(i, k):
        if i == n:
            yield labels.copy()
            return
        for j in range(k + 1):
            labels[i] = j
            yield from rec(i + 1, max(k, j + 1))

    yield from rec(1, 1)


def pair_counting_ari(l1, l2):
    """Direct loop over all index pairs; no contingency table."""
    n = len(l1)
    together1 = together2 = both = 0
    for i, j in combinations(range(n), 2):
        s1 = l1[i] == l1[j]
        s2 = l2[i] == l2[j]
        together1 += s1
        together2 += s2
        both += s1 and s2
    total = n * (n - 1) / 2
    expected = together1 * together2 / total
    maximum = 0.5 * (together1 + together2)
    if maximum == expected:
        return 1.0 if both == maximum else 0.0
    return (both - expected) / (maximum - expected)


class TestMse:
    def test_perfect_estimate(self):
        x = derive_stream(0, "mse").random((10, 4))
        assert mse_arrays(x, x) == 0.0

    def test_hand_value(self):
        rec = RunRecord(0, 1, "f", 1, 1,
                        estimate=np.array([1.0, 0.0]), truth=np.array([0.0, 1.0]))
        assert mse([rec]) == 1.0

    def test_average_over_records(self):
        recs = [
            RunRecord(0, 1, "f", 1, 1, np.array([2.0]), np.array([0.0])),
            RunRecord(0, 2, "f", 1, 1, np.array([0.0]), np.array([0.0])),
        ]
        assert mse(recs) == 2.0

    def test_empty_raises(self):
        with pytest.raises(EmptyInput):
            mse([])
        with pytest.raises(EmptyInput):
            mse_arrays(np.empty((0, 2)), np.empty((0, 2)))

    def test_shape_mismatch(self):
        with pytest.raises(IndexSetMismatch):
            mse_arrays(np.zeros((2, 3)), np.zeros((2, 4)))


class TestAri:
    def test_identical_partitions(self):
        p = Partition(((0, 2), (1, 3, 4)))
        assert ari(p, p) == 1.0

    def test_hand_value(self):
        p1 = Partition(((0, 1, 2), (3, 4, 5)))
        p2 = Partition(((0, 1), (2, 3), (4, 5)))
        assert np.isclose(ari(p1, p2), 0.8 / 3.3)

    def test_symmetry_and_label_invariance(self):
        p1 = Partition(((0, 1), (2, 3, 4), (5,)))
        p2 = Partition(((0, 5), (1, 2), (3, 4)))
        assert ari(p1, p2) == ari(p2, p1)
        p1_shuffled = Partition(((5,), (2, 3, 4), (0, 1)))
        assert np.isclose(ari(p1_shuffled, p2), ari(p1, p2))

    def test_size_mismatch(self):
        with pytest.raises(IndexSetMismatch):
            ari(Partition(((0, 1),)), Partition(((0, 1, 2),)))

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_matches_pair_counting_oracle(self, n):
        parts = [Partition.from_labels(l) for l in set_partitions(n)]
        for p1 in parts:
            l1 = p1.labels()
            for p2 in parts:
                got = ari(p1, p2)
                want = pair_counting_ari(l1, p2.labels())
                assert np.isclose(got, want), (p1.blocks, p2.blocks)

    def test_self_ari_exhaustive(self):
        for labels in set_partitions(5):
            p = Partition.from_labels(labels)
            assert ari(p, p) == 1.0


class TestBiasVariance:
    def test_exact_replicates(self):
        ref = derive_stream(1, "bv").random((10, 3))
        reps = np.stack([ref, ref, ref])
        b, v = bias_variance(reps, ref)
        assert b < 1e-30 and v < 1e-30

    def test_constant_offset(self):
        ref = derive_stream(2, "bv").random((10, 3))
        reps = np.stack([ref + 0.5] * 4)
        b, v = bias_variance(reps, ref)
        assert np.isclose(b, 0.25)
        assert v == 0.0

    def test_iid_noise(self):
        rng = derive_stream(3, "bv")
        ref = np.zeros((50, 4))
        sigma = 0.7
        reps = sigma * rng.standard_normal((500, 50, 4))
        b, v = bias_variance(reps, ref)
        assert b < 0.01
        assert np.isclose(v, sigma**2, rtol=0.05)

    def test_too_few_replicates(self):
        with pytest.raises(TooFewReplicates):
            bias_variance(np.zeros((1, 5, 2)), np.zeros((5, 2)))

    def test_shape_mismatch(self):
        with pytest.raises(IndexSetMismatch):
            bias_variance(np.zeros((3, 5, 2)), np.zeros((5, 3)))
