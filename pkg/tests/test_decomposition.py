import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hullnet.decomposition import (
    Decomposition,
    count_alternations,
    decompose_1d,
    estimate_decomposition,
    peel_overlap,
    validate_decomposition,
)
from datasets import FAMILIES, make_pair
from oracles import alternations_by_sweep

XOR_A = np.array([[0.0, 0.0], [1.0, 1.0]])
XOR_B = np.array([[0.0, 1.0], [1.0, 0.0]])


class TestPeel:
    def test_separated(self):
        r = peel_overlap([[0, 0], [1, 0]], [[3, 0], [4, 0]])
        assert len(r.overlap_1) == 0 and len(r.overlap_2) == 0
        assert r.cx < r.cy

    def test_interleaved(self):
        r = peel_overlap([[0, 0], [2, 0]], [[1, 0], [3, 0]])
        np.testing.assert_array_equal(r.overlap_1, [[2, 0]])
        np.testing.assert_array_equal(r.overlap_2, [[1, 0]])
        np.testing.assert_array_equal(r.outside_1, [[0, 0]])
        np.testing.assert_array_equal(r.outside_2, [[3, 0]])

    def test_singletons(self):
        r = peel_overlap([[0, 0]], [[0.5, -2]])
        assert len(r.overlap_1) == 0 and len(r.overlap_2) == 0

    def test_equal_means(self):
        with pytest.raises(ValueError):
            peel_overlap([[-1, 0], [1, 0]], [[0, -1], [0, 1]])

    def test_partition_invariant(self):
        rng = np.random.default_rng(4)
        X, Y = rng.normal(size=(40, 3)), rng.normal(size=(30, 3)) + 0.4
        r = peel_overlap(X, Y)
        assert len(r.outside_1) + len(r.overlap_1) == 40
        assert len(r.outside_2) + len(r.overlap_2) == 30
        d = Y.mean(0) - X.mean(0)
        assert np.all(r.overlap_1 @ d >= r.cy)
        assert np.all(r.overlap_2 @ d <= r.cx)


class TestAlternations:
    def test_examples(self):
        assert count_alternations([0, 1], [2, 3]) == 1
        assert count_alternations([0, 2], [1, 3]) == 3
        assert count_alternations([0], []) == 0

    def test_ties_put_class_one_first(self):
        assert count_alternations([1.0], [1.0, 2.0]) == 1

    def test_decompose_1d(self):
        D = decompose_1d([0, 1], [2, 3])
        assert (D.L1, D.L2) == (1, 1)
        D = decompose_1d([0, 2], [1, 3])
        assert (D.L1, D.L2) == (2, 2)
        D = decompose_1d([0, 1, 2], [5])
        assert (D.L1, D.L2) == (1, 1)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(-10, 10), min_size=1, max_size=30),
           st.lists(st.floats(-10, 10), min_size=1, max_size=30))
    def test_run_counts_differ_by_at_most_one(self, a, b):
        D = decompose_1d(a, b)
        assert abs(D.L1 - D.L2) <= 1
        assert D.L1 + D.L2 == count_alternations(a, b) + 1


class TestEstimate:
    def test_separated_blobs(self):
        rng = np.random.default_rng(0)
        X, Y = rng.normal(size=(50, 3)), rng.normal(size=(50, 3)) + 10
        D = estimate_decomposition(X, Y)
        assert (D.L1, D.L2) == (1, 1)
        assert D.peel_iterations == 1

    def test_xor(self):
        D = estimate_decomposition(XOR_A, XOR_B, seed=0)
        best = min(alternations_by_sweep(XOR_A, XOR_B))
        # the fewest runs any direction gives is best + 1 = 3, split 2 / 1
        assert best == 2
        assert D.L1 + D.L2 == best + 1
        assert max(D.L1, D.L2) == 2
        assert validate_decomposition(D).valid

    def test_deterministic(self):
        rng = np.random.default_rng(1)
        X, Y = make_pair("checker", 3, 60, 60, rng)
        a = estimate_decomposition(X, Y, seed=5)
        b = estimate_decomposition(X, Y, seed=5)
        np.testing.assert_array_equal(a.assign_1, b.assign_1)
        np.testing.assert_array_equal(a.assign_2, b.assign_2)

    def test_singleton_fallback(self):
        rng = np.random.default_rng(2)
        X, Y = make_pair("labels", 2, 30, 30, rng)
        D = estimate_decomposition(X, Y, n_projections=0)
        assert D.L1 <= len(X) and D.L2 <= len(Y)
        assert validate_decomposition(D).valid

    def test_shared_point_rejected(self):
        with pytest.raises(ValueError):
            estimate_decomposition([[0, 0], [1, 1]], [[1, 1]])

    def test_parts_cover_inputs(self):
        rng = np.random.default_rng(3)
        X, Y = make_pair("rings", 4, 80, 70, rng)
        D = estimate_decomposition(X, Y)
        assert sorted(np.concatenate(D.part_indices_1()).tolist()) == list(range(80))
        assert sorted(np.concatenate(D.part_indices_2()).tolist()) == list(range(70))
        assert len(D.parts_1) == D.L1 and len(D.parts_2) == D.L2

    @pytest.mark.parametrize("family", FAMILIES)
    def test_valid_across_dimensions(self, family):
        rng = np.random.default_rng(FAMILIES.index(family))
        for dim in (2, 7, 20):
            X, Y = make_pair(family, dim, 60, 50, rng)
            D = estimate_decomposition(X, Y, seed=dim)
            assert validate_decomposition(D).valid
            assert D.peel_iterations <= len(X) + len(Y)


class TestValidate:
    def test_singletons_valid(self):
        rng = np.random.default_rng(0)
        X, Y = rng.normal(size=(8, 2)), rng.normal(size=(9, 2))
        assert validate_decomposition(Decomposition.singletons(X, Y)).valid

    def test_xor_singletons(self):
        V = validate_decomposition(Decomposition.singletons(XOR_A, XOR_B))
        assert V.valid
        assert V.min_distance == pytest.approx(1.0)
        assert V.distances.shape == (2, 2)

    def test_merged_xor_invalid(self):
        V = validate_decomposition(Decomposition.from_parts([XOR_A], [XOR_B]))
        assert not V.valid
        assert V.offending == [(0, 0)]

    def test_threads_agree(self):
        rng = np.random.default_rng(6)
        X, Y = make_pair("xor", 3, 60, 60, rng)
        D = estimate_decomposition(X, Y)
        a = validate_decomposition(D)
        b = validate_decomposition(D, n_jobs=3)
        np.testing.assert_array_equal(a.distances, b.distances)

    def test_lifted_projection_partition_is_valid(self):
        rng = np.random.default_rng(8)
        X, Y = rng.normal(size=(40, 5)), rng.normal(size=(40, 5))
        u = rng.normal(size=5)
        D1 = decompose_1d(X @ u, Y @ u)
        D = Decomposition(X, Y, D1.assign_1, D1.assign_2)
        assert validate_decomposition(D).valid
