import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import grid_search_1d, hinge_objective_ref, naive_prefix_means
from tcdcnet.errors import EmptySequence, ShapeMismatch, WindowTooLarge
from tcdcnet.rankpool import (
    RankPoolProblem,
    SolverConfig,
    _pair_diffs,
    dynamic_image_sequence,
    hinge_objective,
    normalize_dynamic_image,
    prefix_means,
    rank_svm_solve,
)


def _solve_scalar(values, delta, cfg=None):
    means = prefix_means([np.array([v], np.float32) for v in values])
    return float(rank_svm_solve(RankPoolProblem(means, delta), cfg).d[0])


class TestPrefixMeans:
    def test_matches_naive(self):
        rng = np.random.default_rng(0)
        frames = [rng.standard_normal((2, 3)).astype(np.float32)
                  for _ in range(5)]
        got = prefix_means(frames)
        ref = naive_prefix_means(frames)
        for g, r in zip(got, ref):
            assert np.abs(g - r).max() < 1e-6

    def test_empty_rejected(self):
        with pytest.raises(EmptySequence):
            prefix_means([])

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            prefix_means([np.zeros((2, 2), np.float32),
                          np.zeros((3, 2), np.float32)])


class TestHandDerivedOracles:
    """Scalar frame sequences whose optimum is known in closed form."""

    def test_increasing_strong_delta(self):
        # frames [1,2,3] -> prefix means [1, 1.5, 2]; tightest pair gap
        # is 0.5, and at delta=10 the hinge dominates: w* = 2.0
        assert abs(_solve_scalar([1.0, 2.0, 3.0], 10.0) - 2.0) <= 0.02

    def test_increasing_weak_delta(self):
        # delta=1 balances the quadratic term: w* = 1.0
        assert abs(_solve_scalar([1.0, 2.0, 3.0], 1.0) - 1.0) <= 0.02

    def test_decreasing_strong_delta(self):
        # reversed order flips the sign: w* = -2.0
        assert abs(_solve_scalar([3.0, 2.0, 1.0], 10.0) - (-2.0)) <= 0.02

    def test_single_frame_gives_zero(self):
        assert _solve_scalar([5.0], 10.0) == 0.0

    def test_static_frames_give_zero_image(self):
        frames = [np.full((2, 2), 0.3, np.float32) for _ in range(5)]
        di = dynamic_image_sequence(frames, window=5)[0]
        assert (di.d == 0.0).all()


class TestGridOracle:
    @given(
        seed=st.integers(0, 2**31 - 1),
        k=st.integers(2, 5),
        delta=st.sampled_from([0.5, 1.0, 2.0, 10.0]),
    )
    @settings(max_examples=60, deadline=None)
    def test_solver_within_gap_of_grid(self, seed, k, delta):
        rng = np.random.default_rng(seed)
        frames = [np.array([v], np.float32)
                  for v in rng.uniform(-2.0, 2.0, size=k)]
        means = prefix_means(frames)
        problem = RankPoolProblem(means, delta)
        got = rank_svm_solve(problem).d
        f_got = hinge_objective_ref(got, means, delta)
        _, f_star = grid_search_1d(means, delta)
        assert f_got <= f_star + SolverConfig().opt_gap * max(1.0, f_star)

    def test_objective_consistent_with_reference(self):
        rng = np.random.default_rng(3)
        means = prefix_means([rng.standard_normal(4).astype(np.float32)
                              for _ in range(4)])
        w = rng.standard_normal(4).astype(np.float32)
        got = hinge_objective(w, _pair_diffs(means), 2.0)
        assert abs(got - hinge_objective_ref(w, means, 2.0)) < 1e-4


class TestSequence:
    def test_window_count_and_origins(self):
        frames = [np.full((2, 2), t, np.float32) for t in range(10)]
        dis = dynamic_image_sequence(frames, window=7, stride=1)
        assert len(dis) == 4
        assert [d.window_origin for d in dis] == [0, 1, 2, 3]

    def test_window_too_large(self):
        frames = [np.zeros((2, 2), np.float32)] * 3
        with pytest.raises(WindowTooLarge):
            dynamic_image_sequence(frames, window=4)

    def test_empty_rejected(self):
        with pytest.raises(EmptySequence):
            dynamic_image_sequence([], window=1)

    def test_bad_delta(self):
        with pytest.raises(ShapeMismatch):
            RankPoolProblem([np.zeros(2, np.float32)], delta=0.0)


class TestNormalize:
    def test_range_and_extremes(self):
        d = np.array([[-2.0, 0.0], [2.0, 1.0]], np.float32)
        n = normalize_dynamic_image(d)
        assert n.min() == 0.0 and n.max() == 1.0

    def test_constant_maps_to_half(self):
        n = normalize_dynamic_image(np.full((3, 3), 7.0, np.float32))
        assert (n == 0.5).all()

    def test_per_channel_for_rank3(self):
        d = np.stack([np.linspace(0, 1, 4).reshape(2, 2),
                      np.full((2, 2), 5.0)]).astype(np.float32)
        n = normalize_dynamic_image(d)
        assert n[0].min() == 0.0 and n[0].max() == 1.0
        assert (n[1] == 0.5).all()
