from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from keypose.activations import (
    ANTI_SYMMETRIC, SYMMETRIC, ActivationSeries, RegularInterval, ScoreMatrix, detect_activations,
    estimate_stroke_frequency, goodness, goodness_rank, interpolate_missing, local_maxima,
    prune_activations, prune_frames, regular_intervals, smooth, stroke_intervals,
)
from keypose.errors import InsufficientActivations


def naive_maxima(x):
    """Neighbour scan; a run of equal values counts once, at its left end."""
    out = []
    n = len(x)
    for i in range(1, n - 1):
        if x[i] == x[i - 1]:
            continue
        j = i
        while j + 1 < n and x[j + 1] == x[i]:
            j += 1
        if j == n - 1:
            continue
        if x[i] > x[i - 1] and x[i] > x[j + 1]:
            out.append(i)
    return out


def spacing_error(frames, expected):
    return sum(abs((b - a) - expected) for a, b in zip(frames[:-1], frames[1:]))


def periodic(phase, period, duration, mode=ANTI_SYMMETRIC):
    gap = period / 2 if mode == ANTI_SYMMETRIC else period
    return np.round(np.arange(phase, duration, gap)).astype(int)


class TestSmooth:
    def test_constant_unchanged(self):
        np.testing.assert_allclose(smooth(np.full(40, 3.5), 2.0), 3.5, rtol=1e-12)

    def test_impulse_sum_preserved(self):
        x = np.zeros(101)
        x[50] = 1.0
        y = smooth(x, 3.0)
        assert y.sum() == pytest.approx(1.0, abs=1e-6)
        assert np.argmax(y) == 50
        assert y[47] == pytest.approx(y[53])

    def test_noise_variance_reduction(self):
        sigma = 2.0
        x = np.random.default_rng(0).normal(size=200_000)
        ratio = smooth(x, sigma).var() / x.var()
        expected = 1 / (2 * np.sqrt(np.pi) * sigma)
        assert ratio == pytest.approx(expected, rel=0.1)

    def test_missing_interpolated(self):
        x = np.array([0.0, np.nan, 2.0, np.nan, np.nan, 5.0, np.nan])
        np.testing.assert_allclose(interpolate_missing(x), [0, 1, 2, 3, 4, 5, 5])
        assert np.all(np.isfinite(smooth(x, 1.0)))

    def test_sigma_must_be_positive(self):
        with pytest.raises(ValueError):
            smooth(np.zeros(5), 0.0)


class TestDetect:
    def test_cosine(self):
        t = np.arange(500)
        acts = detect_activations(np.cos(2 * np.pi * t / 50))
        np.testing.assert_array_equal(acts.frames, np.arange(50, 500, 50))

    def test_monotone(self):
        assert len(detect_activations(np.arange(30.0))) == 0
        assert len(detect_activations(-np.arange(30.0) ** 2)) == 0

    def test_plateau_leftmost_and_endpoints(self):
        x = [5, 1, 3, 3, 3, 1, 2, 2]
        np.testing.assert_array_equal(local_maxima(x), [2])

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.integers(-3, 3), min_size=0, max_size=40))
    def test_matches_neighbour_oracle(self, values):
        assert local_maxima(values).tolist() == naive_maxima(values)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 10**6), st.integers(-4, 4))
    def test_amplitude_invariant(self, seed, power):
        x = np.random.default_rng(seed).normal(size=60)
        alpha = 2.0 ** power
        np.testing.assert_array_equal(local_maxima(alpha * x), local_maxima(x))

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 10**6), st.integers(1, 20))
    def test_shift_equivariant(self, seed, delta):
        x = np.random.default_rng(seed).normal(size=80)
        full = local_maxima(x)
        cut = local_maxima(x[delta:])
        np.testing.assert_array_equal(cut + delta, full[full > delta])

    def test_prominence_filter(self):
        x = np.array([0, 5, 0, 0.2, 0.1, 0.3, 0, 4, 0.0])
        assert detect_activations(x).frames.tolist() == [1, 3, 5, 7]
        assert detect_activations(x, min_prominence=1.0).frames.tolist() == [1, 7]


class TestStrokeFrequency:
    def test_anti_symmetric_example(self):
        acts = ActivationSeries(0, [10, 60, 110, 160], ANTI_SYMMETRIC)
        assert stroke_intervals(acts.frames, ANTI_SYMMETRIC).tolist() == [100, 100]
        assert estimate_stroke_frequency([acts]).f_stroke == 100.0

    def test_symmetric_example(self):
        acts = ActivationSeries(0, [10, 110, 210], SYMMETRIC)
        assert estimate_stroke_frequency([acts]).f_stroke == 100.0

    @pytest.mark.parametrize("period", [40, 96, 100, 117])
    def test_noiseless_exact(self, period):
        bundle = [ActivationSeries(i, periodic(3 * i, period, 3000)) for i in range(6)]
        if period % 2:
            # odd periods alternate half-gaps but stroke intervals stay exact
            bundle = [ActivationSeries(i, np.sort(np.concatenate(
                [np.arange(3 * i, 3000, period), np.arange(3 * i + period // 2, 3000, period)])))
                for i in range(6)]
        assert estimate_stroke_frequency(bundle).f_stroke == period

    def test_jittered_bundle(self):
        rng = np.random.default_rng(1)
        bundle = []
        for i in range(15):
            base = periodic(rng.integers(0, 96), 96, 5000)
            frames = np.unique(base + rng.integers(-2, 3, size=base.size))
            bundle.append(ActivationSeries(i, frames[frames >= 0]))
        est = estimate_stroke_frequency(bundle)
        assert abs(est.f_stroke - 96) <= 2
        assert est.histogram.sum() > 0 and est.window > 0

    def test_insufficient(self):
        with pytest.raises(InsufficientActivations):
            estimate_stroke_frequency([ActivationSeries(0, [5, 60]), ActivationSeries(1, [])])


class TestPrune:
    def test_example_enumerates_deletions(self):
        frames = [10, 60, 63, 110]
        options = {63: [10, 60, 110], 60: [10, 63, 110]}
        best = min(options.values(), key=lambda f: spacing_error(f, 50))
        assert best == [10, 60, 110]
        acts = ActivationSeries(0, frames, ANTI_SYMMETRIC)
        assert prune_activations(acts, 100.0, 0.5).frames.tolist() == best

    def test_regular_unchanged(self):
        frames = periodic(7, 100, 1000)
        np.testing.assert_array_equal(prune_frames(frames, 50.0), frames)

    def test_empty(self):
        assert prune_activations(ActivationSeries(0, []), 100.0).frames.size == 0

    def test_symmetric_gap(self):
        acts = ActivationSeries(0, [0, 100, 130, 200], SYMMETRIC)
        assert prune_activations(acts, 100.0).frames.tolist() == [0, 100, 200]

    @settings(max_examples=150, deadline=None)
    @given(st.lists(st.integers(0, 2000), max_size=40, unique=True), st.floats(20, 200))
    def test_never_grows_and_clears_violations(self, frames, f_stroke):
        frames = sorted(frames)
        out = prune_frames(frames, f_stroke / 2)
        assert len(out) <= len(frames)
        assert set(out.tolist()) <= set(frames)
        assert np.all(np.diff(out) >= 0.5 * f_stroke / 2)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 50), st.integers(20, 150), st.integers(3, 30))
    def test_regular_endpoints_kept(self, phase, period, n):
        frames = phase + period * np.arange(n) // 2
        out = prune_frames(frames, period / 2)
        assert out[0] == frames[0] and out[-1] == frames[-1]


class TestRegularIntervals:
    def test_example(self):
        acts = ActivationSeries(3, [10, 60, 110, 160])
        assert regular_intervals(acts, 100.0, 10.0) == [
            RegularInterval(3, 10, 110, 60), RegularInterval(3, 60, 160, 110)]

    def test_irregular(self):
        assert regular_intervals(ActivationSeries(0, [10, 60, 125]), 100.0, 10.0) == []

    def test_strict_boundary(self):
        acts = ActivationSeries(0, [10, 60, 110, 160])
        assert regular_intervals(acts, 100.0, 0.0) == []

    def test_symmetric_pairs(self):
        acts = ActivationSeries(0, [0, 98, 210], SYMMETRIC)
        assert regular_intervals(acts, 100.0, 5.0) == [RegularInterval(0, 0, 98, None)]

    def test_missing_run_invalidates(self):
        acts = ActivationSeries(0, [0, 50, 100, 150, 200])
        missing = np.zeros(220, bool)
        missing[120:180] = True  # 60 frames > f_stroke / 2
        got = regular_intervals(acts, 100.0, 10.0, missing)
        assert [(r.start, r.end) for r in got] == [(0, 100)]
        missing[:] = False
        missing[120:150] = True  # short runs are tolerated
        assert len(regular_intervals(acts, 100.0, 10.0, missing)) == 3

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.integers(0, 1000), max_size=20, unique=True), st.integers(-500, 500))
    def test_shift_equivariant(self, frames, delta):
        frames = sorted(frames)
        if frames and frames[0] + delta < 0:
            delta = -frames[0]
        acts = ActivationSeries(0, frames)
        a = regular_intervals(acts, 100.0, 10.0)
        b = regular_intervals(acts.shifted(delta), 100.0, 10.0)
        assert [(r.start + delta, r.end + delta, r.middle + delta) for r in a] == \
            [(r.start, r.end, r.middle) for r in b]


class TestGoodness:
    def test_perfect(self):
        assert goodness(ActivationSeries(0, periodic(0, 100, 1000)), 100.0) == 0.0

    def test_one_missing_of_ten(self):
        frames = [f for f in range(0, 500, 50) if f != 250]
        # nine frames, eight gaps: seven exact, one double -> gap term 1/8; one of ten expected missed
        assert goodness(ActivationSeries(0, frames), 100.0) == pytest.approx(1 / 8 + 0.1)
        assert goodness(ActivationSeries(0, frames), 100.0, penalty=2.0) == pytest.approx(1 / 8 + 0.2)

    def test_too_short(self):
        assert goodness(ActivationSeries(0, [5]), 100.0) == float("inf")

    def test_ordering(self):
        rng = np.random.default_rng(2)
        clean = periodic(0, 100, 3000)
        jittered = np.unique(clean + rng.integers(-3, 4, clean.size))
        jittered = jittered[jittered >= 0]
        half = clean[rng.permutation(clean.size)[: clean.size // 2]]
        half = np.sort(np.concatenate([half, clean[[0, -1]]]))
        half = np.unique(half)
        series = [ActivationSeries("half", half), ActivationSeries("jit", jittered),
                  ActivationSeries("clean", clean)]
        assert [p for p, _ in goodness_rank(series, 100.0)] == ["clean", "jit", "half"]

    def test_ties_by_id(self):
        frames = periodic(0, 100, 500)
        series = [ActivationSeries(i, frames) for i in (7, 2, 5)]
        assert [p for p, _ in goodness_rank(series, 100.0)] == [2, 5, 7]


class TestTypes:
    def test_series_must_increase(self):
        with pytest.raises(ValueError):
            ActivationSeries(0, [5, 5])
        with pytest.raises(ValueError):
            ActivationSeries(0, [5, 20], n_frames=20)

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            ActivationSeries(0, [1], mode="diagonal")

    def test_score_matrix(self):
        s = ScoreMatrix(np.array([[1, np.nan], [2, 3], [4, 5.0]]))
        assert (s.n_frames, s.n_poselets) == (3, 2)
        assert s.missing.tolist() == [[False, True], [False, False], [False, False]]
        with pytest.raises(ValueError):
            ScoreMatrix(np.zeros((2, 4)))
