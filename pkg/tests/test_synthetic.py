from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from keypose.activations import ANTI_SYMMETRIC, SYMMETRIC, detect_activations, smooth
from keypose.errors import InvalidSpec
from keypose.geometry import kmeans_temporal
from keypose.synthetic import (
    LEFT_ARM, RIGHT_ARM, SyntheticMotionSpec, arm_phase_samples, benchmark_spec, generate,
    make_timeline, quality_profile, render_frames, second_view_pairing, second_view_spec,
)

CLEAN = SyntheticMotionSpec(period=100, n_poselets=4, noise_sigma=0.0, dropout_rate=0.0,
                            spurious_rate=0.0, duration=1000, seed=3, timing_jitter=0.0)


def purity(labels, truth):
    total = 0
    for c in np.unique(labels):
        _, counts = np.unique(truth[labels == c], return_counts=True)
        total += counts.max()
    return total / len(labels)


class TestGenerate:
    @pytest.mark.parametrize("mode", [ANTI_SYMMETRIC, SYMMETRIC])
    def test_clean_round_trip(self, mode):
        ds = generate(replace(CLEAN, mode=mode))
        for i in range(ds.spec.n_poselets):
            np.testing.assert_array_equal(detect_activations(ds.scores[:, i]).frames, ds.activations[i])
            np.testing.assert_array_equal(detect_activations(smooth(ds.scores[:, i])).frames,
                                          ds.activations[i])

    def test_bump_spacing(self):
        ds = generate(CLEAN)
        for frames in ds.activations:
            assert set(np.diff(frames).tolist()) <= {49, 50, 51}
        ds = generate(replace(CLEAN, mode=SYMMETRIC))
        for frames in ds.activations:
            assert set(np.diff(frames).tolist()) == {100}

    @pytest.mark.parametrize("changes", [
        {"dropout_rate": 1.0}, {"spurious_rate": 0.5}, {"period": 6}, {"mode": "sideways"},
        {"keypose_phases": (1.2,)}, {"noise_sigma": -0.1}, {"phase_offsets": (0.1,)},
        {"duration": 150},
    ])
    def test_invalid(self, changes):
        with pytest.raises(InvalidSpec):
            generate(replace(CLEAN, **changes))

    def test_deterministic(self):
        spec = benchmark_spec(4)
        a, b = generate(spec), generate(spec)
        np.testing.assert_array_equal(a.scores, b.scores)
        for x, y in zip(a.keypose_frames + a.activations, b.keypose_frames + b.activations):
            np.testing.assert_array_equal(x, y)
        assert not np.array_equal(a.scores, generate(benchmark_spec(5)).scores)

    def test_corruption_only_deletes_or_adds(self):
        spec = replace(CLEAN, dropout_rate=0.3, spurious_rate=0.3, duration=5000)
        ds = generate(spec)
        clean = generate(replace(spec, dropout_rate=0.0, spurious_rate=0.0))
        np.testing.assert_array_equal(ds.activations[0], clean.activations[0])
        dropped = spurious = 0
        for truth, seen in zip(ds.activations, ds.observed):
            kept = np.intersect1d(truth, seen)
            dropped += len(truth) - len(kept)
            spurious += len(np.setdiff1d(seen, truth))
        n = sum(len(t) for t in ds.activations)
        assert 0.2 < dropped / n < 0.4 and 0.2 < spurious / n < 0.4

    @pytest.mark.parametrize("mode", [ANTI_SYMMETRIC, SYMMETRIC])
    def test_keypose_reconstruction(self, mode):
        spec = replace(CLEAN, mode=mode, keypose_phases=(0.3, 0.77), duration=2000)
        ds = generate(spec)
        halves = (0.0, 0.5) if mode == ANTI_SYMMETRIC else (0.0,)
        for phase, frames in zip(spec.keypose_phases, ds.keypose_frames):
            want = {round(((phase + h) % 1.0) * 100 + cycle * 100)
                    for cycle in range(-1, 21) for h in halves}
            assert set(frames.tolist()) == {f for f in want if 0 <= f < 2000}

    def test_keypose_twice_per_period(self):
        ds = generate(replace(CLEAN, duration=2000))
        assert set(np.diff(ds.keypose_frames[0]).tolist()) == {50}

    def test_timeline_covers_video(self):
        spec = replace(CLEAN, period_jitter=3.0)
        tl = make_timeline(spec)
        assert tl.starts[0] < 0 and tl.starts[-1] + tl.lengths[-1] > spec.duration
        np.testing.assert_allclose(np.diff(tl.starts), tl.lengths[:-1])

    def test_amplitude_scales_scores(self):
        a = generate(replace(CLEAN, noise_sigma=0.1))
        b = generate(replace(CLEAN, noise_sigma=0.1, amplitude=2.0))
        np.testing.assert_allclose(b.scores, 2 * a.scores)


class TestSecondView:
    def test_pairs_half_a_cycle_apart(self):
        spec = benchmark_spec(0)
        view = second_view_spec(spec)
        assert view.mode == SYMMETRIC and view.n_poselets == 6
        offs = view.phase_offsets
        for a, b in second_view_pairing(view):
            i, j = a - view.id_offset, b - view.id_offset
            assert offs[j] - offs[i] == pytest.approx(0.5)

    def test_shared_timeline(self):
        spec = replace(CLEAN, period_jitter=2.0)
        ds = generate(spec)
        view = generate(second_view_spec(spec), ds.timeline)
        assert view.poselet_ids == [100, 101, 102, 103, 104, 105]
        assert view.keypose_frames[0].size > 0


class TestQualityProfile:
    def test_permuted_linspace(self):
        q = quality_profile(5, 100.0, 2, (0.01, 0.05))
        np.testing.assert_allclose(np.sort(q), [1, 2, 3, 4, 5])
        np.testing.assert_array_equal(q, quality_profile(5, 100.0, 2, (0.01, 0.05)))

    def test_benchmark_spec(self):
        spec = benchmark_spec(7, noise_sigma=0.2)
        assert (spec.n_poselets, spec.period, spec.duration, spec.seed) == (15, 100, 5000, 7)
        assert (spec.dropout_rate, spec.spurious_rate, spec.noise_sigma) == (0.05, 0.05, 0.2)


@pytest.fixture(scope="module")
def rendered():
    return render_frames(replace(CLEAN, period=20, duration=100), n_frames=45)


class TestRender:
    def test_periodic(self, rendered):
        frames, configs = rendered
        for t in range(25):
            np.testing.assert_array_equal(configs[t].joints, configs[t + 20].joints)
            np.testing.assert_array_equal(frames[t].pixels, frames[t + 20].pixels)

    def test_anti_symmetric_arms(self, rendered):
        _, configs = rendered
        for t in range(30):
            np.testing.assert_array_equal(configs[t].joints[list(LEFT_ARM)],
                                          configs[t + 10].joints[list(RIGHT_ARM)])

    def test_symmetric_arms_coincide(self):
        _, configs = render_frames(replace(CLEAN, mode=SYMMETRIC, period=20, duration=100), n_frames=5)
        for c in configs:
            np.testing.assert_array_equal(c.joints[list(LEFT_ARM)], c.joints[list(RIGHT_ARM)])

    def test_figure_drawn_inside(self, rendered):
        frames, configs = rendered
        assert frames[0].pixels.shape == (96, 96)
        assert frames[0].pixels.max() == 1.0
        assert np.all((configs[0].joints >= 0) & (configs[0].joints < 96))

    def test_deterministic_per_seed(self):
        spec = replace(CLEAN, period=20, duration=100)
        a, _ = render_frames(spec, n_frames=3)
        b, _ = render_frames(spec, n_frames=3)
        np.testing.assert_array_equal(a[2].pixels, b[2].pixels)

    @pytest.mark.parametrize("changes, canvas", [
        ({"period": 21}, (96, 96)), ({"period": 20.5}, (96, 96)), ({"period": 20}, (40, 40)),
    ])
    def test_invalid(self, changes, canvas):
        with pytest.raises(InvalidSpec):
            render_frames(replace(CLEAN, duration=100, **changes), canvas, n_frames=2)

    def test_clustering_follows_phase(self):
        configs, labels = arm_phase_samples(200, (0.0, 0.25, 0.5, 0.75), seed=1)
        res = kmeans_temporal(configs, 4, seed=0)
        assert purity(res.labels, labels) >= 0.9
