"""Stage wiring: score matrix -> activation series -> key-pose predictions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .activations import (
    ActivationSeries, ScoreMatrix, StrokeEstimate, detect_activations, estimate_stroke_frequency,
    goodness_rank, prune_activations, regular_intervals, smooth,
)
from .config import PipelineConfig
from .model import (
    KeyPoseModel, build_prior, fit_likelihoods, fuse_series, map_estimate, postprocess_predictions,
)

MAX_STROKE_ROUNDS = 5


@dataclass
class VideoAnalysis:
    """Pruned activation series of one video and its stroke estimate."""

    series: list[ActivationSeries]
    stroke: StrokeEstimate
    missing: np.ndarray | None = None  # (T, n) mask aligned with ``series``
    n_frames: int | None = None

    @property
    def f_stroke(self) -> float:
        return self.stroke.f_stroke

    def by_id(self) -> dict:
        return {s.poselet: s for s in self.series}

    def shifted(self, delta: int) -> VideoAnalysis:
        missing = None
        if self.missing is not None:
            missing = np.vstack([np.zeros((delta, self.missing.shape[1]), bool), self.missing])
        n = None if self.n_frames is None else self.n_frames + delta
        return VideoAnalysis([s.shifted(delta) for s in self.series], self.stroke, missing, n)


def detect_raw(scores, config: PipelineConfig, poselet_ids=None, mode: str | None = None):
    """Smoothed local maxima of every score column, before pruning."""
    sm = scores if isinstance(scores, ScoreMatrix) else ScoreMatrix(scores)
    mode = mode or config.mode
    ids = list(poselet_ids) if poselet_ids is not None else list(range(sm.n_poselets))
    raw = []
    for j, pid in enumerate(ids):
        x = smooth(sm.values[:, j], config.smooth_sigma)
        amp = float(np.percentile(x, 99) - np.percentile(x, 1))
        raw.append(detect_activations(x, pid, mode, config.prominence_frac * amp))
    return raw, sm


def analyse_scores(scores, config: PipelineConfig, poselet_ids=None,
                   mode: str | None = None) -> VideoAnalysis:
    """Activations, stroke period and pruning for a ``T x n`` score matrix.

    The stroke period is re-estimated from the pruned series until it
    settles (at most a few rounds); pruning always starts again from the
    raw detections.
    """
    raw, sm = detect_raw(scores, config, poselet_ids, mode)
    stroke = estimate_stroke_frequency(raw, config.stroke_window, config.bin_width)
    pruned = raw
    for _ in range(MAX_STROKE_ROUNDS):
        pruned = [prune_activations(a, stroke.f_stroke, config.min_frac) for a in raw]
        update = estimate_stroke_frequency(pruned, config.stroke_window, config.bin_width)
        settled = abs(update.f_stroke - stroke.f_stroke) < 0.5
        stroke = update
        if settled:
            break
    pruned = [prune_activations(a, stroke.f_stroke, config.min_frac) for a in raw]
    return VideoAnalysis(pruned, stroke, sm.missing, sm.n_frames)


def intervals_by_poselet(analysis: VideoAnalysis, config: PipelineConfig, ids=None) -> dict:
    """Regular intervals of the selected series (all series by default)."""
    lam = config.lambda_frac * analysis.f_stroke
    out = {}
    for j, s in enumerate(analysis.series):
        if ids is not None and s.poselet not in ids:
            continue
        missing = None
        if analysis.missing is not None and j < analysis.missing.shape[1]:
            missing = analysis.missing[:, j]
        out[s.poselet] = regular_intervals(s, analysis.f_stroke, lam, missing)
    return out


def fit_model(training, config: PipelineConfig, keypose=0) -> KeyPoseModel:
    """Fit per-poselet likelihoods from ``(VideoAnalysis, ground_truth_frames)`` pairs."""
    videos = [(intervals_by_poselet(a, config), gts) for a, gts in training]
    return fit_likelihoods(videos, config.mode, keypose, config.top_k, config.sigma_min)


def select_series(analysis: VideoAnalysis, model: KeyPoseModel, top_k: int | None) -> list:
    """Ids of the ``top_k`` most regular series that the model has likelihoods for."""
    ranked = [pid for pid, _ in goodness_rank(analysis.series, analysis.f_stroke)
              if pid in model.likelihoods]
    return ranked if top_k is None else ranked[:top_k]


def predict(model: KeyPoseModel, analysis: VideoAnalysis, config: PipelineConfig,
            annotation: int | None = None, top_k: int | None | str = "model",
            postprocess: bool | None = None, use_ml: bool = True):
    """Key-pose frames for one video.

    ``annotation`` (one expert-labelled frame of this video) adds the prior
    and turns the ML estimate into the MAP estimate.  ``top_k="model"``
    takes the model's own setting, ``None`` uses every series.
    """
    k = model.top_k if top_k == "model" else top_k
    ids = set(select_series(analysis, model, k))
    intervals = intervals_by_poselet(analysis, config, ids)
    prior = None
    if annotation is not None:
        prior = build_prior(annotation, intervals, model.mode, config.prior_sigma_frac)
    preds = map_estimate(model if use_ml else None, prior, intervals, analysis.f_stroke,
                         config.subwindow_frac, config.min_support, config.density_sigma_frac)
    if config.postprocess if postprocess is None else postprocess:
        preds = postprocess_predictions(preds, analysis.f_stroke, model.mode, config.min_frac)
    return preds


def with_fused(analysis: VideoAnalysis, secondary: VideoAnalysis, pairing,
               config: PipelineConfig) -> VideoAnalysis:
    """Primary analysis extended by merged pairs of second-view series."""
    pool = fuse_series(analysis.series, secondary.series, pairing, None, config.fuse_within)
    missing = None
    if analysis.missing is not None:
        extra = np.zeros((analysis.missing.shape[0], len(pool) - len(analysis.series)), bool)
        missing = np.hstack([analysis.missing, extra])
    return VideoAnalysis(pool, analysis.stroke, missing, analysis.n_frames)
