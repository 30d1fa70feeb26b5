"""End-to-end accuracy runs on synthetic videos with known key-pose frames.

Each video is analysed from its side-view score matrix; a clean second view
(three left/right pairs of symmetric series) is generated on the same
timeline for the fusion variant.  Models are fitted on separate training
seeds and evaluated at a deviation of 0.03 stroke lengths.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .activations import SYMMETRIC
from .config import PipelineConfig
from .errors import AnnotationNotCovered
from .evaluation import EVAL_DEVIATION, curve, match
from .model import build_prior
from .pipeline import VideoAnalysis, analyse_scores, fit_model, intervals_by_poselet, predict, with_fused
from .synthetic import SyntheticDataset, benchmark_spec, generate, second_view_pairing, second_view_spec

VARIANTS = ("ml_top5", "ml_all", "ml_all_pp", "fused", "map", "prior")
TRAIN_SEEDS = tuple(range(1000, 1006))
TEST_SEEDS = tuple(range(10))


@dataclass
class BenchmarkVideo:
    dataset: SyntheticDataset
    analysis: VideoAnalysis
    fused: VideoAnalysis

    @property
    def ground_truth(self) -> np.ndarray:
        return self.dataset.keypose_frames[0]


@dataclass
class BenchmarkResult:
    seeds: list
    recall: dict = field(default_factory=dict)  # variant -> per-seed recall(0.03)
    precision: dict = field(default_factory=dict)

    def mean_recall(self, variant: str) -> float:
        return float(np.mean(self.recall[variant]))

    def mean_precision(self, variant: str) -> float:
        return float(np.mean(self.precision[variant]))

    def table(self) -> str:
        lines = [f"{'variant':<10} {'recall':>7} {'min':>6} {'precision':>10}"]
        for v in self.recall:
            lines.append(f"{v:<10} {self.mean_recall(v):7.3f} {min(self.recall[v]):6.3f} "
                         f"{self.mean_precision(v):10.3f}")
        return "\n".join(lines)


def prepare_video(seed: int, config: PipelineConfig | None = None, **spec_changes) -> BenchmarkVideo:
    config = config or PipelineConfig()
    spec = benchmark_spec(seed, **spec_changes)
    ds = generate(spec)
    analysis = analyse_scores(ds.scores, config, ds.poselet_ids, spec.mode)
    view = second_view_spec(spec)
    ds2 = generate(view, ds.timeline)
    second = analyse_scores(ds2.scores, config.override(mode=SYMMETRIC), ds2.poselet_ids, SYMMETRIC)
    fused = with_fused(analysis, second, second_view_pairing(view), config)
    return BenchmarkVideo(ds, analysis, fused)


def pick_annotation(video: BenchmarkVideo, model, config: PipelineConfig) -> int:
    """The ground-truth frame nearest the middle of the video that the prior can use."""
    gt = video.ground_truth
    order = np.argsort(np.abs(np.arange(len(gt)) - len(gt) // 2), kind="stable")
    ids = {s.poselet for s in video.analysis.series if s.poselet in model.likelihoods}
    intervals = intervals_by_poselet(video.analysis, config, ids)
    for i in order:
        try:
            build_prior(int(gt[i]), intervals, model.mode, config.prior_sigma_frac)
        except AnnotationNotCovered:
            continue
        return int(gt[i])
    raise AnnotationNotCovered("no ground-truth frame lies in a regular interval")


def _score(preds, video: BenchmarkVideo, config: PipelineConfig):
    res = match(preds, video.ground_truth, config.match_window, video.analysis.f_stroke)
    c = curve(res)
    return c.recall_at(EVAL_DEVIATION), c.precision


def run_benchmark(test_seeds=TEST_SEEDS, train_seeds=TRAIN_SEEDS,
                  config: PipelineConfig | None = None, variants=VARIANTS,
                  **spec_changes) -> BenchmarkResult:
    config = config or PipelineConfig()
    train = [prepare_video(s, config, **spec_changes) for s in train_seeds]
    model = fit_model([(v.analysis, v.ground_truth) for v in train], config)
    fused_model = fit_model([(v.fused, v.ground_truth) for v in train], config)

    out = BenchmarkResult(list(test_seeds), {v: [] for v in variants}, {v: [] for v in variants})
    for seed in test_seeds:
        video = prepare_video(seed, config, **spec_changes)
        a = video.analysis
        runs = {
            "ml_top5": lambda: predict(model, a, config, postprocess=False),
            "ml_all": lambda: predict(model, a, config, top_k=None, postprocess=False),
            "ml_all_pp": lambda: predict(model, a, config, top_k=None, postprocess=True),
            "fused": lambda: predict(fused_model, video.fused, config, top_k=None, postprocess=True),
            "map": lambda: predict(model, a, config, pick_annotation(video, model, config),
                                   postprocess=False),
            "prior": lambda: predict(model, a, config, pick_annotation(video, model, config),
                                     postprocess=False, use_ml=False),
        }
        for v in variants:
            r, p = _score(runs[v](), video, config)
            out.recall[v].append(r)
            out.precision[v].append(p)
    return out
