"""Matching of predicted key-pose frames to annotations; recall and precision.

A prediction within ``window`` frames of an annotation can be paired with
it; every prediction and annotation is used at most once.  Among all
pairings the one with the most pairs is taken, then the one with the
smallest total deviation, then the one favouring earlier predictions.
Recall at a deviation ``x`` counts annotations whose partner lies within
``x * f_stroke`` frames.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

MATCH_WINDOW = 10
EVAL_DEVIATION = 0.03


@dataclass
class MatchResult:
    pairs: list[tuple[int, int]]
    tp: int
    fp: int
    fn: int
    deviations: np.ndarray  # |pred - gt| in frames, one per pair
    f_stroke: float | None = None

    @property
    def normalized_deviations(self) -> np.ndarray:
        if self.f_stroke is None:
            raise ValueError("f_stroke unknown; pass it to match() or curve()")
        return self.deviations / self.f_stroke

    @property
    def n_predictions(self) -> int:
        return self.tp + self.fp

    @property
    def n_ground_truth(self) -> int:
        return self.tp + self.fn


@dataclass
class RecallCurve:
    deviation: np.ndarray
    recall: np.ndarray
    precision: float
    n_predictions: int
    tp: int = 0
    fp: int = 0
    fn: int = 0
    precision_defined: bool = True
    extra: dict = field(default_factory=dict)

    def recall_at(self, x: float = EVAL_DEVIATION) -> float:
        hit = np.flatnonzero(np.isclose(self.deviation, x, rtol=0, atol=1e-12))
        if hit.size:
            return float(self.recall[hit[0]])
        return float(np.interp(x, self.deviation, self.recall))

    def summary(self) -> dict:
        return {"recall_at_003": self.recall_at(EVAL_DEVIATION), "precision": self.precision,
                "tp": self.tp, "fp": self.fp, "fn": self.fn,
                "no_predictions": not self.precision_defined}

    def rows(self):
        return list(zip(self.deviation.tolist(), self.recall.tolist()))


def _frames(items) -> np.ndarray:
    out = [getattr(p, "frame", p) for p in items]
    return np.asarray(out, dtype=float).reshape(-1)


def match(preds, gts, window: float = MATCH_WINDOW, f_stroke: float | None = None) -> MatchResult:
    """One-to-one pairing of predictions and annotations within ``window`` frames."""
    p = _frames(preds)
    g = _frames(gts)
    if p.size == 0 or g.size == 0:
        return MatchResult([], 0, int(p.size), int(g.size), np.empty(0), f_stroke)
    dist = np.abs(p[:, None] - g[None, :])
    ok = dist <= window
    # ranks of the predictions break ties towards earlier frames
    rank = np.argsort(np.argsort(p, kind="stable"), kind="stable")
    tie = 0.5 / (p.size * p.size + 1)
    big = window * (min(p.size, g.size) + 1) + 1.0
    cost = np.where(ok, dist - big + tie * rank[:, None], 0.0)
    rows, cols = linear_sum_assignment(cost)
    keep = ok[rows, cols]
    rows, cols = rows[keep], cols[keep]
    order = np.argsort(g[cols], kind="stable")
    rows, cols = rows[order], cols[order]
    pairs = [(int(p[r]), int(g[c])) for r, c in zip(rows, cols)]
    tp = len(pairs)
    return MatchResult(pairs, tp, int(p.size) - tp, int(g.size) - tp, dist[rows, cols], f_stroke)


def default_grid(hi: float = 0.1, step: float = 0.001) -> np.ndarray:
    grid = np.round(np.arange(0.0, hi + step / 2, step), 6)
    if not np.any(np.isclose(grid, EVAL_DEVIATION)):
        grid = np.sort(np.append(grid, EVAL_DEVIATION))
    return grid


def curve(results, f_stroke: float | None = None, grid=None) -> RecallCurve:
    """Recall against stroke-normalised deviation, pooled over one or more videos.

    Precision with no predictions at all is reported as 1.0 and flagged via
    ``precision_defined = False``.
    """
    if isinstance(results, MatchResult):
        results = [results]
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    if not np.any(np.isclose(grid, EVAL_DEVIATION, rtol=0, atol=1e-12)):
        grid = np.sort(np.append(grid, EVAL_DEVIATION))
    devs = []
    tp = fp = fn = 0
    for r in results:
        fs = f_stroke if f_stroke is not None else r.f_stroke
        if fs is None or not fs > 0:
            raise ValueError("f_stroke must be positive")
        devs.append(r.deviations / fs)
        tp, fp, fn = tp + r.tp, fp + r.fp, fn + r.fn
    devs = np.sort(np.concatenate(devs)) if devs else np.empty(0)
    n_gt = tp + fn
    hits = np.searchsorted(devs, grid, side="right")
    recall = hits / n_gt if n_gt else np.zeros(len(grid))
    n_pred = tp + fp
    precision = tp / n_pred if n_pred else 1.0
    return RecallCurve(grid, recall, float(precision), n_pred, tp, fp, fn, n_pred > 0)
