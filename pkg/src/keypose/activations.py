"""Poselet activation events from score time series.

Each column of a score matrix is smoothed, its local maxima become the
poselet's activations, and the activations of all poselets vote for the
stroke period through a histogram of interval lengths.  In anti-symmetric
mode (freestyle, walking) a working poselet fires twice per stroke, so one
stroke spans two activation gaps; in symmetric mode it spans one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter1d
from scipy.signal import peak_prominences

from .errors import InsufficientActivations

ANTI_SYMMETRIC = "anti_symmetric"
SYMMETRIC = "symmetric"
MODES = (ANTI_SYMMETRIC, SYMMETRIC)

DEFAULT_SMOOTH_SIGMA = 2.0
DEFAULT_BIN_WIDTH = 4.0
DEFAULT_MIN_FRAC = 0.5
WINDOW_STROKES = 8
MISSING_PENALTY = 1.0


def check_mode(mode: str) -> str:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    return mode


def gaps_per_stroke(mode: str) -> int:
    return 2 if check_mode(mode) == ANTI_SYMMETRIC else 1


@dataclass
class ScoreMatrix:
    """``T x n`` poselet scores; non-finite entries are missing."""

    values: np.ndarray
    frame_rate: float = 50.0
    start_frame: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("score matrix must be 2-D (frames x poselets)")
        if self.values.shape[0] < 3:
            raise ValueError("score matrix needs at least 3 frames")

    @property
    def missing(self) -> np.ndarray:
        return ~np.isfinite(self.values)

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_poselets(self) -> int:
        return self.values.shape[1]


@dataclass
class ActivationSeries:
    poselet: int | str
    frames: np.ndarray
    mode: str = ANTI_SYMMETRIC
    n_frames: int | None = None

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.int64).reshape(-1)
        check_mode(self.mode)
        if np.any(np.diff(self.frames) <= 0):
            raise ValueError("activation frames must be strictly increasing")
        if self.frames.size and self.frames[0] < 0:
            raise ValueError("activation frames must be non-negative")
        if self.n_frames is not None and self.frames.size and self.frames[-1] >= self.n_frames:
            raise ValueError("activation frame beyond the series length")

    def __len__(self) -> int:
        return len(self.frames)

    def with_frames(self, frames) -> ActivationSeries:
        return ActivationSeries(self.poselet, frames, self.mode, self.n_frames)

    def shifted(self, delta: int) -> ActivationSeries:
        n = None if self.n_frames is None else self.n_frames + delta
        return ActivationSeries(self.poselet, self.frames + delta, self.mode, n)


@dataclass
class StrokeEstimate:
    f_stroke: float
    histogram: np.ndarray
    bin_edges: np.ndarray
    window: float
    window_estimates: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class RegularInterval:
    poselet: int | str
    start: int
    end: int
    middle: int | None = None

    @property
    def length(self) -> int:
        return self.end - self.start


def interpolate_missing(series) -> np.ndarray:
    """Linearly fill non-finite samples; ends take the nearest valid value."""
    x = np.asarray(series, dtype=float).copy()
    ok = np.isfinite(x)
    if ok.all() or not ok.any():
        return x
    idx = np.arange(len(x))
    x[~ok] = np.interp(idx[~ok], idx[ok], x[ok])
    return x


def smooth(series, sigma_frames: float = DEFAULT_SMOOTH_SIGMA) -> np.ndarray:
    """Gaussian smoothing, kernel truncated at 4 sigma, reflected borders."""
    if not sigma_frames > 0:
        raise ValueError("sigma_frames must be positive")
    x = interpolate_missing(series)
    return gaussian_filter1d(x, sigma_frames, mode="reflect", truncate=4.0)


def local_maxima(x) -> np.ndarray:
    """Indices strictly above both neighbours; a plateau reports its leftmost index.

    Endpoints (and plateaus touching them) never count.
    """
    x = np.asarray(x, dtype=float)
    if len(x) < 3:
        return np.empty(0, dtype=np.int64)
    # collapse runs of equal values
    starts = np.flatnonzero(np.concatenate([[True], x[1:] != x[:-1]]))
    vals = x[starts]
    if len(vals) < 3:
        return np.empty(0, dtype=np.int64)
    peak = (vals[1:-1] > vals[:-2]) & (vals[1:-1] > vals[2:])
    return starts[1:-1][peak].astype(np.int64)


def detect_activations(series, poselet: int | str = 0, mode: str = ANTI_SYMMETRIC,
                       min_prominence: float = 0.0) -> ActivationSeries:
    """Local maxima of an (already smoothed) series.

    ``min_prominence`` > 0 additionally drops maxima whose topographic
    prominence is below it; the default keeps every strict local maximum.
    """
    x = np.asarray(series, dtype=float)
    peaks = local_maxima(x)
    if min_prominence > 0 and peaks.size:
        prom = peak_prominences(x, peaks)[0]
        peaks = peaks[prom >= min_prominence]
    return ActivationSeries(poselet, peaks, mode, len(x))


def stroke_intervals(frames, mode: str) -> np.ndarray:
    """Lengths of candidate strokes: ``m[t+1] - m[t-1]`` or ``m[t+1] - m[t]``."""
    m = np.asarray(frames)
    step = gaps_per_stroke(mode)
    if len(m) <= step:
        return np.empty(0, dtype=m.dtype if m.size else np.int64)
    return m[step:] - m[:-step]


def _modal_estimate(intervals: np.ndarray, bin_width: float):
    hi = intervals.max() + bin_width
    edges = np.arange(0.0, hi + bin_width, bin_width)
    hist, edges = np.histogram(intervals, bins=edges)
    mode_bin = int(np.argmax(hist))
    # refine with the mean of the modal bin and its two neighbours, so a
    # period sitting on a bin edge is not pulled towards one side
    lo, up = edges[max(mode_bin - 1, 0)], edges[min(mode_bin + 2, len(edges) - 1)]
    inside = intervals[(intervals >= lo) & (intervals < up)]
    return float(inside.mean()), hist, edges


def estimate_stroke_frequency(acts, window: float | None = None,
                              bin_width: float = DEFAULT_BIN_WIDTH) -> StrokeEstimate:
    """Stroke period (frames) from the modal bin of an interval-length histogram.

    A global histogram over every series bootstraps a first estimate; the
    final value is the median of the modal estimates of sliding windows of
    ``window`` frames (default eight strokes), stepped by half a window.
    """
    acts = list(acts)
    starts, lengths = [], []
    for a in acts:
        iv = stroke_intervals(a.frames, a.mode)
        if iv.size:
            starts.append(a.frames[:len(iv)])
            lengths.append(iv)
    if not lengths:
        raise InsufficientActivations("no series holds enough activations for a stroke interval")
    starts = np.concatenate(starts)
    lengths = np.concatenate(lengths).astype(float)
    f0, hist, edges = _modal_estimate(lengths, bin_width)
    if window is None:
        window = WINDOW_STROKES * f0

    estimates = []
    lo, hi = starts.min(), starts.max()
    w0 = float(lo)
    while True:
        sel = (starts >= w0) & (starts < w0 + window)
        if sel.any():
            estimates.append(_modal_estimate(lengths[sel], bin_width)[0])
        if w0 + window > hi:
            break
        w0 += window / 2.0
    f_stroke = float(np.median(estimates)) if estimates else f0
    return StrokeEstimate(f_stroke, hist, edges, float(window), estimates)


def expected_gap(f_stroke: float, mode: str) -> float:
    return f_stroke / gaps_per_stroke(mode)


def _window_error(points: list, expected: float) -> float:
    return float(sum(abs((b - a) - expected) for a, b in zip(points[:-1], points[1:])))


def prune_frames(frames, expected: float, min_frac: float = DEFAULT_MIN_FRAC) -> np.ndarray:
    """Greedily delete events that sit much closer than ``expected`` to a neighbour.

    The tightest offending pair is resolved first; of its two members the one
    whose removal leaves the more regular neighbourhood (sum of absolute gap
    errors over the surrounding events) is deleted, the later one on ties.
    """
    m = [int(v) for v in frames]
    limit = min_frac * expected
    while len(m) > 1:
        gaps = np.diff(m)
        i = int(np.argmin(gaps))
        if gaps[i] >= limit:
            break
        lo, hi = max(i - 1, 0), min(i + 3, len(m))
        keep_second = m[lo:i] + m[i + 1:hi]   # delete m[i]
        keep_first = m[lo:i + 1] + m[i + 2:hi]  # delete m[i + 1]
        if _window_error(keep_second, expected) < _window_error(keep_first, expected):
            del m[i]
        else:
            del m[i + 1]
    return np.asarray(m, dtype=np.int64)


def prune_activations(acts: ActivationSeries, f_stroke: float,
                      min_frac: float = DEFAULT_MIN_FRAC) -> ActivationSeries:
    """Remove activations producing gaps below ``min_frac`` of the expected gap."""
    return acts.with_frames(prune_frames(acts.frames, expected_gap(f_stroke, acts.mode), min_frac))


def _long_missing_runs(missing: np.ndarray, min_len: float) -> list[tuple[int, int]]:
    runs = []
    if missing is None or not np.any(missing):
        return runs
    padded = np.concatenate([[False], np.asarray(missing, bool), [False]])
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    for a, b in zip(edges[::2], edges[1::2]):
        if b - a > min_len:
            runs.append((int(a), int(b)))
    return runs


def regular_intervals(acts: ActivationSeries, f_stroke: float, lam: float,
                      missing=None) -> list[RegularInterval]:
    """Stroke intervals whose length is within ``lam`` of ``f_stroke`` (strictly).

    ``missing`` is an optional per-frame mask; intervals overlapping a run of
    more than ``f_stroke / 2`` missing frames are dropped.
    """
    m = acts.frames
    step = gaps_per_stroke(acts.mode)
    runs = _long_missing_runs(missing, f_stroke / 2.0)
    out = []
    for t in range(len(m) - step):
        start, end = int(m[t]), int(m[t + step])
        if not abs(end - start - f_stroke) < lam:
            continue
        if any(a < end and b > start for a, b in runs):
            continue
        middle = int(m[t + 1]) if step == 2 else None
        out.append(RegularInterval(acts.poselet, start, end, middle))
    return out


def goodness(acts: ActivationSeries, f_stroke: float, penalty: float = MISSING_PENALTY) -> float:
    """Irregularity of a series; 0 for a perfectly periodic one, larger is worse.

    Mean relative deviation of adjacent gaps from the expected gap, plus
    ``penalty`` times the fraction of expected activations missing between
    the first and the last one.  Series with fewer than two activations
    score ``inf``.
    """
    m = acts.frames
    if len(m) < 2:
        return float("inf")
    exp_gap = expected_gap(f_stroke, acts.mode)
    gaps = np.diff(m).astype(float)
    gap_term = float(np.mean(np.abs(gaps - exp_gap) / exp_gap))
    expected_count = int(round((m[-1] - m[0]) / exp_gap)) + 1
    missed = max(0, expected_count - len(m))
    return gap_term + penalty * missed / expected_count


def id_sort_key(poselet):
    return (0, poselet, "") if isinstance(poselet, (int, np.integer)) else (1, 0, str(poselet))


def goodness_rank(all_series, f_stroke: float, penalty: float = MISSING_PENALTY
                  ) -> list[tuple[int | str, float]]:
    """``(poselet, goodness)`` pairs, best (smallest) first; ties by poselet id."""
    scored = [(a.poselet, goodness(a, f_stroke, penalty)) for a in all_series]
    return sorted(scored, key=lambda pg: (pg[1], id_sort_key(pg[0])))
