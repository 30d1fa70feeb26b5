"""Key-pose occurrence prediction from regular poselet activation intervals.

Every poselet contributes a Gaussian over the normalised position ``c`` of a
key-pose inside its regular stroke intervals.  At inference each regular
interval turns that Gaussian into a candidate frame ``mu_pos`` with spread
``sigma_pos``; candidates that cluster in time are combined by maximising
the summed log-densities.  An optional single-annotation prior adds its own
candidates to the same pool (uniform prior: identical to the ML estimate).

In anti-symmetric mode a stroke interval holds two key-pose occurrences
half a stroke apart.  Their positions are folded onto ``[0, 0.5)`` (the
smaller ``c`` of each pair) and every interval emits a second candidate
half an interval later.  Folded samples are treated as circular so a
key-pose sitting right next to an activation does not split into two modes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .activations import (
    ANTI_SYMMETRIC, DEFAULT_MIN_FRAC, SYMMETRIC, ActivationSeries, RegularInterval, check_mode,
    expected_gap, goodness, id_sort_key, local_maxima, prune_frames,
)
from .errors import (
    AnnotationNotCovered, GroundTruthOutsideInterval, InsufficientSamples, MisalignedSeries,
    NoCandidates,
)

SIGMA_MIN = 0.01
PRIOR_SIGMA_FRAC = 0.04
DEFAULT_TOP_K = 5
DEFAULT_MIN_SUPPORT = 2
SUBWINDOW_FRAC = 0.2
DENSITY_SIGMA_FRAC = 0.05
FUSE_WITHIN = 2


def fold_period(mode: str) -> float:
    return 0.5 if check_mode(mode) == ANTI_SYMMETRIC else 1.0


@dataclass(frozen=True)
class PoseletLikelihood:
    poselet: int | str
    mu: float
    sigma: float
    n: int


@dataclass
class KeyPoseModel:
    keypose: int | str
    mode: str
    likelihoods: dict = field(default_factory=dict)
    top_k: int | None = DEFAULT_TOP_K

    def __post_init__(self):
        check_mode(self.mode)
        if self.top_k is not None and self.top_k < 1:
            raise ValueError("top_k must be at least 1")

    def to_dict(self) -> dict:
        return {
            "keypose": self.keypose, "mode": self.mode, "top_k": self.top_k,
            "likelihoods": [{"poselet": lk.poselet, "mu": lk.mu, "sigma": lk.sigma, "n": lk.n}
                            for lk in self.likelihoods.values()],
        }

    @classmethod
    def from_dict(cls, d: dict) -> KeyPoseModel:
        lks = {e["poselet"]: PoseletLikelihood(e["poselet"], float(e["mu"]), float(e["sigma"]),
                                               int(e.get("n", 0)))
               for e in d["likelihoods"]}
        return cls(d["keypose"], d["mode"], lks, d.get("top_k", DEFAULT_TOP_K))


@dataclass
class PriorModel:
    """Per-poselet positions taken from one annotated occurrence.

    Spread is not estimated; at prediction time every candidate gets
    ``sigma_frac * f_stroke`` frames.
    """

    mus: dict
    mode: str = ANTI_SYMMETRIC
    sigma_frac: float = PRIOR_SIGMA_FRAC
    annotation: int | None = None


@dataclass(frozen=True)
class Candidate:
    """One guess ``start + frac * length`` with spread ``sigma`` (frames)."""

    start: int
    length: int
    frac: float
    sigma: float
    poselet: int | str = 0
    source: str = "ml"

    @property
    def mu_pos(self) -> float:
        return self.start + self.frac * self.length

    @property
    def sigma_pos(self) -> float:
        return self.sigma


@dataclass(frozen=True)
class OccurrencePrediction:
    frame: int
    support: int
    logscore: float

    def to_dict(self) -> dict:
        return {"frame": self.frame, "support": self.support, "logscore": self.logscore}


def c_coefficient(g: float, start: int, end: int) -> float:
    """Position of frame ``g`` inside ``[start, end]`` as a fraction of its length."""
    if end <= start:
        raise ValueError("interval must have positive length")
    if not start <= g <= end:
        raise GroundTruthOutsideInterval(f"frame {g} lies outside [{start}, {end}]")
    return (g - start) / (end - start)


def _circular_unwrap(samples: np.ndarray, period: float) -> np.ndarray:
    angles = 2 * np.pi * samples / period
    centre = np.arctan2(np.sin(angles).mean(), np.cos(angles).mean()) * period / (2 * np.pi)
    return samples - np.round((samples - centre) / period) * period


def fit_gaussian(samples, period: float = 1.0, sigma_min: float = SIGMA_MIN) -> tuple[float, float]:
    """Mean and unbiased standard deviation of ``c`` samples on a circle of ``period``.

    Samples are unwrapped around their circular mean first; the returned
    mean is wrapped into ``[0, period)`` and the deviation floored at
    ``sigma_min``.
    """
    c = np.asarray(samples, dtype=float)
    if c.size < 2:
        raise InsufficientSamples(f"need at least 2 samples, got {c.size}")
    unwrapped = _circular_unwrap(c, period)
    mu = float(unwrapped.mean())
    sigma = max(float(unwrapped.std(ddof=1)), sigma_min)
    return mu % period, sigma


def _group_by_poselet(intervals) -> dict:
    if isinstance(intervals, dict):
        return intervals
    grouped: dict = {}
    for iv in intervals:
        grouped.setdefault(iv.poselet, []).append(iv)
    return grouped


def collect_coefficients(intervals, ground_truth, mode: str) -> dict:
    """Normalised key-pose positions per poselet for one video.

    Only intervals enclosing exactly the expected number of ground truths
    (two in anti-symmetric mode, one in symmetric mode) contribute; in
    anti-symmetric mode each interval yields the smaller of its two ``c``.
    """
    need = 2 if check_mode(mode) == ANTI_SYMMETRIC else 1
    gts = np.sort(np.asarray(list(ground_truth), dtype=float))
    out: dict = {}
    for poselet, ivs in _group_by_poselet(intervals).items():
        cs = out.setdefault(poselet, [])
        for iv in ivs:
            lo = np.searchsorted(gts, iv.start, side="left")
            hi = np.searchsorted(gts, iv.end, side="left")
            if hi - lo != need:
                continue
            cs.append(min(c_coefficient(g, iv.start, iv.end) for g in gts[lo:hi]))
    return out


def fit_likelihoods(videos, mode: str = ANTI_SYMMETRIC, keypose: int | str = 0,
                    top_k: int | None = DEFAULT_TOP_K, sigma_min: float = SIGMA_MIN) -> KeyPoseModel:
    """One Gaussian per poselet over ``c``, pooled across training videos.

    ``videos`` is an iterable of ``(intervals, ground_truth_frames)``; the
    intervals are a list of :class:`RegularInterval` or a dict keyed by
    poselet.  Poselets with fewer than two samples get no likelihood;
    :class:`InsufficientSamples` is raised when none qualifies.
    """
    pooled: dict = {}
    for intervals, gts in videos:
        for poselet, cs in collect_coefficients(intervals, gts, mode).items():
            pooled.setdefault(poselet, []).extend(cs)
    period = fold_period(mode)
    likelihoods = {}
    for poselet in sorted(pooled, key=id_sort_key):
        cs = pooled[poselet]
        if len(cs) < 2:
            continue
        mu, sigma = fit_gaussian(cs, period, sigma_min)
        likelihoods[poselet] = PoseletLikelihood(poselet, mu, sigma, len(cs))
    if not likelihoods:
        raise InsufficientSamples("no poselet collected two or more c samples")
    return KeyPoseModel(keypose, mode, likelihoods, top_k)


def predict_candidates(model: KeyPoseModel, intervals) -> list[Candidate]:
    """Candidates ``mu_pos = start + mu * L`` with ``sigma_pos = sigma * L``."""
    out = []
    for poselet, ivs in _group_by_poselet(intervals).items():
        lk = model.likelihoods.get(poselet)
        if lk is None:
            continue
        for iv in ivs:
            out.append(Candidate(iv.start, iv.length, lk.mu, lk.sigma * iv.length, poselet))
            if model.mode == ANTI_SYMMETRIC:
                out.append(Candidate(iv.start, iv.length, lk.mu + 0.5, lk.sigma * iv.length, poselet))
    return out


def _log_normal(x, mu, sigma):
    return -0.5 * ((x - mu) / sigma) ** 2 - np.log(sigma) - 0.5 * np.log(2 * np.pi)


def estimate_occurrences(candidates, subwindow_width: float, min_support: int = DEFAULT_MIN_SUPPORT,
                         smooth_sigma: float = 0.0) -> list[OccurrencePrediction]:
    """Combine candidates into key-pose frames.

    The candidate densities, convolved with a Gaussian of ``smooth_sigma``
    frames, are summed on the integer frame grid; each local maximum opens
    a subwindow of ``subwindow_width`` frames.  A subwindow holding at least
    ``min_support`` candidate means yields the integer frame maximising the
    summed log-densities of those candidates (lower frame on ties).

    Positions are computed relative to the earliest interval start, so a
    global integer time shift moves every prediction by exactly that shift.
    """
    cands = list(candidates)
    if not cands:
        raise NoCandidates("no candidates to estimate occurrences from")
    half = subwindow_width / 2.0
    sig = np.array([c.sigma for c in cands], dtype=float)
    eff = np.sqrt(sig**2 + smooth_sigma**2)
    margin = int(np.ceil(max(40.0 * eff.max(), subwindow_width))) + 1
    origin = min(c.start for c in cands) - margin
    rel = np.array([(c.start - origin) + c.frac * c.length for c in cands], dtype=float)
    size = int(np.ceil(rel.max() + margin)) + 1

    density = np.zeros(size)
    grid = np.arange(size, dtype=float)
    reach = np.ceil(37.0 * eff).astype(int) + 1
    for mu, s, r in zip(rel, eff, reach):
        lo = max(int(mu) - r, 0)
        hi = min(int(mu) + r + 1, size)
        z = (grid[lo:hi] - mu) / s
        density[lo:hi] += np.exp(-0.5 * z * z) / s

    preds: dict = {}
    for p in local_maxima(density):
        inside = np.flatnonzero(np.abs(rel - p) <= half)
        if inside.size < min_support:
            continue
        xs = np.arange(int(np.ceil(p - half)), int(np.floor(p + half)) + 1, dtype=float)
        ll = _log_normal(xs[:, None], rel[inside][None, :], sig[inside][None, :]).sum(axis=1)
        best = int(np.argmax(ll))
        frame = int(xs[best]) + origin
        pred = OccurrencePrediction(frame, int(inside.size), float(ll[best]))
        if frame not in preds or pred.support > preds[frame].support:
            preds[frame] = pred
    return [preds[f] for f in sorted(preds)]


def _enclosing_fracs(intervals, g: float, mode: str) -> list[float]:
    fracs = []
    for iv in intervals:
        if iv.start <= g < iv.end:
            fracs.append(c_coefficient(g, iv.start, iv.end) % fold_period(mode))
    return fracs


def build_prior(annotation: int, intervals, mode: str = ANTI_SYMMETRIC,
                sigma_frac: float = PRIOR_SIGMA_FRAC) -> PriorModel:
    """Per-poselet positions from one annotated key-pose frame.

    Poselets whose regular intervals do not enclose the annotation are left
    out.  When several intervals of one poselet enclose it the folded
    positions are averaged on the circle.
    """
    mus = {}
    period = fold_period(mode)
    for poselet, ivs in _group_by_poselet(intervals).items():
        fracs = _enclosing_fracs(ivs, annotation, mode)
        if not fracs:
            continue
        unwrapped = _circular_unwrap(np.asarray(fracs), period)
        mus[poselet] = float(unwrapped.mean()) % period
    if not mus:
        raise AnnotationNotCovered(f"frame {annotation} lies in no regular interval")
    return PriorModel(mus, mode, sigma_frac, annotation)


def prior_candidates(prior: PriorModel, intervals, f_stroke: float) -> list[Candidate]:
    sigma = prior.sigma_frac * f_stroke
    out = []
    for poselet, ivs in _group_by_poselet(intervals).items():
        mu = prior.mus.get(poselet)
        if mu is None:
            continue
        for iv in ivs:
            out.append(Candidate(iv.start, iv.length, mu, sigma, poselet, "prior"))
            if prior.mode == ANTI_SYMMETRIC:
                out.append(Candidate(iv.start, iv.length, mu + 0.5, sigma, poselet, "prior"))
    return out


def map_estimate(ml_model: KeyPoseModel | None, prior: PriorModel | None, intervals,
                 f_stroke: float, subwindow_frac: float = SUBWINDOW_FRAC,
                 min_support: int = DEFAULT_MIN_SUPPORT,
                 density_sigma_frac: float = DENSITY_SIGMA_FRAC) -> list[OccurrencePrediction]:
    """Pool ML and prior candidates into one occurrence estimate.

    ``prior=None`` is the uniform prior and reproduces the ML estimate;
    ``ml_model=None`` gives the prior-only estimate.
    """
    cands = []
    if ml_model is not None:
        cands += predict_candidates(ml_model, intervals)
    if prior is not None:
        cands += prior_candidates(prior, intervals, f_stroke)
    if not cands:
        return []
    return estimate_occurrences(cands, subwindow_frac * f_stroke, min_support,
                                density_sigma_frac * f_stroke)


def postprocess_predictions(preds, f_stroke: float, mode: str = ANTI_SYMMETRIC,
                            min_frac: float = DEFAULT_MIN_FRAC) -> list[OccurrencePrediction]:
    """Drop predictions that crowd a neighbour, with the activation pruning rule.

    Expected spacing is half a stroke in anti-symmetric mode, one stroke in
    symmetric mode.
    """
    preds = sorted(preds, key=lambda p: p.frame)
    if not preds:
        return []
    by_frame = {p.frame: p for p in preds}
    kept = prune_frames([p.frame for p in preds], expected_gap(f_stroke, mode), min_frac)
    return [by_frame[int(f)] for f in kept]


def merge_frames(a, b, within: int = FUSE_WITHIN) -> np.ndarray:
    """Sorted union of two event sets; events within ``within`` frames of a kept one are dropped."""
    union = np.unique(np.concatenate([np.asarray(a, np.int64), np.asarray(b, np.int64)]))
    kept: list[int] = []
    for f in union:
        if kept and f - kept[-1] <= within:
            continue
        kept.append(int(f))
    return np.asarray(kept, dtype=np.int64)


def fuse_series(primary, secondary, pairing, f_stroke: float | None = None,
                within: int = FUSE_WITHIN) -> list[ActivationSeries]:
    """Merge paired series of a second view and add them to the primary pool.

    Each ``(a, b)`` pair of secondary poselet ids becomes one series with id
    ``"a+b"``; merging two symmetric series (one per body side) yields an
    anti-symmetric one.  With ``f_stroke`` the pool is returned ranked by
    goodness, otherwise primary series first, then fused ones.
    """
    primary = list(primary)
    lookup = {s.poselet: s for s in secondary}
    lengths = {s.n_frames for s in primary + list(lookup.values()) if s.n_frames is not None}
    if len(lengths) > 1:
        raise MisalignedSeries(f"series cover different frame counts: {sorted(lengths)}")
    fused = []
    for a, b in pairing:
        try:
            sa, sb = lookup[a], lookup[b]
        except KeyError as exc:
            raise MisalignedSeries(f"no secondary series with id {exc.args[0]!r}") from None
        if sa.mode != sb.mode:
            raise MisalignedSeries(f"series {a!r} and {b!r} have different modes")
        mode = ANTI_SYMMETRIC if sa.mode == SYMMETRIC else sa.mode
        n = sa.n_frames if sa.n_frames is not None else sb.n_frames
        fused.append(ActivationSeries(f"{a}+{b}", merge_frames(sa.frames, sb.frames, within), mode, n))
    pool = primary + fused
    if f_stroke is not None:
        pool.sort(key=lambda s: (goodness(s, f_stroke), id_sort_key(s.poselet)))
    return pool


def shift_intervals(intervals, delta: int) -> list[RegularInterval]:
    return [RegularInterval(iv.poselet, iv.start + delta, iv.end + delta,
                            None if iv.middle is None else iv.middle + delta) for iv in intervals]
