"""Ground-truthed cyclic-motion data.

Two levels are produced:

* score matrices: each poselet is a train of Gaussian bumps at a fixed
  phase of the cycle (two per cycle in anti-symmetric mode) plus white
  noise, with dropped and spurious bumps; the true bump frames and the
  key-pose frames are recorded before corruption.
* rendered frames: a side-view stick figure with sinusoidal arm angles and
  the matching joint annotations.

A :class:`Timeline` holds the per-video cycle boundaries so that several
camera views of the same motion can share it.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .activations import ANTI_SYMMETRIC, SYMMETRIC, check_mode
from .errors import InvalidSpec
from .features import GrayImage
from .geometry import JointConfiguration

# joint order of rendered figures
JOINTS = ("head", "shoulder", "hip", "l_elbow", "l_wrist", "r_elbow", "r_wrist")
LEFT_ARM = (1, 3, 4)
RIGHT_ARM = (1, 5, 6)


@dataclass(frozen=True)
class SyntheticMotionSpec:
    """Parameters of one synthetic video.

    ``timing_jitter`` is the per-poselet standard deviation (frames) of
    bump times around their nominal phase; a scalar applies to all poselets
    and ``None`` draws a spread of qualities from ``structure_seed``.
    ``swimmer_sigma`` shifts every poselet phase per video (fraction of the
    period), ``period_jitter`` varies the cycle length (frames) and
    ``keypose_jitter`` moves each ground-truth occurrence (frames).
    ``phase_offsets`` and the default jitter profile depend only on
    ``structure_seed``, so videos with different ``seed`` share poselets.
    """

    period: float = 100.0
    mode: str = ANTI_SYMMETRIC
    n_poselets: int = 15
    phase_offsets: tuple | None = None
    noise_sigma: float = 0.1
    dropout_rate: float = 0.05
    spurious_rate: float = 0.05
    keypose_phases: tuple = (0.3,)
    duration: int = 5000
    seed: int = 0
    timing_jitter: float | tuple | None = 0.0
    period_jitter: float = 0.0
    swimmer_sigma: float = 0.0
    amplitude: float = 1.0
    structure_seed: int = 0
    keypose_jitter: float = 0.0
    jitter_range: tuple = (0.015, 0.08)
    start_offset: float = 0.0
    id_offset: int = 0

    def validate(self) -> SyntheticMotionSpec:
        try:
            check_mode(self.mode)
        except ValueError as exc:
            raise InvalidSpec(str(exc)) from None
        if not self.period >= 8:
            raise InvalidSpec("period must be at least 8 frames")
        for name in ("dropout_rate", "spurious_rate"):
            rate = getattr(self, name)
            if not 0 <= rate < 0.5:
                raise InvalidSpec(f"{name} must lie in [0, 0.5), got {rate}")
        if self.n_poselets < 1:
            raise InvalidSpec("n_poselets must be positive")
        if self.duration < 2 * self.period:
            raise InvalidSpec("duration must cover at least two periods")
        if min(self.noise_sigma, self.period_jitter, self.swimmer_sigma, self.keypose_jitter) < 0:
            raise InvalidSpec("noise and jitter levels must be non-negative")
        phases = list(self.keypose_phases) + list(self.phase_offsets or ())
        if any(not 0 <= p < 1 for p in phases):
            raise InvalidSpec("phases must lie in [0, 1)")
        if self.phase_offsets is not None and len(self.phase_offsets) != self.n_poselets:
            raise InvalidSpec("need one phase offset per poselet")
        jit = self.timing_jitter
        if isinstance(jit, (tuple, list)) and len(jit) != self.n_poselets:
            raise InvalidSpec("need one timing jitter per poselet")
        return self

    @property
    def bump_sigma(self) -> float:
        return self.period / 20.0

    @property
    def poselet_ids(self) -> list[int]:
        return [self.id_offset + i for i in range(self.n_poselets)]

    def offsets(self) -> np.ndarray:
        if self.phase_offsets is not None:
            return np.asarray(self.phase_offsets, dtype=float)
        rng = np.random.default_rng([self.structure_seed, 1])
        return rng.uniform(0, 1, self.n_poselets)

    def jitters(self) -> np.ndarray:
        jit = self.timing_jitter
        if jit is None:
            return quality_profile(self.n_poselets, self.period, self.structure_seed,
                                   self.jitter_range)
        if isinstance(jit, (tuple, list, np.ndarray)):
            return np.asarray(jit, dtype=float)
        return np.full(self.n_poselets, float(jit))


def quality_profile(n: int, period: float, structure_seed: int = 0,
                    jitter_range: tuple = (0.015, 0.08)) -> np.ndarray:
    """Per-poselet timing jitter (frames) ranging from crisp to sloppy detectors.

    Values are evenly spread over ``jitter_range`` (fractions of the period)
    and handed out in a seeded random order.
    """
    levels = np.linspace(jitter_range[0], jitter_range[1], n) * period
    return np.random.default_rng([structure_seed, 2]).permutation(levels)


@dataclass
class Timeline:
    """Cycle start frames (float) and lengths of one video."""

    starts: np.ndarray
    lengths: np.ndarray

    def phase_to_frame(self, phase: float) -> np.ndarray:
        return self.starts + phase * self.lengths


def make_timeline(spec: SyntheticMotionSpec) -> Timeline:
    """Cycle boundaries covering one period before and after the video."""
    rng = np.random.default_rng([spec.seed, 0])
    starts, lengths = [], []
    t = spec.start_offset - spec.period
    while t < spec.duration + spec.period:
        length = spec.period
        if spec.period_jitter > 0:
            length = max(spec.period / 2, spec.period + rng.normal(0, spec.period_jitter))
        starts.append(t)
        lengths.append(length)
        t += length
    return Timeline(np.asarray(starts), np.asarray(lengths))


@dataclass
class SyntheticDataset:
    spec: SyntheticMotionSpec
    scores: np.ndarray  # (T, n)
    activations: list  # true bump frames per poselet, before corruption
    keypose_frames: list  # one sorted int array per key-pose phase
    timeline: Timeline
    observed: list = field(default_factory=list)  # bump frames actually in the signal

    @property
    def poselet_ids(self) -> list[int]:
        return self.spec.poselet_ids


def keypose_frames(spec: SyntheticMotionSpec, timeline: Timeline) -> list[np.ndarray]:
    """Ground-truth frames per key-pose phase (twice per cycle in anti-symmetric mode).

    ``spec.keypose_jitter`` (frames) moves every occurrence independently,
    modelling cycle-to-cycle variation that no detector timing can explain.
    """
    halves = (0.0, 0.5) if spec.mode == ANTI_SYMMETRIC else (0.0,)
    rng = np.random.default_rng([spec.seed, spec.structure_seed, spec.id_offset, 5])
    out = []
    for phase in spec.keypose_phases:
        frames = []
        for h in halves:
            nominal = timeline.starts + ((phase + h) % 1.0) * timeline.lengths
            frames.append(np.round(nominal + rng.normal(0, 1, len(nominal)) * spec.keypose_jitter))
        frames = np.unique(np.concatenate(frames).astype(np.int64))
        out.append(frames[(frames >= 0) & (frames < spec.duration)])
    return out


def generate(spec: SyntheticMotionSpec, timeline: Timeline | None = None) -> SyntheticDataset:
    """Score matrix plus ground truth for one synthetic video (deterministic per seed)."""
    spec.validate()
    if timeline is None:
        timeline = make_timeline(spec)
    rng = np.random.default_rng([spec.seed, spec.structure_seed, spec.id_offset, 3])
    T = spec.duration
    bump = spec.bump_sigma
    edge = int(np.ceil(4 * bump))
    halves = (0.0, 0.5) if spec.mode == ANTI_SYMMETRIC else (0.0,)
    offsets = spec.offsets()
    if spec.swimmer_sigma > 0:
        offsets = (offsets + rng.normal(0, spec.swimmer_sigma, len(offsets))) % 1.0
    jitters = spec.jitters()
    t = np.arange(T, dtype=float)

    scores = np.zeros((T, spec.n_poselets))
    truth, observed = [], []
    for i in range(spec.n_poselets):
        centres = []
        for h in halves:
            nominal = timeline.starts + ((offsets[i] + h) % 1.0) * timeline.lengths
            centres.append(nominal + rng.normal(0, 1, len(nominal)) * jitters[i])
        centres = np.round(np.sort(np.concatenate(centres))).astype(np.int64)
        centres = np.unique(centres[(centres >= edge) & (centres < T - edge)])
        truth.append(centres)

        kept = centres[rng.uniform(size=len(centres)) >= spec.dropout_rate]
        n_spurious = rng.binomial(len(centres), spec.spurious_rate)
        spurious = rng.integers(edge, T - edge, n_spurious)
        present = np.sort(np.concatenate([kept, spurious]))
        observed.append(present)

        signal = np.zeros(T)
        for c in present:
            lo, hi = max(0, c - 6 * edge), min(T, c + 6 * edge + 1)
            signal[lo:hi] += np.exp(-0.5 * ((t[lo:hi] - c) / bump) ** 2)
        noise = rng.normal(0, spec.noise_sigma, T) if spec.noise_sigma > 0 else 0.0
        scores[:, i] = spec.amplitude * (signal + noise)

    return SyntheticDataset(spec, scores, truth, keypose_frames(spec, timeline), timeline, observed)


def second_view_spec(spec: SyntheticMotionSpec, n_pairs: int = 3, jitter: float | None = None,
                     noise_sigma: float = 0.05, id_offset: int = 100) -> SyntheticMotionSpec:
    """A clean view from above: one symmetric series per arm, paired left/right.

    Poselets ``2j`` and ``2j + 1`` see the same posture on opposite sides,
    half a cycle apart; see :func:`second_view_pairing`.
    """
    rng = np.random.default_rng([spec.structure_seed, 4])
    base = rng.uniform(0, 0.5, n_pairs)
    offsets = tuple(float(v) for b in base for v in (b, b + 0.5))
    if jitter is None:
        jitter = 0.01 * spec.period
    return replace(spec, mode=SYMMETRIC, n_poselets=2 * n_pairs, phase_offsets=offsets,
                   noise_sigma=noise_sigma, dropout_rate=0.0, spurious_rate=0.0,
                   timing_jitter=float(jitter), id_offset=id_offset)


def second_view_pairing(view: SyntheticMotionSpec) -> list[tuple[int, int]]:
    ids = view.poselet_ids
    return [(ids[2 * j], ids[2 * j + 1]) for j in range(len(ids) // 2)]


def benchmark_spec(seed: int = 0, **changes) -> SyntheticMotionSpec:
    """The swimming-like scenario used for end-to-end accuracy checks.

    Fifteen detectors of mixed quality (timing jitter 1% to 15% of the
    period), 2 frames of cycle-length jitter, per-video phase offsets
    (sd 1.5% of the period) and 1 frame of key-pose jitter per occurrence.
    """
    base = SyntheticMotionSpec(period=100, mode=ANTI_SYMMETRIC, n_poselets=15, noise_sigma=0.1,
                               dropout_rate=0.05, spurious_rate=0.05, duration=5000, seed=seed,
                               timing_jitter=None, jitter_range=(0.01, 0.15), period_jitter=2.0,
                               swimmer_sigma=0.015, keypose_jitter=1.0)
    return replace(base, **changes)


# --------------------------------------------------------------------------
# rendered stick figure
# --------------------------------------------------------------------------

def arm_angles(phase: np.ndarray | float) -> tuple[np.ndarray, np.ndarray]:
    """Upper-arm and forearm angles (radians, image coords) for a cycle phase in [0, 1)."""
    w = 2 * np.pi * np.asarray(phase, dtype=float)
    upper = w  # full rotation, like a crawl stroke
    fore = upper + 0.6 * np.sin(w) + 0.3
    return upper, fore


def figure_joints(phase_left: float, phase_right: float, origin=(0.0, 0.0),
                  scale: float = 1.0) -> np.ndarray:
    """Joint coordinates of the side-view figure (order: :data:`JOINTS`)."""
    ox, oy = origin
    shoulder = np.array([ox, oy])
    head = shoulder + scale * np.array([-10.0, -2.0])
    hip = shoulder + scale * np.array([26.0, 2.0])
    out = [head, shoulder, hip]
    for phase in (phase_left, phase_right):
        upper, fore = arm_angles(phase)
        elbow = shoulder + scale * 12.0 * np.array([np.cos(upper), np.sin(upper)])
        wrist = elbow + scale * 11.0 * np.array([np.cos(fore), np.sin(fore)])
        out += [elbow, wrist]
    return np.array(out)


def _draw_segment(canvas: np.ndarray, p: np.ndarray, q: np.ndarray, width: float, value: float):
    h, w = canvas.shape
    lo = np.floor(np.minimum(p, q) - width - 1).astype(int)
    hi = np.ceil(np.maximum(p, q) + width + 1).astype(int)
    x0, y0 = max(lo[0], 0), max(lo[1], 0)
    x1, y1 = min(hi[0], w - 1), min(hi[1], h - 1)
    if x1 < x0 or y1 < y0:
        return
    ys, xs = np.mgrid[y0:y1 + 1, x0:x1 + 1]
    pts = np.stack([xs + 0.5, ys + 0.5], axis=-1)
    d = q - p
    tt = np.clip(((pts - p) @ d) / max(d @ d, 1e-12), 0, 1)
    dist = np.linalg.norm(pts - (p + tt[..., None] * d), axis=-1)
    region = canvas[y0:y1 + 1, x0:x1 + 1]
    np.maximum(region, np.where(dist <= width / 2, value, 0.0), out=region)


def render_figure(joints: np.ndarray, canvas: tuple[int, int]) -> GrayImage:
    h, w = canvas
    img = np.zeros((h, w))
    head, shoulder, hip, le, lw, re, rw = joints
    _draw_segment(img, head, shoulder, 5.0, 1.0)
    _draw_segment(img, shoulder, hip, 6.0, 1.0)
    for a, b in ((shoulder, re), (re, rw), (shoulder, le), (le, lw)):
        _draw_segment(img, a, b, 3.0, 0.8)
    return GrayImage(img)


def render_frames(spec: SyntheticMotionSpec, canvas: tuple[int, int] = (96, 96),
                  n_frames: int | None = None) -> tuple[list[GrayImage], list[JointConfiguration]]:
    """Rendered stick-figure frames and their joint annotations.

    The period must be an integer (and even in anti-symmetric mode) so the
    pose at ``t`` equals the pose at ``t + period`` exactly and the right arm
    at ``t + period / 2`` repeats the left arm at ``t``.  The figure's
    position is drawn once per video from ``seed``.
    """
    spec.validate()
    period = int(spec.period)
    if period != spec.period:
        raise InvalidSpec("rendering needs an integer period")
    if spec.mode == ANTI_SYMMETRIC and period % 2:
        raise InvalidSpec("anti-symmetric rendering needs an even period")
    h, w = canvas
    reach = 26.0
    if h < 2 * reach + 8 or w < 2 * reach + 32:
        raise InvalidSpec(f"canvas {w}x{h} cannot hold the figure")
    rng = np.random.default_rng([spec.seed, 5])
    ox = rng.uniform(reach + 12, w - reach - 28)
    oy = rng.uniform(reach + 2, h - reach - 2)
    total = spec.duration if n_frames is None else n_frames

    frames, configs = [], []
    for t in range(total):
        left = (t % period) / period
        if spec.mode == ANTI_SYMMETRIC:
            right = ((t + period // 2) % period) / period
        else:
            right = left
        joints = figure_joints(left, right, (ox, oy))
        frames.append(render_figure(joints, canvas))
        configs.append(JointConfiguration(joints, t, f"synthetic-{spec.seed}"))
    return frames, configs


def arm_configuration(config: JointConfiguration, side: str = "left") -> JointConfiguration:
    idx = LEFT_ARM if side == "left" else RIGHT_ARM
    return JointConfiguration(config.joints[list(idx)], config.frame_index, config.video)


def arm_phase_samples(n: int, phases, phase_jitter: float = 0.01, seed: int = 0):
    """Arm configurations drawn around a few cycle phases.

    Returns the configurations (randomly translated and scaled) and the
    index of the phase each one was drawn from.
    """
    rng = np.random.default_rng(seed)
    phases = np.asarray(phases, dtype=float)
    labels = np.arange(n) % len(phases)
    rng.shuffle(labels)
    configs = []
    for i, lab in enumerate(labels):
        phase = (phases[lab] + rng.normal(0, phase_jitter)) % 1.0
        joints = figure_joints(phase, phase, rng.uniform(-50, 50, 2), rng.uniform(0.5, 2.0))
        configs.append(JointConfiguration(joints[list(LEFT_ARM)], i))
    return configs, labels
