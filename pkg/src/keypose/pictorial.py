"""Star-shaped mixture of poselets and per-frame score descriptors.

A root filter locates the athlete; every part filter is then max-pooled only
over placements whose centre lies inside a Mahalanobis ellipse around the
root centre shifted by the part's mean offset.

Coordinate convention: deformation statistics (``mu``, ``sigma``) live in
original-image pixels and refer to box *centres*.  A part placement at
level ``k`` (cell coordinates, scale ``s_k``) is converted to level-``k``
pixels via the cell size, and the ellipse is scaled by ``s_k`` accordingly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InsufficientPairs, NoValidPlacement
from .features import FeaturePyramid, PoseletFilter, dense_scores

DEFAULT_GAMMA = 3.0
SIGMA_EPS = 1e-3
MISSING = -np.inf


@dataclass(frozen=True)
class Placement:
    """Filter position ``(x, y)`` in cells of pyramid level ``level`` with scale ``s``."""

    x: float
    y: float
    s: float
    w: float
    h: float
    level: int = 0

    def centre_px(self, cell_size: int) -> np.ndarray:
        """Box centre in pixels of the level the placement lives on."""
        return np.array([(self.x + self.w / 2.0) * cell_size, (self.y + self.h / 2.0) * cell_size])


@dataclass(frozen=True, eq=False)
class DeformationParams:
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float).reshape(2)
        sigma = np.asarray(self.sigma, dtype=float).reshape(2, 2)
        if not np.allclose(sigma, sigma.T):
            raise ValueError("sigma must be symmetric")
        if np.any(np.linalg.eigvalsh(sigma) <= 0):
            raise ValueError("sigma must be positive definite")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)


@dataclass(frozen=True)
class Part:
    filter: PoseletFilter
    deform: DeformationParams


@dataclass
class PoseletMixture:
    root: PoseletFilter
    parts: list[Part]
    gamma: float = DEFAULT_GAMMA
    # search parts on every level, or only on the root's level
    all_levels: bool = True

    def __post_init__(self):
        if not self.parts:
            raise ValueError("a mixture needs at least one part")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")

    def to_dict(self) -> dict:
        return {
            "root": self.root.to_dict(),
            "parts": [{"filter": p.filter.to_dict(), "mu": p.deform.mu.tolist(),
                       "sigma": p.deform.sigma.tolist()} for p in self.parts],
            "gamma": self.gamma,
            "all_levels": self.all_levels,
        }

    @classmethod
    def from_dict(cls, d: dict) -> PoseletMixture:
        parts = [Part(PoseletFilter.from_dict(p["filter"]), DeformationParams(p["mu"], p["sigma"]))
                 for p in d["parts"]]
        return cls(PoseletFilter.from_dict(d["root"]), parts, float(d.get("gamma", DEFAULT_GAMMA)),
                   bool(d.get("all_levels", True)))


@dataclass
class FrameDescriptor:
    scores: np.ndarray
    root_placement: Placement
    frame_index: int
    part_placements: list[Placement | None] = field(default_factory=list)

    @property
    def missing(self) -> np.ndarray:
        return ~np.isfinite(self.scores)


def best_root_placement(mixture: PoseletMixture, pyramid: FeaturePyramid) -> Placement:
    """Highest-scoring root placement over all levels.

    Ties go to the lowest level, then the lowest ``y``, then the lowest ``x``.
    """
    return _best_placement(mixture.root, pyramid)


def _best_placement(filt: PoseletFilter, pyramid: FeaturePyramid) -> Placement:
    best = None
    best_score = -np.inf
    for level, lvl in enumerate(pyramid.levels):
        scores = dense_scores(filt, lvl.grid)
        if scores.size == 0:
            continue
        flat = int(np.argmax(scores))  # first maximum in row-major order
        y, x = divmod(flat, scores.shape[1])
        if best is None or scores[y, x] > best_score:
            best_score = scores[y, x]
            best = Placement(x, y, lvl.scale, filt.w, filt.h, level)
    if best is None:
        raise NoValidPlacement("the filter fits on no pyramid level")
    return best


def project_root(p0: Placement) -> Placement:
    """Map a placement to the original image size (scale 1)."""
    return Placement(p0.x / p0.s, p0.y / p0.s, 1.0, p0.w / p0.s, p0.h / p0.s, 0)


def region_mask(filt: PoseletFilter, deform: DeformationParams, root_hat: Placement,
                scale: float, shape: tuple[int, int], cell_size: int, gamma: float) -> np.ndarray:
    """Boolean ``[y, x]`` mask of placements on one level that lie inside the ellipse."""
    ny, nx = shape
    root_centre = root_hat.centre_px(cell_size)
    target = scale * (root_centre + deform.mu)
    cx = (np.arange(nx) + filt.w / 2.0) * cell_size - target[0]
    cy = (np.arange(ny) + filt.h / 2.0) * cell_size - target[1]
    prec = np.linalg.inv(scale**2 * deform.sigma)
    zx = cx[None, :]
    zy = cy[:, None]
    q = prec[0, 0] * zx * zx + (prec[0, 1] + prec[1, 0]) * zx * zy + prec[1, 1] * zy * zy
    return np.sqrt(np.maximum(q, 0.0)) < gamma


def constrained_part_score(part: PoseletFilter, deform: DeformationParams, root_hat: Placement,
                           pyramid: FeaturePyramid, gamma: float = DEFAULT_GAMMA,
                           levels=None) -> tuple[float, Placement | None]:
    """Maximum part score over placements inside the Mahalanobis region.

    ``levels`` restricts the search to the given level indices (default: all).
    Returns ``(-inf, None)`` when the region contains no valid placement.
    Ties follow the root tie-break (level, then ``y``, then ``x``).
    """
    cell_size = pyramid.cell_size
    best_score = MISSING
    best = None
    for level, lvl in enumerate(pyramid.levels):
        if levels is not None and level not in levels:
            continue
        scores = dense_scores(part, lvl.grid)
        if scores.size == 0:
            continue
        mask = region_mask(part, deform, root_hat, lvl.scale, scores.shape, cell_size, gamma)
        if not mask.any():
            continue
        masked = np.where(mask, scores, -np.inf)
        flat = int(np.argmax(masked))
        y, x = divmod(flat, scores.shape[1])
        if best is None or masked[y, x] > best_score:
            best_score = float(masked[y, x])
            best = Placement(x, y, lvl.scale, part.w, part.h, level)
    return best_score, best


def frame_descriptor(mixture: PoseletMixture, pyramid: FeaturePyramid,
                     frame_index: int = 0) -> FrameDescriptor:
    """Vector of constrained part scores, in part order; scores are raw."""
    p0 = best_root_placement(mixture, pyramid)
    root_hat = project_root(p0)
    levels = None if mixture.all_levels else {p0.level}
    scores = np.empty(len(mixture.parts))
    placements = []
    for i, part in enumerate(mixture.parts):
        scores[i], p = constrained_part_score(part.filter, part.deform, root_hat, pyramid,
                                              mixture.gamma, levels)
        placements.append(p)
    return FrameDescriptor(scores, p0, frame_index, placements)


def _box_centre(box, cell_size: int) -> np.ndarray:
    if isinstance(box, Placement):
        return box.centre_px(cell_size) / box.s
    x, y, w, h = box
    return np.array([x + w / 2.0, y + h / 2.0])


def fit_deformation(root_boxes, part_boxes, eps: float = SIGMA_EPS,
                    cell_size: int = 8) -> DeformationParams:
    """Normal fit of part-centre minus root-centre offsets, in original-image pixels.

    Boxes are ``(x, y, w, h)`` pixel tuples or :class:`Placement` values
    (converted with ``cell_size`` and their scale).  ``sigma`` is the
    unbiased covariance plus ``eps * I``.
    """
    if len(root_boxes) != len(part_boxes):
        raise ValueError("root and part boxes must pair up")
    if len(root_boxes) < 2:
        raise InsufficientPairs(f"need at least 2 box pairs, got {len(root_boxes)}")
    offsets = np.array([_box_centre(p, cell_size) - _box_centre(r, cell_size)
                        for r, p in zip(root_boxes, part_boxes)])
    mu = offsets.mean(axis=0)
    sigma = np.cov(offsets, rowvar=False, ddof=1) + eps * np.eye(2)
    return DeformationParams(mu, sigma)


def score_frames(mixture: PoseletMixture, pyramids) -> np.ndarray:
    """Stack frame descriptors into a ``T x n`` score matrix (``-inf`` = missing)."""
    return np.stack([frame_descriptor(mixture, pyr, t).scores for t, pyr in enumerate(pyramids)])


def permute_parts(mixture: PoseletMixture, order) -> PoseletMixture:
    return replace(mixture, parts=[mixture.parts[i] for i in order])
