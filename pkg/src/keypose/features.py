"""Gradient-orientation feature grids, feature pyramids and linear part filters.

The feature is a deliberately small HoG variant: per-cell histograms of
unsigned gradient orientation (magnitude-weighted, hard binning) followed by
per-cell L2 normalisation.  Filters are dense ``h x w x channels`` weight
tensors scored by cross-correlation with a subwindow of a grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionMismatch, EmptyClass, ImageTooSmall, OutOfBounds

DEFAULT_CELL_SIZE = 8
DEFAULT_BINS = 9
NORM_EPS = 1e-5


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Row-major grey-level image with intensities in ``[0, 1]``."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.array(self.pixels, dtype=float)
        if px.ndim != 2 or px.size == 0:
            raise ValueError(f"pixels must be a non-empty 2-D array, got shape {px.shape}")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True, eq=False)
class FeatureGrid:
    values: np.ndarray  # (cells_y, cells_x, channels)
    cell_size: int = DEFAULT_CELL_SIZE

    @property
    def cells_y(self) -> int:
        return self.values.shape[0]

    @property
    def cells_x(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class PyramidLevel:
    scale: float
    grid: FeatureGrid


@dataclass(frozen=True)
class FeaturePyramid:
    levels: list[PyramidLevel]
    scale_step: float = 2.0

    @property
    def channels(self) -> int:
        return self.levels[0].grid.channels

    @property
    def cell_size(self) -> int:
        return self.levels[0].grid.cell_size

    @classmethod
    def from_grids(cls, grids, scale_step: float = 2.0) -> FeaturePyramid:
        """Wrap precomputed grids; level ``l`` gets scale ``scale_step ** -l``."""
        return cls([PyramidLevel(scale_step ** -i, g) for i, g in enumerate(grids)], scale_step)


@dataclass(frozen=True, eq=False)
class PoseletFilter:
    """Linear filter ``F`` of ``h x w`` cells plus a bias term."""

    weights: np.ndarray  # (h, w, channels)
    bias: float = 0.0

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 3:
            raise ValueError(f"filter weights must be (h, w, channels), got {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("filter weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))

    @property
    def h(self) -> int:
        return self.weights.shape[0]

    @property
    def w(self) -> int:
        return self.weights.shape[1]

    @property
    def channels(self) -> int:
        return self.weights.shape[2]

    def to_dict(self) -> dict:
        return {"w": self.w, "h": self.h, "channels": self.channels, "bias": self.bias,
                "weights": self.weights.ravel().tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> PoseletFilter:
        weights = np.asarray(d["weights"], dtype=float).reshape(d["h"], d["w"], d["channels"])
        return cls(weights, float(d.get("bias", 0.0)))


def _gradients(px: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # central differences, replicated borders
    padded = np.pad(px, 1, mode="edge")
    gx = 0.5 * (padded[1:-1, 2:] - padded[1:-1, :-2])
    gy = 0.5 * (padded[2:, 1:-1] - padded[:-2, 1:-1])
    return gx, gy


def orientation_bins(gx: np.ndarray, gy: np.ndarray, n_bins: int = DEFAULT_BINS) -> np.ndarray:
    """Unsigned orientation bin per pixel; bin 0 holds horizontal gradients.

    The gradient is first flipped into the upper half-plane, which makes
    ``(gx, gy)`` and ``(-gx, -gy)`` land in the same bin bit-exactly.
    """
    flip = (gy < 0) | ((gy == 0) & (gx < 0))
    ux = np.where(flip, -gx, gx)
    uy = np.where(flip, -gy, gy)
    theta = np.arctan2(uy, ux)  # in [0, pi]
    bins = np.floor(theta / (np.pi / n_bins)).astype(int)
    return np.clip(bins, 0, n_bins - 1)


def extract_features(img: GrayImage, cell_size: int = DEFAULT_CELL_SIZE,
                     n_bins: int = DEFAULT_BINS, eps: float = NORM_EPS) -> FeatureGrid:
    """Per-cell L2-normalised orientation histograms.

    Pixels beyond the last full cell are ignored.
    """
    cells_y = img.height // cell_size
    cells_x = img.width // cell_size
    if cells_x < 1 or cells_y < 1:
        raise ImageTooSmall(f"{img.width}x{img.height} image holds no {cell_size}px cell")
    gx, gy = _gradients(img.pixels)
    mag = np.hypot(gx, gy)
    bins = orientation_bins(gx, gy, n_bins)

    hh, ww = cells_y * cell_size, cells_x * cell_size
    cell_row = np.arange(hh) // cell_size
    cell_col = np.arange(ww) // cell_size
    flat_cell = (cell_row[:, None] * cells_x + cell_col[None, :]).ravel()
    index = flat_cell * n_bins + bins[:hh, :ww].ravel()
    hist = np.bincount(index, weights=mag[:hh, :ww].ravel(), minlength=cells_y * cells_x * n_bins)
    hist = hist.reshape(cells_y, cells_x, n_bins)
    norm = np.sqrt(np.sum(hist**2, axis=2, keepdims=True) + eps**2)
    return FeatureGrid(hist / norm, cell_size)


def resample(img: GrayImage, scale: float) -> GrayImage:
    """Bilinear resampling by ``scale`` (pixel-centre convention, clamped borders)."""
    h = max(1, int(round(img.height * scale)))
    w = max(1, int(round(img.width * scale)))
    px = img.pixels
    ys = np.clip((np.arange(h) + 0.5) / scale - 0.5, 0, img.height - 1)
    xs = np.clip((np.arange(w) + 0.5) / scale - 0.5, 0, img.width - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, img.height - 1)
    x1 = np.minimum(x0 + 1, img.width - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = px[np.ix_(y0, x0)] * (1 - fx) + px[np.ix_(y0, x1)] * fx
    bottom = px[np.ix_(y1, x0)] * (1 - fx) + px[np.ix_(y1, x1)] * fx
    return GrayImage(top * (1 - fy) + bottom * fy)


def build_pyramid(img: GrayImage, levels: int = 1, scale_step: float = 2.0,
                  cell_size: int = DEFAULT_CELL_SIZE, min_cells: tuple[int, int] = (1, 1),
                  n_bins: int = DEFAULT_BINS) -> FeaturePyramid:
    """Feature grids of ``img`` resampled by ``scale_step ** -l`` for ``l < levels``.

    ``min_cells`` is the ``(h, w)`` of the largest filter that must fit on
    every level.
    """
    if levels < 1:
        raise ValueError("levels must be positive")
    if not scale_step > 1:
        raise ValueError("scale_step must exceed 1")
    out = []
    for level in range(levels):
        scale = scale_step ** -level
        scaled = img if level == 0 else resample(img, scale)
        try:
            grid = extract_features(scaled, cell_size, n_bins)
        except ImageTooSmall as exc:
            raise ImageTooSmall(f"pyramid level {level} is too small: {exc}") from None
        if grid.cells_y < min_cells[0] or grid.cells_x < min_cells[1]:
            raise ImageTooSmall(f"pyramid level {level} ({grid.cells_x}x{grid.cells_y} cells) "
                                f"cannot host a {min_cells[1]}x{min_cells[0]} filter")
        out.append(PyramidLevel(scale, grid))
    return FeaturePyramid(out, scale_step)


def dense_scores(filt: PoseletFilter, grid: FeatureGrid) -> np.ndarray:
    """Scores of every placement on one grid, indexed ``[y, x]``.

    Returns an empty ``(0, 0)`` array when the filter does not fit.
    """
    if filt.channels != grid.channels:
        raise DimensionMismatch(f"filter has {filt.channels} channels, grid {grid.channels}")
    if filt.h > grid.cells_y or filt.w > grid.cells_x:
        return np.empty((0, 0))
    windows = sliding_window_view(grid.values, (filt.h, filt.w), axis=(0, 1))
    # windows: (ny, nx, channels, h, w)
    return np.einsum("yxchw,hwc->yx", windows, filt.weights) + filt.bias


def score(filt: PoseletFilter, pyramid: FeaturePyramid, p) -> float:
    """``<F, Phi(p)> + bias`` for a placement ``p`` (uses ``p.level``, ``p.x``, ``p.y``)."""
    if not 0 <= p.level < len(pyramid.levels):
        raise OutOfBounds(f"no pyramid level {p.level}")
    grid = pyramid.levels[p.level].grid
    if filt.channels != grid.channels:
        raise DimensionMismatch(f"filter has {filt.channels} channels, grid {grid.channels}")
    x, y = int(p.x), int(p.y)
    if x < 0 or y < 0 or y + filt.h > grid.cells_y or x + filt.w > grid.cells_x:
        raise OutOfBounds(f"placement ({x}, {y}) of a {filt.w}x{filt.h} filter leaves the "
                          f"{grid.cells_x}x{grid.cells_y} grid")
    window = grid.values[y:y + filt.h, x:x + filt.w, :]
    return float(np.sum(window * filt.weights) + filt.bias)


def train_linear_filter(positives, negatives, epochs: int = 20, lr: float = 0.1,
                        reg: float = 1e-3, seed: int = 0, shuffle: bool = True
                        ) -> tuple[PoseletFilter, float]:
    """Hinge-loss linear classifier fitted by stochastic subgradient descent.

    The bias is learned as the weight of an extra constant feature. The
    step size decays as ``lr / (1 + lr * reg * t)``.  Returns the filter and
    its training accuracy.
    """
    positives = [g.values if isinstance(g, FeatureGrid) else np.asarray(g, float) for g in positives]
    negatives = [g.values if isinstance(g, FeatureGrid) else np.asarray(g, float) for g in negatives]
    if not positives or not negatives:
        raise EmptyClass("both classes need at least one example")
    shape = positives[0].shape
    if any(g.shape != shape for g in positives + negatives):
        raise DimensionMismatch("all training grids must share one shape")

    x = np.stack([g.ravel() for g in positives + negatives])
    x = np.hstack([x, np.ones((len(x), 1))])
    y = np.concatenate([np.ones(len(positives)), -np.ones(len(negatives))])
    w = np.zeros(x.shape[1])
    rng = np.random.default_rng(seed)
    t = 0
    for _ in range(epochs):
        order = rng.permutation(len(x)) if shuffle else np.arange(len(x))
        for i in order:
            t += 1
            eta = lr / (1.0 + lr * reg * t)
            margin = y[i] * (x[i] @ w)
            w *= 1.0 - eta * reg
            if margin < 1.0:
                w += eta * y[i] * x[i]
    predicted = np.where(x @ w >= 0, 1.0, -1.0)
    accuracy = float(np.mean(predicted == y))
    return PoseletFilter(w[:-1].reshape(shape), float(w[-1])), accuracy
