"""Learning a poselet mixture from annotated frames.

Arm configurations are clustered with the rotation-free distance; each
cluster becomes one part filter trained on the feature cells around the
arm, against frames where neither arm resembles the cluster.  A root
filter is trained on the torso, and each part's offset from the root is
fitted as a Gaussian.  Boxes are aligned to the cell grid of the frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyClass, InsufficientSamples
from .features import FeatureGrid, GrayImage, build_pyramid, extract_features, train_linear_filter
from .geometry import JointConfiguration, distance_matrix, kmeans_temporal
from .pictorial import DEFAULT_GAMMA, Part, PoseletMixture, fit_deformation

# joint indices in rendered figures (see synthetic.JOINTS)
HEAD, SHOULDER, HIP = 0, 1, 2
LEFT_ARM = (1, 3, 4)
RIGHT_ARM = (1, 5, 6)


@dataclass
class TrainingOptions:
    cell_size: int = 8
    part_cells: tuple[int, int] = (5, 5)  # (h, w)
    root_cells: tuple[int, int] = (3, 6)
    negative_distance: float = 0.2
    negatives_per_part: int = 200
    root_negative_shift: int = 2
    epochs: int = 20
    lr: float = 0.1
    reg: float = 1e-3
    gamma: float = DEFAULT_GAMMA
    seed: int = 0


def box_at(centre, cells: tuple[int, int], grid: FeatureGrid) -> tuple[int, int]:
    """Top-left cell ``(x, y)`` of a ``cells`` box centred near ``centre`` (pixels), inside the grid."""
    h, w = cells
    cs = grid.cell_size
    x = int(np.clip(np.round(centre[0] / cs - w / 2.0), 0, grid.cells_x - w))
    y = int(np.clip(np.round(centre[1] / cs - h / 2.0), 0, grid.cells_y - h))
    return x, y


def subgrid(grid: FeatureGrid, x: int, y: int, cells: tuple[int, int]) -> np.ndarray:
    h, w = cells
    return grid.values[y:y + h, x:x + w, :]


def pixel_box(x: int, y: int, cells: tuple[int, int], cell_size: int) -> tuple:
    h, w = cells
    return (x * cell_size, y * cell_size, w * cell_size, h * cell_size)


def arm_joints(config: JointConfiguration, side: str) -> np.ndarray:
    return config.joints[list(LEFT_ARM if side == "left" else RIGHT_ARM)]


def root_centre(config: JointConfiguration) -> np.ndarray:
    return 0.5 * (config.joints[HEAD] + config.joints[HIP])


def cluster_arms(configs, k: int, seed: int = 0, side: str = "left"):
    """k-means over one arm of every configuration."""
    arms = [JointConfiguration(arm_joints(c, side), c.frame_index, c.video) for c in configs]
    return kmeans_temporal(arms, k, seed=seed)


def train_mixture(frames, configs, labels, centroids, options: TrainingOptions | None = None
                  ) -> tuple[PoseletMixture, list[float]]:
    """Root and part filters plus deformations from labelled frames.

    ``labels[t]`` is the cluster of the left arm in frame ``t`` (negative:
    unlabelled) and ``centroids`` the cluster centroids (arm joints).
    Returns the mixture and the training accuracy of each filter, root first.
    """
    opt = options or TrainingOptions()
    if len(frames) != len(configs) or len(frames) != len(labels):
        raise ValueError("frames, configurations and labels must pair up")
    if len(frames) < 2:
        raise InsufficientSamples("need at least two annotated frames")
    rng = np.random.default_rng(opt.seed)
    grids = [extract_features(f if isinstance(f, GrayImage) else GrayImage(f), opt.cell_size)
             for f in frames]
    labels = np.asarray(labels)

    root_boxes = [box_at(root_centre(c), opt.root_cells, g) for c, g in zip(configs, grids)]
    root, root_acc = _train_root(grids, root_boxes, opt, rng)

    cents = np.stack([np.asarray(getattr(c, "joints", c), float) for c in centroids])
    left = np.stack([arm_joints(c, "left") for c in configs])
    right = np.stack([arm_joints(c, "right") for c in configs])
    d_left = distance_matrix(left, cents)
    d_right = distance_matrix(right, cents)

    parts, accs = [], [root_acc]
    for j in range(len(cents)):
        members = np.flatnonzero(labels == j)
        if len(members) < 2:
            raise EmptyClass(f"cluster {j} has {len(members)} annotated frame(s); need 2")
        far = np.flatnonzero((d_left[:, j] > opt.negative_distance)
                             & (d_right[:, j] > opt.negative_distance))
        if far.size == 0:
            raise EmptyClass(f"no negative frames for cluster {j}")
        pos, part_boxes, member_roots = [], [], []
        for t in members:
            x, y = box_at(arm_joints(configs[t], "left").mean(axis=0), opt.part_cells, grids[t])
            pos.append(subgrid(grids[t], x, y, opt.part_cells))
            part_boxes.append(pixel_box(x, y, opt.part_cells, opt.cell_size))
            member_roots.append(pixel_box(*root_boxes[t], opt.root_cells, opt.cell_size))
        neg = []
        for t in rng.choice(far, size=min(opt.negatives_per_part, far.size), replace=False):
            x, y = box_at(arm_joints(configs[t], "left").mean(axis=0), opt.part_cells, grids[t])
            neg.append(subgrid(grids[t], x, y, opt.part_cells))
        filt, acc = train_linear_filter(pos, neg, opt.epochs, opt.lr, opt.reg, seed=opt.seed + j + 1)
        parts.append(Part(filt, fit_deformation(member_roots, part_boxes)))
        accs.append(acc)
    return PoseletMixture(root, parts, opt.gamma), accs


def _train_root(grids, boxes, opt: TrainingOptions, rng):
    pos, neg = [], []
    h, w = opt.root_cells
    for g, (x, y) in zip(grids, boxes):
        pos.append(subgrid(g, x, y, opt.root_cells))
        choices = [(xx, yy) for yy in range(g.cells_y - h + 1) for xx in range(g.cells_x - w + 1)
                   if max(abs(xx - x), abs(yy - y)) >= opt.root_negative_shift]
        if choices:
            xx, yy = choices[rng.integers(len(choices))]
            neg.append(subgrid(g, xx, yy, opt.root_cells))
    return train_linear_filter(pos, neg, opt.epochs, opt.lr, opt.reg, seed=opt.seed)


def frame_pyramids(frames, levels: int = 1, scale_step: float = 2.0, cell_size: int = 8,
                   min_cells: tuple[int, int] = (1, 1)):
    for f in frames:
        yield build_pyramid(f if isinstance(f, GrayImage) else GrayImage(f), levels, scale_step,
                            cell_size, min_cells)
