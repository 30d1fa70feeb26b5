"""Rotation-free Procrustes distance and temporal k-means over joint configurations.

Configurations are compared after removing translation and a non-negative
uniform scale only.  Rotations and reflections are deliberately *not*
factored out, so two arm poses that differ by a rotation stay far apart;
this keeps each cluster confined to a short window of the motion cycle.

The first argument is the target ``A``: ``B`` is scaled onto it and the
residual is divided by the centred energy of ``A`` (Sibson's normaliser).
The alignment is therefore one-directional, but the distance itself works
out to ``1 - max(0, cos)^2`` of the centred configurations and is symmetric.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateConfiguration


@dataclass(frozen=True, eq=False)
class JointConfiguration:
    """``n`` 2-D joint locations of one frame, in image pixels."""

    joints: np.ndarray
    frame_index: int = 0
    video: str | None = None

    def __post_init__(self):
        joints = np.array(self.joints, dtype=float)
        if joints.ndim != 2 or joints.shape[1] != 2:
            raise ValueError(f"joints must have shape (n, 2), got {joints.shape}")
        if joints.shape[0] < 2:
            raise ValueError("a configuration needs at least two joints")
        if not np.all(np.isfinite(joints)):
            raise ValueError("joint coordinates must be finite")
        if self.frame_index < 0:
            raise ValueError("frame_index must be non-negative")
        joints.setflags(write=False)
        object.__setattr__(self, "joints", joints)

    @property
    def n_joints(self) -> int:
        return self.joints.shape[0]


@dataclass(frozen=True)
class AlignmentResult:
    """Optimal scale/translation moving ``B`` onto ``A`` and the normalised residual.

    ``translation`` follows the sign convention ``a_i ~ s * b_i - c``.
    """

    scale: float
    translation: np.ndarray
    distance: float


@dataclass
class ConfigurationCluster:
    members: list[int]
    frames: list[int]
    centroid: JointConfiguration
    cost: float


@dataclass
class KMeansResult:
    clusters: list[ConfigurationCluster]
    labels: np.ndarray
    costs: list[float] = field(default_factory=list)
    n_iter: int = 0

    @property
    def cost(self) -> float:
        return self.costs[-1] if self.costs else 0.0


def _as_array(config) -> np.ndarray:
    if isinstance(config, JointConfiguration):
        return config.joints
    return np.asarray(config, dtype=float)


def mean_correct(config: JointConfiguration) -> JointConfiguration:
    """Subtract the joint centroid."""
    joints = config.joints - config.joints.mean(axis=0)
    return JointConfiguration(joints, config.frame_index, config.video)


def _energy(centred: np.ndarray) -> float:
    # tr[X X^T] for an (n, 2) matrix
    return float(np.sum(centred * centred))


def check_configuration(config) -> None:
    """Raise :class:`DegenerateConfiguration` if all joints coincide."""
    x = _as_array(config)
    if not _energy(x - x.mean(axis=0)) > 0.0:
        raise DegenerateConfiguration("all joints of the configuration coincide")


def procrustes_distance(a, b) -> AlignmentResult:
    """Distance of ``b`` to the target ``a`` under translation and scale ``s >= 0``.

    Returns the clamped optimal scale, the translation and the residual
    divided by the centred energy of ``a``.  The result is 0 iff ``b`` is a
    translated, positively scaled copy of ``a``; it is exactly 1 whenever the
    cross-trace ``tr[A B^T]`` is non-positive.
    """
    xa = _as_array(a)
    xb = _as_array(b)
    if xa.shape != xb.shape:
        raise ValueError(f"joint count mismatch: {xa.shape} vs {xb.shape}")
    mean_a = xa.mean(axis=0)
    mean_b = xb.mean(axis=0)
    ca = xa - mean_a
    cb = xb - mean_b
    energy_a = _energy(ca)
    energy_b = _energy(cb)
    if not energy_a > 0.0 or not energy_b > 0.0:
        raise DegenerateConfiguration("all joints of a configuration coincide")
    scale = max(0.0, float(np.sum(ca * cb)) / energy_b)
    residual = ca - scale * cb
    distance = _energy(residual) / energy_a
    translation = scale * mean_b - mean_a
    return AlignmentResult(scale=scale, translation=translation, distance=distance)


def _normalise(x: np.ndarray) -> np.ndarray:
    centred = x - x.mean(axis=0)
    energy = _energy(centred)
    if not energy > 0.0:
        raise DegenerateConfiguration("centroid collapsed to a single point")
    return centred / np.sqrt(energy)


def distance_matrix(targets: np.ndarray, references: np.ndarray) -> np.ndarray:
    """Pairwise distances ``d(targets[i], references[j])``.

    Both arguments are stacks of shape ``(m, n, 2)``; evaluates the same
    closed form as :func:`procrustes_distance`, vectorised.
    """
    ta = targets - targets.mean(axis=1, keepdims=True)
    rb = references - references.mean(axis=1, keepdims=True)
    energy_a = np.einsum("mij,mij->m", ta, ta)
    energy_b = np.einsum("kij,kij->k", rb, rb)
    if np.any(~(energy_a > 0)) or np.any(~(energy_b > 0)):
        raise DegenerateConfiguration("all joints of a configuration coincide")
    cross = np.einsum("mij,kij->mk", ta, rb)
    scale = np.maximum(0.0, cross / energy_b[None, :])
    # ||a - s b||^2 = |a|^2 - 2 s <a,b> + s^2 |b|^2
    residual = energy_a[:, None] - 2.0 * scale * cross + scale**2 * energy_b[None, :]
    return np.maximum(residual, 0.0) / energy_a[:, None]


def centroid_update(members, reference=None) -> JointConfiguration:
    """Average of the members after aligning each onto ``reference``.

    Each member is centred and scaled by its optimal non-negative factor
    towards the reference (the first member when no reference is given);
    the mean shape is then centred and scaled to unit energy.
    """
    stack = np.stack([_as_array(m) for m in members])
    if len(stack) == 0:
        raise ValueError("centroid_update needs at least one member")
    for x in stack:
        check_configuration(x)
    ref = _normalise(stack[0] if reference is None else _as_array(reference))
    centred = stack - stack.mean(axis=1, keepdims=True)
    energy = np.einsum("mij,mij->m", centred, centred)
    cross = np.einsum("mij,ij->m", centred, ref)
    scale = np.maximum(0.0, cross / energy)
    mean = np.mean(scale[:, None, None] * centred, axis=0)
    if not _energy(mean) > 0.0:
        # every member points away from the reference; fall back to the raw mean of
        # unit-normalised members so the update stays defined
        mean = np.mean(centred / np.sqrt(energy)[:, None, None], axis=0)
    return JointConfiguration(_normalise(mean))


def _farthest_point_seeds(x: np.ndarray, k: int, rng: np.random.Generator) -> list[int]:
    seeds = [int(rng.integers(len(x)))]
    closest = distance_matrix(x, x[seeds])[:, 0]
    for _ in range(1, k):
        masked = closest.copy()
        masked[seeds] = -np.inf
        nxt = int(np.argmax(masked))
        seeds.append(nxt)
        closest = np.minimum(closest, distance_matrix(x, x[[nxt]])[:, 0])
    return seeds


def _cluster_costs(d: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    own = d[np.arange(len(labels)), labels]
    return np.bincount(labels, weights=own, minlength=k)


def kmeans_temporal(configs, k: int, seed: int = 0, max_iter: int = 100) -> KMeansResult:
    """Cluster configurations with the rotation-free Procrustes distance.

    Each configuration is the target ``A`` and the centroid the reference,
    i.e. costs are ``d(config, centroid)``.  Seeding is farthest-point from a
    random first centre; empty clusters are reseeded with the member lying
    farthest from its centroid.  The total cost never increases between
    iterations (a centroid update that would raise its cluster's cost is
    rejected), and ``result.costs`` records it after each iteration.
    """
    configs = list(configs)
    n = len(configs)
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    if max_iter < 1:
        raise ValueError("max_iter must be positive")
    x = np.stack([_as_array(c) for c in configs])
    for c in x:
        check_configuration(c)
    rng = np.random.default_rng(seed)

    centroids = np.stack([_normalise(x[i]) for i in _farthest_point_seeds(x, k, rng)])
    d = distance_matrix(x, centroids)
    labels = np.argmin(d, axis=1)
    labels, centroids = _reseed_empty(x, d, labels, centroids)
    d = distance_matrix(x, centroids)
    costs = [float(d[np.arange(n), labels].sum())]

    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        old_cluster_cost = _cluster_costs(d, labels, k)
        new_centroids = centroids.copy()
        for j in range(k):
            idx = np.flatnonzero(labels == j)
            candidate = centroid_update(x[idx], centroids[j]).joints
            cand_cost = distance_matrix(x[idx], candidate[None])[:, 0].sum()
            if cand_cost <= old_cluster_cost[j]:
                new_centroids[j] = candidate
        centroids = new_centroids
        d = distance_matrix(x, centroids)
        new_labels = np.argmin(d, axis=1)
        # keep the current label on exact ties so assignments cannot oscillate
        keep = d[np.arange(n), labels] <= d[np.arange(n), new_labels]
        new_labels = np.where(keep, labels, new_labels)
        new_labels, centroids = _reseed_empty(x, d, new_labels, centroids)
        d = distance_matrix(x, centroids)
        costs.append(float(d[np.arange(n), new_labels].sum()))
        changed = np.any(new_labels != labels)
        labels = new_labels
        if not changed:
            break

    clusters = []
    own = d[np.arange(n), labels]
    for j in range(k):
        idx = np.flatnonzero(labels == j)
        clusters.append(ConfigurationCluster(
            members=idx.tolist(),
            frames=[configs[i].frame_index if isinstance(configs[i], JointConfiguration) else int(i)
                    for i in idx],
            centroid=JointConfiguration(centroids[j]),
            cost=float(own[idx].sum()),
        ))
    return KMeansResult(clusters=clusters, labels=labels, costs=costs, n_iter=n_iter)


def _reseed_empty(x, d, labels, centroids):
    k = len(centroids)
    labels = labels.copy()
    centroids = centroids.copy()
    for j in range(k):
        if np.any(labels == j):
            continue
        counts = np.bincount(labels, minlength=k)
        own = d[np.arange(len(labels)), labels].copy()
        own[counts[labels] <= 1] = -np.inf
        far = int(np.argmax(own))
        if not np.isfinite(own[far]):
            continue
        labels[far] = j
        centroids[j] = _normalise(x[far])
    return labels, centroids
