"""Cluster arm configurations by shape, ignoring position and size.

Draws arm poses around four phases of the stroke cycle, moves and scales
each one at random, and recovers the phases with k-means under the
alignment distance.
"""

from __future__ import annotations

import numpy as np

from keypose.geometry import kmeans_temporal, procrustes_distance
from keypose.synthetic import arm_phase_samples


def main():
    configs, truth = arm_phase_samples(200, (0.0, 0.25, 0.5, 0.75), seed=3)
    a, b = configs[0].joints, configs[1].joints
    print(f"d(a, b) = {procrustes_distance(a, b).distance:.4f}")
    print(f"d(a, 3b + 7) = {procrustes_distance(a, 3 * b + 7).distance:.4f}  (same)")
    print(f"d(a, -a) = {procrustes_distance(a, -a).distance:.4f}  (scale clamped to 0)")

    res = kmeans_temporal(configs, 4, seed=0)
    print(f"\nk-means: {len(res.costs)} iterations, cost {res.costs[0]:.3f} -> {res.costs[-1]:.3f}")
    for j in range(4):
        phases, counts = np.unique(truth[res.labels == j], return_counts=True)
        print(f"cluster {j}: {counts.sum():3d} members, phases {dict(zip(phases.tolist(), counts.tolist()))}")


if __name__ == "__main__":
    main()
