"""Train a poselet mixture on rendered frames and score a new video.

The stick figure swims with a 20-frame stroke.  Left-arm poses are
clustered into four poselets, one part filter is trained per cluster, and
each frame of an unseen video is scored with the star model.  Every part
fires twice per stroke because either arm can match it.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from keypose.activations import local_maxima, smooth
from keypose.pictorial import score_frames
from keypose.synthetic import SyntheticMotionSpec, render_frames
from keypose.training import TrainingOptions, cluster_arms, frame_pyramids, train_mixture


def main():
    spec = SyntheticMotionSpec(period=20, n_poselets=1, duration=200, seed=0)
    frames, configs = render_frames(spec, n_frames=120)
    clusters = cluster_arms(configs, 4, seed=0)
    mixture, accs = train_mixture(frames, configs, clusters.labels,
                                  [c.centroid for c in clusters.clusters], TrainingOptions(epochs=10))
    print("training accuracy (root, parts):", " ".join(f"{a:.2f}" for a in accs))

    test_frames, _ = render_frames(replace(spec, seed=1), n_frames=100)
    scores = score_frames(mixture, list(frame_pyramids(test_frames)))
    for j in range(scores.shape[1]):
        peaks = local_maxima(smooth(scores[:, j], 1.0))
        print(f"part {j}: peaks at {peaks[:6].tolist()} ..., gaps {sorted(set(np.diff(peaks).tolist()))}")


if __name__ == "__main__":
    main()
