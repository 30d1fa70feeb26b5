"""From a noisy score matrix to a stroke length and regular intervals.

The synthetic video has 15 poselet detectors of mixed quality, a stroke of
about 100 frames and a few dropouts and spurious bumps.
"""

from __future__ import annotations

from keypose.activations import goodness_rank
from keypose.config import PipelineConfig
from keypose.pipeline import analyse_scores, intervals_by_poselet
from keypose.synthetic import benchmark_spec, generate


def main():
    config = PipelineConfig()
    ds = generate(benchmark_spec(0))
    analysis = analyse_scores(ds.scores, config, ds.poselet_ids)
    print(f"estimated stroke length: {analysis.f_stroke:.1f} frames (nominal 100)")

    intervals = intervals_by_poselet(analysis, config)
    ranked = goodness_rank(analysis.series, analysis.f_stroke)
    print("\nposelet  activations  intervals  goodness")
    for poselet, g in ranked:
        acts = next(s for s in analysis.series if s.poselet == poselet)
        print(f"{poselet!s:>7}  {len(acts.frames):11d}  {len(intervals.get(poselet, [])):9d}  {g:8.3f}")


if __name__ == "__main__":
    main()
