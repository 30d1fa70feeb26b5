"""Fit key-pose models on six training videos and evaluate on ten test videos.

Prints recall at a deviation of 0.03 stroke lengths for each estimator
variant: maximum likelihood on the five best series or on all of them,
with post-processing, with a fused second view, with one annotated frame
(MAP) and with the annotation alone.
"""

from __future__ import annotations

import time

from keypose.benchmark import run_benchmark


def main():
    t0 = time.perf_counter()
    res = run_benchmark()
    print(res.table())
    print(f"\n{len(res.seeds)} test videos in {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
