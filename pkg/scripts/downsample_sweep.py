#!/usr/bin/env python3
"""Accuracy and runtime of the solver under event-stream downsampling.

Generates one synthetic rotation window, then solves it while keeping only
every m-th event for a range of factors. Prints error against ground truth
and wall time per factor.
"""

import argparse
import json
import sys
import time

import numpy as np

from eventcm import CameraIntrinsics, SearchBox, SolverConfig, downsample, solve
from eventcm.synth import gen_events, gen_scene
from eventcm.warps.rotation import RotationWarp

SENSOR = (240, 180)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--events", type=int, default=12_000)
    ap.add_argument("--factors", type=int, nargs="+", default=[1, 2, 3, 4, 5, 6])
    ap.add_argument("--omega", type=float, nargs=3, default=(0.8, -0.5, 1.5))
    ap.add_argument("--half-width", type=float, default=0.03,
                    help="search box half-width around ground truth, rad/s")
    ap.add_argument("--tau-per-event", type=float, default=0.01)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    intr = CameraIntrinsics(f=240.0, u0=(SENSOR[0] - 1) / 2, v0=(SENSOR[1] - 1) / 2)
    warp = RotationWarp(intr)
    gt = np.asarray(args.omega)
    scene = gen_scene(60, (1.1, 0.85), 2.0, seed=args.seed)
    window = gen_events(scene, warp, tuple(gt), 0.01, args.events, SENSOR,
                        seed=args.seed + 1)
    box = SearchBox(tuple(gt - args.half_width), tuple(gt + args.half_width))

    # one warm-up solve so compilation does not pollute the first timing
    solve(downsample(window, args.factors[-1]), warp, "sos", box,
          SolverConfig(tau=1e9), sensor_size=SENSOR)

    rows = []
    for m in args.factors:
        sub = downsample(window, m)
        t0 = time.perf_counter()
        res = solve(sub, warp, "sos", box,
                    SolverConfig(tau=args.tau_per_event * len(sub)),
                    sensor_size=SENSOR)
        wall = time.perf_counter() - t0
        eps = float(np.linalg.norm(res.theta - gt))
        rows.append({"factor": m, "n_events": len(sub),
                     "epsilon_deg_per_s": float(np.degrees(eps)),
                     "wall_time_s": wall})
        print(f"m={m}: n={len(sub):6d} eps={np.degrees(eps):7.3f} deg/s "
              f"time={wall:6.2f}s")
    print(json.dumps(rows, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
