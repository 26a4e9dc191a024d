"""Command-line front end.

Subcommands:

    flow       per-patch optical flow over fixed-length windows
    planar     vehicle motion (omega, v) with a downward-facing camera
    rotation   3-DoF angular velocity
    synth      generate synthetic event streams with known motion
    eval       compare a run report against ground truth
    bench      run all six losses over one sequence and report RMS errors

Reports are JSON lines (one object per window); bound traces CSV; IWE
snapshots binary PGM. With a fixed --seed and --threads 1 every artifact is
byte-reproducible; wall times are only included under --timings.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import io as eio
from .baselines import exhaustive_search  # noqa: F401  (re-exported for scripts)
from .events import EventStream, EventWindow, downsample, slice_windows
from .geometry import CameraIntrinsics
from .iwe import ImageGeometry, accumulate, margin_for_box
from .losses import LOSS_KINDS, FocusLoss
from .metrics import error_metrics, rms_by_dim
from .solver import SolverConfig, solve
from .synth import NoiseSpec, add_noise, gen_events, gen_scene
from .warps import AckermannWarp, FlowWarp, RigConfig, RotationWarp, SearchBox

DEFAULT_WIDTH = 240
DEFAULT_HEIGHT = 180
DEFAULT_FOCAL = 200.0


def _parse_space(text: str, dim: int) -> SearchBox:
    """Parse 'lo,hi' per dimension, dimensions joined by 'x'.

    Use the --space=... form for ranges starting with a minus sign.
    """
    parts = text.split("x")
    if len(parts) != dim:
        raise ValueError(
            f"--space needs {dim} 'lo,hi' ranges joined by 'x', got {text!r}")
    lo, hi = [], []
    for part in parts:
        vals = part.split(",")
        if len(vals) != 2:
            raise ValueError(f"bad range {part!r}, expected 'lo,hi'")
        lo.append(float(vals[0]))
        hi.append(float(vals[1]))
    return SearchBox(tuple(lo), tuple(hi))


def _parse_floats(text: str, n: int, flag: str) -> tuple:
    vals = [float(v) for v in text.split(",")]
    if len(vals) != n:
        raise ValueError(f"{flag} expects {n} comma-separated values")
    return tuple(vals)


def _default_calibration(args) -> eio.CalibrationFile:
    width = getattr(args, "width", DEFAULT_WIDTH)
    height = getattr(args, "height", DEFAULT_HEIGHT)
    f = getattr(args, "focal", DEFAULT_FOCAL)
    return eio.CalibrationFile(
        fx=f, fy=f, cx=(width - 1) / 2.0, cy=(height - 1) / 2.0,
        width=width, height=height,
        l=getattr(args, "rig_l", 0.0), d=getattr(args, "depth", 2.0))


def _load_calibration(args) -> eio.CalibrationFile:
    if args.calib:
        return eio.read_calibration(args.calib)
    return _default_calibration(args)


def _add_shared_run_flags(p: argparse.ArgumentParser):
    p.add_argument("--events", required=True, help="event text file (t x y p lines)")
    p.add_argument("--calib", help="calibration file (key=value); default synthetic camera")
    p.add_argument("--loss", default="sos", choices=LOSS_KINDS)
    p.add_argument("--delta", type=float, default=1.0, help="shift factor for sosa/sosaas")
    p.add_argument("--w1", type=float, default=1.0)
    p.add_argument("--w2", type=float, default=1.0)
    p.add_argument("--space", required=True,
                   help="search box, 'lo,hi' per dimension joined by 'x'")
    p.add_argument("--tau", type=float, help="absolute termination gap")
    p.add_argument("--tau-per-event", type=float, default=0.1,
                   help="termination gap per event (tau = c * N); ignored if --tau given")
    p.add_argument("--downsample", type=int, default=1, metavar="M",
                   help="keep every M-th event")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=0, help="recorded in the report config")
    p.add_argument("--max-iterations", type=int, default=1_000_000)
    p.add_argument("--timings", action="store_true", help="include wall times in reports")
    p.add_argument("--out-json", help="report path (JSON lines); default stdout")
    p.add_argument("--out-csv", help="bound-trace CSV path; windows get _wNNN suffixes")
    p.add_argument("--out-iwe", help="IWE image path (PGM); windows get _wNNN suffixes")


def _suffixed(path: str, index: int) -> str:
    p = Path(path)
    return str(p.with_name(f"{p.stem}_w{index:03d}{p.suffix}"))


def _tau_for(args, loss: FocusLoss, n_events: int) -> float:
    base = args.tau if args.tau is not None else args.tau_per_event * max(n_events, 1)
    return base * loss.tau_scale() if getattr(args, "_scale_tau", False) else base


def _emit_report(records, args):
    if args.out_json:
        eio.write_report(records, args.out_json)
    else:
        for rec in records:
            print(rec.to_json())


def _solve_windows(windows, warp, sensor_size, box, args, loss_kind=None,
                   config_extra=None):
    """Shared solve loop: one report record per window."""
    kind = loss_kind or args.loss
    records = []
    for i, window in enumerate(windows):
        window = downsample(window, args.downsample)
        margin = margin_for_box(window, warp, box, *sensor_size)
        geometry = ImageGeometry(sensor_size[0], sensor_size[1], margin)
        loss = FocusLoss.bind(kind, geometry, len(window),
                              delta=args.delta, w1=args.w1, w2=args.w2)
        tau = _tau_for(args, loss, len(window))
        cfg = SolverConfig(tau=tau, max_iterations=args.max_iterations,
                           thread_count=args.threads)
        result = solve(window, warp, loss, box, cfg, geometry=geometry)
        config = {
            "model": warp.name, "loss": kind, "delta": args.delta,
            "w1": args.w1, "w2": args.w2, "tau": tau,
            "space": [list(box.lo), list(box.hi)],
            "downsample": args.downsample, "seed": args.seed,
            "threads": args.threads, "mu": result.mu, "margin": margin,
        }
        if config_extra:
            config.update(config_extra)
        rec = eio.RunRecord(
            t_ref=window.t_ref, theta=[float(v) for v in result.theta],
            objective=result.objective, gap=result.gap,
            iterations=result.iterations, converged=result.converged,
            n_events=len(window), config=config,
            wall_time=result.wall_time if args.timings else None)
        records.append(rec)
        if args.out_csv:
            eio.write_trace_csv(result.bound_trace, _suffixed(args.out_csv, i))
        if args.out_iwe:
            iwe = accumulate(window, warp, result.theta, geometry)
            eio.write_iwe_image(iwe, _suffixed(args.out_iwe, i))
    return records


# -- subcommands -------------------------------------------------------------


def _cmd_flow(args) -> int:
    calib = _load_calibration(args)
    stream = eio.read_events(args.events)
    if calib.has_distortion:
        stream, _ = eio.undistort(stream, calib)
    size = args.patch_size
    cx, cy = (args.patch if args.patch is not None
              else (calib.cx, calib.cy))
    x0 = cx - (size - 1) / 2.0
    y0 = cy - (size - 1) / 2.0
    keep = ((stream.x >= x0) & (stream.x <= x0 + size - 1)
            & (stream.y >= y0) & (stream.y <= y0 + size - 1))
    patch = EventStream(stream.x[keep] - x0, stream.y[keep] - y0,
                        stream.t[keep], stream.polarity[keep])
    windows = slice_windows(patch, args.window_ms / 1000.0)
    box = _parse_space(args.space, 2)
    records = _solve_windows(windows, FlowWarp(), (size, size), box, args,
                             config_extra={"patch": [cx, cy], "patch_size": size,
                                           "window_ms": args.window_ms})
    _emit_report(records, args)
    return 0


def _cmd_planar(args) -> int:
    calib = _load_calibration(args)
    if not calib.has_rig:
        print("planar motion needs rig parameters (l, d) in the calibration "
              "or --rig-l/--depth with the default camera", file=sys.stderr)
        return 2
    stream = eio.read_events(args.events)
    if calib.has_distortion:
        stream, _ = eio.undistort(stream, calib)
    rig = RigConfig(f=calib.fx, u0=calib.cx, v0=calib.cy, l=calib.l, d=calib.d)
    warp = AckermannWarp(rig)
    box = _parse_space(args.space, 2)
    windows = slice_windows(stream, args.window_ms / 1000.0)
    try:
        warp.validate_box(box, max_dt=args.window_ms / 1000.0)
    except ValueError as exc:
        print(f"inadmissible search space: {exc}", file=sys.stderr)
        return 2
    records = _solve_windows(windows, warp, (calib.width, calib.height), box, args,
                             config_extra={"window_ms": args.window_ms,
                                           "rig": {"l": calib.l, "d": calib.d}})
    _emit_report(records, args)
    return 0


def _cmd_rotation(args) -> int:
    calib = _load_calibration(args)
    stream = eio.read_events(args.events)
    if calib.has_distortion:
        stream, _ = eio.undistort(stream, calib)
    warp = RotationWarp(CameraIntrinsics(f=calib.fx, u0=calib.cx, v0=calib.cy))
    box = _parse_space(args.space, 3)
    windows = slice_windows(stream, args.window_ms / 1000.0)
    records = _solve_windows(windows, warp, (calib.width, calib.height), box, args,
                             config_extra={"window_ms": args.window_ms})
    _emit_report(records, args)
    return 0


def _cmd_synth(args) -> int:
    calib = _default_calibration(args) if not args.calib else eio.read_calibration(args.calib)
    intrinsics = CameraIntrinsics(f=calib.fx, u0=calib.cx, v0=calib.cy)
    if args.model == "ackermann":
        rig = RigConfig(f=calib.fx, u0=calib.cx, v0=calib.cy,
                        l=calib.l if calib.l is not None else 0.0,
                        d=calib.d if calib.d is not None else args.depth)
        warp = AckermannWarp(rig)
        theta = (args.omega_scalar, args.v)
    elif args.model == "rotation":
        warp = RotationWarp(intrinsics)
        theta = args.omega_vec
    else:
        warp = FlowWarp(intrinsics)
        theta = args.flow
    half_x = (calib.width / 2.0) / calib.fx * args.depth * 1.2
    half_y = (calib.height / 2.0) / calib.fx * args.depth * 1.2
    scene = gen_scene(args.segments, (half_x, half_y), args.depth, args.seed)
    window = gen_events(scene, warp, theta, args.dt, args.n,
                        (calib.width, calib.height), args.seed + 1)
    if args.noise > 0:
        window = add_noise(window, NoiseSpec(ne_ratio=args.noise, seed=args.seed + 2),
                           (calib.width, calib.height))
    eio.write_events(window, args.out)
    if args.out_gt:
        with open(args.out_gt, "w") as fh:
            fh.write("0.0 " + " ".join(repr(float(v)) for v in np.atleast_1d(theta)) + "\n")
    if args.out_calib:
        eio.write_calibration(calib, args.out_calib)
    return 0


def _cmd_eval(args) -> int:
    records = eio.read_report(args.report)
    gt_rows = []
    with open(args.gt, "r") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            vals = [float(v) for v in line.split()]
            gt_rows.append((vals[0], np.array(vals[1:])))
    if not gt_rows:
        print("empty ground-truth file", file=sys.stderr)
        return 2
    gt_t = np.array([r[0] for r in gt_rows])

    import json
    per_window = []
    gts, ests = [], []
    for rec in records:
        est = np.array(rec["theta"])
        gt = gt_rows[int(np.argmin(np.abs(gt_t - rec["t_ref"])))][1]
        if gt.size != est.size:
            print("ground-truth dimensionality does not match the report",
                  file=sys.stderr)
            return 2
        m = error_metrics(gt, est)
        m["t_ref"] = rec["t_ref"]
        per_window.append(m)
        gts.append(gt)
        ests.append(est)
    summary = {
        "n_windows": len(per_window),
        "rms": [float(v) for v in rms_by_dim(gts, ests)],
        "mean_epsilon": float(np.mean([m["epsilon"] for m in per_window])),
        "mean_phi": float(np.mean([m["phi"] for m in per_window])),
        "windows": per_window,
    }
    text = json.dumps(summary, sort_keys=True, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0


def _cmd_bench(args) -> int:
    calib = _load_calibration(args)
    if not calib.has_rig:
        print("bench runs the planar model and needs rig parameters", file=sys.stderr)
        return 2
    stream = eio.read_events(args.events)
    if calib.has_distortion:
        stream, _ = eio.undistort(stream, calib)
    rig = RigConfig(f=calib.fx, u0=calib.cx, v0=calib.cy, l=calib.l, d=calib.d)
    warp = AckermannWarp(rig)
    box = _parse_space(args.space, 2)
    windows = slice_windows(stream, args.window_ms / 1000.0)

    gt_rows = None
    if args.gt:
        gt_rows = []
        with open(args.gt, "r") as fh:
            for line in fh:
                line = line.strip()
                if line and not line.startswith("#"):
                    vals = [float(v) for v in line.split()]
                    gt_rows.append((vals[0], np.array(vals[1:])))

    args._scale_tau = True  # carry one gap budget across losses of different scale
    import json
    out_lines = []
    all_records = []
    for kind in LOSS_KINDS:
        records = _solve_windows(windows, warp, (calib.width, calib.height), box,
                                 args, loss_kind=kind,
                                 config_extra={"window_ms": args.window_ms})
        all_records.extend(records)
        row = {"loss": kind,
               "theta": [[float(v) for v in r.theta] for r in records]}
        if gt_rows:
            gt_t = np.array([r[0] for r in gt_rows])
            gts = [gt_rows[int(np.argmin(np.abs(gt_t - r.t_ref)))][1] for r in records]
            ests = [np.array(r.theta) for r in records]
            row["rms"] = [float(v) for v in rms_by_dim(gts, ests)]
        out_lines.append(json.dumps(row, sort_keys=True))
    if args.out_json:
        Path(args.out_json).write_text("\n".join(out_lines) + "\n")
    else:
        print("\n".join(out_lines))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="eventcm",
                                 description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("flow", help="per-patch optical flow")
    _add_shared_run_flags(p)
    p.add_argument("--patch", type=lambda s: _parse_floats(s, 2, "--patch"),
                   help="patch centre 'cx,cy'; default: principal point")
    p.add_argument("--patch-size", type=int, default=40)
    p.add_argument("--window-ms", type=float, default=40.0)
    p.set_defaults(func=_cmd_flow)

    p = sub.add_parser("planar", help="Ackermann (omega, v) motion")
    _add_shared_run_flags(p)
    p.add_argument("--window-ms", type=float, default=100.0)
    p.add_argument("--rig-l", type=float, default=0.0, help="camera forward offset, m")
    p.add_argument("--depth", type=float, default=2.0, help="ground-plane depth, m")
    p.set_defaults(func=_cmd_planar)

    p = sub.add_parser("rotation", help="3-DoF angular velocity")
    _add_shared_run_flags(p)
    p.add_argument("--window-ms", type=float, default=10.0)
    p.set_defaults(func=_cmd_rotation)

    p = sub.add_parser("synth", help="generate a synthetic event stream")
    p.add_argument("--model", required=True, choices=("flow", "ackermann", "rotation"))
    p.add_argument("--omega", default="0.5",
                   help="scalar (ackermann) or 'wx,wy,wz' (rotation), rad/s")
    p.add_argument("--v", type=float, default=0.5, help="forward speed, m/s (ackermann)")
    p.add_argument("--flow", type=lambda s: _parse_floats(s, 2, "--flow"),
                   default=(20.0, -10.0), help="'vx,vy' px/s (flow)")
    p.add_argument("--dt", type=float, default=0.1, help="stream duration, s")
    p.add_argument("--n", type=int, default=10_000, help="signal event count")
    p.add_argument("--noise", type=float, default=0.0, help="noise-to-event ratio")
    p.add_argument("--segments", type=int, default=60)
    p.add_argument("--depth", type=float, default=2.0, help="scene plane depth, m")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--width", type=int, default=DEFAULT_WIDTH)
    p.add_argument("--height", type=int, default=DEFAULT_HEIGHT)
    p.add_argument("--focal", type=float, default=DEFAULT_FOCAL)
    p.add_argument("--rig-l", type=float, default=0.0)
    p.add_argument("--calib", help="use this calibration instead of the defaults")
    p.add_argument("--out", required=True, help="event file to write")
    p.add_argument("--out-gt", help="ground-truth file to write")
    p.add_argument("--out-calib", help="write the calibration used")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("eval", help="metrics of a report against ground truth")
    p.add_argument("--report", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", help="summary JSON path; default stdout")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("bench", help="all six losses over one planar sequence")
    _add_shared_run_flags(p)
    p.add_argument("--window-ms", type=float, default=100.0)
    p.add_argument("--rig-l", type=float, default=0.0)
    p.add_argument("--depth", type=float, default=2.0)
    p.add_argument("--gt", help="ground-truth file for RMS columns")
    p.set_defaults(func=_cmd_bench)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command == "synth":
        if args.model == "ackermann":
            args.omega_scalar = float(args.omega)
        elif args.model == "rotation":
            args.omega_vec = _parse_floats(args.omega, 3, "--omega")
    if not hasattr(args, "_scale_tau"):
        args._scale_tau = False
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
