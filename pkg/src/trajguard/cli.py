"""Command-line entry point: ``trajguard plan|check|sim|bench``.

Exit codes: 0 ok or safe, 1 usage or input error, 2 unsafe (replan needed
or collision in simulation).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

CONFIG_ENV = "TRAJGUARD_CONFIG"
EXIT_OK, EXIT_USAGE, EXIT_UNSAFE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _vec(text: str, n: int = 3) -> np.ndarray:
    """Parse ``"a b c"``, ``"a,b,c"`` or a single value broadcast to ``n``."""
    try:
        vals = [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected numbers, got {text!r}") from None
    if len(vals) == 1:
        vals = vals * n
    if len(vals) != n or not all(math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError(f"expected 1 or {n} finite numbers, got {text!r}")
    return np.array(vals)


def _add_state_args(p, name, required):
    p.add_argument(f"--{name}", type=_vec, required=required, metavar="X,Y,Z",
                   help=f"{name} position [m]")
    p.add_argument(f"--{name}-vel", type=_vec, default=np.zeros(3), metavar="VX,VY,VZ")
    p.add_argument(f"--{name}-acc", type=_vec, default=np.zeros(3), metavar="AX,AY,AZ")


def _add_limit_args(p):
    g = p.add_argument_group("limits (one value or one per axis; min defaults to -max)")
    for k, d in (("v", "2"), ("a", "2"), ("j", "4")):
        g.add_argument(f"--{k}max", type=_vec, default=_vec(d))
        g.add_argument(f"--{k}min", type=_vec, default=None)


def _add_clearance_args(p):
    p.add_argument("--lcoll", type=_vec, default=None, help="collision half-extent [m]")
    p.add_argument("--lwarn", type=_vec, default=None, help="warning half-extent [m]")
    p.add_argument("--dp", type=_vec, default=None, help="sampling distance per axis [m]")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="trajguard", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    p = sub.add_parser("plan", help="plan one trajectory and print samples as CSV")
    _add_state_args(p, "start", True)
    _add_state_args(p, "target", True)
    _add_limit_args(p)
    p.add_argument("--dt", type=float, default=None, help="constant time step [s]")
    p.add_argument("--dp", type=_vec, default=None, help="constant distance step [m]")

    p = sub.add_parser("check", help="check a trajectory against a point cloud")
    _add_state_args(p, "start", True)
    _add_state_args(p, "target", True)
    _add_limit_args(p)
    _add_clearance_args(p)
    p.add_argument("--cloud", required=True, help="cloud file ('-' for stdin); origin defaults to --start")
    p.add_argument("--horizon", type=float, default=None,
                   help="moving-point window [s] (default: max(duration, 2))")
    p.add_argument("--executing", action="store_true",
                   help="judge as the executing trajectory instead of a candidate")
    p.add_argument("--no-crop", action="store_true", help="skip the bounding-box crop")

    p = sub.add_parser("sim", help="run a scenario and write its log")
    p.add_argument("scenario", help="scenario file or shipped name (ball, wall, empty)")
    p.add_argument("--out", default="sim_out", help="output directory")
    _add_clearance_args(p)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--budget-ms", type=float, default=None)
    p.add_argument("--candidates", type=int, default=None,
                   help="fixed candidate count (switches to fixed mode)")
    p.add_argument("--adaptive", action="store_true", help="use the time budget instead")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--no-figure", action="store_true")

    p = sub.add_parser("bench", help="time the candidate pipeline")
    p.add_argument("--points", type=int, default=65536)
    p.add_argument("--candidates", type=int, default=100)
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--budget-ms", type=float, default=50.0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    _add_clearance_args(p)
    p.add_argument("--figure", default=None, help="write a stage-timing chart here")
    return ap


_CONFIG_KEYS = {"dp", "dt", "lcoll", "lwarn", "alpha", "budget_ms", "candidates", "seed",
                "threads", "vmax", "vmin", "amax", "amin", "jmax", "jmin", "points",
                "repetitions", "horizon"}


def _config_defaults() -> dict:
    """Flag defaults from the key=value file named by ``TRAJGUARD_CONFIG``."""
    path = os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    from .fileio import parse_kv
    try:
        raw = parse_kv(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read {CONFIG_ENV}={path}: {exc}") from None
    out = {}
    for k, v in raw.items():
        key = k.replace("-", "_")
        if key not in _CONFIG_KEYS:
            raise UsageError(f"{path}: unknown config key {k!r}")
        if key in ("dp", "lcoll", "lwarn", "vmax", "vmin", "amax", "amin", "jmax", "jmin"):
            out[key] = _vec(v)
        elif key in ("candidates", "seed", "threads", "points", "repetitions"):
            out[key] = int(v)
        else:
            out[key] = float(v)
    return out


def _constraints(args):
    from .trajectory import AxisConstraints
    out = []
    for n in range(3):
        lim = []
        for k in ("v", "a", "j"):
            hi = getattr(args, f"{k}max")[n]
            lo = getattr(args, f"{k}min")
            lim += [-hi if lo is None else lo[n], hi]
        out.append(AxisConstraints(*lim))
    return tuple(out)


def _states(args):
    from .trajectory import State3
    return (State3.from_arrays(args.start, args.start_vel, args.start_acc),
            State3.from_arrays(args.target, args.target_vel, args.target_acc))


def _replan_config(args, base=None):
    from .avoidance import ReplanConfig
    from .collision import ClearanceSpec
    cfg = base or ReplanConfig()
    if getattr(args, "lcoll", None) is not None or getattr(args, "lwarn", None) is not None:
        lc = args.lcoll if args.lcoll is not None else cfg.clearance.l_coll
        lw = args.lwarn if args.lwarn is not None else np.maximum(cfg.clearance.l_warn, lc + 0.5)
        cfg = replace(cfg, clearance=ClearanceSpec(lc, lw))
    if getattr(args, "dp", None) is not None:
        cfg = replace(cfg, dp=args.dp)
    return cfg


def cmd_plan(args, out) -> int:
    from .fileio import format_samples
    from .trajectory import plan_3d, sample_times, states_at
    start, target = _states(args)
    traj = plan_3d(start, target, _constraints(args))
    if args.dp is not None:
        times = sample_times(traj, args.dp)
    else:
        dt = args.dt if args.dt is not None else 0.01
        if not dt > 0.0:
            raise UsageError("--dt must be positive")
        times = np.arange(0.0, traj.duration, dt) if traj.duration > 0 else np.zeros(0)
        times = np.append(times, traj.duration)
        if len(times) > 1 and times[-1] - times[-2] < 1e-12:
            times = times[:-1]
            times[-1] = traj.duration
    out.write(format_samples(times, states_at(traj, times)))
    return EXIT_OK


def cmd_check(args, out) -> int:
    from .avoidance import ReplanConfig
    from .collision import VERDICT_NAMES, classify_positions, classify_trajectory
    from .fileio import format_kv, read_cloud
    from .trajectory import aabb_of_pieces, plan_3d, positions_at_times, sample_times
    start, target = _states(args)
    cons = _constraints(args)
    cfg = _replan_config(args, ReplanConfig(constraints=cons))
    src = sys.stdin.read() if args.cloud == "-" else Path(args.cloud)
    # without an origin header the scan is taken from the start position
    cloud = read_cloud(src, origin=start.position)
    traj = plan_3d(start, target, cons)
    horizon = args.horizon if args.horizon is not None else max(traj.duration, cfg.min_horizon)
    times = sample_times(traj, cfg.dp)
    pos = positions_at_times(traj.knots, traj.coef, times)
    if args.no_crop:
        idx = np.arange(len(cloud))
    else:
        lo, hi = aabb_of_pieces(traj.knots, traj.coef)
        grow = cfg.clearance.l_warn + 1e-9
        idx = cloud.crop_indices(lo - grow, hi + grow, horizon)
    classes = classify_positions(pos, cloud.subset(idx), cfg.clearance, cfg.sensor, horizon,
                                 point_index=idx)
    ctx = "executing" if args.executing else "candidate"
    report = classify_trajectory(classes, ctx, sample_times=times)
    counts = report.counts()
    head = {"verdict": report.verdict, "reason": report.reason, "context": ctx,
            "duration": traj.duration, "samples": len(times), "points": len(cloud),
            "points_checked": len(idx)}
    head.update({f"n_{k}": v for k, v in counts.items()})
    out.write(format_kv(head))
    out.write("\nindex,t,px,py,pz,verdict,offenders\n")
    for i, (t, p, c) in enumerate(zip(times, pos, classes.codes)):
        off = classes.offenders[classes.offsets[i]:classes.offsets[i + 1]]
        out.write(f"{i},{float(t)!r},{float(p[0])!r},{float(p[1])!r},{float(p[2])!r},"
                  f"{VERDICT_NAMES[c]},"
                  f"{' '.join(str(int(k)) for k in off)}\n")
    return EXIT_OK if report.safe else EXIT_UNSAFE


def cmd_sim(args, out) -> int:
    from .fileio import format_kv, load_scenario, shipped_scenario, write_sim_outputs
    from .sim import run
    path = Path(args.scenario)
    if not path.exists():
        try:
            path = shipped_scenario(args.scenario)
        except FileNotFoundError:
            raise UsageError(f"scenario {args.scenario!r} not found") from None
    sc = load_scenario(path)
    cfg = _replan_config(args, sc.replan)
    if args.budget_ms is not None:
        cfg = replace(cfg, budget=args.budget_ms / 1e3)
    if args.candidates is not None:
        cfg = replace(cfg, mode="fixed", n_candidates=args.candidates)
    if args.adaptive:
        cfg = replace(cfg, mode="adaptive")
    if args.threads is not None:
        cfg = replace(cfg, threads=args.threads)
    sc = replace(sc, replan=cfg)
    if args.alpha is not None:
        sc = replace(sc, alpha=args.alpha)
    if args.seed is not None:
        sc = replace(sc, seed=args.seed)
    log = run(sc)
    files = write_sim_outputs(log, args.out)
    if not args.no_figure:
        from .plotting import plot_run
        files["figure"] = plot_run(log, sc, Path(args.out) / "trajectory.png")
    summary = log.summary()
    summary.update({f"file_{k}": str(v) for k, v in files.items()})
    out.write(format_kv(summary))
    return EXIT_UNSAFE if log.collision else EXIT_OK


def cmd_bench(args, out) -> int:
    from .avoidance import ReplanConfig
    from .bench import run_bench
    from .fileio import format_kv
    if args.points <= 0 or args.candidates <= 0 or args.repetitions <= 0:
        raise UsageError("sizes must be positive")
    cfg = _replan_config(args, ReplanConfig(budget=args.budget_ms / 1e3, threads=args.threads))
    rep = run_bench(args.points, args.candidates, args.repetitions, cfg, args.seed)
    d = rep.as_dict()
    if args.figure:
        from .plotting import plot_bench
        d["file_figure"] = str(plot_bench(rep, args.figure))
    out.write(format_kv(d))
    return EXIT_OK


COMMANDS = {"plan": cmd_plan, "check": cmd_check, "sim": cmd_sim, "bench": cmd_bench}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        defaults = _config_defaults()
    except (UsageError, argparse.ArgumentTypeError, ValueError) as exc:
        print(f"trajguard: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if defaults:
        for action in parser._subparsers._group_actions[0].choices.values():
            known = {a.dest for a in action._actions}
            action.set_defaults(**{k: v for k, v in defaults.items() if k in known})
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    from .trajectory import InfeasibleError
    try:
        return COMMANDS[args.cmd](args, out)
    except (UsageError, InfeasibleError, ValueError, OSError) as exc:
        print(f"trajguard {args.cmd}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
