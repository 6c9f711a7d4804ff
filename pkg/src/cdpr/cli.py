"""Command-line entry point: ``cdpr <subcommand> ...``.

Exit codes: 0 success, 1 usage or runtime error, 2 infeasible pose or
degenerate geometry.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, kinematics, statics, trajectory
from .errors import CDPRError, DegenerateGeometry, NoSolution, Unsupported, ValidationError
from .model import load_robot, reference_robot
from .netloop import read_log, run_controller, run_experiment, run_gateway, run_plant_server
from .plant import PlantConfig, load_plant_config

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE = 0, 1, 2

PRESET_CENTER = (750.0, 850.0)
PRESET_SIDE = 200.0
PRESET_SPEEDS = (100.0, 1000.0)
PRESET_LOOPS = {"remote": (120.0, 10.0), "local": (20.0, 5.0)}

log = logging.getLogger("cdpr")


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    """Usage errors exit with 1 instead of argparse's 2, which means infeasible here."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _g(v) -> str:
    return f"{v:.6g}"


def default_seed() -> int:
    raw = os.environ.get("CDPR_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"CDPR_SEED must be an integer, got {raw!r}") from None


def _robot(args):
    return load_robot(args.robot) if args.robot else reference_robot()


def _positive(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return v


def _non_negative(text):
    v = float(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return v


# kinematics and statics

def cmd_ik(args):
    desc = _robot(args)
    lengths = kinematics.inverse_kinematics(desc, (args.x, args.y))
    print(" ".join(f"l{i + 1}={_g(v)}" for i, v in enumerate(lengths)))
    return EXIT_OK


def cmd_fk(args):
    desc = _robot(args)
    lengths = [v for v in (args.l1, args.l2, args.l3, args.l4) if v is not None]
    if args.lengths:
        lengths = [float(v) for v in args.lengths.split(",")]
    if len(lengths) != desc.cable_count:
        raise UsageError(f"robot has {desc.cable_count} cables, got {len(lengths)} lengths")
    method = args.method
    if method == "auto":
        method = "closed"
        try:
            kinematics.forward_kinematics_closed(desc, lengths)
        except Unsupported:
            method = "numeric"
        except NoSolution:
            pass
    if method == "closed":
        pose = kinematics.forward_kinematics_closed(desc, lengths)
    else:
        guess = (args.guess_x, args.guess_y)
        pose, info = kinematics.forward_kinematics_numeric(desc, lengths, guess, full_output=True)
        log.info("numeric FK: %d iterations, residual %.3g mm", info["iterations"], info["residual"])
    print(f"x={_g(pose.x)} y={_g(pose.y)}")
    return EXIT_OK


def cmd_tensions(args):
    desc = _robot(args)
    ok, t = statics.is_feasible(desc, (args.x, args.y))
    print(" ".join(f"t{i + 1}={_g(v)}" for i, v in enumerate(t)))
    if not ok:
        print(f"infeasible: tensions outside [{_g(desc.tension_min)}, {_g(desc.tension_max)}] N",
              file=sys.stderr)
        return EXIT_INFEASIBLE
    print("feasible")
    return EXIT_OK


def cmd_workspace(args):
    desc = _robot(args)
    if args.x_max <= args.x_min or args.y_max <= args.y_min:
        raise UsageError("ranges must satisfy min < max")
    wmap = statics.workspace_scan(desc, (args.x_min, args.x_max), (args.y_min, args.y_max),
                                  args.spacing)
    statics.export_map(wmap, args.out)
    print(f"nodes={wmap.feasible.size} feasible={wmap.feasible_count} "
          f"area_mm2={_g(wmap.feasible_area)}")
    print(f"map written to {args.out}")
    return EXIT_OK


# trajectories

def _plan_from(args):
    if getattr(args, "plan", None):
        return trajectory.load_plan(args.plan)
    return trajectory.plan_square((args.center_x, args.center_y), args.side, args.speed,
                                  args.accel)


def cmd_plan(args):
    desc = _robot(args)
    plan = _plan_from(args)
    worst = 0.0
    for pose in trajectory.sample_array(plan, args.cycle)[1]:
        ok, t = statics.is_feasible(desc, pose)
        if not ok:
            print(f"path leaves the feasible workspace at ({_g(pose[0])}, {_g(pose[1])})",
                  file=sys.stderr)
            return EXIT_INFEASIBLE
        worst = max(worst, float(np.max(t)))
    trajectory.save_plan(plan, args.out)
    print(f"segments={len(plan.segments)} duration_s={_g(plan.duration)} "
          f"samples={trajectory.sample_count(plan, args.cycle)} t_max_n={_g(worst)}")
    print(f"plan written to {args.out}")
    return EXIT_OK


# loop components

def _plant_config(args):
    cfg = load_plant_config(args.plant_config) if args.plant_config else PlantConfig()
    if args.plant_mode:
        cfg = PlantConfig.from_dict({**cfg.to_dict(), "mode": args.plant_mode})
    return cfg


def cmd_serve_plant(args):
    desc = _robot(args)
    cfg = _plant_config(args).validate(desc)

    def ready(endpoint):
        print(f"plant listening on {endpoint}", flush=True)

    run_plant_server(desc, cfg, args.listen, ready=ready)
    return EXIT_OK


def cmd_serve_gateway(args):
    seed = default_seed() if args.seed is None else args.seed

    def ready(endpoint):
        print(f"gateway listening on {endpoint} -> {args.upstream}", flush=True)

    run_gateway(args.listen, args.upstream, args.delay, args.jitter, seed,
                simulated=not args.realtime, ready=ready)
    return EXIT_OK


def _gateway_of(args):
    if args.direct:
        return None
    if args.gateway_delay is None and args.gateway_jitter is None:
        return None
    return (args.gateway_delay or 0.0, args.gateway_jitter or 0.0)


def _run_one(desc, plan, args, cfg, gateway, seed, log_path):
    if args.plant:
        if gateway is not None:
            raise UsageError("--plant connects to a running endpoint; start the gateway with "
                             "serve-gateway instead of --gateway-*")
        return run_controller(desc, plan, args.cycle, args.plant, log_path,
                              simulated=not args.realtime)
    return run_experiment(desc, plan, args.cycle, cfg, gateway, seed,
                          simulated=not args.realtime, log_path=log_path)


def _summary(looplog, label):
    rep = analysis.delay_report(looplog, label=label)
    cells = " ".join(f"axis{i + 1}={d:.1f}ms" for i, d in enumerate(rep.delays_ms))
    extra = f" [truncated: {looplog.truncated}]" if looplog.truncated else ""
    return f"{label}: cycles={len(looplog)} {cells}{extra}"


def cmd_run_loop(args):
    desc = _robot(args)
    cfg = _plant_config(args).validate(desc)
    seed = default_seed() if args.seed is None else args.seed
    if args.preset == "paper-table-1-2":
        return _run_preset(desc, cfg, seed, args)
    plan = _plan_from(args)
    gateway = _gateway_of(args)
    looplog = _run_one(desc, plan, args, cfg, gateway, seed, args.log)
    if args.plan_out:
        trajectory.save_plan(plan, args.plan_out)
    print(f"log written to {args.log}")
    if args.plant:
        label = args.plant
    elif gateway is None:
        label = "direct"
    else:
        label = f"gateway {_g(gateway[0])}+/-{_g(gateway[1])}ms"
    print(_summary(looplog, label))
    return EXIT_OK if not looplog.truncated else EXIT_USAGE


def _run_preset(desc, cfg, seed, args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    for speed in PRESET_SPEEDS:
        plan = trajectory.plan_square(PRESET_CENTER, PRESET_SIDE, speed, args.accel)
        trajectory.save_plan(plan, out / f"plan_{speed:g}.json")
        logs = {}
        for name, gateway in PRESET_LOOPS.items():
            path = out / f"{name}_{speed:g}.csv"
            logs[name] = _run_one(desc, plan, args, cfg, gateway, seed, path)
            label = f"{name} {speed:g}mm/s"
            print(_summary(logs[name], label), flush=True)
            reports.append(analysis.delay_report(logs[name], label=label))
            reports.append((f"{name}_{speed:g}", logs[name]))
        reports.append(analysis.compare_logs(logs["remote"], logs["local"],
                                             analysis.horizontal_windows(plan),
                                             label=f"{speed:g}mm/s"))
    analysis.emit_report(reports, out)
    print((out / "report.txt").read_text(), end="")
    print(f"outputs written to {out}")
    return EXIT_OK


def _parse_window(text):
    try:
        label, axis, t0, t1 = text.split(":")
        if axis not in ("x", "y"):
            raise ValueError
        return label, axis, (float(t0), float(t1))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"window must be LABEL:AXIS:T0:T1 with AXIS x or y, got {text!r}") from None


def cmd_analyze(args):
    log_a = read_log(args.log_a)
    reports = [analysis.delay_report(log_a, label=args.label_a), (args.label_a, log_a)]
    if args.log_b:
        log_b = read_log(args.log_b)
        reports += [analysis.delay_report(log_b, label=args.label_b), (args.label_b, log_b)]
        segments = args.window or analysis.horizontal_windows(_plan_from(args))
        reports.append(analysis.compare_logs(log_a, log_b, segments,
                                             label=f"{args.label_a}-{args.label_b}"))
    written = analysis.emit_report(reports, args.out_dir)
    text = [p for p in written if p.name == "report.txt"]
    if text:
        print(text[0].read_text(), end="")
    print(f"report written to {args.out_dir}")
    return EXIT_OK


# parser

def _add_plan_flags(p, plan_file=True):
    if plan_file:
        p.add_argument("--plan", help="plan JSON; overrides the square flags")
    p.add_argument("--center-x", type=float, default=PRESET_CENTER[0], help="square centre x (mm)")
    p.add_argument("--center-y", type=float, default=PRESET_CENTER[1], help="square centre y (mm)")
    p.add_argument("--side", type=_positive, default=PRESET_SIDE, help="square side (mm)")
    p.add_argument("--speed", type=_positive, default=100.0, help="cruise speed (mm/s)")
    p.add_argument("--accel", type=_positive, default=trajectory.DEFAULT_ACCEL,
                   help="acceleration (mm/s^2)")


def _add_plant_flags(p):
    p.add_argument("--plant-config", help="plant config JSON")
    p.add_argument("--plant-mode", choices=["dynamic", "ideal"], help="override the plant mode")


def build_parser() -> argparse.ArgumentParser:
    parser = Parser(prog="cdpr", description="Planar cable-driven parallel robot toolkit.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    def command(name, fn, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--robot", help="robot description JSON (default: reference robot)")
        p.set_defaults(func=fn)
        return p

    p = command("ik", cmd_ik, "cable lengths for an effector position")
    p.add_argument("--x", type=float, required=True, help="x (mm)")
    p.add_argument("--y", type=float, required=True, help="y (mm)")

    p = command("fk", cmd_fk, "effector position for given cable lengths")
    for i in range(1, 5):
        p.add_argument(f"--l{i}", type=float, help=f"length of cable {i} (mm)")
    p.add_argument("--lengths", help="comma-separated lengths, alternative to --l1..--l4")
    p.add_argument("--method", choices=["auto", "closed", "numeric"], default="auto",
                   help="closed form (two cables) or Gauss-Newton")
    p.add_argument("--guess-x", type=float, default=750.0, help="numeric start x (mm)")
    p.add_argument("--guess-y", type=float, default=750.0, help="numeric start y (mm)")

    p = command("tensions", cmd_tensions, "static cable tensions at a position")
    p.add_argument("--x", type=float, required=True, help="x (mm)")
    p.add_argument("--y", type=float, required=True, help="y (mm)")

    p = command("workspace", cmd_workspace, "scan the static-equilibrium workspace to CSV")
    p.add_argument("--x-min", type=float, default=0.0)
    p.add_argument("--x-max", type=float, default=1500.0)
    p.add_argument("--y-min", type=float, default=0.0)
    p.add_argument("--y-max", type=float, default=1500.0)
    p.add_argument("--spacing", type=_positive, default=10.0, help="grid spacing (mm)")
    p.add_argument("--out", default="workspace.csv", help="output CSV")

    p = command("plan", cmd_plan, "plan a square path and save it as JSON")
    _add_plan_flags(p, plan_file=False)
    p.add_argument("--cycle", type=_positive, default=trajectory.DEFAULT_CYCLE,
                   help="sampling cycle (s) for the feasibility check")
    p.add_argument("--out", default="plan.json", help="output plan JSON")

    p = command("serve-plant", cmd_serve_plant, "serve the simulated plant for one session")
    p.add_argument("--listen", default="127.0.0.1:5600", help="host:port")
    _add_plant_flags(p)

    p = command("serve-gateway", cmd_serve_gateway, "delay-injecting proxy for one session")
    p.add_argument("--listen", default="127.0.0.1:5601", help="host:port")
    p.add_argument("--upstream", default="127.0.0.1:5600", help="plant host:port")
    p.add_argument("--delay", type=_non_negative, default=0.0, help="base delay (ms)")
    p.add_argument("--jitter", type=_non_negative, default=0.0, help="uniform jitter half-width (ms)")
    p.add_argument("--seed", type=int, help="delay RNG seed (default: $CDPR_SEED or 0)")
    p.add_argument("--realtime", action="store_true", help="wall-clock mode")

    p = command("run-loop", cmd_run_loop, "stream a plan to a plant and log the loop")
    _add_plan_flags(p)
    _add_plant_flags(p)
    p.add_argument("--cycle", type=_positive, default=trajectory.DEFAULT_CYCLE,
                   help="controller cycle (s)")
    p.add_argument("--plant", metavar="HOST:PORT",
                   help="connect to a running plant or gateway instead of spawning one")
    p.add_argument("--direct", action="store_true", help="no gateway (default unless --gateway-*)")
    p.add_argument("--gateway-delay", type=_non_negative, help="spawn a gateway with this base delay (ms)")
    p.add_argument("--gateway-jitter", type=_non_negative, help="gateway jitter half-width (ms)")
    p.add_argument("--seed", type=int, help="gateway seed (default: $CDPR_SEED or 0)")
    p.add_argument("--realtime", action="store_true", help="wall-clock instead of simulated time")
    p.add_argument("--log", default="loop.csv", help="output log CSV")
    p.add_argument("--plan-out", help="also save the plan JSON here")
    p.add_argument("--preset", choices=["paper-table-1-2"],
                   help="run the remote/local comparison at 100 and 1000 mm/s")
    p.add_argument("--out-dir", default="paper-table-1-2", help="preset output directory")

    p = command("analyze", cmd_analyze, "delay and error reports from one or two loop logs")
    p.add_argument("--log-a", required=True, help="first log CSV")
    p.add_argument("--log-b", help="second log CSV for the error comparison")
    p.add_argument("--label-a", default="a")
    p.add_argument("--label-b", default="b")
    p.add_argument("--window", action="append", type=_parse_window,
                   help="LABEL:AXIS:T0:T1 error window in s (repeatable); "
                        "default: horizontal segments of the plan")
    _add_plan_flags(p)
    p.add_argument("--out-dir", default="report", help="report directory")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "direct", False) and (args.gateway_delay is not None
                                           or args.gateway_jitter is not None):
        parser.error("--direct cannot be combined with --gateway-delay/--gateway-jitter")
    try:
        return args.func(args)
    except (NoSolution, DegenerateGeometry) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (UsageError, ValidationError, Unsupported, json.JSONDecodeError,
            FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CDPRError, ConnectionError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
