"""Command-line entry point: simulate, control, tune and a JSONL controller bridge.

Exit codes: 0 success, 2 parse or input error, 3 infeasible, 4 control fault.
Nothing is written to the output directory unless the command succeeds.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .controller import (
    ControlGoal,
    goal_from_scenario,
    run_closed_loop,
    serve_stream,
)
from .errors import (
    ConfigParseError,
    Infeasible,
    InfeasibleScenario,
    InvalidParams,
    PhaseRegression,
    StuckState,
    ThresholdExceeded,
)
from .params import MechParams, load_params
from .scenario_io import dump_scenario, preset_names, resolve_scenario
from .simulator import run
from .tuner import DEFAULT_SAFETY, default_grid, optimize, report_csv, sweep

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_INFEASIBLE = 3
EXIT_CONTROL = 4


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _write_outputs(out_dir: Path, files: dict[str, str], manifest: dict) -> Path:
    """Write ``files`` then a manifest holding their digests."""
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = {}
    for name, text in files.items():
        data = text.encode("utf-8")
        (out_dir / name).write_bytes(data)
        outputs[name] = {"path": str(out_dir / name), "sha256": _sha256(data)}
    manifest = dict(manifest, version=__version__, outputs=outputs)
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def verify_manifest(path) -> bool:
    """True when every file listed in the manifest exists with the recorded digest."""
    manifest = json.loads(Path(path).read_text(encoding="utf-8"))
    for entry in manifest["outputs"].values():
        p = Path(entry["path"])
        if not p.is_file() or _sha256(p.read_bytes()) != entry["sha256"]:
            return False
    return True


def _load(args):
    scn = resolve_scenario(args.scenario)
    if args.seed is not None:
        scn = replace(scn, seed=args.seed)
    if args.dt is not None:
        scn = replace(scn, dt=args.dt)
    if args.deterministic:
        scn = scn.deterministic()
    return scn.validate()


def _trace_files(trace) -> dict[str, str]:
    return {
        "trace.csv": trace.to_csv(),
        "events.jsonl": trace.events_jsonl(),
        "meta.json": json.dumps(trace.metadata(), indent=2, sort_keys=True) + "\n",
    }


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    scn = _load(args)
    trace = run(scn)
    files = _trace_files(trace)
    files["scenario.scn"] = dump_scenario(scn)
    _write_outputs(Path(args.out), files, {
        "command": "simulate", "scenario": args.scenario, "seed": scn.seed,
        "wall_clock_s": time.perf_counter() - t0,
    })
    modes = " -> ".join(m.value for m in trace.mode_sequence())
    print(f"{len(trace)} rows, stop: {trace.stop_reason}, modes: {modes}"
          + (" [chatter]" if trace.chatter else ""))
    return EXIT_OK


def _goal(args, scn) -> ControlGoal:
    goal = goal_from_scenario(scn)
    changes = {}
    if args.theta_f_deg is not None:
        changes["theta_f_target"] = math.radians(args.theta_f_deg)
    if args.f_tip is not None:
        changes["f_tip_target"] = args.f_tip
    if args.d_pi is not None:
        changes["d_pi_target"] = args.d_pi
    if args.threshold is not None:
        changes["tau_m_threshold"] = args.threshold
    return replace(goal, **changes)


def cmd_control(args) -> int:
    t0 = time.perf_counter()
    scn = _load(args)
    goal = _goal(args, scn).check(scn.params)
    trace, summary = run_closed_loop(scn, goal)
    files = _trace_files(trace)
    files["summary.json"] = json.dumps(summary.as_record(), indent=2, sort_keys=True) + "\n"
    _write_outputs(Path(args.out), files, {
        "command": "control", "scenario": args.scenario, "seed": scn.seed,
        "wall_clock_s": time.perf_counter() - t0,
    })
    err = summary.errors
    print(f"tau_m target {summary.tau_m_target:.4f} N m, threshold {summary.tau_m_threshold:.4f} N m")
    print(f"theta_f {math.degrees(summary.theta_f):.3f} deg (err {err['theta_f']:.2%}), "
          f"f_tip {summary.f_tip:.3f} N (err {err['f_tip']:.2%}), "
          f"d_pi {summary.d_pi * 1e3:.3f} mm (err {err['d_pi']:.2%})")
    print("phases: " + " -> ".join(ph.value for ph in summary.phases)
          + ("" if summary.sequences_match else "  (differs from simulated modes)"))
    return EXIT_OK


def parse_grid(text: str, degrees: bool = False) -> np.ndarray:
    """``"a,b,c"`` or ``"start:stop:step"`` (stop inclusive)."""
    try:
        if ":" in text:
            start, stop, step = (float(v) for v in text.split(":"))
            if step <= 0:
                raise ValueError
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            vals = start + step * np.arange(max(n, 0))
        else:
            vals = np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError:
        raise ConfigParseError(f"bad grid {text!r}", 0, 0, "<grid>") from None
    if vals.size == 0:
        raise ConfigParseError(f"empty grid {text!r}", 0, 0, "<grid>")
    return np.radians(vals) if degrees else vals


def cmd_tune(args) -> int:
    t0 = time.perf_counter()
    base = load_params(args.params) if args.params else MechParams()
    g_lams, g_t = default_grid(base)
    lams = g_lams if args.lambda_deg is None else parse_grid(args.lambda_deg, degrees=True)
    t_scws = g_t if args.t_scw is None else parse_grid(args.t_scw)
    rows = sweep(lams, t_scws, base, args.torque_cap)
    files = {"feasibility.csv": report_csv(rows, args.safety)}
    best = optimize(base, args.torque_cap, args.speed_floor, args.safety, lams, t_scws)
    files["optimum.json"] = json.dumps(best.as_record(), indent=2, sort_keys=True) + "\n"
    _write_outputs(Path(args.out), files, {
        "command": "tune", "scenario": args.params or "", "seed": None,
        "wall_clock_s": time.perf_counter() - t0,
    })
    ok = sum(r.ordering_ok and r.chatter_safe(args.safety) for r in rows)
    print(f"{len(rows)} grid points, {ok} ordering- and chatter-feasible")
    print(f"optimum: lambda {math.degrees(best.lam):.2f} deg, T_scw {best.t_scw:.3f} N m, "
          f"f_tip_max {best.f_tip_max:.3f} N")
    return EXIT_OK


def cmd_bridge(args) -> int:
    scn = _load(args)
    goal = goal_from_scenario(scn)
    for line in serve_stream(sys.stdin, goal, scn.params, abs(scn.motor_speed)):
        print(line, flush=True)
    return EXIT_OK


def cmd_presets(args) -> int:
    for name in preset_names():
        print(name)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="trimode-gripper", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def scenario_flags(p, out=True):
        p.add_argument("--scenario", required=True, help="scenario file or bundled preset name")
        if out:
            p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--dt", type=float, default=None, help="sample step in seconds")
        p.add_argument("--deterministic", action="store_true",
                       help="drop residual-friction noise ranges")

    p = sub.add_parser("simulate", help="open-loop run of a scenario")
    scenario_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("control", help="closed-loop run toward the scenario goals")
    scenario_flags(p)
    p.add_argument("--theta-f-deg", type=float, default=None)
    p.add_argument("--f-tip", type=float, default=None, help="grasp force target [N]")
    p.add_argument("--d-pi", type=float, default=None, help="pull-in target [m]")
    p.add_argument("--threshold", type=float, default=None, help="pull-in torque threshold [N m]")
    p.set_defaults(func=cmd_control)

    p = sub.add_parser("tune", help="feasibility sweep and constrained optimum")
    p.add_argument("--out", required=True)
    p.add_argument("--params", default=None, help="base parameter file")
    p.add_argument("--lambda-deg", default=None,
                   help="'a,b,c' or 'start:stop:step'; default 1 deg steps up to the pole")
    p.add_argument("--t-scw", default=None,
                   help="'a,b,c' or 'start:stop:step'; default 0:2:0.01")
    p.add_argument("--torque-cap", type=float, default=0.8)
    p.add_argument("--speed-floor", type=float, default=0.0, help="closing speed floor [m/rad]")
    p.add_argument("--safety", type=float, default=DEFAULT_SAFETY)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("bridge", help="JSONL controller on stdin/stdout")
    scenario_flags(p, out=False)
    p.set_defaults(func=cmd_bridge)

    p = sub.add_parser("presets", help="list bundled scenarios")
    p.set_defaults(func=cmd_presets)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (InfeasibleScenario, StuckState) as exc:
        where = f" at t={exc.time:.6g} s" if getattr(exc, "time", None) is not None else ""
        print(f"infeasible: {exc.condition} condition violated{where}: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ThresholdExceeded, PhaseRegression) as exc:
        print(f"control fault: {exc}", file=sys.stderr)
        return EXIT_CONTROL
    except InvalidParams as exc:
        code = EXIT_CONTROL if args.command in ("control", "bridge") else EXIT_PARSE
        print(f"error: {exc}", file=sys.stderr)
        return code
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
