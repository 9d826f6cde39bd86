"""Command-line interface.

Exit codes: 0 success, 2 input error (bad file, bad flag, parse error with
line/column), 3 numerical-integrity failure, 4 enumeration-size limit.
All outputs are deterministic for a fixed flag set including --seed; seeds
come only from flags, never from the environment.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import engine, noise as noise_mod, protocol, report
from .analytics import half_mirror_merit, optimize_half_mirror
from .errors import (
    CfqError,
    NumericalIntegrityError,
    PathSumBoundError,
    PbmFormatError,
    RangeError,
)
from .scenario import (
    COHERENT,
    Scenario,
    ScenarioParseError,
    SourceModel,
    parse_scenario,
    scenario_hash,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3
EXIT_SIZE = 4


def _load_scenario(path: str) -> tuple[Scenario, str]:
    text = Path(path).read_text(encoding="utf-8")
    return parse_scenario(text), Path(path).stem


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_simulate(args: argparse.Namespace) -> int:
    scenario, name = _load_scenario(args.scenario)
    started = time.perf_counter()
    program = engine.compile_scenario(scenario, args.logic)
    result = engine.run_exact(program)
    counts = None
    if args.trials is not None:
        if args.trials < 1:
            return _fail("--trials must be >= 1", EXIT_INPUT)
        counts = engine.run_monte_carlo(program, trials=args.trials, seed=args.seed)
    payload = report.run_report(
        scenario_name=name,
        scenario_hash=scenario_hash(scenario),
        logic=args.logic,
        result=result,
        seed=args.seed,
        trials=args.trials,
        counts=counts,
        noise=scenario.noise,
    )
    _emit(report.dumps(payload), args.out)
    print(f"simulate: {time.perf_counter() - started:.3f}s", file=sys.stderr)
    return EXIT_OK


def cmd_transmit(args: argparse.Namespace) -> int:
    scenario, name = _load_scenario(args.scenario)
    try:
        data = Path(args.image).read_bytes()
    except OSError as exc:
        return _fail(f"cannot read image {args.image}: {exc}", EXIT_INPUT)
    image = protocol.decode_pbm(data)
    received, stats = protocol.transmit_image(scenario, image, seed=args.seed)
    Path(args.out).write_bytes(protocol.encode_pbm(received, binary=not args.ascii))
    if args.stats:
        payload = report.image_stats_report(
            scenario_name=name,
            scenario_hash=scenario_hash(scenario),
            seed=args.seed,
            width=image.width,
            height=image.height,
            stats=stats,
        )
        Path(args.stats).write_text(report.dumps(payload), encoding="utf-8")
    return EXIT_OK


def cmd_audit(args: argparse.Namespace) -> int:
    scenario, name = _load_scenario(args.scenario)
    audit = engine.audit_counterfactuality(scenario, args.logic)
    if args.source == COHERENT:
        source = SourceModel(kind=COHERENT, mean_photon_number=args.mean_photon_number)
    else:
        source = scenario.noise.source
    violation_p = noise_mod.counterfactual_violation(scenario, args.logic, source)
    payload = report.audit_report(
        scenario_name=name,
        scenario_hash=scenario_hash(scenario),
        audit=audit,
        violation={
            "source": source.kind,
            "mean_photon_number": source.mean_photon_number,
            "probability": violation_p,
        },
    )
    _emit(report.dumps(payload), args.out)
    return EXIT_OK


def cmd_optimize_mirror(args: argparse.Namespace) -> int:
    if args.M < 3:
        return _fail("--M must be >= 3 (no interior optimum below that)", EXIT_INPUT)
    lines = ["r merit"]
    steps = args.steps
    for i in range(steps + 1):
        r = i / steps
        lines.append(f"{r!r} {half_mirror_merit(r, args.M)!r}")
    optimum = optimize_half_mirror(args.M)
    lines.append(f"optimum {optimum!r}")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_lock_demo(args: argparse.Namespace) -> int:
    series = noise_mod.simulate_lock_run(
        steps=args.duration,
        sigma=args.sigma,
        locked=args.locked,
        seed=args.seed,
    )
    rows = ["step,visibility"]
    rows += [f"{i},{float(v)!r}" for i, v in enumerate(series)]
    _emit("\n".join(rows) + "\n", args.out)
    print(f"mean visibility: {series.mean():.6f}", file=sys.stderr)
    return EXIT_OK


def cmd_calibrate(args: argparse.Namespace) -> int:
    if args.scenario:
        scenario, name = _load_scenario(args.scenario)
    else:
        from .scenario import builtin_scenarios

        scenario, name = builtin_scenarios()["slaz_m4n2"], "slaz_m4n2"
    cal = noise_mod.calibrate_visibility(scenario)
    payload = report.calibration_report(name, scenario_hash(scenario), cal)
    _emit(report.dumps(payload), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfq",
        description="Simulate and analyze counterfactual communication "
                    "over a nested-Zeno interferometer.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario exactly and/or by Monte Carlo")
    p.add_argument("scenario")
    p.add_argument("--logic", type=int, choices=(0, 1), required=True)
    p.add_argument("--exact", action="store_true", default=True,
                   help="include the exact run (always on)")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("transmit", help="transmit a PBM image through the protocol")
    p.add_argument("scenario")
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stats", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ascii", action="store_true", help="write P1 instead of P4")
    p.set_defaults(func=cmd_transmit)

    p = sub.add_parser("audit", help="path-sum counterfactuality audit")
    p.add_argument("scenario")
    p.add_argument("--logic", type=int, choices=(0, 1), required=True)
    p.add_argument("--source", choices=("heralded", "coherent"), default="heralded")
    p.add_argument("--mean-photon-number", type=float, default=1.0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("optimize-mirror", help="sweep and optimize the entry mirror")
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--steps", type=int, default=20)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_optimize_mirror)

    p = sub.add_parser("lock-demo", help="phase-lock visibility time series (CSV)")
    p.add_argument("--duration", type=int, default=noise_mod.DEFAULT_LOCK_STEPS)
    p.add_argument("--sigma", type=float, default=noise_mod.DEFAULT_DRIFT_SIGMA)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--locked", dest="locked", action="store_true", default=True)
    group.add_argument("--unlocked", dest="locked", action="store_false")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_lock_demo)

    p = sub.add_parser("calibrate", help="fit visibility to observed identification rates")
    p.add_argument("--scenario", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_calibrate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioParseError as exc:
        return _fail(str(exc.error), EXIT_INPUT)
    except OSError as exc:
        return _fail(str(exc), EXIT_INPUT)
    except (PbmFormatError, RangeError) as exc:
        return _fail(str(exc), EXIT_INPUT)
    except PathSumBoundError as exc:
        return _fail(str(exc), EXIT_SIZE)
    except NumericalIntegrityError as exc:
        return _fail(str(exc), EXIT_NUMERICAL)
    except CfqError as exc:
        return _fail(str(exc), EXIT_INPUT)


if __name__ == "__main__":
    sys.exit(main())
