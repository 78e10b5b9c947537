"""Command line entry points.

Exit status: 0 on success, 2 when inputs fail validation, 3 on I/O trouble.
The EKNIT_SEED environment variable, when set, overrides the scenario seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from .bus import BusModel, ModuleDescriptor
from .connector import MotionKind
from .engine import (
    Scenario,
    ScenarioError,
    load_scenario,
    reference_scenario,
    run_scenario,
    shake_test_table,
    transactions_to_jsonl,
)
from .placement import (
    DEFAULT_ARM_POSITIONS,
    DEFAULT_NOISE_MODEL,
    rank_placements,
    synthesize_flexion_trace,
)
from .signal import waveform_to_csv
from .topology import calibrate_misalignment_sigma, mean_disconnected_fraction

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3

SEED_ENV_VAR = "EKNIT_SEED"


def _apply_seed_env(scenario: Scenario) -> Scenario:
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None:
        return scenario
    try:
        seed = int(raw)
    except ValueError:
        raise ScenarioError(f"{SEED_ENV_VAR} must be an integer, got {raw!r}")
    return replace(scenario, seed=seed)


def _load(path: str | None) -> Scenario:
    scenario = reference_scenario() if path is None else load_scenario(path)
    return _apply_seed_env(scenario)


def _emit(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if out is None:
        print(text)
    else:
        Path(out).write_text(text + "\n", encoding="utf-8")


def _cmd_simulate(args) -> int:
    scenario = _load(args.scenario)
    result = run_scenario(scenario)
    if args.out:
        Path(args.out).write_bytes(result.to_bytes() + b"\n")
        print(json.dumps(result.summary, indent=2, sort_keys=True))
    else:
        _emit(result.to_dict(), None)
    return EXIT_OK


def _cmd_scan(args) -> int:
    scenario = _load(args.scenario)
    result = run_scenario(scenario)
    _emit({"scan": result.final_scan, "site_margins": result.site_margins},
          args.out)
    return EXIT_OK


def _cmd_shake_test(args) -> int:
    scenario = _load(args.scenario)
    motions = None
    if args.motion:
        motions = tuple(MotionKind(m) for m in args.motion)
    table = shake_test_table(scenario, motions, trials=args.trials)
    _emit(table, args.out)
    return EXIT_OK


def _cmd_placement_eval(args) -> int:
    truth = synthesize_flexion_trace(args.duration, 1.0, 90.0)
    report = rank_placements(DEFAULT_ARM_POSITIONS, truth,
                             DEFAULT_NOISE_MODEL,
                             seeds_per_position=args.seeds,
                             base_seed=args.seed)
    if args.csv:
        report.write_csv(args.csv)
    _emit(report.to_dict(), args.out)
    return EXIT_OK


def _cmd_calibrate(args) -> int:
    scenario = _load(args.scenario)
    sigma = calibrate_misalignment_sigma(scenario.layout, scenario.hub_site,
                                         args.target,
                                         tolerance_mm=args.tolerance,
                                         n_seeds=args.seeds)
    achieved = mean_disconnected_fraction(scenario.layout, scenario.hub_site,
                                          sigma, args.tolerance,
                                          n_seeds=args.seeds)
    _emit({"sigma_mm": sigma, "achieved_fraction": achieved,
           "target_fraction": args.target, "n_seeds": args.seeds}, args.out)
    return EXIT_OK


def _cmd_export(args) -> int:
    scenario = _load(args.scenario)
    result = run_scenario(scenario)
    if args.format == "json":
        text = transactions_to_jsonl(result)
    else:
        rows = ["site,margin_v,decodable,reachable"]
        for site, entry in result.site_margins.items():
            margin = "" if entry["margin_v"] is None else repr(entry["margin_v"])
            rows.append(f"{site},{margin},{int(entry['decodable'])},"
                        f"{int(entry['reachable'])}")
        text = "\n".join(rows) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if args.waveforms:
        _export_waveforms(scenario, Path(args.waveforms))
    return EXIT_OK


def _export_waveforms(scenario: Scenario, directory: Path) -> None:
    """One received-probe CSV per reachable site."""
    directory.mkdir(parents=True, exist_ok=True)
    bus = BusModel(scenario.layout, scenario.hub_site, scenario.line,
                   bitrate_hz=scenario.bitrate_hz,
                   sample_rate_hz=scenario.sample_rate_hz,
                   hysteresis_v=scenario.hysteresis_v,
                   seed=scenario.seed)
    for placement in scenario.modules:
        bus.attach(placement.site, ModuleDescriptor(placement.address,
                                                    placement.kind))
    for site in scenario.layout.site_ids():
        wave = bus.received_probe(site)
        if wave is not None:
            waveform_to_csv(wave, directory / f"{site}.csv")


def _cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    scenario = _load(args.scenario) if args.scenario else None
    app = create_app(scenario)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eknit",
        description="Simulate textile-embedded sensor networks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario file end to end")
    p.add_argument("scenario", nargs="?", default=None,
                   help="scenario JSON (default: built-in reference)")
    p.add_argument("--out", help="write the full result JSON here")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("scan", help="report bus scan and per-site margins")
    p.add_argument("scenario", nargs="?", default=None)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_scan)

    p = sub.add_parser("shake-test", help="run motion detachment campaigns")
    p.add_argument("scenario", nargs="?", default=None)
    p.add_argument("--motion", action="append",
                   choices=[m.value for m in MotionKind],
                   help="restrict to this motion (repeatable)")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_shake_test)

    p = sub.add_parser("placement-eval",
                       help="rank arm positions by joint tracking error")
    p.add_argument("--seeds", type=int, default=100,
                   help="noise draws per position")
    p.add_argument("--seed", type=int, default=0, help="base seed")
    p.add_argument("--duration", type=float, default=10.0,
                   help="synthetic flexion trace length in seconds")
    p.add_argument("--csv", help="also write ranking CSV here")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_placement_eval)

    p = sub.add_parser("calibrate-misalignment",
                       help="find the junction sigma hitting a target "
                            "disconnection fraction")
    p.add_argument("scenario", nargs="?", default=None)
    p.add_argument("--target", type=float, default=0.074)
    p.add_argument("--seeds", type=int, default=1000)
    p.add_argument("--tolerance", type=float, default=1.0,
                   help="junction contact tolerance in mm")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("export", help="export simulation outputs")
    p.add_argument("scenario", nargs="?", default=None)
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.add_argument("--out")
    p.add_argument("--waveforms",
                   help="directory for per-site received waveform CSVs")
    p.set_defaults(func=_cmd_export)

    p = sub.add_parser("serve", help="start the HTTP/WebSocket API")
    p.add_argument("scenario", nargs="?", default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        # covers scenario, layout, and calibration validation failures
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
