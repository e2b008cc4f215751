"""Command-line entry point: ``esfreq run | sweep | preset-list``.

Exit codes: 0 success, 1 configuration or usage error, 2 simulation abort.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .analysis import compute_metrics, point_device, sweep_capacity, sweep_duration
from .errors import ConfigError, InvalidScenarioError, NumericDomainError, SimulationAbort, SweepError
from .grid import run_simulation
from .io import emit_svg_plot, write_metrics_csv, write_sweep_csv, write_trace_csv
from .scenario import (PENETRATION, PRESETS, build_model, default_sweep, load_config_full,
                       make_device, preset)

log = logging.getLogger("esfreq")

EXIT_OK, EXIT_CONFIG, EXIT_ABORT = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="esfreq", description="Grid frequency response with storage support.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", type=Path, help="JSON scenario file")
        p.add_argument("--preset", choices=("ei", "ercot"), type=str.lower)
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        p.add_argument("--plot", action="store_true", help="also write SVG plots")

    run = sub.add_parser("run", help="simulate one scenario")
    common(run)
    run.add_argument("--control", choices=("droop", "step", "none"), type=str.lower)
    run.add_argument("--storage-kind", choices=("hees", "hpes"), type=str.lower)
    run.add_argument("--penetration", type=int, choices=sorted(PENETRATION))

    sw = sub.add_parser("sweep", help="storage capacity or discharge-duration sweep")
    common(sw)
    sw.add_argument("--kind", choices=("capacity", "duration"),
                    help="sweep kind for --preset (reference grid)")
    sw.add_argument("--workers", type=int, default=None, help="parallel processes")

    sub.add_parser("preset-list", help="list presets and renewable scenarios")
    return ap


def _check_source(args):
    if args.config is not None and args.preset is not None:
        raise UsageError("--config and --preset are mutually exclusive")
    if args.config is None and args.preset is None:
        raise UsageError("one of --config or --preset is required")


def _cmd_run(args) -> int:
    _check_source(args)
    if args.config is not None:
        if args.control or args.storage_kind or args.penetration:
            raise UsageError("--control, --storage-kind and --penetration apply to --preset only")
        sc, devices, base, _ = load_config_full(args.config)
    else:
        sc, devices = preset(args.preset, args.control or "droop", args.storage_kind or "hpes",
                             penetration=args.penetration or 80)
        base = None
    model = build_model(sc, base)
    log.info("running %s with %d storage device(s)", sc.name, len(devices))
    trace = run_simulation(model, sc, devices)
    m = compute_metrics(trace)
    args.out.mkdir(parents=True, exist_ok=True)
    write_trace_csv(trace, args.out / "trace.csv")
    write_metrics_csv({sc.name: m}, args.out / "metrics.csv")
    if args.plot:
        emit_svg_plot([(trace.t, trace.freq_hz)], [sc.name], args.out / "frequency.svg",
                      xlabel="time (s)", ylabel="frequency (Hz)")
    print(f"{sc.name}: nadir {m.nadir_hz:.4f} Hz at {m.nadir_time_s:.2f} s, "
          f"settling {m.settling_hz:.4f} Hz")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    _check_source(args)
    if args.config is not None:
        if args.kind:
            raise UsageError("--kind applies to --preset only; put the sweep in the config")
        sc, devices, base, spec = load_config_full(args.config)
        if spec is None:
            raise ConfigError("config has no 'sweep' section")
    else:
        if not args.kind:
            raise UsageError("--preset sweeps need --kind capacity|duration")
        sc, devices, spec = default_sweep(args.preset, args.kind)
        base = None
    model = build_model(sc, base)
    fn = sweep_capacity if spec.kind == "capacity" else sweep_duration
    log.info("%s sweep over %d points", spec.kind, len(spec.values))
    try:
        result = fn(model, sc, devices, spec.values, workers=args.workers)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    args.out.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(result, args.out / "sweep.csv")
    named = {"baseline": result.baseline}
    named.update({f"{result.parameter}={v:g}": m for v, m in zip(result.values, result.metrics)})
    write_metrics_csv(named, args.out / "metrics.csv")

    # trace of the best point, for inspection
    best = result.values[result.argmax_index]
    trace = run_simulation(model, sc, [point_device(spec.kind, devices[0], best)])
    write_trace_csv(trace, args.out / "trace.csv")
    if args.plot:
        emit_svg_plot([(result.values, result.nadir_hz)], ["nadir"], args.out / "sweep_nadir.svg",
                      xlabel=result.parameter, ylabel="nadir (Hz)")
        emit_svg_plot([(result.values, result.nadir_time_s)], ["nadir time"],
                      args.out / "sweep_nadir_time.svg", xlabel=result.parameter,
                      ylabel="nadir time (s)")
        emit_svg_plot([(trace.t, trace.freq_hz)], [f"{result.parameter}={best:g}"],
                      args.out / "frequency.svg", xlabel="time (s)", ylabel="frequency (Hz)")
    print(f"{spec.kind} sweep: best nadir {result.nadir_hz.max():.4f} Hz "
          f"at {result.parameter}={best:g}")
    return EXIT_OK


def _cmd_preset_list(args) -> int:
    for key, p in PRESETS.items():
        g = p["grid"]
        print(f"{key.lower()}: load {g.load_mw:g} MW, inertia {g.inertia_base_s:g} s, "
              f"loss {p['loss_mw']:g} MW, storage {p['p_max_mw']:g} MW")
        for kind in ("hpes", "hees"):
            d = make_device(key, "droop", kind)
            print(f"  {kind}: {d.e_max_mws:g} MW*s ({d.support_s:g} s at rated power)")
    print("renewable scenarios (pv, wind):")
    for pen, (pv, wind) in PENETRATION.items():
        print(f"  {pen}%: {pv:.2f}, {wind:.2f}")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"run": _cmd_run, "sweep": _cmd_sweep, "preset-list": _cmd_preset_list}
    try:
        return handlers[args.command](args)
    except UsageError as exc:
        print(f"esfreq {args.command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, InvalidScenarioError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SimulationAbort, SweepError, NumericDomainError) as exc:
        print(f"simulation aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
