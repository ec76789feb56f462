"""Command-line entry point: ``faultline <command> ...``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bench as bench_mod
from . import benchmarks as bm
from . import emulator as em
from . import fabric as fb
from . import kernel
from . import orchestrator as oc
from . import resynth as rs
from . import tdc
from .asm import AsmError, parse_program, print_program

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3  # unreadable or malformed input
EXIT_TRANSLATE = 4
EXIT_RUNTIME = 5  # emulation, calibration or placement errors
EXIT_IO = 6
EXIT_INCORRECT = 7  # a variant disagreed with its oracle


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _read(path: str) -> str:
    try:
        return sys.stdin.read() if path == "-" else Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}", EXIT_IO) from None


def _write(args, text: str, path: str | None = None) -> None:
    path = path or args.out
    if not path or path == "-":
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc.strerror}", EXIT_IO) from None


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _program(ref: str):
    """A path to a .s file, or a shipped benchmark name."""
    if not ref.endswith(".s") and ref != "-":
        try:
            return bm.program(bm.canonical_name(ref))
        except KeyError:
            pass
    return parse_program(_read(ref))


# -- commands -------------------------------------------------------------------

def cmd_translate(args) -> int:
    p = _program(args.input)
    if args.variant:
        q = rs.make_variant(p, args.variant)
    else:
        q = rs.apply_passes(p, args.passes or "")
    _write(args, print_program(q, fold_pseudos=args.fold))
    return EXIT_OK


def cmd_run(args) -> int:
    p = _program(args.input)
    if args.variant:
        p = rs.make_variant(p, args.variant)
    faults = em.parse_fault_config(_read(args.faults)) if args.faults else em.FaultConfig()
    s = em.load(p, args.entry)
    trace = None
    fh = None
    if args.trace_out:
        try:
            fh = open(args.trace_out, "w", encoding="utf-8", newline="")
        except OSError as exc:
            raise CliError(f"cannot write {args.trace_out}: {exc.strerror}", EXIT_IO) from None
        trace = em.TraceWriter(fh)
    try:
        res = em.run(s, faults, max_cycles=args.max_cycles, trace=trace, backend=args.backend)
    finally:
        if fh:
            fh.close()
    out = {"reason": res.reason, "exit_code": res.exit_code, "cycles": res.cycles,
           "retired": res.retired, "trap": res.trap, "pc": s.pc,
           "faults": sorted(faults.faulty_units)}
    if not args.input.endswith(".s"):
        try:
            out["correct"] = bm.check(bm.canonical_name(args.input), s)
        except KeyError:
            pass
    _write(args, _json(out))
    return EXIT_OK


def cmd_sense(args) -> int:
    cfg = tdc.TdcConfig(taps=args.taps, jitter_ps=args.jitter, oversampling=args.oversampling)
    cfg = tdc.calibrate(cfg, args.calibration_samples, args.seed)
    trace = tdc.parse_trace_csv(_read(args.trace), args.seed) if args.trace else tdc.DisturbanceTrace(seed=args.seed)
    array = tdc.SensorArray(cfg, trace, args.sensors, args.attenuation, args.seed)
    det = tdc.DetectorConfig(args.threshold, args.persistence)
    alerts, hws = tdc.run_sensors(array, det, args.cycles)
    if args.samples_out:
        try:
            with open(args.samples_out, "w", encoding="utf-8", newline="") as fh:
                tdc.write_sample_dump(fh, array, 0, array.index_at(args.cycles))
        except OSError as exc:
            raise CliError(f"cannot write {args.samples_out}: {exc.strerror}", EXIT_IO) from None
    out = {"initial_delay_ps": cfg.initial_delay_ps,
           "alerts": [{"t": a.t, "sensor": a.sensor, "peak_deviation": a.peak_deviation} for a in alerts],
           "sensors": {str(s): tdc.summarize(h) for s, h in hws.items()}}
    _write(args, _json(out))
    return EXIT_OK


def _rect(text: str) -> fb.Rect:
    try:
        x, y, w, h = (int(v) for v in text.split(","))
    except ValueError:
        raise CliError(f"rectangle must be x,y,w,h: {text!r}", EXIT_INPUT) from None
    return fb.Rect(x, y, w, h)


def cmd_fabric(args) -> int:
    w, h = fb.parse_grid(args.grid)
    footprints = fb.load_footprints(_read(args.footprints) if args.footprints else None)
    names = args.place.split(",") if args.place else list(fb.DEFAULT_PLACEMENTS)
    for n in names:
        if n not in footprints:
            raise CliError(f"unknown footprint {n!r}", EXIT_INPUT)
    g, ids = fb.build(w, h, args.tile_luts, args.tile_ffs, args.us_per_tile, footprints, names)
    affected: list[int] = []
    for d in args.damage or []:
        affected += g.damage(_rect(d))
    moves = []
    if args.relocate:
        for pid in g.affected():
            old = g.placements[pid]
            new, cost = g.relocate(pid, footprints)
            moves.append({"placement": old.footprint, "from": old.rect.as_list(), "to": new.rect.as_list(),
                          "tiles": cost.tiles, "time_us": cost.time_us})
    out = {"grid": [w, h], "placements": {p.footprint: p.rect.as_list() for p in g.placements.values()},
           "affected": sorted({g.placements[p].footprint for p in affected}), "relocations": moves,
           "healthy_tiles": g.healthy_tiles(), "free_tiles": g.free_tiles()}
    _write(args, _json(out))
    return EXIT_OK


def cmd_orchestrate(args) -> int:
    sc = oc.load_scenario(_read(args.scenario), args.seed)
    report = oc.run_scenario(sc)
    _write(args, report.to_json())
    log_path = args.log
    if log_path is None and args.out and args.out != "-":
        log_path = str(Path(args.out).with_suffix(".csv"))
    if log_path:
        _write(args, report.log_csv(), log_path)
    return EXIT_OK


def cmd_bench(args) -> int:
    suite = args.suite.split(",") if args.suite else list(bm.NAMES)
    try:
        results = bench_mod.bench(suite)
    except bench_mod.BenchError as exc:
        raise CliError(str(exc), EXIT_INCORRECT) from None
    _write(args, bench_mod.to_csv(results))
    return EXIT_OK


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="faultline", description="Fault detection and recovery for a soft RISC-V core.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="seed for sensor noise and calibration")
    common.add_argument("--out", default=None, help="output file (default: stdout)")
    ap.add_argument("--version", action="version", version="faultline 0.1.0")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("translate", parents=[common], help="apply resynthesis passes to a program")
    p.add_argument("input", help=".s file, '-' or a benchmark name")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--passes", help="comma list of " + ", ".join(rs.PASSES))
    g.add_argument("--variant", choices=rs.VARIANTS)
    p.add_argument("--fold", action="store_true", help="print pseudo-instructions where possible")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("run", parents=[common], help="execute a program under a fault configuration")
    p.add_argument("input", help=".s file, '-' or a benchmark name")
    p.add_argument("--variant", choices=rs.VARIANTS)
    p.add_argument("--faults", help="fault config file (unit=MUL fault=disabled ...)")
    p.add_argument("--entry", default="main")
    p.add_argument("--max-cycles", type=int, default=10_000_000)
    p.add_argument("--trace-out", help="write an execution trace CSV")
    p.add_argument("--backend", choices=sorted(kernel.available_backends()))
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sense", parents=[common], help="sample the TDC sensors under a disturbance trace")
    p.add_argument("--trace", help="disturbance CSV t_start_cycles,t_end_cycles,dv_mv,sensor_scope")
    p.add_argument("--cycles", type=float, default=20_000)
    p.add_argument("--taps", type=int, default=128)
    p.add_argument("--jitter", type=float, default=5.0, help="jitter sigma in ps")
    p.add_argument("--oversampling", type=int, default=4)
    p.add_argument("--sensors", type=int, default=2)
    p.add_argument("--attenuation", type=float, default=tdc.DEFAULT_ATTENUATION)
    p.add_argument("--threshold", type=int, default=8)
    p.add_argument("--persistence", type=int, default=3)
    p.add_argument("--calibration-samples", type=int, default=1000)
    p.add_argument("--samples-out", help="write t,sensor,hw CSV")
    p.set_defaults(func=cmd_sense)

    p = sub.add_parser("fabric", parents=[common], help="place, damage and relocate modules on a tile grid")
    p.add_argument("--grid", default="40x60")
    p.add_argument("--tile-luts", type=int, default=50)
    p.add_argument("--tile-ffs", type=int, default=100)
    p.add_argument("--us-per-tile", type=float, default=1.0)
    p.add_argument("--footprints", help="JSON footprints file")
    p.add_argument("--place", help="comma list of footprints to place (default core,alu,tdc)")
    p.add_argument("--damage", action="append", help="damaged rectangle x,y,w,h (repeatable)")
    p.add_argument("--relocate", action="store_true", help="relocate every affected placement")
    p.set_defaults(func=cmd_fabric)

    p = sub.add_parser("orchestrate", parents=[common], help="run a fault scenario end to end")
    p.add_argument("scenario", help="scenario JSON file")
    p.add_argument("--log", help="event log CSV (default: next to --out)")
    p.set_defaults(func=cmd_orchestrate)

    p = sub.add_parser("bench", parents=[common], help="measure size and cycles of every variant")
    p.add_argument("--suite", help="comma list of benchmarks (default: all)")
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is None and args.command == "sense":
        args.seed = 0
    try:
        return args.func(args)
    except CliError as exc:
        print(f"faultline: {exc}", file=sys.stderr)
        return exc.code
    except rs.TranslationError as exc:
        print(f"faultline: translation failed: {exc}", file=sys.stderr)
        return EXIT_TRANSLATE
    except (AsmError, oc.ScenarioError, json.JSONDecodeError) as exc:
        print(f"faultline: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (em.EmulatorError, tdc.CalibrationError, fb.NoFitError) as exc:
        print(f"faultline: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"faultline: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
