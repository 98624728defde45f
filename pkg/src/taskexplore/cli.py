"""Command-line entry point: single runs, batches, map/codebook generation and export."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from taskexplore import engine
from taskexplore.codec import CodebookError, default_templates, format_codebook
from taskexplore.engine import MODES, MapGenerationError, Scenario, ScenarioError
from taskexplore.grid import MapFormatError, save_map

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SCENARIO = 3
EXIT_IO = 4
EXIT_DATA = 5

log = logging.getLogger("taskexplore")


def summary_line(seed, mode, cost, bits, steps) -> str:
    return f"seed={seed} mode={mode} cost={cost:.6f} bits={bits} steps={steps}"


def _scenario(args) -> Scenario:
    from taskexplore.io import load_scenario

    sc = load_scenario(args.scenario) if args.scenario else Scenario()
    if getattr(args, "mode", None):
        sc = replace(sc, mode=args.mode)
    return sc


def _outdir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise PermissionError(f"cannot create output directory {out}: {exc.strerror}") from None
    return out


def cmd_run(args) -> int:
    from taskexplore import io, plotting

    sc = _scenario(args)
    seed = sc.seed if args.seed is None else args.seed
    out = _outdir(args.out)
    grid = engine.scenario_map(sc, seed)
    trace = engine.run(sc, seed, grid=grid, record_fields=True)
    stem = out / f"run{seed}"
    io.write_trace_csv(trace, stem.with_suffix(".csv"))
    io.write_fields(trace, io.fields_path(stem.with_suffix(".csv")))
    if not args.no_plot:
        plotting.plot_run(trace, grid.as_array(), stem.with_suffix(".png"))
    print(summary_line(seed, sc.mode, trace.cost, trace.total_bits, trace.n_steps))
    if trace.capped:
        log.warning("seed %d stopped at the step cap before the goal", seed)
    return EXIT_OK


def cmd_batch(args) -> int:
    from taskexplore import io, plotting

    sc = _scenario(args)
    if args.seeds:
        seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    else:
        base = sc.seed if args.seed is None else args.seed
        seeds = list(range(base, base + args.n))
    if len(set(seeds)) != len(seeds):
        raise ScenarioError("seeds must be distinct within a batch")
    modes = args.modes.split(",") if args.modes else [sc.mode]
    for m in modes:
        if m not in MODES:
            raise ScenarioError(f"unknown mode {m!r}; choose from {MODES}")
    out = _outdir(args.out)
    report = engine.run_batch(sc, seeds, {m: {"mode": m} for m in modes}, workers=args.workers)
    for r in sorted(report.runs, key=lambda r: (r.seed, report.labels().index(r.label))):
        print(summary_line(r.seed, r.mode, r.cost, r.bits, r.steps))
    io.write_summary_csv(report, out / "summary.csv")
    if not args.no_plot:
        plotting.plot_batch(report, out / "summary.png")
    for label, n, rc, rb in report.summary():
        log.info("%s: n=%d r_cost=%.4f r_bits=%.4f", label, n, rc, rb)
    return EXIT_OK


def cmd_gen_map(args) -> int:
    start = tuple(args.start) if args.start else None
    goal = tuple(args.goal) if args.goal else None
    grid = engine.generate_map(args.seed, args.width, args.height, args.density, args.noise,
                               start=start, goal=goal)
    save_map(grid, args.out)
    return EXIT_OK


def cmd_gen_codebook(args) -> int:
    Path(args.out).write_text(format_codebook(default_templates(args.size)))
    return EXIT_OK


def cmd_export(args) -> int:
    from taskexplore import io, plotting

    names = io.FIELDS if args.field == "all" else (args.field,)
    out = _outdir(args.out) if args.out else Path(args.trace).parent
    stem = Path(args.trace).stem
    for t in args.at:
        for name in names:
            arr = io.load_field(args.trace, name, t)
            base = out / f"{stem}_{name}_t{t}"
            io.write_pgm(arr, base.with_suffix(".pgm"))
            if not args.no_plot:
                plotting.plot_field(arr, base.with_suffix(".png"), f"{name}  t={t}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="taskexplore",
                                description="Task-driven exploration with compressed maps.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="one closed-loop run")
    r.add_argument("--scenario")
    r.add_argument("--seed", type=int)
    r.add_argument("--mode", choices=MODES)
    r.add_argument("--out", required=True)
    r.add_argument("--no-plot", action="store_true")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("batch", help="paired runs over many seeds")
    b.add_argument("--scenario")
    b.add_argument("--n", type=int, default=10)
    b.add_argument("--seed", type=int, help="first seed (default: scenario seed)")
    b.add_argument("--seeds", help="comma-separated explicit seeds")
    b.add_argument("--mode", choices=MODES)
    b.add_argument("--modes", help="comma-separated modes to compare")
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--out", required=True)
    b.add_argument("--no-plot", action="store_true")
    b.set_defaults(func=cmd_batch)

    g = sub.add_parser("gen-map", help="write a generated map file")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--width", type=int, default=32)
    g.add_argument("--height", type=int, default=32)
    g.add_argument("--density", type=float, default=0.25)
    g.add_argument("--noise", type=float, default=0.0)
    g.add_argument("--start", type=int, nargs=2)
    g.add_argument("--goal", type=int, nargs=2)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_map)

    c = sub.add_parser("gen-codebook", help="write the default template codebook")
    c.add_argument("--size", type=int, default=7)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_gen_codebook)

    e = sub.add_parser("export", help="graymap snapshots of recorded fields")
    e.add_argument("--trace", required=True)
    e.add_argument("--at", type=int, nargs="+", required=True)
    e.add_argument("--field", default="h", choices=("xhat", "h", "W", "R", "all"))
    e.add_argument("--out")
    e.add_argument("--no-plot", action="store_true")
    e.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ScenarioError, MapFormatError, CodebookError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    except (OSError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, IndexError, KeyError, MapGenerationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
