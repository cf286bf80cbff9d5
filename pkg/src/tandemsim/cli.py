"""Command line front end: ``tandemsim run | verify | bench``.

Exit codes: 0 success, 1 invalid scenario or failed verification, 2 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import random
import sys
from pathlib import Path

from .des import simulate_des
from .engine import WavefrontEngine, default_workers
from .model import BlockingMode, Issue, Scenario, ValidationError
from .scenario_io import load_scenario, report_to_csv, report_to_json, trace_to_csv
from .variates import ExplicitList

log = logging.getLogger("tandemsim")

DESK_SCALE = 10**6


def engine_for(scenario: Scenario, metrics=False, idle=False, **kw) -> WavefrontEngine:
    return WavefrontEngine(scenario, metrics=metrics, idle=idle, **kw)


def verify_scenario(scenario: Scenario, **engine_kw):
    """Run the wavefront engine and the event-driven oracle and diff the traces.

    Returns None on agreement, otherwise the first divergence
    ``(matrix, station, customer, engine_value, oracle_value)``.
    """
    traced = dataclasses.replace(scenario, trace=True)
    engine_trace = WavefrontEngine(traced, **engine_kw).run().trace
    oracle_trace = simulate_des(traced)
    return engine_trace.first_divergence(oracle_trace)


def random_scenario(rng: random.Random, mode=None, max_stations=5, max_customers=50,
                    max_duration=9, max_capacity=3, workers=(1, 2, 3, 8)) -> Scenario:
    """Random integer-duration scenario, as used by fuzzing and the property suites."""
    mode = BlockingMode(mode or rng.choice([m.value for m in BlockingMode]))
    N = rng.randint(1, max_stations)
    K = rng.randint(1, max_customers)
    sources = [ExplicitList([rng.randint(0, max_duration) for _ in range(K)]) for _ in range(N + 1)]
    caps = tuple(rng.randint(1, max_capacity) for _ in range(N)) if mode is not BlockingMode.INFINITE else None
    return Scenario(N, K, mode, sources, capacities=caps, seed=rng.getrandbits(32), workers=rng.choice(workers))


def _write(path, text):
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _load(args) -> Scenario:
    sc = load_scenario(args.scenario, default_workers=default_workers())
    changes = {}
    if getattr(args, "workers", None) is not None and not isinstance(args.workers, list):
        changes["workers"] = args.workers
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "trace", False):
        changes["trace"] = True
    return dataclasses.replace(sc, **changes) if changes else sc


def cmd_run(args) -> int:
    sc = _load(args)
    if args.idle and sc.mode is BlockingMode.INFINITE:
        raise ValidationError([Issue("IdleNeedsFiniteBuffers", "--idle requires a finite-buffer mode")])
    report = engine_for(sc, metrics=args.metrics, idle=args.idle, executor=args.executor).run()
    for w in report.warnings:
        log.warning(w)
    text = report_to_json(report) if args.format == "json" else report_to_csv(report)
    _write(args.out, text)
    if report.trace is not None:
        trace_path = args.trace_out
        if trace_path is None:
            base = Path(args.out) if args.out else Path(Path(args.scenario).name)
            trace_path = base.with_suffix(".trace.csv")
        Path(trace_path).write_text(trace_to_csv(report), encoding="utf-8")
        log.info("trace written to %s", trace_path)
    return 0


def cmd_verify(args) -> int:
    if args.fuzz:
        rng = random.Random(args.seed if args.seed is not None else 0)
        passed = 0
        for idx in range(args.fuzz):
            sc = random_scenario(rng)
            div = verify_scenario(sc, workers=sc.workers)
            if div is None:
                passed += 1
            else:
                print(f"case {idx}: {sc.mode.value} N={sc.stations} K={sc.customers} diverges at {_fmt(div)}")
        print(f"{passed}/{args.fuzz} pass")
        return 0 if passed == args.fuzz else 1
    if args.scenario is None:
        print("verify needs a scenario file or --fuzz N", file=sys.stderr)
        return 1
    sc = _load(args)
    if sc.stations * sc.customers > DESK_SCALE:
        log.warning("N*K = %d exceeds desk scale; the event-driven oracle will be slow",
                    sc.stations * sc.customers)
    div = verify_scenario(sc, workers=sc.workers)
    if div is None:
        print(f"PASS {args.scenario}: engine and oracle agree on all epochs")
        return 0
    print(f"FAIL {args.scenario}: first divergence at {_fmt(div)}")
    return 1


def _fmt(div) -> str:
    name, n, k, mine, theirs = div
    return f"{name}[station={n}, customer={k}] engine={mine} oracle={theirs}"


def cmd_bench(args) -> int:
    sc = _load(args)
    workers = args.workers or [1]
    rows, reference = [], None
    base = {}
    for P in workers:
        report = engine_for(sc, metrics=args.metrics, idle=args.idle, workers=P, executor=args.executor).run()
        if reference is None:
            reference = report.departures
        elif report.departures != reference:
            print(f"departures differ between P={workers[0]} and P={P}", file=sys.stderr)
            return 1
        if not base:
            base = {"substeps": report.counters.parallel_substeps, "wall": report.wall_clock}
        rows.append({
            "workers": P,
            "wall_clock_seconds": report.wall_clock,
            "parallel_substeps": report.counters.parallel_substeps,
            "arithmetic_ops": report.counters.arithmetic_ops,
            "substep_speedup": base["substeps"] / report.counters.parallel_substeps,
            "wall_clock_speedup": base["wall"] / report.wall_clock if report.wall_clock > 0 else None,
        })
    if args.format == "json":
        _write(args.out, json.dumps({"scenario": args.scenario, "departures": reference, "runs": rows},
                                    indent=2) + "\n")
    else:
        lines = [f"{'P':>5} {'substeps':>12} {'ops':>12} {'speedup':>9} {'wall[s]':>10} {'wall-speedup':>12}"]
        for r in rows:
            ws = f"{r['wall_clock_speedup']:.2f}" if r["wall_clock_speedup"] is not None else "-"
            lines.append(f"{r['workers']:>5} {r['parallel_substeps']:>12} {r['arithmetic_ops']:>12} "
                         f"{r['substep_speedup']:>9.3f} {r['wall_clock_seconds']:>10.4f} {ws:>12}")
        _write(args.out, "\n".join(lines) + "\n")
    return 0


def _worker_list(text: str) -> list:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("worker counts must be positive")
    return values


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tandemsim", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, with_workers=True):
        sp.add_argument("--seed", type=int, help="override the scenario seed")
        sp.add_argument("--executor", choices=["serial", "threads"], default="serial")
        if with_workers:
            sp.add_argument("--workers", type=int, help="worker count P (default: file, then $TANDEMSIM_WORKERS)")

    r = sub.add_parser("run", help="simulate a scenario and emit a report")
    r.add_argument("scenario")
    common(r)
    r.add_argument("--metrics", action="store_true", help="accumulate S, W, T, U, J, Q")
    r.add_argument("--idle", action="store_true", help="accumulate mean blocked time (finite buffers)")
    r.add_argument("--trace", action="store_true", help="also write the full epoch trace")
    r.add_argument("--trace-out", help="trace CSV path (default: next to --out)")
    r.add_argument("--format", choices=["json", "csv"], default="json")
    r.add_argument("--out")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="compare the engine against the event-driven oracle")
    v.add_argument("scenario", nargs="?")
    common(v)
    v.add_argument("--fuzz", type=int, default=0, metavar="N", help="check N random scenarios instead")
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", help="run a scenario at several worker counts")
    b.add_argument("scenario")
    common(b, with_workers=False)
    b.add_argument("--workers", type=_worker_list, help="comma-separated worker counts, e.g. 1,8")
    b.add_argument("--metrics", action="store_true")
    b.add_argument("--idle", action="store_true")
    b.add_argument("--format", choices=["table", "json"], default="table")
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        for issue in exc.issues:
            print(f"error: {issue.code}: {issue.message}", file=sys.stderr)
        return 1
    except (ValueError, IndexError) as exc:
        # bad durations surface lazily from the sources
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
