"""
Command line front end.

    python -m src.main run scenarios/dumbbell-desk.json --seed 7 --report out.json
    python -m src.main compare scenarios/dumbbell-desk.json --algos eecn,ecn,newreno
    python -m src.main sweep scenarios/dumbbell-desk.json --pairs 0.5:0.7,0.3:0.5,0.2:0.4
    python -m src.main validate scenarios/*.json

Exit status: 0 on success, 1 on a configuration error, 2 on an internal
assertion.
"""

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import List, Optional, Sequence, Tuple

from src.config import LOGGER, ConfigError, load_config
from src.engine.scenario import ScenarioConfig, load_scenario
from src.engine.simulator import simulate
from src.metrics.report import (
    EXPORT_FORMATS,
    SimReport,
    comparison_table,
    export,
    reduction_table,
    series_frame,
    sweep_table,
    table_bytes,
    trace_csv,
)
from src.tools.data_store import FileBasedStore
from src.transport.state import CcAlgorithm

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INTERNAL = 2
DEFAULT_ALGOS = "eecn,ecn,newreno"
DEFAULT_PAIRS = "0.5:0.7,0.3:0.5,0.2:0.4"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eecn-sim",
        description="Packet-level simulator for multilevel congestion notification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, report_default: Optional[str]):
        p.add_argument("scenario", help="scenario JSON document")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--duration", type=float, default=None, help="simulated seconds")
        p.add_argument("--report", default=report_default, help="output path")
        p.add_argument("--format", choices=EXPORT_FORMATS, default="json")

    run_p = sub.add_parser("run", help="run one simulation")
    common(run_p, "report.json")
    run_p.add_argument("--trace", default=None, help="write the event trace as CSV")
    run_p.add_argument("--series", default=None, help="write bucketed time series as CSV")

    compare_p = sub.add_parser("compare", help="run the scenario once per algorithm")
    common(compare_p, None)
    compare_p.add_argument("--algos", default=DEFAULT_ALGOS)
    compare_p.add_argument("--jobs", type=int, default=None)

    sweep_p = sub.add_parser("sweep", help="run the scenario once per threshold pair")
    common(sweep_p, None)
    sweep_p.add_argument("--pairs", default=DEFAULT_PAIRS, help="th1:th2 pairs, comma separated")
    sweep_p.add_argument("--jobs", type=int, default=None)

    validate_p = sub.add_parser("validate", help="check scenario documents")
    validate_p.add_argument("scenarios", nargs="+")
    return parser


def parse_algos(text: str) -> List[CcAlgorithm]:
    algos = [CcAlgorithm.parse(name.strip(), "algos") for name in text.split(",") if name.strip()]
    if not algos:
        raise ConfigError("algos", "at least one algorithm is required")
    return algos


def parse_pairs(text: str) -> List[Tuple[float, float]]:
    pairs = []
    for i, item in enumerate(p for p in text.split(",") if p.strip()):
        try:
            th1, th2 = (float(v) for v in item.split(":"))
        except ValueError:
            raise ConfigError(f"pairs.{i}", f"expected th1:th2, got {item!r}")
        if th1 >= th2:
            raise ConfigError(f"pairs.{i}", f"th1 must be below th2 ({th1} >= {th2})")
        pairs.append((th1, th2))
    return pairs


def _simulate_member(member: Tuple[ScenarioConfig, Optional[float]]) -> SimReport:
    cfg, duration = member
    return simulate(cfg, duration_s=duration)


def run_members(
    members: Sequence[Tuple[ScenarioConfig, Optional[float]]], jobs: int
) -> List[SimReport]:
    """Run isolated simulations; results follow the order of ``members``."""
    if jobs <= 1 or len(members) <= 1:
        return [_simulate_member(m) for m in members]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_simulate_member, members))


def cmd_run(args, store: FileBasedStore) -> int:
    cfg = load_scenario(args.scenario).with_overrides(args.seed, args.duration)
    report = simulate(cfg, keep_trace=args.trace is not None)
    store.store(args.report, export(report, args.format))
    if args.trace:
        store.store(args.trace, trace_csv(report))
    if args.series:
        store.store(args.series, series_frame(report).to_csv(index=False).encode("utf-8"))
    print(
        f"{cfg.name} [{cfg.algo.value}] sent={report.packets_sent} "
        f"dropped={report.drops} ({report.drop_pct:.3f}%) marked={report.marks}"
    )
    return EXIT_OK


def cmd_compare(args, store: FileBasedStore, jobs: int) -> int:
    cfg = load_scenario(args.scenario).with_overrides(args.seed, args.duration)
    algos = parse_algos(args.algos)
    reports = run_members([(cfg.with_algo(algo), None) for algo in algos], jobs)
    table = comparison_table(reports)
    reductions = reduction_table(table)
    print(table.to_string(index=False))
    if not reductions.empty:
        print()
        print(reductions.to_string(index=False))
    if args.report:
        store.store(args.report, table_bytes(table, args.format))
        stem, ext = os.path.splitext(args.report)
        store.store(f"{stem}_reductions{ext}", table_bytes(reductions, args.format))
    return EXIT_OK


def cmd_sweep(args, store: FileBasedStore, jobs: int) -> int:
    cfg = load_scenario(args.scenario).with_overrides(args.seed, args.duration)
    pairs = parse_pairs(args.pairs)
    members = [(cfg.with_thresholds(th1, th2), None) for th1, th2 in pairs]
    reports = run_members(members, jobs)
    table = sweep_table((th1, th2, r) for (th1, th2), r in zip(pairs, reports))
    print(table.to_string(index=False))
    if args.report:
        store.store(args.report, table_bytes(table, args.format))
    return EXIT_OK


def cmd_validate(args) -> int:
    for path in args.scenarios:
        cfg = load_scenario(path)
        print(f"{path}: ok ({cfg.topology.value}, {cfg.algo.value})")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config()
        if args.command == "validate":
            return cmd_validate(args)
        store = FileBasedStore(config.output_dir)
        jobs = getattr(args, "jobs", None) or config.parallel_jobs
        if args.command == "run":
            return cmd_run(args, store)
        if args.command == "compare":
            return cmd_compare(args, store, jobs)
        return cmd_sweep(args, store, jobs)
    except ConfigError as exc:
        LOGGER.error("Configuration error in %s: %s", exc.field, exc.message)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AssertionError as exc:
        LOGGER.error("Internal assertion: %s", exc)
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
