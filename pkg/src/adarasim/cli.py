"""Command-line entry point: ``run``, ``sweep`` and ``check``."""

from __future__ import annotations

import argparse
import csv
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .metrics import check_trace
from .scenario import (
    CSV_HEADER,
    ConfigError,
    Scenario,
    coerce_value,
    load_scenario,
    metrics_row,
    override,
    run_scenario,
)


def _write_rows(rows: list[dict], dest: str | None) -> None:
    if dest:
        with open(dest, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=CSV_HEADER)
            w.writeheader()
            w.writerows(rows)
    else:
        w = csv.DictWriter(sys.stdout, fieldnames=CSV_HEADER, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def _run_one(sc: Scenario) -> tuple[dict, int]:
    text, m = run_scenario(sc)
    return metrics_row(sc, m), len(check_trace(text))


def cmd_run(args) -> int:
    sc = load_scenario(args.config)
    if args.seed is not None:
        sc = sc.with_(seed=args.seed)
    if args.engine is not None:
        sc = sc.with_(engine=args.engine)
    text, m = run_scenario(sc)
    if args.trace:
        Path(args.trace).write_text(text)
    _write_rows([metrics_row(sc, m)], args.csv)
    problems = check_trace(text)
    for p in problems[:20]:
        print(p, file=sys.stderr)
    return 1 if problems else 0


def cmd_sweep(args) -> int:
    base = load_scenario(args.config)
    key, sep, values = args.param.partition("=")
    if not sep or not values:
        raise ConfigError("--param takes key=v1,v2,...")
    runs = []
    for v in values.split(","):
        sc = override(base, key, coerce_value(base, key, v))
        for s in range(args.seeds):
            runs.append(sc.with_(seed=base.seed + s))
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_run_one, runs))
    else:
        results = [_run_one(sc) for sc in runs]
    _write_rows([row for row, _ in results], args.csv)
    failures = sum(n for _, n in results)
    if failures:
        print(f"{failures} invariant violations across the sweep", file=sys.stderr)
    return 1 if failures else 0


def cmd_check(args) -> int:
    problems = check_trace(Path(args.trace).read_text())
    for p in problems:
        print(p)
    if not problems:
        print("ok")
    return 1 if problems else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="adarasim", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int)
    run.add_argument("--engine", choices=["adara", "aodv"])
    run.add_argument("--csv", help="write the metrics row here instead of stdout")
    run.add_argument("--trace", help="write the full trace here")
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="run a parameter sweep over several seeds")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--param", required=True, help="key=v1,v2,...")
    sweep.add_argument("--seeds", type=int, default=1)
    sweep.add_argument("--csv")
    sweep.add_argument("--jobs", type=int, default=1)
    sweep.set_defaults(func=cmd_sweep)

    check = sub.add_parser("check", help="re-verify invariants on a saved trace")
    check.add_argument("--trace", required=True)
    check.set_defaults(func=cmd_check)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
