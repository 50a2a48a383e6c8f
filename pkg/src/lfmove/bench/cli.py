"""Command line entry point: ``bench`` (or ``python -m lfmove.bench``)."""

from __future__ import annotations

import argparse
import os
import sys
import time
from typing import Sequence

from ..containers.backoff import BackoffPolicy
from .config import (
    DESK_OPS,
    DESK_TRIALS,
    IMPLS,
    MAX_THREADS,
    FULL_OPS,
    FULL_TRIALS,
    BenchConfig,
    BenchUsageError,
)
from .harness import ConservationError, TrialResult, figure_configs, run
from .report import report, write_rows

_ABBREV = {"qq": "qq", "ss": "ss", "qs": "qs", "queue-queue": "qq",
           "stack-stack": "ss", "queue-stack": "qs"}
_WORKLOADS = {"move": "move", "move-only": "move", "ops": "ops", "ops-only": "ops",
              "mixed": "mixed"}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="bench",
        description="Time lock-free and lock-based move/insert/remove workloads.",
    )
    p.add_argument("--objects", default="qs", choices=sorted(_ABBREV))
    p.add_argument("--workload", default="move", choices=sorted(_WORKLOADS))
    p.add_argument("--threads", type=int, default=None,
                   help="thread count (default: sweep 1..min(8, cores))")
    p.add_argument("--ops", type=int, default=None, help=f"total operations (default {DESK_OPS})")
    p.add_argument("--trials", type=int, default=None, help=f"trials per point (default {DESK_TRIALS})")
    p.add_argument("--contention", default="high", choices=("high", "low"))
    p.add_argument("--backoff", default="off", choices=("on", "off"))
    p.add_argument("--backoff-initial", type=float, default=None, metavar="US",
                   help="first backoff wait in microseconds")
    p.add_argument("--backoff-max", type=float, default=None, metavar="US",
                   help="backoff wait cap in microseconds")
    p.add_argument("--impl", default="both", choices=(*IMPLS, "both"))
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--csv", default=None, metavar="PATH", help="write one row per trial")
    p.add_argument("--checked", action="store_true",
                   help="run on an address-checked heap (slower)")
    p.add_argument("--figures", action="store_true",
                   help="sweep every objects/workload/contention/impl combination")
    p.add_argument("--full-scale", action="store_true",
                   help=f"{FULL_OPS:,} operations, {FULL_TRIALS} trials, 1..16 threads")
    p.add_argument("--tune-backoff", action="store_true",
                   help="grid-search backoff waits for the locked implementation and exit")
    p.add_argument("--quiet", action="store_true")
    return p


def _policy(args) -> BackoffPolicy:
    default = BackoffPolicy()
    initial = args.backoff_initial * 1e-6 if args.backoff_initial is not None else default.initial
    if args.backoff_max is not None:
        maximum = args.backoff_max * 1e-6
    else:
        maximum = max(default.maximum, initial)
    try:
        return BackoffPolicy(initial, maximum)
    except ValueError as exc:
        raise BenchUsageError(str(exc)) from None


def tune_backoff(threads: int, total_ops: int = 4000, trials: int = 3,
                 objects: str = "qs",
                 grid_us: Sequence[tuple[float, float]] | None = None,
                 seed: int = 1) -> tuple[BackoffPolicy, list[tuple[BackoffPolicy, float]]]:
    """Pick the backoff waits that make the locked move fastest on this host."""
    import statistics

    grid_us = grid_us or [(i, m) for i in (1, 4, 16, 64) for m in (64, 256, 1024) if m >= i]
    scores = []
    for initial, maximum in grid_us:
        policy = BackoffPolicy(initial * 1e-6, maximum * 1e-6)
        cfg = BenchConfig(objects=objects, workload="move", threads=threads,
                          total_ops=total_ops, trials=trials, backoff=True,
                          backoff_policy=policy, impl="locked", seed=seed)
        scores.append((policy, statistics.median(r.elapsed_ns for r in run(cfg))))
    best = min(scores, key=lambda s: s[1])[0]
    return best, scores


def main(argv: Sequence[str] | None = None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    cores = os.cpu_count() or 1
    try:
        ops = args.ops or (FULL_OPS if args.full_scale else DESK_OPS)
        trials = args.trials or (FULL_TRIALS if args.full_scale else DESK_TRIALS)
        if args.threads is not None:
            thread_counts = [args.threads]
        elif args.full_scale:
            thread_counts = list(range(1, MAX_THREADS + 1))
        else:
            thread_counts = list(range(1, min(8, cores) + 1))
        if args.tune_backoff:
            best, scores = tune_backoff(max(thread_counts), seed=args.seed)
            for pol, ns in scores:
                print(f"initial={pol.initial * 1e6:g}us max={pol.maximum * 1e6:g}us "
                      f"median={ns / 1e6:.2f}ms")
            print(f"best: --backoff-initial {best.initial * 1e6:g} "
                  f"--backoff-max {best.maximum * 1e6:g}")
            return 0
        impls = IMPLS if args.impl == "both" else (args.impl,)
        common = dict(backoff=args.backoff == "on", backoff_policy=_policy(args),
                      checked=args.checked)
        if args.figures:
            configs = list(figure_configs(thread_counts, ops, trials, impls=impls,
                                          backoff=common["backoff"], seed=args.seed,
                                          backoff_policy=common["backoff_policy"],
                                          checked=args.checked))
        else:
            configs = [BenchConfig(objects=_ABBREV[args.objects],
                                   workload=_WORKLOADS[args.workload], threads=p,
                                   total_ops=ops, trials=trials, contention=args.contention,
                                   impl=impl, seed=args.seed, **common)
                       for impl in impls for p in thread_counts]
    except BenchUsageError as exc:
        parser.error(str(exc))

    if any(c.threads > cores for c in configs) and not args.quiet:
        print(f"note: {max(c.threads for c in configs)} threads on {cores} logical cores",
              file=sys.stderr)
    results: list[TrialResult] = []
    csv_fh = open(args.csv, "w", newline="") if args.csv else None
    try:
        for i, cfg in enumerate(configs):
            t0 = time.perf_counter()
            try:
                batch = run(cfg)
            except ConservationError as exc:
                print(f"CONSERVATION VIOLATION in {cfg}: {exc}", file=sys.stderr)
                return 2
            results.extend(batch)
            if csv_fh:
                # streamed so a long sweep keeps what it has finished
                write_rows(csv_fh, batch, header=(i == 0))
                csv_fh.flush()
            if not args.quiet:
                print(f"[{i + 1}/{len(configs)}] {cfg.impl} {cfg.objects} {cfg.workload} "
                      f"{cfg.contention} p={cfg.threads}: {time.perf_counter() - t0:.1f}s",
                      file=sys.stderr)
    finally:
        if csv_fh:
            csv_fh.close()
    print(report(results))
    return 0


if __name__ == "__main__":
    sys.exit(main())
