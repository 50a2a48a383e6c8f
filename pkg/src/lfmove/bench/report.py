"""Summaries and CSV input/output for benchmark results."""

from __future__ import annotations

import csv
import os
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence, TextIO

from .config import BenchUsageError
from .harness import CSV_FIELDS, TrialResult

_INT_FIELDS = {"threads", "trial", "elapsed_ns", "retries", "helper_writes"}

GROUP_FIELDS = ("impl", "objects", "workload", "contention", "backoff", "threads")


@dataclass(frozen=True)
class Summary:
    impl: str
    objects: str
    workload: str
    contention: str
    backoff: str
    threads: int
    trials: int
    median_ns: float
    min_ns: int
    max_ns: int
    q1_ns: float
    q3_ns: float
    retries: float
    helper_writes: float


def summarize(results: Sequence[TrialResult]) -> list[Summary]:
    """Median and spread of ``elapsed_ns`` per configuration."""
    if not results:
        raise BenchUsageError("no completed trials to report")
    groups: dict[tuple, list[TrialResult]] = {}
    for r in results:
        groups.setdefault(tuple(getattr(r, f) for f in GROUP_FIELDS), []).append(r)
    out = []
    for key, rs in groups.items():
        times = sorted(r.elapsed_ns for r in rs)
        if len(times) > 1:
            q1, _, q3 = statistics.quantiles(times, n=4, method="inclusive")
        else:
            q1 = q3 = float(times[0])
        out.append(Summary(*key, trials=len(rs), median_ns=statistics.median(times),
                           min_ns=times[0], max_ns=times[-1], q1_ns=q1, q3_ns=q3,
                           retries=statistics.mean(r.retries for r in rs),
                           helper_writes=statistics.mean(r.helper_writes for r in rs)))
    return out


def format_summary(summaries: Iterable[Summary]) -> str:
    head = (f"{'impl':9} {'obj':3} {'workload':8} {'cont':4} {'bo':3} {'thr':>3} "
            f"{'n':>3} {'median ms':>10} {'q1':>9} {'q3':>9} {'retries':>9} {'helps':>8}")
    lines = [head, "-" * len(head)]
    for s in summaries:
        lines.append(
            f"{s.impl:9} {s.objects:3} {s.workload:8} {s.contention:4} {s.backoff:3} "
            f"{s.threads:3d} {s.trials:3d} {s.median_ns / 1e6:10.2f} {s.q1_ns / 1e6:9.2f} "
            f"{s.q3_ns / 1e6:9.2f} {s.retries:9.1f} {s.helper_writes:8.1f}"
        )
    return "\n".join(lines)


def report(results: Sequence[TrialResult], csv_path: str | Path | None = None) -> str:
    """Write the CSV (if asked) and return the human-readable summary."""
    summaries = summarize(results)
    if csv_path is not None:
        write_csv(csv_path, results)
    cores = os.cpu_count() or 1
    return f"host logical cores: {cores}\n" + format_summary(summaries)


def write_rows(fh: TextIO, results: Iterable[TrialResult], header: bool = True) -> None:
    w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\n")
    if header:
        w.writeheader()
    for r in results:
        w.writerow(r.row())


def write_csv(path: str | Path, results: Iterable[TrialResult]) -> None:
    with open(path, "w", newline="") as fh:
        write_rows(fh, results)


def read_csv(path: str | Path) -> list[TrialResult]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_FIELDS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        rows = []
        for rec in reader:
            kw = {k: int(v) if k in _INT_FIELDS else v for k, v in rec.items()}
            rows.append(TrialResult(**kw))
        return rows
