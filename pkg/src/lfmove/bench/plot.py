"""Plot benchmark CSVs: median time against thread count, one panel per
objects/workload/contention, one line per implementation.

    python -m lfmove.bench.plot results.csv -o results.png
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from .harness import TrialResult
from .report import read_csv, summarize


def load(path: str | Path) -> list[TrialResult]:
    return read_csv(path)


def plot(results: Sequence[TrialResult], out: str | Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    summaries = summarize(results)
    panels = sorted({(s.objects, s.workload, s.contention, s.backoff) for s in summaries})
    cols = min(3, len(panels))
    rows = -(-len(panels) // cols)
    fig, axes = plt.subplots(rows, cols, figsize=(4.2 * cols, 3.2 * rows), squeeze=False)
    for ax, panel in zip(axes.flat, panels):
        for impl in sorted({s.impl for s in summaries}):
            pts = sorted((s.threads, s.median_ns / 1e6, s.q1_ns / 1e6, s.q3_ns / 1e6)
                         for s in summaries
                         if (s.objects, s.workload, s.contention, s.backoff) == panel
                         and s.impl == impl)
            if not pts:
                continue
            x, med, lo, hi = zip(*pts)
            ax.plot(x, med, marker="o", label=impl)
            ax.fill_between(x, lo, hi, alpha=0.2)
        obj, wl, cont, bo = panel
        ax.set_title(f"{obj} {wl} ({cont} contention, backoff {bo})", fontsize=9)
        ax.set_xlabel("threads")
        ax.set_ylabel("time excl. local work (ms)")
        ax.legend(fontsize=8)
    for ax in list(axes.flat)[len(panels):]:
        ax.set_visible(False)
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)


def main(argv: Sequence[str] | None = None) -> int:
    p = argparse.ArgumentParser(prog="python -m lfmove.bench.plot")
    p.add_argument("csv")
    p.add_argument("-o", "--out", default=None)
    args = p.parse_args(argv)
    out = args.out or str(Path(args.csv).with_suffix(".png"))
    plot(load(args.csv), out)
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
