"""Trial execution.

Each trial builds a fresh domain and two containers seeded with distinct
elements, hands every worker a pre-drawn plan (operation kinds and local
work), releases them together and times until the last one finishes.
Afterwards the contents are checked against the plan's inserts and removes;
any lost or duplicated element aborts the run.
"""

from __future__ import annotations

import random
import threading
import time
from collections import Counter
from dataclasses import asdict, dataclass, field
from itertools import repeat
from typing import Any, Callable, Iterable, Iterator

from ..compose import move
from ..containers import LockedQueue, LockedStack, Queue, Stack, locked_move
from ..domain import Domain
from .config import BenchConfig
from .work import calibrate, draw_counts

MOVE_AB, MOVE_BA, INSERT_A, INSERT_B, REMOVE_A, REMOVE_B = range(6)

CSV_FIELDS = ("impl", "objects", "workload", "threads", "contention", "backoff",
              "trial", "elapsed_ns", "retries", "helper_writes")


class ConservationError(AssertionError):
    """Elements were lost or duplicated during a trial."""


@dataclass
class TrialResult:
    impl: str
    objects: str
    workload: str
    threads: int
    contention: str
    backoff: str
    trial: int
    elapsed_ns: int
    retries: int
    helper_writes: int
    raw_ns: int = 0
    work_ns: int = 0
    successes: dict[str, int] = field(default_factory=dict)

    def row(self) -> dict[str, Any]:
        d = asdict(self)
        return {k: d[k] for k in CSV_FIELDS}


def draw_plan(rng: random.Random, workload: str, n: int) -> list[int]:
    """Operation kinds for one thread.

    ``ops`` is a 50/50 insert/remove split, ``mixed`` half moves and a
    quarter each of inserts and removes; containers and move direction are
    uniform.
    """
    r = rng.random
    if workload == "move":
        return [MOVE_AB if r() < 0.5 else MOVE_BA for _ in range(n)]
    plan = []
    for _ in range(n):
        x = r()
        side = r() < 0.5
        if workload == "mixed" and x < 0.5:
            plan.append(MOVE_AB if side else MOVE_BA)
        elif (x < 0.5) if workload == "ops" else (x < 0.75):
            plan.append(INSERT_A if side else INSERT_B)
        else:
            plan.append(REMOVE_A if side else REMOVE_B)
    return plan


def _build(config: BenchConfig, domain: Domain):
    policy = config.backoff_policy if config.backoff else None
    if config.impl == "lockfree":
        kinds = {"q": Queue, "s": Stack}
        mover: Callable = move
    else:
        kinds = {"q": LockedQueue, "s": LockedStack}
        mover = locked_move
    a = kinds[config.objects[0]](domain, backoff=policy)
    b = kinds[config.objects[1]](domain, backoff=policy)
    return a, b, mover


def run_trial(config: BenchConfig, trial: int, per_iter_s: float | None = None) -> TrialResult:
    per_iter_s = per_iter_s or calibrate()
    rng = random.Random(f"{config.seed}:{trial}")
    domain = Domain(checked=config.checked)
    a, b, mover = _build(config, domain)
    n0 = config.seed_elements
    initial = list(range(2 * n0))
    for v in initial[:n0]:
        a.insert(v)
    for v in initial[n0:]:
        b.insert(v)

    sizes = config.ops_per_thread()
    plans = [draw_plan(rng, config.workload, n) for n in sizes]
    works = [draw_counts(rng, n, config.mean_work_us, per_iter_s) for n in sizes]
    inserted: list[list[Any]] = [[] for _ in sizes]
    removed: list[list[Any]] = [[] for _ in sizes]
    tallies: list[Counter] = [Counter() for _ in sizes]
    spent = [0] * len(sizes)
    errors: list[BaseException] = []
    start = [0]

    def go() -> None:
        start[0] = time.perf_counter_ns()

    barrier = threading.Barrier(config.threads, action=go)

    def worker(k: int) -> None:
        plan, work = plans[k], works[k]
        ins, rem, tally = inserted[k], removed[k], tallies[k]
        base = (k + 1) * 10 ** 9
        moves_ok = inserts = removes_ok = failed = 0
        clock = time.thread_time_ns
        spun = 0
        try:
            barrier.wait()
            for i, (kind, n) in enumerate(zip(plan, work)):
                t0 = clock()
                for _ in repeat(None, n):
                    pass
                spun += clock() - t0
                if kind == MOVE_AB:
                    if mover(a, b):
                        moves_ok += 1
                    else:
                        failed += 1
                elif kind == MOVE_BA:
                    if mover(b, a):
                        moves_ok += 1
                    else:
                        failed += 1
                elif kind == INSERT_A or kind == INSERT_B:
                    v = base + i
                    if (a if kind == INSERT_A else b).insert(v):
                        ins.append(v)
                        inserts += 1
                    else:
                        failed += 1
                else:
                    ok, v = (a if kind == REMOVE_A else b).remove()
                    if ok:
                        rem.append(v)
                        removes_ok += 1
                    else:
                        failed += 1
        except BaseException as exc:  # surfaced by the main thread
            errors.append(exc)
            barrier.abort()
        tally.update(moves=moves_ok, inserts=inserts, removes=removes_ok, failed=failed)
        spent[k] = spun

    threads = [threading.Thread(target=worker, args=(k,), name=f"bench-{k}")
               for k in range(config.threads)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    end = time.perf_counter_ns()
    if errors:
        raise errors[0]

    final = a.contents() + b.contents()
    have = Counter(final)
    if any(c > 1 for c in have.values()):
        dup = sorted(v for v, c in have.items() if c > 1)[:5]
        raise ConservationError(f"trial {trial}: duplicated elements {dup}")
    expected = Counter(initial)
    for ins in inserted:
        expected.update(ins)
    taken = Counter()
    for rem in removed:
        taken.update(rem)
    if have + taken != expected or any(c > 1 for c in taken.values()):
        lost = sorted((expected - have - taken).elements())[:5]
        extra = sorted((have + taken - expected).elements())[:5]
        raise ConservationError(f"trial {trial}: lost {lost}, unexpected {extra}")

    raw = end - start[0]
    # Spins are timed on each thread's CPU clock, so time spent waiting for
    # the GIL is not counted.  Under the GIL the spins run one at a time, so
    # the work to subtract is the sum over threads, not the longest share.
    work_ns = sum(spent)
    contexts = domain.all_contexts()
    successes = Counter()
    for t in tallies:
        successes.update(t)
    return TrialResult(
        impl=config.impl,
        objects=config.objects,
        workload=config.workload,
        threads=config.threads,
        contention=config.contention,
        backoff="on" if config.backoff else "off",
        trial=trial,
        elapsed_ns=raw - work_ns,
        retries=sum(c.retries for c in contexts),
        helper_writes=sum(c.helper_writes for c in contexts),
        raw_ns=raw,
        work_ns=work_ns,
        successes=dict(successes),
    )


def run(config: BenchConfig) -> list[TrialResult]:
    per_iter = calibrate()
    return [run_trial(config, t, per_iter) for t in range(config.trials)]


def figure_configs(threads: Iterable[int], total_ops: int, trials: int,
                   impls: Iterable[str] = ("lockfree", "locked"),
                   objects: Iterable[str] = ("qs", "qq", "ss"),
                   workloads: Iterable[str] = ("move", "ops", "mixed"),
                   contention: Iterable[str] = ("high", "low"),
                   backoff: bool = False, seed: int = 1, **extra) -> Iterator[BenchConfig]:
    """Every configuration behind the queue/stack, queue and stack figures."""
    threads = list(threads)
    for obj in objects:
        for wl in workloads:
            for cont in contention:
                for impl in impls:
                    for p in threads:
                        yield BenchConfig(objects=obj, workload=wl, threads=p,
                                          total_ops=total_ops, trials=trials,
                                          contention=cont, backoff=backoff,
                                          impl=impl, seed=seed, **extra)
