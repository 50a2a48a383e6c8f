"""Lock-free two-word compare-and-swap with helping.

A descriptor is a block in the domain's descriptor pool::

    ptr1 ptr2 old1 old2 new1 new2 hp1 hp2 res serial

The initiator swings ``*ptr1`` from ``old1`` to the descriptor (tag thread id
0).  Every participant then tries to swing ``*ptr2`` from ``old2`` to the
descriptor marked with its own thread id; the first marked value stored into
``res`` decides success.  ``res`` only ever moves
``UNDECIDED -> SECONDFAILED`` or ``UNDECIDED -> <mark> -> SUCCESS``.

Any thread that meets a descriptor in a cell goes through :func:`read`,
which protects the descriptor and helps it finish before returning a plain
value.
"""

from __future__ import annotations

from enum import IntEnum
from typing import TYPE_CHECKING

from .reclaim import HP_D, HP_HELP1, HP_HELP2, retire
from .tagged_cell import ADDR_MASK

if TYPE_CHECKING:
    from .domain import ThreadContext

PTR1, PTR2, OLD1, OLD2, NEW1, NEW2, HP1, HP2, RES, SERIAL = (8 * i for i in range(10))

UNDECIDED = 0


class DcasResult(IntEnum):
    SECONDFAILED = 1
    SUCCESS = 2
    FIRSTFAILED = 3


SECONDFAILED = DcasResult.SECONDFAILED
SUCCESS = DcasResult.SUCCESS
FIRSTFAILED = DcasResult.FIRSTFAILED
_RESULTS = (None, SECONDFAILED, SUCCESS, FIRSTFAILED)  # by res word value


class DcasUsageError(ValueError):
    pass


# -- descriptor management ---------------------------------------------------

def new_descriptor(ctx: "ThreadContext") -> int:
    """Allocate a private descriptor with ``res = UNDECIDED``."""
    domain = ctx.domain
    d = domain.desc_pool.alloc(ctx)
    ctx.heap.raw_store_block(d, [0, 0, 0, 0, 0, 0, 0, 0, UNDECIDED, next(domain.serials)])
    return d


def set_first(ctx: "ThreadContext", d: int, ptr: int, old: int, new: int, hp: int = 0) -> None:
    # ptr1, old1, new1, hp1 sit at even word offsets
    ctx.heap.raw_store_block(d, [ptr, old, new, hp], 2)


def set_second(ctx: "ThreadContext", d: int, ptr: int, old: int, new: int, hp: int = 0) -> None:
    heap = ctx.heap
    if ptr == heap.raw_load(d + PTR1):
        raise DcasUsageError("DCAS needs two distinct words")
    if heap.checked and (old & 1 or new & 1 or heap.raw_load(d + OLD1) & 1
                         or heap.raw_load(d + NEW1) & 1):
        raise DcasUsageError("DCAS expected/new values must not be descriptors")
    heap.raw_store_block(d + PTR2, [ptr, old, new, hp], 2)


def copy_descriptor(ctx: "ThreadContext", d: int) -> int:
    """Fresh descriptor carrying over the first leg of ``d``."""
    fresh = new_descriptor(ctx)
    i = d >> 3
    set_first(ctx, fresh, *ctx.heap._mem[i:i + 8:2])
    return fresh


def make_descriptor(ctx: "ThreadContext", ptr1: int, old1: int, new1: int,
                    ptr2: int, old2: int, new2: int, hp1: int = 0, hp2: int = 0) -> int:
    d = new_descriptor(ctx)
    set_first(ctx, d, ptr1, old1, new1, hp1)
    try:
        set_second(ctx, d, ptr2, old2, new2, hp2)
    except DcasUsageError:
        ctx.domain.desc_pool.free(ctx, d)
        raise
    return d


def release_descriptor(ctx: "ThreadContext", d: int, announced: bool) -> None:
    """Give ``d`` back once no cell can still reach it.

    An unannounced descriptor was never visible and is freed at once.  An
    announced one is first scrubbed from both cells (``read`` helps any
    lingering copy away) and then retired through the hazard scheme.
    """
    if not announced:
        ctx.domain.desc_pool.free(ctx, d)
        return
    heap = ctx.heap
    ptr1, ptr2 = heap.load_block(d, 2)
    if heap.load(ptr1) & 1:
        read(ctx, ptr1)
    if heap.load(ptr2) & 1:
        read(ctx, ptr2)
    retire(ctx, d, ctx.domain.desc_pool)


# -- the algorithm -----------------------------------------------------------

def dcas(ctx: "ThreadContext", desc: int, initiator: bool) -> DcasResult:
    """Run (or help) the DCAS announced by ``desc``.

    ``desc`` is the bare descriptor address for the initiator, or the tagged
    word a helper found in one of the cells.
    """
    heap = ctx.heap
    load = heap.load
    cas = heap.cas
    tag_mask = ctx.domain.layout.tag_mask
    d = desc & ~tag_mask & ADDR_MASK
    plain = d | 1
    trace = ctx.trace
    if initiator:
        desc = plain
    else:
        hz = ctx.hazards
        hz[HP_HELP1], hz[HP_HELP2] = heap.load_block(d + HP1, 2)
    ptr1, ptr2, old1, old2, new1, new2, _, _, _, serial = heap.load_block(d, 10)
    res_addr = d + RES

    res = load(res_addr)
    if res == SUCCESS or res == SECONDFAILED:
        # Already decided: undo the one copy of the descriptor we came in on.
        if desc & tag_mask & ~1:
            ok = cas(ptr2, desc, old2)
        else:
            ok = cas(ptr1, desc, old1)
        if ok and not initiator:
            ctx.helper_writes += 1
        return _finish(trace, serial, ctx, res, initiator)

    if initiator and not cas(ptr1, old1, plain):
        if trace is not None:
            trace.append(("ret", serial, ctx.tid, FIRSTFAILED, True))
        return FIRSTFAILED

    mdesc = plain | (ctx.tid << 1)
    p2set = cas(ptr2, old2, mdesc)
    candidate = mdesc
    if p2set:
        if trace is not None:
            trace.append(("p2", serial, ctx.tid, mdesc))
        if not initiator:
            ctx.helper_writes += 1
    else:
        cur = load(ptr2)
        if cur & 1 and cur & ~tag_mask & ADDR_MASK == d:
            # Another participant already marked the second word; back its mark.
            candidate = cur
        else:
            cas(res_addr, UNDECIDED, SECONDFAILED)
            res = load(res_addr)
            if res == SUCCESS:
                return _finish(trace, serial, ctx, SUCCESS, initiator)
            if res == SECONDFAILED:
                if cas(ptr1, plain, old1) and not initiator:
                    ctx.helper_writes += 1
                return _finish(trace, serial, ctx, SECONDFAILED, initiator)

    if cas(res_addr, UNDECIDED, candidate) and trace is not None:
        trace.append(("win", serial, ctx.tid, candidate))
    res = load(res_addr)
    if res == SECONDFAILED:
        if p2set:
            cas(ptr2, mdesc, old2)
        return _finish(trace, serial, ctx, SECONDFAILED, initiator)
    if p2set and res != mdesc:
        # Our mark landed after the outcome was fixed (ABA on *ptr2).
        cas(ptr2, mdesc, old2)
    if res != SUCCESS:
        if cas(ptr1, plain, new1):
            if trace is not None:
                trace.append(("w1", serial, ctx.tid))
            if not initiator:
                ctx.helper_writes += 1
        if cas(ptr2, res, new2) and not initiator:
            ctx.helper_writes += 1
        heap.store(res_addr, int(SUCCESS))
    return _finish(trace, serial, ctx, SUCCESS, initiator)


def _finish(trace, serial, ctx, result, initiator):
    if trace is not None:
        trace.append(("ret", serial, ctx.tid, _RESULTS[result], initiator))
    return _RESULTS[result]


def read(ctx: "ThreadContext", cell: int) -> int:
    """Load a cell that may host a descriptor, helping until it holds none."""
    load = ctx.heap.load
    v = load(cell)
    if not v & 1:
        return v
    hz = ctx.hazards
    while v & 1:
        hz[HP_D] = v
        if load(cell) == v:
            dcas(ctx, v, False)
        v = load(cell)
    return v


def logical(heap, cell: int, layout) -> int:
    """Value of ``cell`` as of the latest linearized DCAS.

    Meant for a frozen heap: a cell holding a descriptor shows its new value
    once ``res`` names a winning mark (or SUCCESS), its old value otherwise.
    A mark on the second word counts only while it is the winning mark.
    """
    v = heap.raw_load(cell)
    if not v & 1:
        return v
    d = layout.unmark(v)
    res = heap.raw_load(d + RES)
    if layout.thread_of(v) == 0:
        return heap.raw_load(d + (NEW1 if res >= SUCCESS else OLD1))
    return heap.raw_load(d + (NEW2 if res == v else OLD2))


# -- trace checking ----------------------------------------------------------

def check_trace(events, threads: int) -> list[str]:
    """Violations of result agreement, single write of new1 and the
    false-helping bound in merged ``ctx.trace`` events; empty if none."""
    results: dict[int, set] = {}
    w1: dict[int, int] = {}
    p2: dict[int, list[int]] = {}
    win: dict[int, list[int]] = {}
    for ev in events:
        kind, serial = ev[0], ev[1]
        if kind == "ret":
            if ev[3] != FIRSTFAILED:
                results.setdefault(serial, set()).add(ev[3])
            elif not ev[4]:
                results.setdefault(serial, set()).add("helper-firstfailed")
        elif kind == "w1":
            w1[serial] = w1.get(serial, 0) + 1
        elif kind == "p2":
            p2.setdefault(serial, []).append(ev[3])
        elif kind == "win":
            win.setdefault(serial, []).append(ev[3])
    problems = []
    for serial, rs in results.items():
        if len(rs) != 1:
            problems.append(f"descriptor {serial}: disagreeing results {sorted(map(str, rs))}")
        succeeded = rs == {SUCCESS}
        writes = w1.get(serial, 0)
        if writes != (1 if succeeded else 0):
            problems.append(f"descriptor {serial}: new1 written {writes} times")
    for serial, winners in win.items():
        if len(winners) != 1:
            problems.append(f"descriptor {serial}: res claimed {len(winners)} times")
    for serial, marks in p2.items():
        winner = win.get(serial, [None])[0]
        false_writes = sum(1 for m in marks if m != winner)
        if false_writes > threads - 1:
            problems.append(
                f"descriptor {serial}: {false_writes} false helper writes > p-1={threads - 1}"
            )
    return problems
