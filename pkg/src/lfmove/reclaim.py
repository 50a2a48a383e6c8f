"""Hazard-slot protection and the pooled node allocator.

Each registered thread owns a :class:`HazardRecord` of ``K`` slots and a
private list of retired blocks.  A retired block goes back to its
:class:`NodePool` only after a scan finds no slot of any thread naming it.

Pools keep per-thread free lists of at most ``capacity`` blocks.  A full
list is pushed whole onto a global lock-free stack; a thread whose list runs
dry pops a list from there before falling back to fresh heap allocation.
Blocks sitting in a pool are poisoned, so a checked heap faults on any
access to them.
"""

from __future__ import annotations

import threading
from typing import TYPE_CHECKING, Any, Callable

from .tagged_cell import ADDR_BITS, ADDR_MASK, VERSION_MASK, Heap

if TYPE_CHECKING:
    from .domain import ThreadContext

# Slot assignment.  Queue enqueue uses HP1/HP2, dequeue HP3/HP4 (disjoint so
# a move between two queues never overwrites its own protection), stack pop
# uses HP_STACK, ``read`` publishes HP_D, and a helping DCAS copies the
# initiator's payloads into HP_HELP1/HP_HELP2.
HP1, HP2, HP3, HP4, HP_STACK, HP_D, HP_HELP1, HP_HELP2 = range(8)
K = 8

LOCAL_CAPACITY = 200


class DoubleRetire(AssertionError):
    pass


class HazardRecord:
    __slots__ = ("slots",)

    def __init__(self, k: int = K):
        if k < 5:
            raise ValueError("a thread needs at least 5 hazard slots")
        self.slots: list[int] = [0] * k

    def clear(self) -> None:
        for i in range(len(self.slots)):
            self.slots[i] = 0


def protect(ctx: "ThreadContext", slot: int, cell: int,
            reader: Callable[[int], Any] | None = None) -> Any:
    """Publish ``*cell`` in ``slot`` and return it once it is stable.

    Load, publish, reload; repeat until the reload matches, so the returned
    value was in the cell at some instant after the slot named it.
    """
    load = reader or ctx.heap.load
    slots = ctx.hazards
    v = load(cell)
    while True:
        slots[slot] = v
        again = load(cell)
        if again == v:
            return v
        v = again


class _ChunkStack:
    """Lock-free stack of free lists, anchored by a versioned top word.

    Chunk headers are two heap words ``[payload, next]``.  Headers are never
    returned to the heap, only recycled by the thread that popped them, and
    the version in the top word makes a recycled header harmless to a
    stale ``pop``.
    """

    def __init__(self, heap: Heap):
        self._heap = heap
        self.top = heap.allocate(1)

    def push(self, header: int) -> None:
        heap = self._heap
        while True:
            top = heap.load(self.top)
            heap.store(header + 8, top & ADDR_MASK)
            new = ((((top >> ADDR_BITS) + 1) & VERSION_MASK) << ADDR_BITS) | header
            if heap.cas(self.top, top, new):
                return

    def pop(self) -> int:
        heap = self._heap
        while True:
            top = heap.load(self.top)
            header = top & ADDR_MASK
            if not header:
                return 0
            nxt = heap.load(header + 8)
            new = ((((top >> ADDR_BITS) + 1) & VERSION_MASK) << ADDR_BITS) | nxt
            if heap.cas(self.top, top, new):
                return header

    def walk(self) -> list[list[int]]:
        """Payloads currently on the stack (only meaningful when quiescent)."""
        out = []
        h = self._heap.raw_load(self.top) & ADDR_MASK
        while h:
            out.append(self._heap.raw_load(h))
            h = self._heap.raw_load(h + 8)
        return out


class NodePool:
    """Fixed-size block allocator for one size class.

    ``index`` selects the per-thread free list inside each
    :class:`~lfmove.domain.ThreadContext`.
    """

    def __init__(self, heap: Heap, index: int, nwords: int, align: int = 16,
                 capacity: int = LOCAL_CAPACITY, name: str = "node"):
        self.heap = heap
        self.index = index
        self.nwords = nwords
        self.align = align
        self.capacity = capacity
        self.name = name
        self.global_stack = _ChunkStack(heap)
        self.system_allocations = 0
        self._count_lock = threading.Lock()
        # poison/unpoison patterns, inlined in alloc and free
        self._alive = b"\x01" * nwords
        self._dead = bytes(nwords)

    def alloc(self, ctx: "ThreadContext") -> int:
        local = ctx.free_lists[self.index]
        if not local:
            header = self.global_stack.pop()
            if header:
                local.extend(self.heap.raw_load(header))
                self.heap.raw_store(header, None)
                ctx.spare_headers.append(header)
        if local:
            addr = local.pop()
            i = addr >> 3
            self.heap._live[i:i + self.nwords] = self._alive
            return addr
        with self._count_lock:
            self.system_allocations += 1
        return self.heap.allocate(self.nwords, self.align)

    def free(self, ctx: "ThreadContext", addr: int) -> None:
        """Return a block that no other thread can reach."""
        local = ctx.free_lists[self.index]
        if len(local) >= self.capacity:
            self.flush(ctx)
            local = ctx.free_lists[self.index]
        i = addr >> 3
        self.heap._live[i:i + self.nwords] = self._dead
        local.append(addr)

    def flush(self, ctx: "ThreadContext") -> None:
        local = ctx.free_lists[self.index]
        if not local:
            return
        header = ctx.spare_headers.pop() if ctx.spare_headers else self.heap.allocate(2)
        self.heap.raw_store(header, local)
        ctx.free_lists[self.index] = []
        self.global_stack.push(header)

    def pooled(self, contexts) -> int:
        n = sum(len(c) for c in self.global_stack.walk())
        return n + sum(len(ctx.free_lists[self.index]) for ctx in contexts)


def normalize(value: int, tag_mask: int) -> int:
    """Address a hazard slot value refers to, ignoring tags and versions."""
    if value & 1:
        return value & ~tag_mask & ADDR_MASK
    return value & ADDR_MASK


def retire(ctx: "ThreadContext", addr: int, pool: NodePool) -> None:
    domain = ctx.domain
    if domain.checked:
        domain.note_retired(addr)
    ctx.retired.append((addr, pool))
    if len(ctx.retired) >= domain.threshold:
        scan(ctx)


def scan(ctx: "ThreadContext") -> int:
    """Reclaim every retired block no hazard slot names; return how many."""
    domain = ctx.domain
    pending = ctx.retired
    orphans = domain.take_orphans()
    if orphans:
        pending.extend(orphans)
    if not pending:
        return 0
    protected = domain.protected_addresses()
    keep = []
    freed = 0
    for addr, pool in pending:
        if addr in protected:
            keep.append((addr, pool))
        else:
            if domain.checked:
                domain.note_reclaimed(addr)
            pool.free(ctx, addr)
            freed += 1
    ctx.retired = keep
    return freed
