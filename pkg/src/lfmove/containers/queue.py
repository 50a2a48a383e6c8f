"""Move-ready Michael-Scott queue.

Every cell that can take part in a DCAS (``head`` and each node's ``next``)
is loaded through :func:`~lfmove.dcas.read` whenever the value is used; a
bare load that only revalidates a snapshot treats a descriptor as a change.
``tail`` is only ever swung by plain CAS and never hosts a descriptor.  Enqueue protects with
HP1/HP2 and dequeue with HP3/HP4, so one thread can dequeue from one queue
and enqueue into another inside a single move.
"""

from __future__ import annotations

from typing import Any

from ..compose import ABORT, TRUE, cas_insert, cas_remove, scas_insert, scas_remove
from ..dcas import logical, read
from ..domain import Domain
from ..reclaim import HP1, HP2, HP3, HP4
from .backoff import BackoffPolicy

VAL = 0
NEXT = 8


class Queue:
    move_ready = True
    _insert_cas = staticmethod(scas_insert)
    _remove_cas = staticmethod(scas_remove)

    def __init__(self, domain: Domain, backoff: BackoffPolicy | None = None):
        self.domain = domain
        self.backoff = backoff
        ctx = domain.ctx()
        anchor = domain.heap.allocate(2)
        self.head = anchor
        self.tail = anchor + 8
        dummy = ctx.alloc_node()
        heap = domain.heap
        heap.raw_store(dummy + VAL, None)
        heap.raw_store(dummy + NEXT, 0)
        heap.store(self.head, dummy)
        heap.store(self.tail, dummy)

    def enqueue(self, val: Any, key: Any = None) -> bool:
        ctx = self.domain.ctx()
        heap = ctx.heap
        hz = ctx.hazards
        tail = self.tail
        node = ctx.alloc_node()
        heap.raw_store(node + VAL, val)
        heap.raw_store(node + NEXT, 0)
        bo = None
        load = heap.load
        while True:
            # tail only ever changes by plain CAS, so it never hosts a descriptor
            ltail = load(tail)
            hz[HP1] = ltail
            if ltail != load(tail):
                continue
            lnext = load(ltail + NEXT)
            if lnext & 1:
                lnext = read(ctx, ltail + NEXT)
            hz[HP2] = lnext
            if ltail != load(tail):
                continue
            if lnext:
                heap.cas(tail, ltail, lnext)
                continue
            res = self._insert_cas(ctx, ltail + NEXT, 0, node, ltail)
            if res is TRUE:
                heap.cas(tail, ltail, node)
                return True
            if res is ABORT:
                ctx.free_node(node)
                ctx.insert_aborts += 1
                return False
            ctx.retries += 1
            if self.backoff:
                bo = bo or self.backoff.start()
                bo.wait()

    def dequeue(self, key: Any = None) -> tuple[bool, Any]:
        ctx = self.domain.ctx()
        heap = ctx.heap
        hz = ctx.hazards
        head = self.head
        tail = self.tail
        bo = None
        load = heap.load
        while True:
            lhead = load(head)
            if lhead & 1:
                lhead = read(ctx, head)
            hz[HP3] = lhead
            # a descriptor in head also fails this check; the retry helps it
            if lhead != load(head):
                continue
            ltail = load(tail)
            lnext = load(lhead + NEXT)
            if lnext & 1:
                lnext = read(ctx, lhead + NEXT)
            hz[HP4] = lnext
            if lhead != load(head):
                continue
            if not lnext:
                return False, None
            if lhead == ltail:
                heap.cas(tail, ltail, lnext)
                continue
            val = heap.load(lnext + VAL)
            res = self._remove_cas(ctx, head, lhead, lnext, val, lhead)
            if res is TRUE:
                ctx.retire_node(lhead)
                return True, val
            if res is ABORT:
                return False, None
            ctx.retries += 1
            if self.backoff:
                bo = bo or self.backoff.start()
                bo.wait()

    # move calls these with a key, which the unkeyed containers ignore
    insert = enqueue
    remove = dequeue

    # -- test oracles ------------------------------------------------------

    def contents(self) -> list[Any]:
        """Elements front to back; the caller must hold the heap frozen or
        know the queue is quiescent."""
        heap = self.domain.heap
        layout = self.domain.layout
        node = logical(heap, self.head, layout)
        node = logical(heap, node + NEXT, layout)
        out = []
        while node:
            out.append(heap.raw_load(node + VAL))
            node = logical(heap, node + NEXT, layout)
        return out

    def drain(self) -> list[Any]:
        out = []
        while True:
            ok, v = self.dequeue()
            if not ok:
                return out
            out.append(v)


class PlainQueue(Queue):
    """The same algorithm with plain CAS at the linearization points.

    Not move-ready; exists to check that the scas hooks are invisible to
    ordinary enqueue/dequeue.
    """

    move_ready = False
    _insert_cas = staticmethod(cas_insert)
    _remove_cas = staticmethod(cas_remove)
