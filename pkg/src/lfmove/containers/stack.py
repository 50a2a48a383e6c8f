"""Move-ready Treiber stack.

``top`` is the only cell that can take part in a DCAS; node ``next`` fields
are written before publication and never change afterwards.  With
``versioned=True`` the top word carries a counter that is bumped on every
change, which removes the ABA-driven false helping a move between two
stacks otherwise suffers, at the price of slightly costlier push/pop.
"""

from __future__ import annotations

from typing import Any

from ..compose import ABORT, TRUE, cas_insert, cas_remove, scas_insert, scas_remove
from ..dcas import logical, read
from ..domain import Domain
from ..reclaim import HP_STACK
from ..tagged_cell import ADDR_BITS, ADDR_MASK, VERSION_MASK
from .backoff import BackoffPolicy

VAL = 0
NEXT = 8


class Stack:
    move_ready = True
    _insert_cas = staticmethod(scas_insert)
    _remove_cas = staticmethod(scas_remove)

    def __init__(self, domain: Domain, backoff: BackoffPolicy | None = None,
                 versioned: bool = False):
        self.domain = domain
        self.backoff = backoff
        self.versioned = versioned
        domain.ctx()
        self.top = domain.heap.allocate(1)

    def _next_top(self, ltop: int, node: int) -> int:
        if not self.versioned:
            return node
        return ((((ltop >> ADDR_BITS) + 1) & VERSION_MASK) << ADDR_BITS) | node

    def push(self, val: Any, key: Any = None) -> bool:
        ctx = self.domain.ctx()
        heap = ctx.heap
        top = self.top
        node = ctx.alloc_node()
        heap.raw_store(node + VAL, val)
        load = heap.load
        bo = None
        while True:
            ltop = load(top)
            if ltop & 1:
                ltop = read(ctx, top)
            heap.raw_store(node + NEXT, ltop & ADDR_MASK)
            res = self._insert_cas(ctx, top, ltop, self._next_top(ltop, node))
            if res is TRUE:
                return True
            if res is ABORT:
                ctx.free_node(node)
                ctx.insert_aborts += 1
                return False
            ctx.retries += 1
            if self.backoff:
                bo = bo or self.backoff.start()
                bo.wait()

    def pop(self, key: Any = None) -> tuple[bool, Any]:
        ctx = self.domain.ctx()
        heap = ctx.heap
        hz = ctx.hazards
        top = self.top
        load = heap.load
        bo = None
        while True:
            ltop = load(top)
            if ltop & 1:
                ltop = read(ctx, top)
            node = ltop & ADDR_MASK
            if not node:
                return False, None
            hz[HP_STACK] = node
            if load(top) != ltop:
                continue
            val = heap.load(node + VAL)
            nxt = heap.load(node + NEXT)
            res = self._remove_cas(ctx, top, ltop, self._next_top(ltop, nxt), val)
            if res is TRUE:
                ctx.retire_node(node)
                return True, val
            if res is ABORT:
                return False, None
            ctx.retries += 1
            if self.backoff:
                bo = bo or self.backoff.start()
                bo.wait()

    # move calls these with a key, which the unkeyed containers ignore
    insert = push
    remove = pop

    # -- test oracles ------------------------------------------------------

    def contents(self) -> list[Any]:
        """Elements top to bottom; heap frozen or stack quiescent."""
        heap = self.domain.heap
        node = logical(heap, self.top, self.domain.layout) & ADDR_MASK
        out = []
        while node:
            out.append(heap.raw_load(node + VAL))
            node = heap.raw_load(node + NEXT)
        return out

    def drain(self) -> list[Any]:
        out = []
        while True:
            ok, v = self.pop()
            if not ok:
                return out
            out.append(v)


class PlainStack(Stack):
    """The same algorithm with plain CAS at the linearization points.

    Not move-ready; exists to check that the scas hooks are invisible to
    ordinary push/pop.
    """

    move_ready = False
    _insert_cas = staticmethod(cas_insert)
    _remove_cas = staticmethod(cas_remove)
