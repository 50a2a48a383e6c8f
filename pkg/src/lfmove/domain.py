"""Shared runtime: heap, pools, thread registration and per-thread state."""

from __future__ import annotations

import itertools
import threading
from typing import Any

from . import reclaim
from .reclaim import K, DoubleRetire, HazardRecord, NodePool
from .tagged_cell import ConfigurationError, Heap, TagLayout

NODE_WORDS = 2


class ThreadLimitError(ConfigurationError):
    """More threads registered than the tag layout can name."""


class ThreadContext:
    """Everything one registered thread owns.

    Besides hazard slots, retired blocks and pool free lists this carries
    the move state (``desc``, ``target``, ``skey``, ``tkey``, ``insfailed``)
    and cheap counters read by the benchmark.
    """

    __slots__ = (
        "domain", "heap", "tid", "record", "hazards", "retired", "free_lists",
        "spare_headers", "desc", "desc_announced", "target", "skey", "tkey",
        "insfailed", "status", "retries", "helper_writes", "lin_cas", "insert_aborts", "trace",
        "thread",
    )

    def __init__(self, domain: "Domain", tid: int):
        self.domain = domain
        self.heap = domain.heap
        self.tid = tid
        self.record = HazardRecord(domain.hazard_slots)
        self.hazards = self.record.slots
        self.retired: list[tuple[int, NodePool]] = []
        self.free_lists: list[list[int]] = [[] for _ in domain.pools]
        self.spare_headers: list[int] = []
        self.desc = 0
        self.desc_announced = False
        self.target: Any = None
        self.skey: Any = None
        self.tkey: Any = None
        self.insfailed = False
        self.status: Any = None
        self.retries = 0
        self.helper_writes = 0
        self.lin_cas = 0
        self.insert_aborts = 0  # candidate nodes freed by an aborted insert
        self.trace: list[tuple] | None = [] if domain.instrument else None
        self.thread = threading.current_thread().name

    def alloc_node(self) -> int:
        return self.domain.node_pool.alloc(self)

    def free_node(self, addr: int) -> None:
        self.domain.node_pool.free(self, addr)

    def retire_node(self, addr: int) -> None:
        reclaim.retire(self, addr, self.domain.node_pool)


class Domain:
    """One shared memory plus everything that allocates from it.

    Containers that take part in the same ``move`` must share a domain.
    Threads register lazily on first use; ``max_threads`` ids are available
    and ids are recycled by :meth:`unregister`.

    ``checked`` turns on address checking and double-retire detection,
    ``instrument`` makes every DCAS append events to its thread's ``trace``.
    """

    def __init__(self, *, layout: TagLayout | None = None, hazard_slots: int = K,
                 local_capacity: int = reclaim.LOCAL_CAPACITY, checked: bool = True,
                 instrument: bool = False, preempt: float = 0.0):
        self.layout = layout or TagLayout()
        self.hazard_slots = hazard_slots
        self.checked = checked
        self.instrument = instrument
        self.heap = Heap(checked=checked, preempt=preempt)
        align = self.layout.alignment
        self.desc_words = max(10, align // 8)
        self.pools: list[NodePool] = []
        self.node_pool = self._add_pool(NODE_WORDS, 16, local_capacity, "node")
        self.desc_pool = self._add_pool(self.desc_words, align, local_capacity, "descriptor")
        self.serials = itertools.count(1)
        self.before_dcas = None  # test hook: callable(ctx, desc) run before an initiator's DCAS
        self._local = threading.local()
        self._reg_lock = threading.Lock()
        self._free_ids = list(range(self.layout.max_threads, 0, -1))
        self._contexts: tuple[ThreadContext, ...] = ()
        self.threshold = 2 * hazard_slots
        self._retired_contexts: list[ThreadContext] = []
        self._orphans: list[tuple[int, NodePool]] = []
        self._orphan_lock = threading.Lock()
        self._pending: set[int] = set()
        self._pending_lock = threading.Lock()

    def _add_pool(self, nwords: int, align: int, capacity: int, name: str) -> NodePool:
        pool = NodePool(self.heap, len(self.pools), nwords, align, capacity, name)
        self.pools.append(pool)
        return pool

    # -- registration -------------------------------------------------------

    def ctx(self) -> ThreadContext:
        try:
            return self._local.ctx
        except AttributeError:
            return self.register()

    def register(self) -> ThreadContext:
        existing = getattr(self._local, "ctx", None)
        if existing is not None:
            return existing
        with self._reg_lock:
            if not self._free_ids:
                raise ThreadLimitError(
                    f"at most {self.layout.max_threads} threads may be registered"
                )
            ctx = ThreadContext(self, self._free_ids.pop())
            self._contexts = self._contexts + (ctx,)
            self._update_threshold()
        self._local.ctx = ctx
        return ctx

    def unregister(self) -> None:
        """Release the calling thread's id, handing leftovers to the others."""
        ctx = getattr(self._local, "ctx", None)
        if ctx is None:
            return
        if ctx.desc:
            raise RuntimeError("cannot unregister with a move in flight")
        ctx.record.clear()
        reclaim.scan(ctx)
        if ctx.retired:
            with self._orphan_lock:
                self._orphans.extend(ctx.retired)
            ctx.retired = []
        for pool in self.pools:
            pool.flush(ctx)
        with self._reg_lock:
            self._contexts = tuple(c for c in self._contexts if c is not ctx)
            self._retired_contexts.append(ctx)
            self._free_ids.append(ctx.tid)
            self._update_threshold()
        del self._local.ctx

    @property
    def contexts(self) -> tuple[ThreadContext, ...]:
        return self._contexts

    def all_contexts(self) -> list[ThreadContext]:
        """Live and unregistered contexts (for counters and traces)."""
        return list(self._contexts) + list(self._retired_contexts)

    def _update_threshold(self) -> None:
        # reclamation scan runs once a thread has 2*K*p blocks pending
        self.threshold = 2 * self.hazard_slots * max(1, len(self._contexts))

    # -- reclamation support ------------------------------------------------

    def protected_addresses(self) -> set[int]:
        mask = self.layout.tag_mask
        out = set()
        for ctx in self._contexts:
            for v in ctx.hazards:
                if v:
                    out.add(reclaim.normalize(v, mask))
        return out

    def take_orphans(self) -> list[tuple[int, NodePool]]:
        if not self._orphans:
            return []
        with self._orphan_lock:
            out, self._orphans = self._orphans, []
        return out

    def note_retired(self, addr: int) -> None:
        pending = self._pending
        self._pending_lock.acquire()
        if addr in pending:
            self._pending_lock.release()
            raise DoubleRetire(f"block {addr:#x} retired twice")
        pending.add(addr)
        self._pending_lock.release()

    def note_reclaimed(self, addr: int) -> None:
        # set.discard is atomic under the GIL
        self._pending.discard(addr)

    def retired_pending(self) -> int:
        n = sum(len(c.retired) for c in self._contexts)
        return n + len(self._orphans)

    def accounting(self, pool: NodePool | None = None) -> dict[str, int]:
        """Block counts for one pool; call only when no thread is mid-operation."""
        pool = pool or self.node_pool
        pending = sum(
            1 for c in self._contexts for _, p in c.retired if p is pool
        ) + sum(1 for _, p in self._orphans if p is pool)
        pooled = pool.pooled(self._contexts)
        allocated = pool.system_allocations
        return {
            "allocated": allocated,
            "pooled": pooled,
            "retired_pending": pending,
            "in_use": allocated - pooled - pending,
        }

    def drain_retired(self) -> None:
        """Scan every thread's retired list from the calling thread.

        Only for quiescent points in tests: hazard slots of idle threads are
        cleared first, so everything retired becomes reclaimable.
        """
        me = self.ctx()
        for c in self._contexts:
            c.record.clear()
            if c is not me:
                me.retired.extend(c.retired)
                c.retired = []
        reclaim.scan(me)
