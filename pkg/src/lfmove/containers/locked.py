"""Blocking baseline: TTAS-locked queue and stack plus a two-lock move."""

from __future__ import annotations

import time
from typing import Any

from ..domain import Domain
from .backoff import Backoff, BackoffPolicy

VAL = 0
NEXT = 8


class TtasLock:
    """Test-test-and-set spin lock on a heap word.

    The test loop yields the GIL between probes; a CPython thread spinning
    without yielding would keep the holder off the interpreter for a whole
    switch interval.
    """

    def __init__(self, domain: Domain, backoff: BackoffPolicy | None = None,
                 record: bool = False):
        self.heap = domain.heap
        self.flag = domain.heap.allocate(1)
        self.backoff = backoff
        self.record = record
        self.waits: list[float] = []

    def acquire(self) -> int:
        """Take the lock; return how many attempts failed first."""
        load = self.heap.load
        flag = self.flag
        fails = 0
        bo = None
        while True:
            if not load(flag) and self.heap.cas(flag, 0, 1):
                if bo is not None and self.record:
                    self.waits = bo.history
                return fails
            fails += 1
            if self.backoff is not None:
                bo = bo or Backoff(self.backoff, self.record)
                bo.wait()
            else:
                while load(flag):
                    time.sleep(0)

    def release(self) -> None:
        self.heap.store(self.flag, 0)

    def locked(self) -> bool:
        return bool(self.heap.load(self.flag))

    def __enter__(self) -> "TtasLock":
        self.acquire()
        return self

    def __exit__(self, *exc) -> None:
        self.release()


class _Locked:
    def __init__(self, domain: Domain, backoff: BackoffPolicy | None = None):
        self.domain = domain
        self.lock = TtasLock(domain, backoff)

    def insert(self, value: Any, key: Any = None) -> bool:
        ctx = self.domain.ctx()
        ctx.retries += self.lock.acquire()
        try:
            return self._insert(ctx, value)
        finally:
            self.lock.release()

    def remove(self, key: Any = None) -> tuple[bool, Any]:
        ctx = self.domain.ctx()
        ctx.retries += self.lock.acquire()
        try:
            return self._remove(ctx)
        finally:
            self.lock.release()

    def drain(self) -> list[Any]:
        out = []
        while True:
            ok, v = self.remove()
            if not ok:
                return out
            out.append(v)


class LockedQueue(_Locked):
    def __init__(self, domain: Domain, backoff: BackoffPolicy | None = None):
        super().__init__(domain, backoff)
        self._head = 0
        self._tail = 0

    def _insert(self, ctx, value):
        heap = ctx.heap
        node = ctx.alloc_node()
        heap.store(node + VAL, value)
        heap.store(node + NEXT, 0)
        if self._tail:
            heap.store(self._tail + NEXT, node)
        else:
            self._head = node
        self._tail = node
        return True

    def _remove(self, ctx):
        node = self._head
        if not node:
            return False, None
        heap = ctx.heap
        val = heap.load(node + VAL)
        self._head = heap.load(node + NEXT)
        if not self._head:
            self._tail = 0
        ctx.free_node(node)
        return True, val

    enqueue = _Locked.insert
    dequeue = _Locked.remove

    def contents(self) -> list[Any]:
        out, node, heap = [], self._head, self.domain.heap
        while node:
            out.append(heap.raw_load(node + VAL))
            node = heap.raw_load(node + NEXT)
        return out


class LockedStack(_Locked):
    def __init__(self, domain: Domain, backoff: BackoffPolicy | None = None):
        super().__init__(domain, backoff)
        self._top = 0

    def _insert(self, ctx, value):
        heap = ctx.heap
        node = ctx.alloc_node()
        heap.store(node + VAL, value)
        heap.store(node + NEXT, self._top)
        self._top = node
        return True

    def _remove(self, ctx):
        node = self._top
        if not node:
            return False, None
        heap = ctx.heap
        val = heap.load(node + VAL)
        self._top = heap.load(node + NEXT)
        ctx.free_node(node)
        return True, val

    push = _Locked.insert
    pop = _Locked.remove

    def contents(self) -> list[Any]:
        out, node, heap = [], self._top, self.domain.heap
        while node:
            out.append(heap.raw_load(node + VAL))
            node = heap.raw_load(node + NEXT)
        return out


def locked_move(source: _Locked, target: _Locked) -> bool:
    """Move one element holding both locks, taken in address order."""
    if source is target:
        raise ValueError("source and target must be different instances")
    first, second = sorted((source, target), key=lambda c: c.lock.flag)
    ctx = source.domain.ctx()
    ctx.retries += first.lock.acquire()
    try:
        ctx.retries += second.lock.acquire()
        try:
            ok, val = source._remove(ctx)
            if ok:
                target._insert(ctx, val)
            return ok
        finally:
            second.lock.release()
    finally:
        first.lock.release()
