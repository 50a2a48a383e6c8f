"""Word-level shared memory: tagged cell values and the single-word CAS.

Every shared cell in the package lives in a :class:`Heap`, a simulated
word-addressed memory.  A cell holds one machine word, interpreted as

* ``0`` (null),
* a plain node reference (aligned, low tag bits zero), possibly carrying a
  version counter in the bits above :data:`ADDR_BITS`, or
* a descriptor reference with bit 0 set and a helper thread id in the next
  ``thread_id_bits`` bits.

Descriptors are aligned to ``2 ** (1 + thread_id_bits)`` bytes so that the tag
always fits in bits that are zero in the untagged address.

The heap is also the only source of atomicity.  ``cas`` and ``store`` run
under a per-word striped lock; ``load`` is a single list read, which CPython
performs atomically.  With ``checked=True`` every access verifies the word
belongs to a live allocation, so touching a reclaimed node raises
:class:`InvalidAccess` instead of silently reading recycled memory.
"""

from __future__ import annotations

import random
import threading
import time
from contextlib import contextmanager
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Iterator

WORD = 8
ADDR_BITS = 48
ADDR_MASK = (1 << ADDR_BITS) - 1
VERSION_MASK = (1 << (64 - ADDR_BITS)) - 1

NULL = 0


class ConfigurationError(ValueError):
    """Invalid layout or registration parameters."""


class InvalidAccess(RuntimeError):
    """A checked access touched memory that is not currently allocated, or
    used a tagged (unaligned) word as an address."""

    def __init__(self, addr: int, what: str = "access"):
        kind = "tagged address" if addr & 7 else "unallocated/poisoned word"
        super().__init__(f"{what} of {kind} at {addr:#x}")
        self.addr = addr


@dataclass(frozen=True)
class TagLayout:
    """Bit layout of descriptor tags.

    Bit 0 flags a descriptor.  The following ``thread_id_bits`` bits carry
    the id of the helper that installed it; id 0 is the untagged form the
    initiator writes into the first cell.
    """

    thread_id_bits: int = 6

    def __post_init__(self) -> None:
        if self.max_threads < 16:
            raise ConfigurationError(
                f"thread_id_bits={self.thread_id_bits} allows only "
                f"{self.max_threads} threads; at least 16 are required"
            )

    descriptor_bit = 0

    @property
    def max_threads(self) -> int:
        return (1 << self.thread_id_bits) - 1

    @cached_property
    def alignment(self) -> int:
        return 1 << (1 + self.thread_id_bits)

    @cached_property
    def tag_mask(self) -> int:
        return self.alignment - 1

    def mark(self, desc: int, thread_id: int) -> int:
        # thread ids are range-checked at registration, not here
        return (desc & ~self.tag_mask) | 1 | (thread_id << 1)

    def unmark(self, value: int) -> int:
        return value & ~self.tag_mask

    def thread_of(self, value: int) -> int:
        return (value >> 1) & self.max_threads

    @staticmethod
    def is_descriptor(value: int) -> bool:
        return bool(value & 1)


DEFAULT_LAYOUT = TagLayout()


def mark(desc: int, thread_id: int, layout: TagLayout = DEFAULT_LAYOUT) -> int:
    return layout.mark(desc, thread_id)


def unmark(value: int, layout: TagLayout = DEFAULT_LAYOUT) -> int:
    return layout.unmark(value)


def thread_of(value: int, layout: TagLayout = DEFAULT_LAYOUT) -> int:
    return layout.thread_of(value)


def is_descriptor(value: int) -> bool:
    return bool(value & 1)


def versioned(addr: int, version: int) -> int:
    """Pack a node address with a wrap-around version counter."""
    return ((version & VERSION_MASK) << ADDR_BITS) | addr


def addr_of(word: int) -> int:
    return word & ADDR_MASK


def version_of(word: int) -> int:
    return word >> ADDR_BITS


_GROW_WORDS = 1 << 16
_RESERVED_WORDS = 64


class Heap:
    """Simulated shared memory of machine words.

    Addresses are byte addresses; word ``i`` lives at address ``8 * i``.
    Allocation is a bump pointer (the "system allocator"); reuse is the job
    of the pools in :mod:`lfmove.reclaim`, which poison and unpoison blocks
    as they move between the pool and live use.

    ``preempt`` is a probability of yielding the GIL after a shared access,
    used by stress tests to widen the interleavings CPython produces.
    ``load``, ``store`` and ``cas`` are closures specialised for the
    checked/preempt combination, since they dominate every operation.
    """

    def __init__(self, *, checked: bool = True, preempt: float = 0.0, stripes: int = 64):
        if stripes & (stripes - 1):
            raise ConfigurationError("stripes must be a power of two")
        self.checked = checked
        self._mem: list[Any] = [0] * _GROW_WORDS
        self._live = bytearray(_GROW_WORDS)
        self._next = _RESERVED_WORDS
        self._locks = [threading.Lock() for _ in range(stripes)]
        self._stripe_mask = stripes - 1
        self._alloc_lock = threading.Lock()
        self.words_allocated = 0
        self.set_preempt(preempt)

    def set_preempt(self, preempt: float) -> None:
        self.preempt = preempt
        self.load, self.store, self.cas = _accessors(
            self._mem, self._live, self._locks, self._stripe_mask, self.checked, preempt
        )

    # -- allocation ---------------------------------------------------------

    def allocate(self, nwords: int, align: int = WORD) -> int:
        """Carve a fresh block; returned unpoisoned and zero-filled."""
        align_words = max(1, align // WORD)
        with self._alloc_lock:
            start = -(-self._next // align_words) * align_words
            end = start + nwords
            if end > len(self._mem):
                grow = max(_GROW_WORDS, end - len(self._mem))
                self._mem.extend([0] * grow)
                self._live.extend(bytes(grow))
            self._next = end
            self.words_allocated += nwords
            self._live[start:end] = b"\x01" * nwords
        return start * WORD

    def poison(self, addr: int, nwords: int) -> None:
        i = addr >> 3
        self._live[i:i + nwords] = bytes(nwords)

    def unpoison(self, addr: int, nwords: int) -> None:
        i = addr >> 3
        self._live[i:i + nwords] = b"\x01" * nwords

    def is_live(self, addr: int) -> bool:
        return bool(self._live[addr >> 3])

    def load_block(self, addr: int, nwords: int) -> list[Any]:
        """Read words that no other thread writes any more (descriptor fields)."""
        i = addr >> 3
        if self.checked and (addr & 7 or not self._live[i]):
            raise InvalidAccess(addr, "load")
        return self._mem[i:i + nwords]

    # -- private (unpublished or pool-owned) memory -------------------------

    def raw_load(self, addr: int) -> Any:
        return self._mem[addr >> 3]

    def raw_store(self, addr: int, value: Any) -> None:
        self._mem[addr >> 3] = value

    def raw_store_block(self, addr: int, values: list[Any], step: int = 1) -> None:
        i = addr >> 3
        self._mem[i:i + step * len(values):step] = values

    @contextmanager
    def freeze(self) -> Iterator[None]:
        """Block every CAS and store so readers see one consistent instant."""
        for lock in self._locks:
            lock.acquire()
        try:
            yield
        finally:
            for lock in reversed(self._locks):
                lock.release()


def _accessors(mem, live, locks, mask, checked, preempt):
    rand = random.random
    yield_gil = time.sleep
    # bound acquire/release: measurably cheaper than ``with`` on this hot path
    acquire = [lock.acquire for lock in locks]
    release = [lock.release for lock in locks]

    # In checked mode an address with low bits set is rejected too: that is a
    # descriptor-tagged word being dereferenced as if it were a node.
    def store(addr, value):
        i = addr >> 3
        if checked and (addr & 7 or not live[i]):
            raise InvalidAccess(addr, "store")
        s = i & mask
        acquire[s]()
        mem[i] = value
        release[s]()

    if checked:
        def load(addr):
            i = addr >> 3
            if addr & 7 or not live[i]:
                raise InvalidAccess(addr, "load")
            v = mem[i]
            if preempt and rand() < preempt:
                yield_gil(0)
            return v

        def cas(addr, expected, new):
            i = addr >> 3
            if addr & 7 or not live[i]:
                raise InvalidAccess(addr, "cas")
            s = i & mask
            acquire[s]()
            ok = mem[i] == expected
            if ok:
                mem[i] = new
            release[s]()
            if preempt and rand() < preempt:
                yield_gil(0)
            return ok
    elif preempt:
        def load(addr):
            v = mem[addr >> 3]
            if rand() < preempt:
                yield_gil(0)
            return v

        def cas(addr, expected, new):
            i = addr >> 3
            s = i & mask
            acquire[s]()
            ok = mem[i] == expected
            if ok:
                mem[i] = new
            release[s]()
            if rand() < preempt:
                yield_gil(0)
            return ok
    else:
        def load(addr):
            return mem[addr >> 3]

        def cas(addr, expected, new):
            i = addr >> 3
            s = i & mask
            acquire[s]()
            if mem[i] == expected:
                mem[i] = new
                release[s]()
                return True
            release[s]()
            return False

    return load, store, cas
