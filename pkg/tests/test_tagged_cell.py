import threading

import pytest

from lfmove import Domain, Heap, InvalidAccess, TagLayout, ThreadLimitError
from lfmove.tagged_cell import (
    ConfigurationError,
    addr_of,
    is_descriptor,
    mark,
    thread_of,
    unmark,
    version_of,
    versioned,
)

from conftest import run_threads


def test_layout_defaults():
    layout = TagLayout()
    assert layout.thread_id_bits == 6
    assert layout.max_threads == 63
    assert layout.alignment == 128
    assert layout.descriptor_bit == 0


def test_layout_needs_sixteen_threads():
    with pytest.raises(ConfigurationError):
        TagLayout(thread_id_bits=4)
    assert TagLayout(thread_id_bits=5).max_threads == 31


@pytest.mark.parametrize("bits", [5, 6, 7])
def test_mark_enumeration_against_arithmetic(bits):
    # independent oracle: a tagged word is base + 1 + 2*tid with base a
    # multiple of the alignment, written with + and * instead of bit ops
    layout = TagLayout(thread_id_bits=bits)
    for base in (layout.alignment, 7 * layout.alignment, 12345 * layout.alignment):
        seen = set()
        for tid in range(layout.max_threads):
            word = layout.mark(base, tid)
            assert word == base + 1 + 2 * tid
            assert layout.unmark(word) == base
            assert layout.thread_of(word) == tid
            assert layout.is_descriptor(word)
            assert layout.mark(word, tid) == word  # re-marking a marked word
            seen.add(word)
        assert len(seen) == layout.max_threads


def test_mark_round_trip_and_distinct():
    d = 4096
    assert unmark(mark(d, 0)) == d
    assert mark(d, 3) != mark(d, 5)
    assert thread_of(mark(d, 5)) == 5
    assert is_descriptor(mark(d, 7))


def test_plain_values_are_not_descriptors(domain):
    assert not is_descriptor(0)
    ctx = domain.ctx()
    for _ in range(50):
        assert not is_descriptor(ctx.alloc_node())
        d = domain.desc_pool.alloc(ctx)
        assert d % domain.layout.alignment == 0


def test_versioned_words():
    w = versioned(4096, 5)
    assert addr_of(w) == 4096 and version_of(w) == 5
    assert not is_descriptor(w)
    assert version_of(versioned(16, (1 << 16) + 3)) == 3


def test_cas_basic():
    heap = Heap()
    cell = heap.allocate(1)
    heap.store(cell, 16)
    assert heap.cas(cell, 16, 32)
    assert heap.load(cell) == 32
    assert not heap.cas(cell, 48, 64)
    assert heap.load(cell) == 32


def test_checked_heap_rejects_poisoned_words():
    heap = Heap(checked=True)
    block = heap.allocate(2)
    heap.poison(block, 2)
    for op in (lambda: heap.load(block), lambda: heap.store(block, 1),
               lambda: heap.cas(block + 8, 0, 1)):
        with pytest.raises(InvalidAccess):
            op()
    heap.unpoison(block, 2)
    heap.store(block, 1)
    for op in (lambda: heap.load(block | 1), lambda: heap.cas(block | 3, 1, 2)):
        with pytest.raises(InvalidAccess, match="tagged"):
            op()  # a descriptor-tagged word used as an address
    unchecked = Heap(checked=False)
    b = unchecked.allocate(1)
    unchecked.poison(b, 1)
    unchecked.load(b)  # no checking


def test_cas_race_exactly_one_winner(fast_switching):
    """Two threads race cas(cell, 0, tid) on 10^5 fresh cells."""
    rounds = 100_000
    heap = Heap(checked=False, preempt=0.05)
    cells = heap.allocate(rounds)
    wins = [bytearray(rounds), bytearray(rounds)]

    def racer(k):
        cas = heap.cas
        mine = wins[k]
        for i in range(rounds):
            if cas(cells + 8 * i, 0, k + 1):
                mine[i] = 1

    run_threads(2, racer)
    for i in range(rounds):
        assert wins[0][i] + wins[1][i] == 1
        assert heap.load(cells + 8 * i) == (1 if wins[0][i] else 2)
    assert sum(wins[1]) > 0 and sum(wins[0]) > 0


def test_thread_registration_limit():
    domain = Domain(layout=TagLayout(thread_id_bits=5))
    limit = domain.layout.max_threads
    hold = threading.Event()
    registered = threading.Barrier(limit + 1)
    errors = []

    def reg():
        try:
            domain.register()
        except ThreadLimitError as exc:
            errors.append(exc)
        registered.wait()
        hold.wait()

    threads = [threading.Thread(target=reg) for _ in range(limit)]
    for t in threads:
        t.start()
    registered.wait()
    assert not errors
    assert sorted(c.tid for c in domain.contexts) == list(range(1, limit + 1))
    with pytest.raises(ThreadLimitError):
        domain.register()
    hold.set()
    for t in threads:
        t.join()
