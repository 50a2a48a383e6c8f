import threading

import pytest

from lfmove import Domain, Queue, Stack
from lfmove.reclaim import HP1, HP_STACK, K, DoubleRetire, HazardRecord, protect, scan

from conftest import run_threads


def test_hazard_record_size():
    assert len(HazardRecord().slots) == K
    with pytest.raises(ValueError):
        HazardRecord(4)


def test_protect_quiescent_and_null(domain):
    ctx = domain.ctx()
    cell = domain.heap.allocate(1)
    assert protect(ctx, HP1, cell) == 0 and ctx.hazards[HP1] == 0
    domain.heap.store(cell, 4096)
    assert protect(ctx, HP1, cell) == 4096 and ctx.hazards[HP1] == 4096


def test_protect_under_flipping(fast_switching):
    domain = Domain(preempt=0.2)
    cell = domain.heap.allocate(1)
    domain.heap.store(cell, 16)
    done = threading.Event()
    seen = set()

    def body(k):
        ctx = domain.ctx()
        if k == 0:
            for i in range(20_000):
                domain.heap.store(cell, 32 if i % 2 == 0 else 16)
            done.set()
        else:
            while not done.is_set():
                v = protect(ctx, HP1, cell)
                assert ctx.hazards[HP1] == v
                seen.add(v)

    run_threads(2, body)
    assert seen <= {16, 32}


def test_retire_then_scan_returns_node_to_local_list(domain):
    ctx = domain.ctx()
    n = ctx.alloc_node()
    ctx.retire_node(n)
    assert scan(ctx) == 1
    assert ctx.free_lists[domain.node_pool.index] == [n]
    assert not domain.heap.is_live(n)  # poisoned while pooled


def test_reclaimed_node_is_reused(domain):
    ctx = domain.ctx()
    n = ctx.alloc_node()
    before = domain.node_pool.system_allocations
    ctx.retire_node(n)
    scan(ctx)
    assert ctx.alloc_node() == n
    assert domain.node_pool.system_allocations == before
    ctx.alloc_node()
    assert domain.node_pool.system_allocations == before + 1


def test_protected_node_is_withheld_until_cleared(domain):
    owner = domain.ctx()
    n = owner.alloc_node()
    published = threading.Event()
    release = threading.Event()
    cleared = threading.Event()

    def reader(_):
        ctx = domain.ctx()
        ctx.hazards[HP_STACK] = n
        published.set()
        release.wait()
        ctx.hazards[HP_STACK] = 0
        cleared.set()

    t = threading.Thread(target=run_threads, args=(1, reader))
    t.start()
    published.wait()
    owner.retire_node(n)
    assert scan(owner) == 0
    assert domain.heap.is_live(n)
    release.set()
    cleared.wait()
    assert scan(owner) == 1
    t.join()


def test_full_local_list_moves_to_global_stack():
    domain = Domain(local_capacity=200)
    ctx = domain.ctx()
    pool = domain.node_pool
    nodes = [ctx.alloc_node() for _ in range(201)]
    for n in nodes:
        pool.free(ctx, n)
    chunks = pool.global_stack.walk()
    assert [len(c) for c in chunks] == [200]
    assert ctx.free_lists[pool.index] == [nodes[200]]
    assert len(ctx.free_lists[pool.index]) <= 200


def test_empty_local_list_refills_from_global_stack():
    domain = Domain(local_capacity=10)
    a = domain.ctx()
    pool = domain.node_pool
    nodes = [a.alloc_node() for _ in range(10)]

    def other(_):
        b = domain.ctx()
        for n in nodes:
            pool.free(b, n)
        pool.flush(b)

    run_threads(1, other)
    assert a.free_lists[pool.index] == []
    before = pool.system_allocations
    got = {a.alloc_node() for _ in range(10)}
    assert got == set(nodes)
    assert pool.system_allocations == before


def test_double_retire_detected(domain):
    ctx = domain.ctx()
    n = ctx.alloc_node()
    ctx.retire_node(n)
    with pytest.raises(DoubleRetire):
        ctx.retire_node(n)


def test_scan_threshold_scales_with_threads(domain):
    ctx = domain.ctx()
    assert domain.threshold == 2 * K * 1
    nodes = [ctx.alloc_node() for _ in range(2 * K)]
    for n in nodes[:-1]:
        ctx.retire_node(n)
    assert len(ctx.retired) == 2 * K - 1
    ctx.retire_node(nodes[-1])
    assert ctx.retired == []


def test_unregister_hands_over_leftovers(domain):
    main = domain.ctx()
    n = main.alloc_node()
    main.hazards[HP1] = n

    def leaver(_):
        ctx = domain.ctx()
        ctx.retire_node(n)
        domain.unregister()

    run_threads(1, leaver)
    assert len(domain.take_orphans()) == 1


def test_accounting_balances_after_stress(fast_switching):
    domain = Domain(preempt=0.01, local_capacity=20)
    q, s = Queue(domain), Stack(domain)

    def body(k):
        for i in range(2000):
            c = q if (i + k) % 2 else s
            if i % 3 == 2:
                c.remove()
            else:
                c.insert((k, i))

    run_threads(4, body)
    live = len(q.contents()) + len(s.contents()) + 1  # the queue's dummy
    acc = domain.accounting()
    assert acc["allocated"] == acc["in_use"] + acc["pooled"] + acc["retired_pending"]
    assert acc["in_use"] == live
    domain.drain_retired()
    acc = domain.accounting()
    assert acc["retired_pending"] == 0 and acc["in_use"] == live
