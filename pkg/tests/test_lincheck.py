import itertools
import random
import threading

import pytest

from lfmove import Domain, Queue, Stack, move
from lfmove.lincheck import (
    INV,
    RES,
    FifoSpec,
    HistoryError,
    HistoryEvent,
    HistoryTooLarge,
    LifoSpec,
    ProductSpec,
    Recorder,
    RecorderOverflow,
    check,
    check_naive,
    format_history,
    operations,
    parse_history,
    read_history,
    write_history,
)

from conftest import run_threads
from histories import execute, small_execution


def H(*rows):
    """Build a history from ``(thread, kind, op, args, result)`` rows."""
    return [HistoryEvent(i, *row) for i, row in enumerate(rows)]


def overlapping_queue_history():
    # A: enq(x) | B: enq(y) overlapping A | C: deq()->y after both | D: deq()->x
    # overlapping C.  Only A,B,D,C (enqueue x first) replays correctly.
    return H(
        ("A", INV, "enqueue", ("x",), None),
        ("B", INV, "enqueue", ("y",), None),
        ("A", RES, "enqueue", ("x",), True),
        ("B", RES, "enqueue", ("y",), True),
        ("C", INV, "dequeue", (), None),
        ("D", INV, "dequeue", (), None),
        ("D", RES, "dequeue", (), (True, "x")),
        ("C", RES, "dequeue", (), (True, "y")),
    )


def test_overlapping_queue_history_witness():
    result = check(overlapping_queue_history(), FifoSpec())
    assert result.linearizable
    assert [op.thread for op in result.witness] == ["A", "B", "D", "C"]


def test_dequeue_of_unknown_value_fails():
    h = H(("A", INV, "enqueue", ("x",), None), ("A", RES, "enqueue", ("x",), True),
          ("B", INV, "dequeue", (), None), ("B", RES, "dequeue", (), (True, "z")))
    assert not check(h, FifoSpec())
    assert not check_naive(h, FifoSpec())


def test_real_time_order_is_respected():
    # sequential enqueue x then y; a later dequeue may not return y
    h = H(("A", INV, "insert", ("x",), None), ("A", RES, "insert", ("x",), True),
          ("A", INV, "insert", ("y",), None), ("A", RES, "insert", ("y",), True),
          ("B", INV, "remove", (), None), ("B", RES, "remove", (), (True, "y")))
    assert not check(h, FifoSpec())
    assert check(h, LifoSpec())


def test_too_large_is_explicit():
    rows = []
    for i in range(21):
        rows += [(0, INV, "push", (i,), None), (0, RES, "push", (i,), True)]
    with pytest.raises(HistoryTooLarge):
        check(H(*rows), LifoSpec())
    assert check(H(*rows), LifoSpec(), limit=21)


def test_malformed_histories_rejected():
    with pytest.raises(HistoryError):
        operations(H((0, INV, "push", (1,), None), (0, INV, "pop", (), None)))
    with pytest.raises(HistoryError):
        operations(H((0, RES, "pop", (), (False, None))))
    with pytest.raises(HistoryError):
        operations(H((0, INV, "pop", (), None)))  # pending at the end
    with pytest.raises(HistoryError):
        operations([HistoryEvent(2, 0, INV, "pop"), HistoryEvent(1, 0, RES, "pop")])


def test_recorder_single_thread():
    rec = Recorder()
    q = Queue(Domain())
    rec.call(0, "enqueue", q.enqueue, 5)
    rec.call(0, "dequeue", q.dequeue)
    h = rec.history()
    assert [ev.kind for ev in h] == [INV, RES, INV, RES]
    assert h[-1].result == (True, 5)


def test_recorder_overflow_is_loud():
    rec = Recorder(capacity=3)
    rec.call(0, "x", lambda: None)
    with pytest.raises(RecorderOverflow):
        rec.call(0, "x", lambda: None)


def test_recorder_alternation_across_threads(fast_switching):
    rec = Recorder()
    domain = Domain(preempt=0.1)
    s = Stack(domain)

    def body(k):
        for i in range(500):
            rec.call(k, "push", s.push, (k, i))
            rec.call(k, "pop", s.pop)

    run_threads(4, body)
    ops = operations(rec.history())  # raises on any alternation break
    assert len(ops) == 4000


def test_recorder_respects_causality(fast_switching):
    """A value cannot be dequeued before its enqueue was invoked."""
    rec = Recorder()
    domain = Domain(preempt=0.1)
    q = Queue(domain)

    def body(k):
        for i in range(2500):
            if k < 2:
                rec.call(k, "enqueue", q.enqueue, (k, i))
            else:
                rec.call(k, "dequeue", q.dequeue)

    run_threads(4, body)
    ops = operations(rec.history())
    invoked = {op.args[0]: op.invoked for op in ops if op.op == "enqueue"}
    removed = [op for op in ops if op.op == "dequeue" and op.result[0]]
    assert len(ops) == 10_000 and removed
    for op in removed:
        assert op.responded > invoked[op.result[1]]


def test_history_file_round_trip(tmp_path):
    h = overlapping_queue_history() + [
        HistoryEvent(20, "E", INV, "move", (0, 1)),
        HistoryEvent(21, "E", RES, "move", (0, 1), False),
        HistoryEvent(22, 3, INV, "insert", (0, "a b"), None),
        HistoryEvent(23, 3, RES, "insert", (0, "a b"), True),
    ]
    path = tmp_path / "h.txt"
    write_history(path, h)
    assert read_history(path) == h
    assert parse_history(format_history(h)) == h
    with pytest.raises(HistoryError):
        parse_history("1 0 inv push")


@pytest.mark.parametrize("pair", ["qq", "ss", "qs"])
def test_real_container_histories_linearize(pair, fast_switching):
    for seed in range(150):
        history, spec = small_execution(seed, pair)
        result = check(history, spec)
        assert result, format_history(history)


def test_product_spec_move():
    spec = ProductSpec(FifoSpec([1, 2]), LifoSpec())
    state, ok = spec.apply(spec.initial(), "move", (0, 1))
    assert ok and state == ((2,), (1,))
    state, ok = spec.apply(state, "move", (1, 0))
    assert ok and state == ((2, 1), ())
    assert spec.apply(state, "move", (1, 0)) == (state, False)
    assert spec.apply(state, "remove", (0,))[1] == (True, 2)


def mutate(history, rng):
    """Corrupt one response so the history is (usually) wrong."""
    res = [i for i, ev in enumerate(history) if ev.kind == RES and ev.op != "insert"]
    if not res:
        return history
    i = rng.choice(res)
    ev = history[i]
    if ev.op == "move":
        bad = not ev.result
    else:
        bad = (False, None) if ev.result[0] else (True, rng.choice([0, 10, 100, 103]))
    out = list(history)
    out[i] = HistoryEvent(ev.seq, ev.thread, ev.kind, ev.op, ev.args, bad)
    return out


def test_checker_agrees_with_naive_enumerator(fast_switching):
    rng = random.Random(7)
    verdicts = {True: 0, False: 0}
    for seed in range(120):
        pair = rng.choice(["qq", "ss", "qs"])
        history, spec = small_execution(seed, pair, threads=3, ops=rng.randint(1, 7))
        for h in (history, mutate(history, rng)):
            fast, slow = check(h, spec), check_naive(h, spec)
            assert fast.linearizable == slow.linearizable, format_history(h)
            verdicts[fast.linearizable] += 1
    assert verdicts[True] > 100 and verdicts[False] > 30


def decomposed_move(src, dst, between=None):
    ok, value = src.remove()
    if between:
        between()
    if ok:
        dst.insert(value)
    return ok


def test_decomposed_move_fails_product_spec():
    """A remove-then-insert 'move' lets an observer see the element nowhere."""
    domain = Domain()
    a, b = Queue(domain), Stack(domain)
    a.insert("x")
    rec = Recorder()
    removed, observed = threading.Event(), threading.Event()

    def body(k):
        if k == 0:
            def between():
                removed.set()
                observed.wait()
            rec.call(0, "move", lambda *_: decomposed_move(a, b, between), 0, 1)
        else:
            removed.wait()
            rec.call(1, "remove", lambda _: a.remove(), 0)
            rec.call(1, "remove", lambda _: b.remove(), 1)
            observed.set()

    run_threads(2, body)
    spec = ProductSpec(FifoSpec(["x"]), LifoSpec())
    history = rec.history()
    assert not check(history, spec)
    assert not check_naive(history, spec)
    # read as two independent operations, the same run is fine
    split = H((0, INV, "remove", (0,), None), (0, RES, "remove", (0,), (True, "x")),
              (1, INV, "remove", (0,), None), (1, RES, "remove", (0,), (False, None)),
              (1, INV, "remove", (1,), None), (1, RES, "remove", (1,), (False, None)),
              (0, INV, "insert", (1, "x"), None), (0, RES, "insert", (1, "x"), True))
    assert check(split, spec)
    seen = [ev.result for ev in history if ev.thread == 1 and ev.kind == RES]
    assert seen == [(False, None), (False, None)]


def test_unified_move_survives_the_same_observer():
    domain = Domain()
    a, b = Queue(domain), Stack(domain)
    a.insert("x")
    rec = Recorder()
    fired = []

    def hook(ctx, d):
        if not fired:
            fired.append(True)
            t = threading.Thread(target=observer)
            t.start()
            t.join()

    def observer():
        rec.call(1, "remove", lambda _: a.remove(), 0)
        rec.call(1, "remove", lambda _: b.remove(), 1)

    domain.before_dcas = hook
    rec.call(0, "move", lambda *_: move(a, b), 0, 1)
    spec = ProductSpec(FifoSpec(["x"]), LifoSpec())
    history = rec.history()
    assert fired
    assert check(history, spec), format_history(history)


def test_move_only_workloads_linearize(fast_switching):
    for seed in range(100):
        rng = random.Random(seed)
        domain = Domain(preempt=0.3)
        a, b = Stack(domain), Queue(domain)
        for v in range(3):
            a.insert(v)
        plans = [[("move", i, 1 - i) for i in (rng.randrange(2) for _ in range(2))]
                 for _ in range(3)]
        rec = Recorder()
        execute(plans, [a, b], rec, seed=seed)
        assert check(rec.history(), ProductSpec(LifoSpec([0, 1, 2]), FifoSpec()))


def interleavings(per_thread):
    """Every merge of two threads' event lists, each kept in order."""
    a, b = per_thread
    for slots in itertools.combinations(range(len(a) + len(b)), len(a)):
        it_a, it_b = iter(a), iter(b)
        yield [next(it_a) if i in slots else next(it_b) for i in range(len(a) + len(b))]


def test_exhaustive_small_corpus_agreement():
    """Every 2-thread history of 3 ops over a tiny alphabet, checked both ways."""
    alphabet = [("push", ("a",), True), ("push", ("b",), True),
                ("pop", (), (True, "a")), ("pop", (), (False, None))]
    verdicts = {True: 0, False: 0}
    for ops in itertools.product(alphabet, repeat=3):
        for layout in itertools.product((0, 1), repeat=3):
            per_thread = ([], [])
            for t, (name, args, result) in zip(layout, ops):
                per_thread[t].extend([(t, INV, name, args, None), (t, RES, name, args, result)])
            for merged in interleavings(per_thread):
                events = H(*merged)
                fast = check(events, LifoSpec()).linearizable
                assert fast == check_naive(events, LifoSpec()).linearizable
                verdicts[fast] += 1
    assert verdicts[True] > 1000 and verdicts[False] > 1000
