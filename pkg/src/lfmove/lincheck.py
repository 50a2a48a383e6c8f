"""History recording and brute-force linearizability checking.

A history is a list of :class:`HistoryEvent` records, invocations and
responses, ordered by a global sequence number.  :func:`check` searches for
a total order of the completed operations that keeps every
response-before-invocation pair in order and replays correctly against a
sequential specification.  The search is a depth-first walk over sets of
already-linearized operations, memoized on ``(set, state)``.

:func:`check_naive` is the reference: it tries every permutation.  The two
are expected to agree on every history small enough for the naive one.

History file format, one event per line, fields separated by spaces::

    seq thread kind op args result

``kind`` is ``inv`` or ``res``.  ``thread``, ``args`` and ``result`` are
compact JSON (``[]`` and ``null`` where absent); a ``(ok, value)`` result is
written as a two-element list.  Lines starting with ``#`` are comments.
"""

from __future__ import annotations

import itertools
import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Protocol, Sequence

INV = "inv"
RES = "res"

DEFAULT_LIMIT = 20


class HistoryError(ValueError):
    """Malformed history: broken alternation or an unmatched response."""


class HistoryTooLarge(RuntimeError):
    """More operations than the exhaustive search is allowed to handle."""


class RecorderOverflow(RuntimeError):
    pass


@dataclass(frozen=True)
class HistoryEvent:
    seq: int
    thread: Any
    kind: str
    op: str
    args: tuple = ()
    result: Any = None


@dataclass(frozen=True)
class Operation:
    """One completed invocation/response pair."""

    thread: Any
    op: str
    args: tuple
    result: Any
    invoked: int
    responded: int

    def __str__(self) -> str:
        args = ", ".join(map(repr, self.args))
        return f"{self.thread}:{self.op}({args})->{self.result!r}"


def _freeze(value: Any) -> Any:
    # JSON gives lists back; specs compare tuples
    if isinstance(value, list):
        return tuple(_freeze(v) for v in value)
    return value


# -- recording ---------------------------------------------------------------

class Recorder:
    """Thread-safe event recorder.

    Each thread appends to its own buffer; ``next()`` on the shared counter
    is atomic under the GIL, so sequence numbers are unique and respect real
    time.  Buffers are merged by :meth:`history` once the threads are done.
    """

    def __init__(self, capacity: int = 1 << 20):
        self.capacity = capacity
        self._seq = itertools.count()
        self._local = threading.local()
        self._buffers: list[list[HistoryEvent]] = []
        self._lock = threading.Lock()

    def _buffer(self) -> list[HistoryEvent]:
        buf = getattr(self._local, "buf", None)
        if buf is None:
            buf = self._local.buf = []
            with self._lock:
                self._buffers.append(buf)
        return buf

    def record(self, thread: Any, kind: str, op: str, args: tuple = (),
               result: Any = None) -> HistoryEvent:
        buf = self._buffer()
        if len(buf) >= self.capacity:
            raise RecorderOverflow(f"thread {thread} recorded more than {self.capacity} events")
        ev = HistoryEvent(next(self._seq), thread, kind, op, tuple(args), result)
        buf.append(ev)
        return ev

    def call(self, thread: Any, op: str, fn: Callable[..., Any], *args: Any) -> Any:
        """Record an invocation, run ``fn(*args)``, record its response."""
        self.record(thread, INV, op, args)
        result = fn(*args)
        self.record(thread, RES, op, args, _freeze(result))
        return result

    def history(self) -> list[HistoryEvent]:
        with self._lock:
            events = [ev for buf in self._buffers for ev in buf]
        events.sort(key=lambda ev: ev.seq)
        return events


def operations(history: Iterable[HistoryEvent]) -> list[Operation]:
    """Pair invocations with responses, validating per-thread alternation."""
    open_inv: dict[Any, HistoryEvent] = {}
    ops = []
    last = -1
    for ev in history:
        if ev.seq <= last:
            raise HistoryError(f"sequence numbers not increasing at {ev.seq}")
        last = ev.seq
        if ev.kind == INV:
            if ev.thread in open_inv:
                raise HistoryError(f"thread {ev.thread} invoked {ev.op} with an operation open")
            open_inv[ev.thread] = ev
        elif ev.kind == RES:
            inv = open_inv.pop(ev.thread, None)
            if inv is None or inv.op != ev.op:
                raise HistoryError(f"response {ev.op} of thread {ev.thread} matches no invocation")
            ops.append(Operation(ev.thread, inv.op, inv.args, _freeze(ev.result),
                                 inv.seq, ev.seq))
        else:
            raise HistoryError(f"unknown event kind {ev.kind!r}")
    if open_inv:
        raise HistoryError(f"pending invocations: {sorted(map(str, open_inv))}")
    return ops


# -- sequential specifications ----------------------------------------------

class SequentialSpec(Protocol):
    def initial(self) -> Any: ...

    def apply(self, state: Any, op: str, args: tuple) -> tuple[Any, Any]: ...


class FifoSpec:
    """Queue: ``insert``/``enqueue`` and ``remove``/``dequeue``."""

    def __init__(self, initial: Sequence[Any] = ()):
        self._initial = tuple(initial)

    def initial(self) -> tuple:
        return self._initial

    def apply(self, state: tuple, op: str, args: tuple) -> tuple[tuple, Any]:
        if op in ("insert", "enqueue"):
            return state + (args[0],), True
        if op in ("remove", "dequeue"):
            if not state:
                return state, (False, None)
            return state[1:], (True, state[0])
        raise ValueError(f"unknown queue operation {op!r}")


class LifoSpec:
    """Stack: ``insert``/``push`` and ``remove``/``pop``; the top is the last item."""

    def __init__(self, initial: Sequence[Any] = ()):
        self._initial = tuple(initial)

    def initial(self) -> tuple:
        return self._initial

    def apply(self, state: tuple, op: str, args: tuple) -> tuple[tuple, Any]:
        if op in ("insert", "push"):
            return state + (args[0],), True
        if op in ("remove", "pop"):
            if not state:
                return state, (False, None)
            return state[:-1], (True, state[-1])
        raise ValueError(f"unknown stack operation {op!r}")


class ProductSpec:
    """Several containers side by side plus an atomic ``move(i, j)``.

    ``insert(i, v)`` and ``remove(i)`` address container ``i``; ``move``
    returns True iff container ``i`` was non-empty, in which case its
    removed element is inserted into ``j`` in the same step.
    """

    def __init__(self, *parts: SequentialSpec):
        self.parts = parts

    def initial(self) -> tuple:
        return tuple(p.initial() for p in self.parts)

    def apply(self, state: tuple, op: str, args: tuple) -> tuple[tuple, Any]:
        if op == "move":
            i, j = args[0], args[1]
            si, removed = self.parts[i].apply(state[i], "remove", ())
            if not removed[0]:
                return state, False
            sj, _ = self.parts[j].apply(state[j], "insert", (removed[1],))
            out = list(state)
            out[i], out[j] = si, sj
            return tuple(out), True
        i = args[0]
        si, result = self.parts[i].apply(state[i], op, tuple(args[1:]))
        out = list(state)
        out[i] = si
        return tuple(out), result


# -- checking ----------------------------------------------------------------

@dataclass
class CheckResult:
    linearizable: bool
    witness: list[Operation] = field(default_factory=list)
    explored: int = 0

    def __bool__(self) -> bool:
        return self.linearizable


def _predecessors(ops: Sequence[Operation]) -> list[int]:
    """Bitmask per operation of the operations that must come before it."""
    preds = []
    for b in ops:
        mask = 0
        for i, a in enumerate(ops):
            if a.responded < b.invoked:
                mask |= 1 << i
        preds.append(mask)
    return preds


def check(history: Iterable[HistoryEvent] | Sequence[Operation], spec: SequentialSpec,
          limit: int = DEFAULT_LIMIT) -> CheckResult:
    """Exhaustive linearizability check with memoized pruning."""
    ops = _as_operations(history)
    if len(ops) > limit:
        raise HistoryTooLarge(f"{len(ops)} operations exceed the limit of {limit}")
    preds = _predecessors(ops)
    full = (1 << len(ops)) - 1
    seen: set[tuple[int, Any]] = set()
    order: list[int] = []

    def search(done: int, state: Any) -> bool:
        if done == full:
            return True
        key = (done, state)
        if key in seen:
            return False
        seen.add(key)
        for i, op in enumerate(ops):
            bit = 1 << i
            if done & bit or preds[i] & ~done:
                continue
            nstate, result = spec.apply(state, op.op, op.args)
            if result != op.result:
                continue
            order.append(i)
            if search(done | bit, nstate):
                return True
            order.pop()
        return False

    ok = search(0, spec.initial())
    return CheckResult(ok, [ops[i] for i in order] if ok else [], len(seen))


def check_naive(history: Iterable[HistoryEvent] | Sequence[Operation],
                spec: SequentialSpec) -> CheckResult:
    """Try every permutation; exponential, for cross-validating :func:`check`."""
    ops = _as_operations(history)
    tried = 0
    for perm in itertools.permutations(ops):
        tried += 1
        if not _respects_real_time(perm):
            continue
        state = spec.initial()
        for op in perm:
            state, result = spec.apply(state, op.op, op.args)
            if result != op.result:
                break
        else:
            return CheckResult(True, list(perm), tried)
    return CheckResult(False, [], tried)


def _respects_real_time(perm: Sequence[Operation]) -> bool:
    # an operation may not be placed before one that finished before it began;
    # scan from the back, tracking the earliest response seen so far
    earliest = float("inf")
    for op in reversed(perm):
        if earliest < op.invoked:
            return False
        earliest = min(earliest, op.responded)
    return True


def _as_operations(history) -> list[Operation]:
    items = list(history)
    if items and isinstance(items[0], Operation):
        return items
    return operations(items)


# -- history files -----------------------------------------------------------

def _token(value: Any) -> str:
    return json.dumps(value, separators=(",", ":"))


def format_history(history: Iterable[HistoryEvent]) -> str:
    lines = ["# seq thread kind op args result"]
    for ev in history:
        lines.append(" ".join((str(ev.seq), _token(ev.thread), ev.kind, ev.op,
                               _token(list(ev.args)), _token(ev.result))))
    return "\n".join(lines) + "\n"


_decoder = json.JSONDecoder()


def _fields(line: str) -> Iterable[Any]:
    # seq, kind and op are bare words; thread, args and result are JSON,
    # which may contain spaces, so decode them in place
    pos = 0
    for is_json in (False, True, False, False, True, True):
        while pos < len(line) and line[pos].isspace():
            pos += 1
        if pos >= len(line):
            raise ValueError("missing field")
        if is_json:
            value, pos = _decoder.raw_decode(line, pos)
        else:
            end = pos
            while end < len(line) and not line[end].isspace():
                end += 1
            value, pos = line[pos:end], end
        yield value
    if line[pos:].strip():
        raise ValueError("trailing text")


def parse_history(text: str) -> list[HistoryEvent]:
    events = []
    for n, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            seq, thread, kind, op, args, result = _fields(line)
        except ValueError as exc:
            raise HistoryError(f"line {n}: {exc}") from None
        events.append(HistoryEvent(int(seq), _freeze(thread), kind, op,
                                   _freeze(args), _freeze(result)))
    return events


def write_history(path: str | Path, history: Iterable[HistoryEvent]) -> None:
    Path(path).write_text(format_history(history))


def read_history(path: str | Path) -> list[HistoryEvent]:
    return parse_history(Path(path).read_text())
