"""Exponential backoff shared by the lock-free and the lock-based containers."""

from __future__ import annotations

import time
from dataclasses import dataclass


@dataclass(frozen=True)
class BackoffPolicy:
    """Wait ``initial`` seconds after the first failure, doubling up to ``maximum``.

    The defaults come from ``bench --tune-backoff`` on a CPython host, where
    ``time.sleep`` cannot wait much less than 50us anyway.
    """

    initial: float = 64e-6
    maximum: float = 1024e-6

    def __post_init__(self) -> None:
        if not 0 < self.initial <= self.maximum:
            raise ValueError("need 0 < initial <= maximum")

    def start(self) -> "Backoff":
        return Backoff(self)


class Backoff:
    __slots__ = ("policy", "wait_time", "history")

    def __init__(self, policy: BackoffPolicy, record: bool = False):
        self.policy = policy
        self.wait_time = policy.initial
        self.history: list[float] | None = [] if record else None

    def wait(self) -> None:
        w = self.wait_time
        if self.history is not None:
            self.history.append(w)
        # sleep releases the GIL so the conflicting thread can finish
        time.sleep(w)
        self.wait_time = min(w * 2, self.policy.maximum)

    def reset(self) -> None:
        self.wait_time = self.policy.initial
