from .backoff import Backoff, BackoffPolicy
from .locked import LockedQueue, LockedStack, TtasLock, locked_move
from .queue import PlainQueue, Queue
from .stack import PlainStack, Stack

__all__ = [
    "Backoff",
    "BackoffPolicy",
    "LockedQueue",
    "LockedStack",
    "PlainQueue",
    "PlainStack",
    "Queue",
    "Stack",
    "TtasLock",
    "locked_move",
]
