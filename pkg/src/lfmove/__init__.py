"""Lock-free composition of concurrent containers through an atomic move."""

from .compose import MoveStatus, MoveUsageError, ScasResult, move, move_status
from .containers import LockedQueue, LockedStack, Queue, Stack, locked_move
from .dcas import DcasResult, dcas, read
from .domain import Domain, ThreadLimitError
from .tagged_cell import Heap, InvalidAccess, TagLayout

__all__ = [
    "DcasResult",
    "Domain",
    "Heap",
    "InvalidAccess",
    "LockedQueue",
    "LockedStack",
    "MoveStatus",
    "MoveUsageError",
    "Queue",
    "ScasResult",
    "Stack",
    "TagLayout",
    "ThreadLimitError",
    "dcas",
    "locked_move",
    "move",
    "move_status",
    "read",
]
