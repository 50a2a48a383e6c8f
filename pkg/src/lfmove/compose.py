"""Atomic move between move-ready containers.

A container becomes move-ready by routing the CAS at each linearization
point through :func:`scas_remove` or :func:`scas_insert`.  Outside a move
these are plain CAS.  Inside a move, the remove-side call records its CAS
as the first DCAS leg and runs the target's insert with the element; the
insert-side call records the second leg and performs the DCAS, so the
remove and the insert take effect at the same instant.
"""

from __future__ import annotations

import enum
from typing import Any, Protocol

from .dcas import (
    FIRSTFAILED,
    SECONDFAILED,
    SUCCESS,
    copy_descriptor,
    dcas,
    new_descriptor,
    release_descriptor,
    set_first,
    set_second,
)
from .domain import Domain, ThreadContext


class ScasResult(enum.Enum):
    FALSE = 0
    TRUE = 1
    ABORT = 2

    def __bool__(self) -> bool:
        return self is ScasResult.TRUE


TRUE = ScasResult.TRUE
FALSE = ScasResult.FALSE
ABORT = ScasResult.ABORT


class MoveStatus(enum.Enum):
    MOVED = "moved"
    SOURCE_EMPTY = "source-empty"
    TARGET_REJECTED = "target-rejected"


class MoveUsageError(ValueError):
    pass


class MoveReady(Protocol):
    domain: Domain
    move_ready: bool

    def insert(self, value: Any, key: Any = None) -> bool: ...

    def remove(self, key: Any = None) -> tuple[bool, Any]: ...


def scas_remove(ctx: ThreadContext, cell: int, old: int, new: int,
                element: Any, hp: int = 0) -> ScasResult:
    """Linearization CAS of a remove operation.

    In a move, TRUE means the whole move took effect, FALSE that the remove
    leg lost a race (retry), ABORT that the target refused the element.
    """
    d = ctx.desc
    if not d:
        if ctx.heap.cas(cell, old, new):
            ctx.lin_cas += 1
            return TRUE
        return FALSE
    set_first(ctx, d, cell, old, new, hp)
    ctx.insfailed = True
    result = ctx.target.insert(element, ctx.tkey)
    if ctx.insfailed:
        ctx.insfailed = False
        ctx.status = MoveStatus.TARGET_REJECTED
        return ABORT
    return TRUE if result else FALSE


def scas_insert(ctx: ThreadContext, cell: int, old: int, new: int, hp: int = 0) -> ScasResult:
    """Linearization CAS of an insert operation.

    In a move, TRUE means the DCAS succeeded, FALSE an insert-side conflict
    (retry the insert), ABORT a remove-side conflict (insert must give up so
    the remove can start over).
    """
    d = ctx.desc
    if not d:
        if ctx.heap.cas(cell, old, new):
            ctx.lin_cas += 1
            return TRUE
        return FALSE
    set_second(ctx, d, cell, old, new, hp)
    hook = ctx.domain.before_dcas
    if hook is not None:
        hook(ctx, d)
    result = dcas(ctx, d, True)
    if result is SUCCESS:
        ctx.desc_announced = True
        ctx.lin_cas += 2
        # scrub now, while the insert still protects the cells
        release_descriptor(ctx, d, True)
        ctx.desc = 0
    else:
        ctx.desc = copy_descriptor(ctx, d)
        release_descriptor(ctx, d, result is SECONDFAILED)
    ctx.insfailed = False
    if result is FIRSTFAILED:
        return ABORT
    if result is SECONDFAILED:
        return FALSE
    return TRUE


def cas_remove(ctx: ThreadContext, cell: int, old: int, new: int,
               element: Any, hp: int = 0) -> ScasResult:
    """Plain CAS with the ``scas_remove`` signature (for non-move-ready variants)."""
    if ctx.heap.cas(cell, old, new):
        ctx.lin_cas += 1
        return TRUE
    return FALSE


def cas_insert(ctx: ThreadContext, cell: int, old: int, new: int, hp: int = 0) -> ScasResult:
    """Plain CAS with the ``scas_insert`` signature."""
    if ctx.heap.cas(cell, old, new):
        ctx.lin_cas += 1
        return TRUE
    return FALSE


def move_status(source: MoveReady, target: MoveReady,
                skey: Any = None, tkey: Any = None) -> MoveStatus:
    """Move one element from ``source`` to ``target``; report what happened."""
    if source is target:
        raise MoveUsageError("source and target must be different instances")
    domain = source.domain
    if target.domain is not domain:
        raise MoveUsageError("source and target must share a Domain")
    if not (getattr(source, "move_ready", False) and getattr(target, "move_ready", False)):
        raise MoveUsageError("both containers must be move-ready")
    ctx = domain.ctx()
    if ctx.target is not None:
        raise MoveUsageError("a move is already in flight on this thread")
    ctx.desc = new_descriptor(ctx)
    ctx.desc_announced = False
    ctx.target = target
    ctx.skey = skey
    ctx.tkey = tkey
    ctx.insfailed = False
    ctx.status = None
    try:
        ok, _ = source.remove(skey)
    finally:
        if ctx.desc:
            # never reached a successful DCAS, so never visible to others
            domain.desc_pool.free(ctx, ctx.desc)
        ctx.desc = 0
        ctx.target = None
        ctx.skey = ctx.tkey = None
    if ok:
        return MoveStatus.MOVED
    return ctx.status or MoveStatus.SOURCE_EMPTY


def move(source: MoveReady, target: MoveReady, skey: Any = None, tkey: Any = None) -> bool:
    return move_status(source, target, skey, tkey) is MoveStatus.MOVED
