"""Fault injection for crash-tolerance tests.

Stores call fire(point) at named points; with no plan installed that is a
dict lookup and nothing more. Tests arm a plan with actions per point.
Only tests install plans; production paths never do.
"""

from __future__ import annotations

import os
import re
import threading
from dataclasses import dataclass

# every point stores call fire() at; recovery steps form a numbered family
FAULT_POINTS = (
    "before-flush",
    "after-flush-before-notify",
    "after-wal-write-before-manifest",
    "during-checkpoint-serialize",
)
_RECOVERY_STEP = re.compile(r"during-recovery-step-\d+")


def known_point(point: str) -> bool:
    return point in FAULT_POINTS or _RECOVERY_STEP.fullmatch(point) is not None


class InjectedCrash(RuntimeError):
    """Simulated process death at a fault point."""


@dataclass(frozen=True)
class Noop:
    """Consumes one firing of a point; lets a later arm hit the Nth firing."""


@dataclass(frozen=True)
class CrashProcess:
    pass


@dataclass(frozen=True)
class FailFlush:
    pass


@dataclass(frozen=True)
class CorruptBytes:
    offset: int  # negative counts from end of file
    length: int = 1


@dataclass(frozen=True)
class TruncateAt:
    offset: int  # negative counts from end of file


class FaultPlan:
    def __init__(self):
        self._arms: dict[str, list] = {}
        self._lock = threading.Lock()
        self.fired: list[str] = []

    def arm(self, point: str, action) -> "FaultPlan":
        if not known_point(point):
            raise ValueError(f"unknown fault point {point!r}")
        self._arms.setdefault(point, []).append(action)
        return self

    def pop(self, point: str):
        with self._lock:
            queue = self._arms.get(point)
            if not queue:
                return None
            self.fired.append(point)
            return queue.pop(0)


_active: FaultPlan | None = None


def install_plan(plan: FaultPlan) -> None:
    global _active
    _active = plan


def clear_plan() -> None:
    global _active
    _active = None


def corrupt_file(path: str, offset: int, length: int = 1) -> None:
    size = os.path.getsize(path)
    off = offset if offset >= 0 else size + offset
    off = max(0, min(off, size - 1))
    with open(path, "r+b") as f:
        f.seek(off)
        chunk = f.read(length)
        f.seek(off)
        f.write(bytes(b ^ 0xFF for b in chunk))


def truncate_file(path: str, offset: int) -> None:
    size = os.path.getsize(path)
    off = offset if offset >= 0 else size + offset
    os.truncate(path, max(0, off))


def fire(point: str, path: str | None = None) -> None:
    """Run the armed action for a fault point, if any.

    CrashProcess raises InjectedCrash (callers must not swallow it);
    FailFlush raises OSError so flush paths fail the way real I/O does;
    the byte-level actions silently damage the named file and continue.
    """
    plan = _active
    if plan is None:
        return
    action = plan.pop(point)
    if action is None or isinstance(action, Noop):
        return
    if isinstance(action, CrashProcess):
        raise InjectedCrash(point)
    if isinstance(action, FailFlush):
        raise OSError(f"injected flush failure at {point}")
    if isinstance(action, CorruptBytes):
        if path is not None and os.path.exists(path):
            corrupt_file(path, action.offset, action.length)
        return
    if isinstance(action, TruncateAt):
        if path is not None and os.path.exists(path):
            truncate_file(path, action.offset)
        return
    raise ValueError(f"unknown fault action {action!r}")
