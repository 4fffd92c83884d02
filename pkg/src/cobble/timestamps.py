"""Central logical-timestamp generator.

Commit timestamps are leased from a monotone counter; snapshot timestamps
expose only history whose commits have all been durably acknowledged, so a
snapshot never observes a commit timestamp that is still in flight.
"""

from __future__ import annotations

import threading


class TimestampError(Exception):
    pass


class TimestampGenerator:
    """Leases commit timestamps and tracks the safe snapshot bound.

    next() never waits on flushes or on other transactions; the critical
    sections here are pure counter maintenance.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._min_allowed_ct = 0  # next commit timestamp to lease
        self._max_allowed_st = 0  # snapshots read strictly below this
        self._running: dict[int, bool] = {}  # leased ct -> finalized flag
        self._floor_set = False

    def next(self) -> int:
        """Lease the next commit timestamp. Distinct per call."""
        with self._lock:
            ts = self._min_allowed_ct
            self._min_allowed_ct = ts + 1
            self._running[ts] = False
            return ts

    def peek_snapshot(self) -> int:
        """Current snapshot timestamp: exposes all ct < the returned value."""
        return self._max_allowed_st

    def end_commit_notify(self, ct: int) -> None:
        """Mark ct finalized (durably committed, or dead and never visible).

        Removes every finalized timestamp <= ct from the running set, then
        advances the snapshot bound to min(running), or to the lease counter
        when nothing is left pending. Re-notifying a finalized ct is a no-op.
        """
        with self._lock:
            if ct >= self._min_allowed_ct:
                raise TimestampError(f"notify of never-leased ct {ct}")
            if ct not in self._running:
                return  # already finalized and pruned
            self._running[ct] = True
            removed = [ts for ts, done in self._running.items() if done and ts <= ct]
            if not removed:
                return
            for ts in removed:
                del self._running[ts]
            if self._running:
                self._max_allowed_st = min(self._running)
            else:
                self._max_allowed_st = self._min_allowed_ct

    def recover_floor(self, ts: int) -> None:
        """Restart above a recovered history: ct leases resume at ts+1 and
        snapshots expose exactly the history <= ts. Once per generator."""
        with self._lock:
            if self._floor_set:
                raise TimestampError("recover_floor called twice")
            if self._running:
                raise TimestampError("recover_floor on a generator with leases")
            self._floor_set = True
            self._min_allowed_ct = ts + 1
            self._max_allowed_st = ts + 1
