"""Crash-tolerant persistent journal.

Same read semantics as the in-memory journal; every append is also framed
into a log file. Commit acknowledgment happens only after fsync. Recovery
scans the longest valid frame prefix, truncates torn bytes, and appends
abort records for transactions the crash left unterminated, so a second
recovery pass is a byte-identical no-op.
"""

from __future__ import annotations

import os
import shutil

from . import codec, faults
from .memory import JournalStore
from .store import JournalRecord, RecordKind, StoreError, TransactionDescriptor


class PersistentJournal(JournalStore):
    def __init__(self, path: str, _records: list[JournalRecord] | None = None):
        if _records is None and os.path.exists(path) and os.path.getsize(path) > 0:
            raise StoreError(f"{path} already has content; use PersistentJournal.recover")
        super().__init__()
        self._path = path
        self._failed = False
        if _records:
            for rec in _records:
                super()._append(rec)
            self._rebuild_lifecycle()
        # unbuffered: a process crash never holds frames hostage in
        # userspace, and close() can never leak an unacknowledged commit
        self._f = open(path, "ab", buffering=0)
        self._size = os.path.getsize(path)
        self._durable_offset = self._size

    @property
    def path(self) -> str:
        return self._path

    @property
    def durable_offset(self) -> int:
        """File size at the last successful fsync; bytes past it may be lost."""
        return self._durable_offset

    def _check_ok(self):
        if self._failed:
            raise StoreError(f"journal {self._path} is failed after an I/O error")

    def _append(self, rec: JournalRecord) -> None:
        self._check_ok()
        frame = codec.encode_frame(codec.encode_record(rec))
        try:
            self._f.write(frame)
        except OSError as exc:
            self._failed = True
            raise StoreError(f"append failed: {exc}") from exc
        self._size += len(frame)
        super()._append(rec)

    def flush(self) -> None:
        """fsync everything appended so far."""
        with self._lock:
            self._flush_locked()

    def _flush_locked(self) -> None:
        self._check_ok()
        try:
            faults.fire("before-flush", path=self._path)
            self._f.flush()
            os.fsync(self._f.fileno())
        except OSError as exc:
            self._failed = True
            # roll the file back to the durable prefix so a commit whose
            # flush failed can never surface as committed after recovery
            try:
                os.truncate(self._path, self._durable_offset)
            except OSError:
                pass
            raise StoreError(f"flush failed: {exc}") from exc
        self._durable_offset = self._size

    def do_commit(self, txn: TransactionDescriptor) -> None:
        self._txn_check_active(txn.txn_id)
        if txn.ct is None:
            raise StoreError(f"commit of txn {txn.txn_id!r} without a ct")
        with self._lock:
            self._append(JournalRecord(RecordKind.COMMIT, txn.txn_id, txn.ct))
            self._flush_locked()  # commit is acknowledged only once durable
        self._txn_terminate(txn.txn_id)

    def append_manifest(self, txn: TransactionDescriptor, payload: bytes) -> None:
        """Attach an opaque manifest entry to an open transaction."""
        self._txn_check_active(txn.txn_id)
        with self._lock:
            self._append(JournalRecord(RecordKind.MANIFEST, txn.txn_id, payload=payload))

    def close(self) -> None:
        try:
            self._f.close()
        except OSError:
            pass

    def persist(self, path: str) -> None:
        self.flush()
        if os.path.abspath(path) != os.path.abspath(self._path):
            shutil.copyfile(self._path, path)

    @classmethod
    def recover(cls, path: str) -> "PersistentJournal":
        """Open an existing journal, repairing crash damage.

        Torn/corrupt tail bytes are truncated; transactions with no commit
        or abort in the valid prefix get an abort appended and flushed.
        Running this twice leaves the file byte-identical the second time.
        """
        if not os.path.exists(path):
            raise StoreError(f"no journal at {path}")
        with open(path, "rb") as f:
            data = f.read()
        records, valid_end = codec.scan_records(data)
        if valid_end < len(data):
            os.truncate(path, valid_end)
        unterminated: dict[str, None] = {}
        for rec in records:
            if rec.kind == RecordKind.BEGIN:
                unterminated[rec.txn_id] = None
            elif rec.kind in (RecordKind.COMMIT, RecordKind.ABORT):
                unterminated.pop(rec.txn_id, None)
        journal = cls(path, _records=records)
        if unterminated:
            with journal._lock:
                for txn_id in unterminated:
                    journal._append(JournalRecord(RecordKind.ABORT, txn_id))
                journal._flush_locked()
        return journal
