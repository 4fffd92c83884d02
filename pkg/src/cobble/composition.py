"""Store composition: windowed ministores, the WAL+memtable pair, checkpoints.

Writes fan out to every ministore whose window contains the transaction's
timestamp; reads route to one covering ministore (lowest read priority).
A checkpoint freezes a sealed store's consolidated state at its window top.
"""

from __future__ import annotations

from dataclasses import dataclass

from .effects import Effect
from .memory import MapStore
from .persistent import PersistentJournal
from .store import (
    Store,
    StoreError,
    TransactionDescriptor,
    Window,
    WindowError,
    check_key,
)

READ_PRIORITY_MAP = 0
READ_PRIORITY_WAL = 1
READ_PRIORITY_CHECKPOINT = 0


@dataclass
class Ministore:
    store: Store
    window: Window
    read_priority: int


class ComposedStore(Store):
    """Write-all / read-one composition of ministores."""

    def __init__(self, ministores: list[Ministore]):
        if not ministores:
            raise StoreError("composition needs at least one ministore")
        self.ministores = list(ministores)

    @property
    def window(self) -> Window:
        lo = min(m.window.lo for m in self.ministores)
        his = [m.window.hi for m in self.ministores]
        hi = None if any(h is None for h in his) else max(his)
        return Window(lo, hi)

    def _targets(self, ts: int) -> list[Ministore]:
        targets = [m for m in self.ministores if m.window.contains(ts)]
        if not targets:
            raise WindowError(f"timestamp {ts} outside every ministore window")
        return targets

    def do_begin(self, txn: TransactionDescriptor) -> None:
        for m in self._targets(txn.st):
            m.store.do_begin(txn)

    def do_update(self, txn: TransactionDescriptor, key: str, effect: Effect) -> None:
        for m in self._targets(txn.st):
            m.store.do_update(txn, key, effect)

    def do_commit(self, txn: TransactionDescriptor) -> None:
        if txn.ct is None:
            raise StoreError("commit without a ct")
        for m in self._targets(txn.ct):
            m.store.do_commit(txn)

    def do_abort(self, txn: TransactionDescriptor) -> None:
        for m in self._targets(txn.st):
            m.store.do_abort(txn)

    def lookup(self, key: str, read_st: int,
               txn: TransactionDescriptor | None = None) -> Effect | None:
        window = self.window
        if read_st < window.lo:
            raise WindowError(f"read_st {read_st} not covered (window starts at {window.lo})")
        # a ministore can answer iff it holds the composition's entire
        # history below read_st (or below its sealed top, which then is all
        # there is)
        needed = read_st if window.hi is None else min(read_st, window.hi)
        coverers = [m for m in self.ministores
                    if m.window.lo == window.lo
                    and (m.window.hi is None or m.window.hi >= needed)]
        if not coverers:
            raise WindowError(f"no single ministore covers read_st {read_st}")
        best = min(coverers, key=lambda m: m.read_priority)
        return best.store.lookup(key, read_st, txn)


class WALMemtablePair(Store):
    """Durable journal plus a fast map over the same window.

    Updates and commits hit the WAL first (commit acknowledged after fsync),
    then the memtable; reads come from the memtable. The two stay
    lookup-equivalent at all times.
    """

    def __init__(self, wal: PersistentJournal, memtable: MapStore, window: Window):
        self.wal = wal
        self.memtable = memtable
        self._window = window
        self.committed_effects = 0
        self._last_ct: int | None = None

    @property
    def window(self) -> Window:
        return self._window

    @property
    def sealed(self) -> bool:
        return self._window.hi is not None

    def do_begin(self, txn: TransactionDescriptor) -> None:
        if self.sealed:
            raise StoreError("begin on a sealed pair")
        self.wal.do_begin(txn)
        self.memtable.do_begin(txn)

    def do_update(self, txn: TransactionDescriptor, key: str, effect: Effect) -> None:
        self.wal.do_update(txn, key, effect)
        self.memtable.do_update(txn, key, effect)

    def do_commit(self, txn: TransactionDescriptor) -> None:
        self.wal.do_commit(txn)  # durability gate: fsync happens in here
        self.memtable.do_commit(txn)
        self.committed_effects += len(txn.effect_buffer)
        if txn.ct is not None and (self._last_ct is None or txn.ct > self._last_ct):
            self._last_ct = txn.ct

    def do_abort(self, txn: TransactionDescriptor) -> None:
        self.wal.do_abort(txn)
        self.memtable.do_abort(txn)

    def lookup(self, key: str, read_st: int,
               txn: TransactionDescriptor | None = None) -> Effect | None:
        return self.memtable.lookup(key, read_st, txn)

    def written_keys(self) -> set[str]:
        return self.memtable.written_keys()

    def seal(self, hi: int | None = None) -> Window:
        """Fix the window top to one past the last committed ct."""
        if self.sealed:
            return self._window
        if hi is None:
            hi = self._window.lo if self._last_ct is None else self._last_ct + 1
        self._window = Window(self._window.lo, hi)
        self.memtable.seal(self._window)
        return self._window


def rebuild_wmp(wal_path: str, lo: int) -> WALMemtablePair:
    """Reconstruct a live pair from its WAL after a crash.

    Journal recovery aborts whatever the crash left open; the memtable is
    replayed from the committed transactions in commit-timestamp order.
    """
    wal = PersistentJournal.recover(wal_path)
    memtable = MapStore()
    last_ct = None
    effects = 0
    for ct, st, txn_id, writes in wal.committed_txns():
        desc = TransactionDescriptor(txn_id, st, ct)
        desc.effect_buffer = dict(writes)
        memtable.do_begin(desc)
        memtable.do_commit(desc)
        last_ct = ct if last_ct is None else max(last_ct, ct)
        effects += len(writes)
    wmp = WALMemtablePair(wal, memtable, Window(lo, None))
    wmp._last_ct = last_ct
    wmp.committed_effects = effects
    return wmp


class Checkpoint(Store):
    """Single consolidated effect per key, valid for reads at or above hi.

    Immutable: never receives transactional writes. Reads below hi cannot be
    answered (the per-version history was folded away) and raise.
    """

    def __init__(self, entries: dict[str, Effect], window: Window,
                 path: str | None = None):
        if window.hi is None:
            raise StoreError("checkpoint requires a sealed window")
        self.entries = entries
        self.window = window
        self.path = path

    @property
    def key_range(self) -> tuple[str, str] | None:
        if not self.entries:
            return None
        keys = sorted(self.entries, key=lambda k: k.encode("utf-8"))
        return keys[0], keys[-1]

    def covers_key(self, key: str) -> bool:
        kr = self.key_range
        if kr is None:
            return False
        kb = key.encode("utf-8")
        return kr[0].encode("utf-8") <= kb <= kr[1].encode("utf-8")

    def lookup(self, key: str, read_st: int,
               txn: TransactionDescriptor | None = None) -> Effect | None:
        check_key(key)
        if read_st < self.window.hi:
            raise WindowError(
                f"checkpoint consolidated at {self.window.hi} cannot answer read_st {read_st}")
        return self.entries.get(key)

    def _read_only(self):
        raise StoreError("checkpoint is read-only")

    def do_begin(self, txn):
        self._read_only()

    def do_update(self, txn, key, effect):
        self._read_only()

    def do_commit(self, txn):
        self._read_only()

    def do_abort(self, txn):
        self._read_only()

    def persist(self, path: str, fire_point: str | None = None) -> None:
        from . import codec

        hi, lo = self.window.hi, self.window.lo
        single = {k: [(hi - 1, lo, e)] for k, e in self.entries.items()}
        codec.write_map_file(path, self.window, single, fire_point=fire_point)

    @classmethod
    def load(cls, path: str, window: Window | None = None) -> "Checkpoint":
        from . import codec

        file_window, raw = codec.read_map_file(path)
        window = window or file_window
        if window is None:
            raise StoreError(f"{path}: empty checkpoint with no window metadata")
        entries = {}
        for key, versions in raw.items():
            if len(versions) != 1:
                raise StoreError(f"{path}: checkpoint entries must be single-version")
            entries[key] = versions[0][2]
        ck = cls(entries, window)
        ck.path = path
        return ck


def make_checkpoint(src: Store, window: Window) -> Checkpoint:
    """Consolidate a sealed store into key -> effect at window.hi."""
    if window.hi is None:
        raise StoreError("cannot checkpoint an open window")
    sealed = getattr(src, "sealed", True)
    if not sealed:
        raise StoreError("cannot checkpoint an unsealed store")
    entries: dict[str, Effect] = {}
    for key in sorted(src.written_keys()):
        eff = src.lookup(key, window.hi)
        if eff is not None:
            entries[key] = eff
    return Checkpoint(entries, window)
