"""Windowed composition: write-all/read-one, the WAL+memtable pair, and
checkpoint consolidation."""

import pytest

from cobble.composition import (
    READ_PRIORITY_MAP,
    READ_PRIORITY_WAL,
    Checkpoint,
    ComposedStore,
    Ministore,
    WALMemtablePair,
    make_checkpoint,
    rebuild_wmp,
)
from cobble.effects import Effect
from cobble.memory import JournalStore, MapStore
from cobble.oracle import generate_trace, replay
from cobble.persistent import PersistentJournal
from cobble.store import (
    RecordKind,
    StoreError,
    TransactionDescriptor,
    Window,
    WindowError,
)
from test_stores import commit, eff_tuple


def fresh_wmp(tmp_path, lo=0, name="wal.log") -> WALMemtablePair:
    wal = PersistentJournal(str(tmp_path / name))
    return WALMemtablePair(wal, MapStore(), Window(lo, None))


class TestComposedStore:
    def test_needs_a_ministore(self):
        with pytest.raises(StoreError):
            ComposedStore([])

    def test_singleton_composition_is_transparent(self):
        plain = JournalStore()
        composed = ComposedStore([Ministore(JournalStore(), Window(0, None), 0)])
        trace = generate_trace(seed=1, txn_count=30)
        replay(plain, trace)
        replay(composed, trace)
        for rs in range(trace.max_ct() + 2):
            for key in trace.keys():
                assert eff_tuple(composed, key, rs) == eff_tuple(plain, key, rs)

    def test_lookup_below_window_raises(self):
        composed = ComposedStore([Ministore(JournalStore(), Window(5, None), 0)])
        with pytest.raises(WindowError):
            composed.lookup("k", 2)
        with pytest.raises(WindowError):
            composed.lookup("k", 4)
        # at the window floor the missing prefix is empty, so it answers
        assert composed.lookup("k", 5) is None

    def test_read_routes_to_lowest_priority(self):
        hits = []

        class Spy(JournalStore):
            def __init__(self, tag):
                super().__init__()
                self.tag = tag

            def lookup(self, key, read_st, txn=None):
                hits.append(self.tag)
                return super().lookup(key, read_st, txn)

        fast, slow = Spy("fast"), Spy("slow")
        composed = ComposedStore([
            Ministore(slow, Window(0, None), 1),
            Ministore(fast, Window(0, None), 0),
        ])
        composed.lookup("k", 1)
        assert hits == ["fast"]

    def test_overlap_region_agreement(self):
        # full store plus a capped twin; both answer reads inside the overlap
        full = Ministore(JournalStore(), Window(0, None), 1)
        capped = Ministore(MapStore(), Window(0, 40), 0)
        composed = ComposedStore([full, capped])
        trace = generate_trace(seed=2, txn_count=25)
        assert trace.max_ct() < 40
        replay(composed, trace)
        for rs in range(1, 40):
            for key in trace.keys():
                a = full.store.lookup(key, rs)
                b = capped.store.lookup(key, rs)
                assert a == b
                assert composed.lookup(key, rs) == b

    def test_commit_without_ct_rejected(self):
        composed = ComposedStore([Ministore(JournalStore(), Window(0, None), 0)])
        txn = TransactionDescriptor("a", st=0)
        composed.do_begin(txn)
        with pytest.raises(StoreError):
            composed.do_commit(txn)


class TestWALMemtablePair:
    def test_update_hits_wal_only(self, tmp_path):
        wmp = fresh_wmp(tmp_path)
        txn = TransactionDescriptor("a", st=0)
        wmp.do_begin(txn)
        wmp.do_update(txn, "k", Effect.assign(1))
        kinds = [r.kind for r in wmp.wal.records()]
        assert kinds == [RecordKind.BEGIN, RecordKind.UPDATE]
        # shared map state untouched until commit
        assert wmp.memtable.written_keys() == set()
        wmp.do_abort(txn)

    def test_commit_hits_both(self, tmp_path):
        wmp = fresh_wmp(tmp_path)
        commit(wmp, "a", st=0, ct=1, updates=[("k", Effect.assign(2))])
        assert wmp.wal.records()[-1].kind == RecordKind.COMMIT
        assert wmp.memtable.written_keys() == {"k"}
        assert eff_tuple(wmp, "k", 2) == (2, 0)
        assert wmp.committed_effects == 1

    def test_reads_come_from_the_memtable(self, tmp_path):
        wmp = fresh_wmp(tmp_path)
        commit(wmp, "a", st=0, ct=1, updates=[("k", Effect.assign(2))])
        calls = []
        orig = wmp.memtable.lookup

        def spy(key, read_st, txn=None):
            calls.append(key)
            return orig(key, read_st, txn)

        wmp.memtable.lookup = spy
        wmp.lookup("k", 2)
        assert calls == ["k"]

    def test_wal_and_memtable_stay_equivalent(self, tmp_path):
        wmp = fresh_wmp(tmp_path)
        trace = generate_trace(seed=4, txn_count=30)
        replay(wmp, trace)
        for rs in range(1, trace.max_ct() + 2):
            for key in trace.keys():
                assert eff_tuple(wmp.memtable, key, rs) == eff_tuple(wmp.wal, key, rs)

    def test_priority_flip_gives_identical_reads(self, tmp_path):
        wmp = fresh_wmp(tmp_path)
        trace = generate_trace(seed=5, txn_count=20)
        replay(wmp, trace)
        w = Window(0, None)
        normal = ComposedStore([
            Ministore(wmp.memtable, w, READ_PRIORITY_MAP),
            Ministore(wmp.wal, w, READ_PRIORITY_WAL),
        ])
        flipped = ComposedStore([
            Ministore(wmp.memtable, w, READ_PRIORITY_WAL),
            Ministore(wmp.wal, w, READ_PRIORITY_MAP),
        ])
        for rs in range(1, trace.max_ct() + 2):
            for key in trace.keys():
                assert (eff_tuple(normal, key, rs) == eff_tuple(flipped, key, rs))

    def test_seal_boundary_arithmetic(self, tmp_path):
        wmp = fresh_wmp(tmp_path, lo=4)
        commit(wmp, "a", st=4, ct=9, updates=[("k", Effect.incr(1))])
        sealed = wmp.seal()
        assert (sealed.lo, sealed.hi) == (4, 10)
        # consecutive pair tiles with no gap
        nxt = fresh_wmp(tmp_path, lo=sealed.hi, name="wal2.log")
        assert nxt.window.lo == 10

    def test_seal_of_empty_pair_collapses_to_lo(self, tmp_path):
        wmp = fresh_wmp(tmp_path, lo=7)
        assert wmp.seal() == Window(7, 7)

    def test_begin_on_sealed_pair_rejected(self, tmp_path):
        wmp = fresh_wmp(tmp_path)
        wmp.seal()
        with pytest.raises(StoreError):
            wmp.do_begin(TransactionDescriptor("a", st=0))

    def test_rebuild_from_wal(self, tmp_path):
        wmp = fresh_wmp(tmp_path)
        trace = generate_trace(seed=6, txn_count=25)
        replay(wmp, trace)
        # simulate a crash: no close, no seal; reopen from the log alone
        path = wmp.wal.path
        wmp.wal.close()
        back = rebuild_wmp(path, lo=0)
        assert back.committed_effects == wmp.committed_effects
        for rs in range(1, trace.max_ct() + 2):
            for key in trace.keys():
                assert eff_tuple(back, key, rs) == eff_tuple(wmp, key, rs)
        assert back.seal() == wmp.seal()


class TestCheckpoint:
    def test_consolidates_assign_then_increment(self):
        src = MapStore()
        commit(src, "A", st=0, ct=1, updates=[("k", Effect.assign(2))])
        commit(src, "B", st=1, ct=2, updates=[("k", Effect.incr(1))])
        src.seal(Window(0, 3))
        ck = make_checkpoint(src, Window(0, 3))
        assert ck.entries == {"k": Effect(2, 1)}

    def test_empty_source(self):
        src = MapStore()
        src.seal(Window(0, 1))
        ck = make_checkpoint(src, Window(0, 1))
        assert ck.entries == {}
        assert ck.key_range is None
        assert ck.lookup("k", 5) is None

    def test_unsealed_source_rejected(self, tmp_path):
        wmp = fresh_wmp(tmp_path)
        with pytest.raises(StoreError):
            make_checkpoint(wmp, Window(0, 1))

    def test_open_window_rejected(self):
        with pytest.raises(StoreError):
            Checkpoint({}, Window(0, None))

    def test_reads_below_hi_raise(self):
        ck = Checkpoint({"k": Effect(1, 0)}, Window(0, 5))
        with pytest.raises(WindowError):
            ck.lookup("k", 4)
        assert ck.lookup("k", 5) == Effect(1, 0)

    def test_read_only(self):
        ck = Checkpoint({}, Window(0, 1))
        with pytest.raises(StoreError):
            ck.do_begin(TransactionDescriptor("a", st=0))
        with pytest.raises(StoreError):
            ck.do_commit(TransactionDescriptor("a", st=0, ct=1))

    def test_matches_source_at_and_above_hi(self):
        for seed in range(4):
            trace = generate_trace(seed=seed, txn_count=30)
            src = replay(MapStore(), trace)
            hi = trace.max_ct() + 1
            src.seal(Window(0, hi))
            ck = make_checkpoint(src, Window(0, hi))
            for key in trace.keys():
                want = eff_tuple(src, key, hi)
                for t in (hi, hi + 1, hi + 50):
                    assert eff_tuple(ck, key, t) == want

    def test_key_range_and_covers(self):
        ck = Checkpoint({"b": Effect(1, 0), "f": Effect(2, 0)}, Window(0, 2))
        assert ck.key_range == ("b", "f")
        assert ck.covers_key("b") and ck.covers_key("d") and ck.covers_key("f")
        assert not ck.covers_key("a") and not ck.covers_key("g")

    def test_persist_load_round_trip(self, tmp_path):
        src = MapStore()
        commit(src, "A", st=0, ct=3, updates=[("k", Effect.assign(2)),
                                              ("j", Effect.incr(-4))])
        src.seal(Window(0, 4))
        ck = make_checkpoint(src, Window(0, 4))
        path = str(tmp_path / "ck.cb")
        ck.persist(path)
        back = Checkpoint.load(path)
        assert back.entries == ck.entries
        assert back.window == ck.window
        assert back.path == path
