"""Timestamp generator: lease/notify bookkeeping and the snapshot bound."""

import random
import threading

import pytest

from cobble.timestamps import TimestampError, TimestampGenerator


class TestPinnedScenarios:
    def test_fresh_generator(self):
        gen = TimestampGenerator()
        assert gen.peek_snapshot() == 0
        assert gen.next() == 0
        assert gen.next() == 1

    def test_notify_advances_snapshot(self):
        gen = TimestampGenerator()
        ct = gen.next()
        assert gen.peek_snapshot() == 0
        gen.end_commit_notify(ct)
        assert gen.peek_snapshot() == 1

    def test_out_of_order_notify_holds_the_bound(self):
        gen = TimestampGenerator()
        c0, c1 = gen.next(), gen.next()
        gen.end_commit_notify(c1)
        # c0 still in flight: snapshots must not expose c1
        assert gen.peek_snapshot() == 0
        gen.end_commit_notify(c0)
        assert gen.peek_snapshot() == 2

    def test_gap_stops_at_oldest_pending(self):
        gen = TimestampGenerator()
        gen.next(), gen.next(), gen.next()  # 0 1 2
        gen.end_commit_notify(2)
        gen.end_commit_notify(0)
        assert gen.peek_snapshot() == 1
        gen.end_commit_notify(1)
        assert gen.peek_snapshot() == 3

    def test_renotify_is_a_noop(self):
        gen = TimestampGenerator()
        ct = gen.next()
        gen.end_commit_notify(ct)
        gen.end_commit_notify(ct)
        assert gen.peek_snapshot() == 1

    def test_notify_of_never_leased_ct_is_an_error(self):
        gen = TimestampGenerator()
        with pytest.raises(TimestampError):
            gen.end_commit_notify(5)

    def test_snapshot_can_equal_next_lease(self):
        # with nothing running the bound catches up to the lease counter, so
        # the next transaction may see st == its own ct; visibility stays
        # strict (ct < st) so it never reads itself
        gen = TimestampGenerator()
        gen.end_commit_notify(gen.next())
        st = gen.peek_snapshot()
        ct = gen.next()
        assert st == ct == 1


class TestRecoverFloor:
    def test_resumes_above_history(self):
        gen = TimestampGenerator()
        gen.recover_floor(7)
        assert gen.peek_snapshot() == 8
        assert gen.next() == 8

    def test_floor_zero(self):
        gen = TimestampGenerator()
        gen.recover_floor(0)
        assert gen.next() == 1

    def test_only_once(self):
        gen = TimestampGenerator()
        gen.recover_floor(3)
        with pytest.raises(TimestampError):
            gen.recover_floor(9)

    def test_rejected_after_leases(self):
        gen = TimestampGenerator()
        gen.next()
        with pytest.raises(TimestampError):
            gen.recover_floor(10)


class TestProperties:
    def test_snapshot_monotone_under_random_notify_order(self):
        rng = random.Random(2024)
        for _ in range(50):
            gen = TimestampGenerator()
            pending = []
            leased = 0
            last_peek = 0
            for _ in range(200):
                if pending and (rng.random() < 0.5 or len(pending) > 10):
                    idx = rng.randrange(len(pending))
                    gen.end_commit_notify(pending.pop(idx))
                else:
                    pending.append(gen.next())
                    leased += 1
                peek = gen.peek_snapshot()
                assert peek >= last_peek
                # every pending ct stays invisible
                for ct in pending:
                    assert ct >= peek
                last_peek = peek
            for ct in pending:
                gen.end_commit_notify(ct)
            # fully drained: the bound catches up to the lease counter
            assert gen.peek_snapshot() == leased

    def test_leases_are_contiguous_and_unique(self):
        gen = TimestampGenerator()
        seen = [gen.next() for _ in range(1000)]
        assert seen == list(range(1000))

    def test_threaded_lease_uniqueness(self):
        gen = TimestampGenerator()
        out: list[list[int]] = [[] for _ in range(8)]

        def grab(slot: int):
            for _ in range(500):
                out[slot].append(gen.next())

        threads = [threading.Thread(target=grab, args=(i,)) for i in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        flat = [ts for chunk in out for ts in chunk]
        assert sorted(flat) == list(range(8 * 500))
