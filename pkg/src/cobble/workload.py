"""Benchmark workload generation: zipfian key choice and per-transaction
operation streams, deterministic per (seed, thread).
"""

from __future__ import annotations

import random
from dataclasses import dataclass

OPS_PER_TXN = 5
WORKLOAD_NAMES = ("txn", "old_reads", "txn_increments")


class ZipfianGenerator:
    """Zipf-distributed ranks in [0, n) with the usual benchmark skew.

    Rank 0 is the hottest item. Constants follow the standard rejection-free
    construction; next() is O(1) per draw.
    """

    def __init__(self, n: int, theta: float = 0.99):
        if n < 1:
            raise ValueError("need at least one item")
        self.n = n
        self.theta = theta
        self.zetan = sum(1.0 / (i ** theta) for i in range(1, n + 1))
        self.zeta2 = 1.0 + (0.5 ** theta)
        self.alpha = 1.0 / (1.0 - theta)
        self.eta = ((1.0 - (2.0 / n) ** (1.0 - theta))
                    / (1.0 - self.zeta2 / self.zetan))

    def next(self, rng: random.Random) -> int:
        u = rng.random()
        uz = u * self.zetan
        if uz < 1.0:
            return 0
        if uz < self.zeta2:
            return 1
        return int(self.n * (self.eta * u - self.eta + 1.0) ** self.alpha)


@dataclass(frozen=True)
class WorkloadSpec:
    name: str
    # per-op probabilities; old_read is drawn first, the rest splits what is left
    old_read: float
    lookup: float
    assign: float
    incr: float
    ops_per_txn: int = OPS_PER_TXN
    key_space: int = 1000
    zipf_theta: float = 0.99

    def key(self, rank: int) -> str:
        return f"key{rank}"


MIXES = {
    # txn: 50/50 lookups and assignments
    "txn": WorkloadSpec("txn", old_read=0.0, lookup=0.5, assign=0.5, incr=0.0),
    # old_reads: txn shape, but each lookup flips a coin between the current
    # snapshot and one strictly before the last commit
    "old_reads": WorkloadSpec("old_reads", old_read=0.25, lookup=0.25,
                              assign=0.5, incr=0.0),
    # txn_increments: 50/30/20 lookups, assignments, increments
    "txn_increments": WorkloadSpec("txn_increments", old_read=0.0, lookup=0.5,
                                   assign=0.3, incr=0.2),
}


def workload_spec(name: str, key_space: int = 1000) -> WorkloadSpec:
    if name not in MIXES:
        raise ValueError(f"unknown workload {name!r}")
    base = MIXES[name]
    if key_space == base.key_space:
        return base
    return WorkloadSpec(base.name, base.old_read, base.lookup, base.assign,
                        base.incr, base.ops_per_txn, key_space, base.zipf_theta)


def thread_rng(seed: int, thread: int) -> random.Random:
    return random.Random(seed * 1000003 + thread)


def next_txn_ops(spec: WorkloadSpec, rng: random.Random,
                 zipf: ZipfianGenerator) -> list[tuple]:
    """One transaction's operations.

    Tuples: ("lookup", key) | ("assign", key, value) | ("incr", key, amount)
    | ("old_read", key). Old reads pick their snapshot at execution time,
    since the horizon and latest commit move underneath the benchmark.
    """
    ops = []
    for _ in range(spec.ops_per_txn):
        key = spec.key(zipf.next(rng))
        r = rng.random()
        if r < spec.old_read:
            ops.append(("old_read", key))
            continue
        r = (r - spec.old_read) / (1.0 - spec.old_read)
        if r < spec.lookup / (spec.lookup + spec.assign + spec.incr):
            ops.append(("lookup", key))
        elif r < (spec.lookup + spec.assign) / (spec.lookup + spec.assign + spec.incr):
            ops.append(("assign", key, rng.randint(0, 1_000_000)))
        else:
            ops.append(("incr", key, rng.randint(1, 100)))
    return ops
