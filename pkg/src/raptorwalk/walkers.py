"""Simple-random-walk operations and the timing statistics behind the
estimator-driven protocol variant.

The heavy multi-round loops live in `raptorwalk._engine`; this module holds
the single-step/single-round operations, the per-node visit log, and the
(n, k) estimators derived from it.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from statistics import fmean

from ._engine import get_engine
from .network import ConfigError, GraphTopology
from .rng import Stream


class EstimateUnavailable(Exception):
    """Raised when a node's visit log cannot support an (n, k) estimate."""


def step_walk(current: int, g: GraphTopology, stream: Stream) -> int:
    """One uniform step to a neighbor of `current`."""
    base = g.indptr[current]
    deg = g.indptr[current + 1] - base
    if deg < 1:
        raise ValueError(f"node {current} is isolated")
    return int(g.indices[base + stream.below(int(deg))])


def cover_threshold(n_est: float, c1: float) -> int:
    """Hop threshold ceil(c1 * n * ln n) that certifies full coverage."""
    if c1 <= 0:
        raise ConfigError("C1 must be positive")
    if n_est < 2:
        raise ConfigError(f"need n >= 2, got {n_est}")
    return math.ceil(c1 * n_est * math.log(n_est))


def forward_round(queues: dict[int, deque], g: GraphTopology, stream: Stream,
                  deliver=None) -> int:
    """One synchronous forwarding round over explicit per-node FIFO queues.

    Every node with a nonempty queue (ascending id) dequeues its head-of-line
    packet and sends it to a uniform neighbor.  `deliver(node, packet)` may
    return False to stop the packet (absorb/discard); by default packets are
    re-enqueued at the receiver.  Returns the number of packets moved.

    This is the reference for the round structure hard-coded in the kernels.
    """
    moved = 0
    for u in sorted(node for node, dq in queues.items() if dq):
        pkt = queues[u].popleft()
        v = step_walk(u, g, stream)
        moved += 1
        if deliver is None or deliver(v, pkt):
            queues.setdefault(v, deque()).append(pkt)
    return moved


def measure_cover_time(g: GraphTopology, start: int, seed: int,
                       guard_rounds: int | None = None) -> int:
    """Rounds for one free walk from `start` to visit every node."""
    if guard_rounds is None:
        guard_rounds = 1000 * cover_threshold(g.n, 1.0)
    engine = get_engine()
    r = engine.cover_time_run(g.indptr, g.indices, int(start), guard_rounds, seed)
    if r < 0:
        raise RuntimeError(f"walk did not cover the graph in {guard_rounds} rounds")
    return r


def visit_stats(g: GraphTopology, starts: list[int], rounds: int, seed: int):
    """Merged visit statistics of free simultaneous walks.

    Returns (counts, first, last) per node; the mean inter-visit gap of node u
    is (last[u] - first[u]) / (counts[u] - 1).
    """
    engine = get_engine()
    return engine.visit_stats_run(g.indptr, g.indices, list(starts), rounds, seed)


# ---------------------------------------------------------------------------
# Visit-time records and estimators
# ---------------------------------------------------------------------------

@dataclass
class TimingStats:
    """Per-node record of source-packet visit rounds.

    Recording freezes once the first-seen source has visited `stop_count`
    times.  `cap` bounds each per-source list; it is far above stop_count and
    exists only to bound memory.
    """

    k: int
    stop_count: int
    cap: int = 0
    times: list = field(default_factory=list)   # [k] -> visit rounds
    first_seen: int = -1
    stopped: bool = False
    merged_first: int = -1
    merged_last: int = -1
    merged_count: int = 0

    def __post_init__(self):
        if self.cap <= 0:
            self.cap = 2 * self.stop_count + 32
        if not self.times:
            self.times = [[] for _ in range(self.k)]

    def seen_sources(self) -> list[int]:
        return [s for s in range(self.k) if self.times[s]]


def record_visit(stats: TimingStats, src: int, now: int) -> TimingStats:
    """Append one visit observation; no-op once recording has stopped."""
    if stats.stopped:
        return stats
    lst = stats.times[src]
    if lst and now <= lst[-1]:
        raise ValueError("visit times must be strictly increasing per source")
    if len(lst) < stats.cap:
        lst.append(now)
    if stats.first_seen < 0:
        stats.first_seen = src
    if stats.merged_count == 0:
        stats.merged_first = now
    stats.merged_last = now
    stats.merged_count += 1
    if src == stats.first_seen and len(stats.times[src]) >= stats.stop_count:
        stats.stopped = True
    return stats


def estimate_counts(stats: TimingStats, pairing: str = "merged",
                    visit_divisor: float = 2.0) -> tuple[float, float]:
    """Estimate (n_hat, k_hat) from one node's visit log.

    The mean per-source return gap T_visit estimates mu*n/d(u), so
    n_hat = T_visit / visit_divisor.  k_hat = T_visit / T_packet where
    T_packet comes from either the merged arrival stream ("merged", default)
    or the mean absolute difference of j-th visit times over source pairs
    ("aligned-abs").
    """
    per_source = {}
    for s in range(stats.k):
        t = stats.times[s]
        if len(t) >= 2:
            per_source[s] = (t[-1] - t[0]) / (len(t) - 1)
    seen = stats.seen_sources()
    if len(seen) < 2 or not per_source:
        raise EstimateUnavailable(
            f"need visits from >= 2 sources with repeats, saw {len(seen)}")
    t_visit = fmean(per_source.values())

    if pairing == "merged":
        if stats.merged_count < 2:
            raise EstimateUnavailable("fewer than 2 merged arrivals")
        t_packet = (stats.merged_last - stats.merged_first) / (stats.merged_count - 1)
    elif pairing == "aligned-abs":
        pair_vals = []
        for a in range(len(seen)):
            ta = stats.times[seen[a]]
            for b in range(a + 1, len(seen)):
                tb = stats.times[seen[b]]
                j = min(len(ta), len(tb))
                pair_vals.append(fmean(abs(ta[i] - tb[i]) for i in range(j)))
        if not pair_vals:
            raise EstimateUnavailable("no source pair observed")
        t_packet = fmean(pair_vals)
    else:
        raise ConfigError(f"unknown pairing {pairing!r}")

    if t_packet <= 0:
        raise EstimateUnavailable("degenerate inter-packet time")
    return t_visit / visit_divisor, t_visit / t_packet
