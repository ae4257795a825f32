"""Pure-Python walk kernels: the reference implementation of the hot loops.

The compiled backend (`raptorwalk._engine._core`) mirrors these functions
draw-for-draw: same splitmix64 stream, same bounded-integer mapping, same
node-ascending processing order, so both backends yield identical results.

Round model (shared by every kernel that forwards packets): at the start of a
round every node with a nonempty forward queue is a sender; senders act in
ascending node id, each dequeues its head-of-line packet, picks a uniform
neighbor, and the delivery is processed immediately.  Packets delivered in
round t join queue tails and cannot be forwarded again before round t+1.

Only the pure backend supports the optional trace callback
``trace(round, node, event, packet_label, counter)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..rng import Stream

BACKEND = "python"


def _pylist(x):
    """Native-Python-int copy of a sequence (numpy scalars overflow the RNG)."""
    return x.tolist() if hasattr(x, "tolist") else list(x)


@dataclass
class PrecodeResult:
    absorb_events: list        # (round, node, source, packet, counter)
    discards: list             # (packet, counter)
    counters: list             # final per-packet hop counters
    transmissions: int
    rounds: int
    aborted: bool


@dataclass
class RaptorResult:
    accept_events: list        # (round, node, y_index)
    discard_counters: list     # per y: final counter at discard (or last value)
    transmissions: int
    rounds: int
    aborted: bool


@dataclass
class InferenceResult:
    times: list                # [n][k] -> list of visit rounds (capped)
    first_seen: list           # per node: source index of first visiting packet, -1 if none
    stopped: list              # per node: recording finished before the guard
    stop_round: list
    merged_first: list
    merged_last: list
    merged_count: list
    counters: list             # per packet hop counters
    transmissions: int
    rounds: int


@dataclass
class _Queues:
    """Per-node FIFO of packet indices as linked lists, plus the sender set."""

    n: int
    head: list = field(init=False)
    tail: list = field(init=False)
    nxt: list = field(init=False)
    occupied: set = field(init=False)

    def __post_init__(self):
        self.head = [-1] * self.n
        self.tail = [-1] * self.n
        self.nxt = []
        self.occupied = set()

    def register(self, n_packets: int):
        self.nxt = [-1] * n_packets

    def push(self, node: int, pkt: int):
        self.nxt[pkt] = -1
        if self.head[node] < 0:
            self.head[node] = self.tail[node] = pkt
            self.occupied.add(node)
        else:
            self.nxt[self.tail[node]] = pkt
            self.tail[node] = pkt

    def pop(self, node: int) -> int:
        pkt = self.head[node]
        self.head[node] = self.nxt[pkt]
        if self.head[node] < 0:
            self.tail[node] = -1
            self.occupied.discard(node)
        return pkt


def _neighbor(indptr, indices, stream: Stream, u: int) -> int:
    base = indptr[u]
    deg = indptr[u + 1] - base
    return indices[base + stream.below(deg)]


def precode_run(indptr, indices, pkt_start, pkt_src, thresholds, is_precode,
                capacity, owner_source, k, force_cap, guard_rounds, seed,
                trace=None) -> PrecodeResult:
    """Circulate source copies until each is absorbed by a pre-code output
    node (counter past that node's threshold) or discarded as unplaceable."""
    indptr = _pylist(indptr)
    indices = _pylist(indices)
    n = len(indptr) - 1
    thresholds = _pylist(thresholds)
    is_precode = _pylist(is_precode)
    capacity = _pylist(capacity)
    owner_source = _pylist(owner_source)
    n_pkt = len(pkt_start)
    stream = Stream(seed)

    q = _Queues(n)
    q.register(n_pkt)
    pkt_start = _pylist(pkt_start)
    for p in range(n_pkt):
        q.push(pkt_start[p], p)
    counters = [0] * n_pkt
    src_of = _pylist(pkt_src)
    absorbed = [bytearray(k) if is_precode[w] else None for w in range(n)]
    eligible = [0] * k
    for w in range(n):
        if is_precode[w] and capacity[w] > 0:
            for s in range(k):
                if owner_source[w] != s:
                    eligible[s] += 1

    absorb_events = []
    discards = []
    transmissions = 0
    circulating = n_pkt
    rounds = 0
    while circulating > 0:
        rounds += 1
        if rounds > guard_rounds:
            return PrecodeResult(absorb_events, discards, counters,
                                 transmissions, rounds - 1, True)
        for u in sorted(q.occupied):
            p = q.pop(u)
            if trace:
                trace(rounds, u, "send", f"c{p}", counters[p])
            w = _neighbor(indptr, indices, stream, u)
            transmissions += 1
            c = counters[p] + 1
            counters[p] = c
            s = src_of[p]
            if (is_precode[w] and capacity[w] > 0 and not absorbed[w][s]
                    and owner_source[w] != s and c >= thresholds[w]):
                absorbed[w][s] = 1
                capacity[w] -= 1
                eligible[s] -= 1
                if capacity[w] == 0:
                    for s2 in range(k):
                        if not absorbed[w][s2] and owner_source[w] != s2:
                            eligible[s2] -= 1
                absorb_events.append((rounds, w, s, p, c))
                circulating -= 1
                if trace:
                    trace(rounds, w, "absorb", f"c{p}", c)
            elif c > force_cap and eligible[s] == 0:
                discards.append((p, c))
                circulating -= 1
                if trace:
                    trace(rounds, w, "discard", f"c{p}", c)
            else:
                q.push(w, p)
    return PrecodeResult(absorb_events, discards, counters,
                         transmissions, rounds, False)


def raptor_run(indptr, indices, origins, thresholds, accept_prob,
               self_accept, discard_precedence, guard_rounds, seed,
               trace=None) -> RaptorResult:
    """Circulate the pre-coded packets; first visits are accept opportunities,
    revisits past the local threshold discard the packet forever."""
    indptr = _pylist(indptr)
    indices = _pylist(indices)
    n = len(indptr) - 1
    thresholds = _pylist(thresholds)
    accept_prob = _pylist(accept_prob)
    origins = _pylist(origins)
    m = len(origins)
    stream = Stream(seed)

    visited = [bytearray(n) for _ in range(m)]
    accept_events = []
    q = _Queues(n)
    q.register(m)
    for j in range(m):
        o = origins[j]
        if self_accept:
            visited[j][o] = 1
            if stream.random() < accept_prob[o]:
                accept_events.append((0, o, j))
                if trace:
                    trace(0, o, "accept", f"y{j}", 0)
        q.push(o, j)

    counters = [0] * m
    discard_counters = [-1] * m
    transmissions = 0
    circulating = m
    rounds = 0
    while circulating > 0:
        rounds += 1
        if rounds > guard_rounds:
            return RaptorResult(accept_events, discard_counters,
                                transmissions, rounds - 1, True)
        for u in sorted(q.occupied):
            j = q.pop(u)
            if trace:
                trace(rounds, u, "send", f"y{j}", counters[j])
            v = _neighbor(indptr, indices, stream, u)
            transmissions += 1
            c = counters[j] + 1
            counters[j] = c
            row = visited[j]
            if not row[v]:
                row[v] = 1
                if stream.random() < accept_prob[v]:
                    accept_events.append((rounds, v, j))
                    if trace:
                        trace(rounds, v, "accept", f"y{j}", c)
                q.push(v, j)
            else:
                compare = c if discard_precedence else c - 1
                if compare >= thresholds[v]:
                    discard_counters[j] = c
                    circulating -= 1
                    if trace:
                        trace(rounds, v, "discard", f"y{j}", c)
                else:
                    q.push(v, j)
    return RaptorResult(accept_events, discard_counters,
                        transmissions, rounds, False)


def inference_run(indptr, indices, starts, c2, cap, guard_rounds, seed,
                  trace=None) -> InferenceResult:
    """One walking packet per source; every node logs visit rounds per source
    until its first-seen packet has visited c2 times.

    Visit lists are capped at `cap` entries per (node, source); the cap is far
    above c2, so it only guards memory against pathological imbalance.
    """
    indptr = _pylist(indptr)
    indices = _pylist(indices)
    n = len(indptr) - 1
    k = len(starts)
    stream = Stream(seed)

    q = _Queues(n)
    q.register(k)
    starts = _pylist(starts)
    for s in range(k):
        q.push(starts[s], s)
    times = [[[] for _ in range(k)] for _ in range(n)]
    first_seen = [-1] * n
    stopped = [False] * n
    stop_round = [-1] * n
    merged_first = [-1] * n
    merged_last = [-1] * n
    merged_count = [0] * n
    counters = [0] * k
    transmissions = 0
    n_stopped = 0
    rounds = 0
    while n_stopped < n and rounds < guard_rounds:
        rounds += 1
        for u in sorted(q.occupied):
            s = q.pop(u)
            v = _neighbor(indptr, indices, stream, u)
            transmissions += 1
            counters[s] += 1
            if not stopped[v]:
                lst = times[v][s]
                if len(lst) < cap:
                    lst.append(rounds)
                if first_seen[v] < 0:
                    first_seen[v] = s
                if merged_count[v] == 0:
                    merged_first[v] = rounds
                merged_last[v] = rounds
                merged_count[v] += 1
                if trace:
                    trace(rounds, v, "record", f"s{s}", counters[s])
                if s == first_seen[v] and len(times[v][s]) >= c2:
                    stopped[v] = True
                    stop_round[v] = rounds
                    n_stopped += 1
            q.push(v, s)
    return InferenceResult(times, first_seen, stopped, stop_round,
                           merged_first, merged_last, merged_count,
                           counters, transmissions, rounds)


def visit_stats_run(indptr, indices, starts, rounds, seed):
    """Free simultaneous walks (no queueing): per-node visit count and the
    first/last visit rounds.  Returns (counts, first, last) lists."""
    indptr = _pylist(indptr)
    indices = _pylist(indices)
    n = len(indptr) - 1
    stream = Stream(seed)
    pos = _pylist(starts)
    counts = [0] * n
    first = [-1] * n
    last = [-1] * n
    for r in range(1, rounds + 1):
        for i in range(len(pos)):
            v = _neighbor(indptr, indices, stream, pos[i])
            pos[i] = v
            counts[v] += 1
            if first[v] < 0:
                first[v] = r
            last[v] = r
    return counts, first, last


def cover_time_run(indptr, indices, start, guard_rounds, seed) -> int:
    """Rounds for a single free walk from `start` to visit every node.

    Returns -1 if the guard is hit first (disconnected or absurd guard).
    """
    indptr = _pylist(indptr)
    indices = _pylist(indices)
    n = len(indptr) - 1
    stream = Stream(seed)
    seen = bytearray(n)
    seen[start] = 1
    remaining = n - 1
    pos = start
    for r in range(1, guard_rounds + 1):
        pos = _neighbor(indptr, indices, stream, pos)
        if not seen[pos]:
            seen[pos] = 1
            remaining -= 1
            if remaining == 0:
                return r
    return -1
