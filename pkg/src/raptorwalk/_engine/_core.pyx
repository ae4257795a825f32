# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled walk kernels.

Draw-for-draw identical to raptorwalk._engine.pure: same splitmix64 stream,
same Lemire bounded-integer mapping, same ascending-sender round order.  Any
behavioral change here must be made in pure.py as well; the parity tests
compare the two on full phase runs.
"""

import numpy as np

from raptorwalk._engine.pure import InferenceResult, PrecodeResult, RaptorResult

BACKEND = "compiled"

cdef extern from *:
    """
    #include <stdint.h>
    typedef struct { uint64_t state; } rw_rng;
    static inline uint64_t rw_next(rw_rng *r) {
        r->state += 0x9E3779B97F4A7C15ULL;
        uint64_t z = r->state;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    /* Lemire multiply-shift with rejection; matches rng.Stream.below. */
    static inline uint64_t rw_below(rw_rng *r, uint64_t n) {
        uint64_t v = rw_next(r);
        unsigned __int128 m = (unsigned __int128)v * (unsigned __int128)n;
        uint64_t low = (uint64_t)m;
        if (low < n) {
            uint64_t t = (0 - n) % n;
            while (low < t) {
                v = rw_next(r);
                m = (unsigned __int128)v * (unsigned __int128)n;
                low = (uint64_t)m;
            }
        }
        return (uint64_t)(m >> 64);
    }
    static inline double rw_float(rw_rng *r) {
        return (double)(rw_next(r) >> 11) * (1.0 / 9007199254740992.0);
    }
    """
    ctypedef struct rw_rng:
        unsigned long long state
    unsigned long long rw_next(rw_rng *r) nogil
    unsigned long long rw_below(rw_rng *r, unsigned long long n) nogil
    double rw_float(rw_rng *r) nogil


cdef inline int _pick_neighbor(const long long[::1] indptr, const int[::1] indices,
                               rw_rng *rng, int u) nogil:
    cdef long long base = indptr[u]
    cdef unsigned long long deg = <unsigned long long> (indptr[u + 1] - base)
    return indices[base + <long long> rw_below(rng, deg)]


def precode_run(indptr, indices, pkt_start, pkt_src, thresholds, is_precode,
                capacity, owner_source, k, force_cap, guard_rounds, seed,
                trace=None):
    if trace is not None:
        raise ValueError("tracing requires the python backend")
    cdef const long long[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const int[::1] idx = np.ascontiguousarray(indices, dtype=np.int32)
    cdef const int[::1] start = np.ascontiguousarray(pkt_start, dtype=np.int32)
    cdef const int[::1] src = np.ascontiguousarray(pkt_src, dtype=np.int32)
    cdef const long long[::1] thr = np.ascontiguousarray(thresholds, dtype=np.int64)
    cdef const unsigned char[::1] pre = np.ascontiguousarray(is_precode, dtype=np.uint8)
    cdef int[::1] cap = np.array(capacity, dtype=np.int32)
    cdef const int[::1] owner = np.ascontiguousarray(owner_source, dtype=np.int32)

    cdef int n = ip.shape[0] - 1
    cdef int n_pkt = start.shape[0]
    cdef int kk = k
    cdef long long fcap = force_cap
    cdef long long guard = guard_rounds

    cdef rw_rng rng
    rng.state = <unsigned long long> (seed & 0xFFFFFFFFFFFFFFFF)

    cdef int[::1] head = np.full(n, -1, dtype=np.int32)
    cdef int[::1] tail = np.full(n, -1, dtype=np.int32)
    cdef int[::1] nxt = np.full(n_pkt, -1, dtype=np.int32)
    cdef long long[::1] counters = np.zeros(n_pkt, dtype=np.int64)
    cdef unsigned char[:, ::1] absorbed = np.zeros((n, kk), dtype=np.uint8)
    cdef long long[::1] eligible = np.zeros(kk, dtype=np.int64)
    cdef int[::1] senders = np.empty(n, dtype=np.int32)

    cdef int p, u, w, s, s2, ns, i
    cdef long long c, rounds = 0, transmissions = 0
    cdef int circulating = n_pkt
    cdef bint aborted = False

    for p in range(n_pkt):
        u = start[p]
        if head[u] < 0:
            head[u] = p
            tail[u] = p
        else:
            nxt[tail[u]] = p
            tail[u] = p

    for w in range(n):
        if pre[w] and cap[w] > 0:
            for s in range(kk):
                if owner[w] != s:
                    eligible[s] += 1

    absorb_events = []
    discards = []

    while circulating > 0:
        rounds += 1
        if rounds > guard:
            rounds -= 1
            aborted = True
            break
        ns = 0
        for u in range(n):
            if head[u] >= 0:
                senders[ns] = u
                ns += 1
        for i in range(ns):
            u = senders[i]
            p = head[u]
            head[u] = nxt[p]
            if head[u] < 0:
                tail[u] = -1
            w = _pick_neighbor(ip, idx, &rng, u)
            transmissions += 1
            c = counters[p] + 1
            counters[p] = c
            s = src[p]
            if (pre[w] and cap[w] > 0 and not absorbed[w, s]
                    and owner[w] != s and c >= thr[w]):
                absorbed[w, s] = 1
                cap[w] -= 1
                eligible[s] -= 1
                if cap[w] == 0:
                    for s2 in range(kk):
                        if not absorbed[w, s2] and owner[w] != s2:
                            eligible[s2] -= 1
                absorb_events.append((int(rounds), int(w), int(s), int(p), int(c)))
                circulating -= 1
            elif c > fcap and eligible[s] == 0:
                discards.append((int(p), int(c)))
                circulating -= 1
            else:
                nxt[p] = -1
                if head[w] < 0:
                    head[w] = p
                    tail[w] = p
                else:
                    nxt[tail[w]] = p
                    tail[w] = p

    return PrecodeResult(absorb_events, discards,
                         [int(counters[p]) for p in range(n_pkt)],
                         int(transmissions), int(rounds), aborted)


def raptor_run(indptr, indices, origins, thresholds, accept_prob,
               self_accept, discard_precedence, guard_rounds, seed,
               trace=None):
    if trace is not None:
        raise ValueError("tracing requires the python backend")
    cdef const long long[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const int[::1] idx = np.ascontiguousarray(indices, dtype=np.int32)
    cdef const int[::1] orig = np.ascontiguousarray(origins, dtype=np.int32)
    cdef const long long[::1] thr = np.ascontiguousarray(thresholds, dtype=np.int64)
    cdef const double[::1] prob = np.ascontiguousarray(accept_prob, dtype=np.float64)

    cdef int n = ip.shape[0] - 1
    cdef int m = orig.shape[0]
    cdef long long guard = guard_rounds
    cdef bint selfacc = self_accept
    cdef bint discfirst = discard_precedence

    cdef rw_rng rng
    rng.state = <unsigned long long> (seed & 0xFFFFFFFFFFFFFFFF)

    cdef unsigned char[:, ::1] visited = np.zeros((m, n), dtype=np.uint8)
    cdef int[::1] head = np.full(n, -1, dtype=np.int32)
    cdef int[::1] tail = np.full(n, -1, dtype=np.int32)
    cdef int[::1] nxt = np.full(m, -1, dtype=np.int32)
    cdef long long[::1] counters = np.zeros(m, dtype=np.int64)
    cdef long long[::1] disc = np.full(m, -1, dtype=np.int64)
    cdef int[::1] senders = np.empty(n, dtype=np.int32)

    accept_events = []

    cdef int j, o, u, v, ns, i
    cdef long long c, compare, rounds = 0, transmissions = 0
    cdef int circulating = m
    cdef bint aborted = False

    for j in range(m):
        o = orig[j]
        if selfacc:
            visited[j, o] = 1
            if rw_float(&rng) < prob[o]:
                accept_events.append((0, int(o), int(j)))
        nxt[j] = -1
        if head[o] < 0:
            head[o] = j
            tail[o] = j
        else:
            nxt[tail[o]] = j
            tail[o] = j

    while circulating > 0:
        rounds += 1
        if rounds > guard:
            rounds -= 1
            aborted = True
            break
        ns = 0
        for u in range(n):
            if head[u] >= 0:
                senders[ns] = u
                ns += 1
        for i in range(ns):
            u = senders[i]
            j = head[u]
            head[u] = nxt[j]
            if head[u] < 0:
                tail[u] = -1
            v = _pick_neighbor(ip, idx, &rng, u)
            transmissions += 1
            c = counters[j] + 1
            counters[j] = c
            if not visited[j, v]:
                visited[j, v] = 1
                if rw_float(&rng) < prob[v]:
                    accept_events.append((int(rounds), int(v), int(j)))
                nxt[j] = -1
                if head[v] < 0:
                    head[v] = j
                    tail[v] = j
                else:
                    nxt[tail[v]] = j
                    tail[v] = j
            else:
                compare = c if discfirst else c - 1
                if compare >= thr[v]:
                    disc[j] = c
                    circulating -= 1
                else:
                    nxt[j] = -1
                    if head[v] < 0:
                        head[v] = j
                        tail[v] = j
                    else:
                        nxt[tail[v]] = j
                        tail[v] = j

    return RaptorResult(accept_events, [int(disc[j]) for j in range(m)],
                        int(transmissions), int(rounds), aborted)


def inference_run(indptr, indices, starts, c2, cap, guard_rounds, seed,
                  trace=None):
    if trace is not None:
        raise ValueError("tracing requires the python backend")
    cdef const long long[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const int[::1] idx = np.ascontiguousarray(indices, dtype=np.int32)
    cdef const int[::1] start = np.ascontiguousarray(starts, dtype=np.int32)

    cdef int n = ip.shape[0] - 1
    cdef int k = start.shape[0]
    cdef int c2i = c2
    cdef int capi = cap
    cdef long long guard = guard_rounds

    cdef rw_rng rng
    rng.state = <unsigned long long> (seed & 0xFFFFFFFFFFFFFFFF)

    cdef int[::1] head = np.full(n, -1, dtype=np.int32)
    cdef int[::1] tail = np.full(n, -1, dtype=np.int32)
    cdef int[::1] nxt = np.full(k, -1, dtype=np.int32)
    cdef int[:, :, ::1] times = np.zeros((n, k, capi), dtype=np.int32)
    cdef int[:, ::1] counts = np.zeros((n, k), dtype=np.int32)
    cdef int[::1] first_seen = np.full(n, -1, dtype=np.int32)
    cdef unsigned char[::1] stopped = np.zeros(n, dtype=np.uint8)
    cdef long long[::1] stop_round = np.full(n, -1, dtype=np.int64)
    cdef long long[::1] mfirst = np.full(n, -1, dtype=np.int64)
    cdef long long[::1] mlast = np.full(n, -1, dtype=np.int64)
    cdef long long[::1] mcount = np.zeros(n, dtype=np.int64)
    cdef long long[::1] counters = np.zeros(k, dtype=np.int64)
    cdef int[::1] senders = np.empty(n, dtype=np.int32)

    cdef int s, u, v, ns, i, cnt
    cdef long long rounds = 0, transmissions = 0
    cdef int n_stopped = 0

    for s in range(k):
        u = start[s]
        if head[u] < 0:
            head[u] = s
            tail[u] = s
        else:
            nxt[tail[u]] = s
            tail[u] = s

    while n_stopped < n and rounds < guard:
        rounds += 1
        ns = 0
        for u in range(n):
            if head[u] >= 0:
                senders[ns] = u
                ns += 1
        for i in range(ns):
            u = senders[i]
            s = head[u]
            head[u] = nxt[s]
            if head[u] < 0:
                tail[u] = -1
            v = _pick_neighbor(ip, idx, &rng, u)
            transmissions += 1
            counters[s] += 1
            if not stopped[v]:
                cnt = counts[v, s]
                if cnt < capi:
                    times[v, s, cnt] = <int> rounds
                    counts[v, s] = cnt + 1
                if first_seen[v] < 0:
                    first_seen[v] = s
                if mcount[v] == 0:
                    mfirst[v] = rounds
                mlast[v] = rounds
                mcount[v] += 1
                if s == first_seen[v] and counts[v, s] >= c2i:
                    stopped[v] = 1
                    stop_round[v] = rounds
                    n_stopped += 1
            nxt[s] = -1
            if head[v] < 0:
                head[v] = s
                tail[v] = s
            else:
                nxt[tail[v]] = s
                tail[v] = s

    times_out = [[[int(times[u2, s2, j2]) for j2 in range(counts[u2, s2])]
                  for s2 in range(k)] for u2 in range(n)]
    return InferenceResult(times_out,
                           [int(first_seen[u2]) for u2 in range(n)],
                           [bool(stopped[u2]) for u2 in range(n)],
                           [int(stop_round[u2]) for u2 in range(n)],
                           [int(mfirst[u2]) for u2 in range(n)],
                           [int(mlast[u2]) for u2 in range(n)],
                           [int(mcount[u2]) for u2 in range(n)],
                           [int(counters[s2]) for s2 in range(k)],
                           int(transmissions), int(rounds))


def visit_stats_run(indptr, indices, starts, rounds, seed):
    cdef const long long[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const int[::1] idx = np.ascontiguousarray(indices, dtype=np.int32)
    cdef int[::1] pos = np.array(starts, dtype=np.int32)

    cdef int n = ip.shape[0] - 1
    cdef int w = pos.shape[0]
    cdef long long total = rounds

    cdef rw_rng rng
    rng.state = <unsigned long long> (seed & 0xFFFFFFFFFFFFFFFF)

    cdef long long[::1] counts = np.zeros(n, dtype=np.int64)
    cdef long long[::1] first = np.full(n, -1, dtype=np.int64)
    cdef long long[::1] last = np.full(n, -1, dtype=np.int64)

    cdef long long r
    cdef int i, v
    for r in range(1, total + 1):
        for i in range(w):
            v = _pick_neighbor(ip, idx, &rng, pos[i])
            pos[i] = v
            counts[v] += 1
            if first[v] < 0:
                first[v] = r
            last[v] = r

    return ([int(counts[i]) for i in range(n)],
            [int(first[i]) for i in range(n)],
            [int(last[i]) for i in range(n)])


def cover_time_run(indptr, indices, start, guard_rounds, seed):
    cdef const long long[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const int[::1] idx = np.ascontiguousarray(indices, dtype=np.int32)

    cdef int n = ip.shape[0] - 1
    cdef long long guard = guard_rounds

    cdef rw_rng rng
    rng.state = <unsigned long long> (seed & 0xFFFFFFFFFFFFFFFF)

    cdef unsigned char[::1] seen = np.zeros(n, dtype=np.uint8)
    cdef int pos = start
    cdef int remaining = n - 1
    seen[pos] = 1

    cdef long long r
    for r in range(1, guard + 1):
        pos = _pick_neighbor(ip, idx, &rng, pos)
        if not seen[pos]:
            seen[pos] = 1
            remaining -= 1
            if remaining == 0:
                return int(r)
    return -1
