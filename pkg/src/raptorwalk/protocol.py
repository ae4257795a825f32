"""The two distributed-storage state machines.

`rcds1_run` assumes every node knows n and k: source copies random-walk until
their hop counters certify full coverage, pre-code output nodes absorb them
into intermediate blocks, the intermediates random-walk in turn, and every
node keeps an XOR of the intermediates it accepted.

`rcds2_run` assumes no global knowledge: an inference phase first lets every
node estimate (n, k) from the visit timing of one walking packet per source,
after which the same pipeline runs with each node applying its own estimates
(local thresholds, local acceptance probability, local election probability).

Both runs are pure functions of (graph, sources, params, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from statistics import median

import numpy as np

from ._engine import get_engine
from .codec import (DegreeDistribution, SystemParams, binomial_distribution,
                    make_source_blocks, xor_combine)
from .network import ConfigError, GraphTopology, is_connected
from .rng import (TAG_INFERENCE, TAG_INIT, TAG_PAYLOAD, TAG_PRECODE,
                  TAG_RAPTOR, Stream, derive_seed)
from .walkers import (EstimateUnavailable, TimingStats, cover_threshold,
                      estimate_counts)


class SimulationAbort(RuntimeError):
    """A non-termination guard tripped (CLI exit code 3)."""


@dataclass
class NodeState:
    """Final per-node protocol state.

    `accepted_sources` holds sources absorbed from walking copies; when a
    source node seeds its own pre-code output, that contribution is part of
    `y_lineage` but not of `accepted_sources` (it never used absorption
    capacity).  Transient run state (forward queue, per-packet first-visit
    flags) lives inside the kernels and is not retained here.
    """

    id: int
    is_source: bool = False
    is_precode_output: bool = False
    d_c: int = 0
    a_w: int = 0
    accepted_sources: set = field(default_factory=set)
    y_block: bytes | None = None
    y_lineage: frozenset = frozenset()
    z_block: bytes = b""
    z_lineage: frozenset = frozenset()
    stats: TimingStats | None = None
    n_hat: float | None = None
    k_hat: float | None = None
    m_hat: int | None = None
    estimate_fallback: bool = False


@dataclass
class StorageOutcome:
    """Everything the query layer and the audits need after one run."""

    algorithm: str
    params: SystemParams
    sources: tuple
    precode_nodes: tuple                 # y index -> node id
    y_lineages: tuple                    # y index -> frozenset of source ids
    storage_blocks: tuple                # per node
    storage_lineage: tuple               # per node: frozenset of y indices
    d_c: tuple
    transmissions: dict
    discarded_copies: int
    source_blocks: tuple | None = None   # ground truth (None when loaded)
    y_blocks: tuple | None = None        # ground truth (None when loaded)
    estimate_fallbacks: int = 0
    estimates: tuple | None = None       # per node (n_hat, k_hat, m_hat)
    nodes: list | None = None

    @property
    def m_actual(self) -> int:
        return len(self.precode_nodes)

    def storage_records(self, node_ids) -> list:
        """(y-id set, z block) pairs for the given nodes, decoder-ready."""
        return [(self.storage_lineage[u], self.storage_blocks[u]) for u in node_ids]

    def verify_consistency(self) -> None:
        """Bit-exact lineage audit; raises AssertionError on any mismatch."""
        assert self.source_blocks is not None and self.y_blocks is not None
        plen = self.params.payload_len
        for j, lineage in enumerate(self.y_lineages):
            expect = xor_combine([self.source_blocks[s] for s in sorted(lineage)], plen)
            assert expect == self.y_blocks[j], f"pre-code block {j} lineage mismatch"
        for u, lineage in enumerate(self.storage_lineage):
            expect = xor_combine([self.y_blocks[j] for j in sorted(lineage)], plen)
            assert expect == self.storage_blocks[u], f"storage {u} lineage mismatch"


# ---------------------------------------------------------------------------
# Per-node parameterization (constant for rcds1, estimate-driven for rcds2)
# ---------------------------------------------------------------------------

@dataclass
class _PerNode:
    thresholds: np.ndarray          # absorb/discard hop threshold per node
    accept_m: list                  # effective m in the acceptance probability
    election_p: list                # redundancy election probability
    binom_k: list                   # per-node count parameter for the in-degree law
    in_p: list                      # per-node eb/m probability (clamped)


def _uniform_per_node(params: SystemParams, n: int) -> _PerNode:
    thr = cover_threshold(n, params.c1)
    if n > params.k:
        p_red = (params.m - params.k) / (n - params.k)
    else:
        p_red = 0.0
    return _PerNode(
        thresholds=np.full(n, thr, dtype=np.int64),
        accept_m=[params.m] * n,
        election_p=[p_red] * n,
        binom_k=[params.k] * n,
        in_p=[params.eb / params.m] * n,
    )


def _indegree_dist(k: int, p: float) -> DegreeDistribution:
    """Binomial(k, p) with degenerate p collapsed to a point mass.

    p >= 1 arises only in tiny configurations (mean left degree above the
    node's believed pre-code size); every potential input is then absorbed.
    """
    if p >= 1.0:
        return DegreeDistribution((k,), (1.0,))
    if p <= 0.0:
        return DegreeDistribution((0,), (1.0,))
    return binomial_distribution(k, p)


# ---------------------------------------------------------------------------
# Shared pipeline
# ---------------------------------------------------------------------------

def _storage_pipeline(g: GraphTopology, sources, params: SystemParams, seed: int,
                      source_blocks, per_node: _PerNode, trace=None,
                      inference: dict | None = None, algorithm: str = "rcds1",
                      ) -> StorageOutcome:
    engine = get_engine(trace=trace is not None)
    n = g.n
    k = params.k
    src_list = list(sources)
    src_index = {node: i for i, node in enumerate(src_list)}
    plen = params.payload_len

    # --- initialization: code degrees, copy counts, election, in-degrees ---
    init_stream = Stream(derive_seed(seed, TAG_INIT))
    lt = params.lt_distribution()
    d_c = [lt.sample(init_stream) for _ in range(n)]
    left = params.left_distribution()
    b_of = [left.sample(init_stream) for _ in range(k)]
    is_precode = np.zeros(n, dtype=np.uint8)
    for s_node in src_list:
        is_precode[s_node] = 1
    for u in range(n):
        if u not in src_index:
            if init_stream.random() < per_node.election_p[u]:
                is_precode[u] = 1
    precode_nodes = [u for u in range(n) if is_precode[u]]
    y_index = {u: j for j, u in enumerate(precode_nodes)}
    m_actual = len(precode_nodes)

    capacity = np.zeros(n, dtype=np.int32)
    dist_cache: dict = {}
    for w in precode_nodes:
        key = (per_node.binom_k[w], per_node.in_p[w])
        dist = dist_cache.get(key)
        if dist is None:
            dist = _indegree_dist(*key)
            dist_cache[key] = dist
        capacity[w] = dist.sample(init_stream)

    owner_source = np.full(n, -1, dtype=np.int32)
    if params.own_packet_init:
        for s_node, i in src_index.items():
            owner_source[s_node] = i

    # --- pre-coding phase: copies walk until absorbed ---
    pkt_start, pkt_src = [], []
    for i, s_node in enumerate(src_list):
        pkt_start.extend([s_node] * b_of[i])
        pkt_src.extend([i] * b_of[i])
    max_thr = int(per_node.thresholds.max())
    guard = 100 * max_thr
    pre = engine.precode_run(
        g.indptr, g.indices,
        np.asarray(pkt_start, dtype=np.int32), np.asarray(pkt_src, dtype=np.int32),
        per_node.thresholds, is_precode, capacity, owner_source,
        k, 3 * max_thr, guard, derive_seed(seed, TAG_PRECODE), trace)
    if pre.aborted:
        raise SimulationAbort(
            f"pre-coding phase exceeded {guard} rounds (n={n}, k={k})")

    y_val = [0] * m_actual
    y_lin = [set() for _ in range(m_actual)]
    accepted: dict[int, set] = {w: set() for w in precode_nodes}
    if params.own_packet_init:
        for s_node, i in src_index.items():
            j = y_index[s_node]
            y_val[j] = int.from_bytes(source_blocks[i], "little")
            y_lin[j].add(i)
    for _, w, s, _, _ in pre.absorb_events:
        j = y_index[w]
        y_val[j] ^= int.from_bytes(source_blocks[s], "little")
        y_lin[j].add(s)
        accepted[w].add(s)
    y_blocks = [v.to_bytes(plen, "little") for v in y_val]

    # --- coding phase: intermediates walk, nodes fold accepted ones into z ---
    accept_prob = np.array(
        [min(1.0, d_c[u] / per_node.accept_m[u]) for u in range(n)],
        dtype=np.float64)
    rap = engine.raptor_run(
        g.indptr, g.indices, np.asarray(precode_nodes, dtype=np.int32),
        per_node.thresholds, accept_prob, params.origin_self_accept,
        params.discard_precedence, guard, derive_seed(seed, TAG_RAPTOR), trace)
    if rap.aborted:
        raise SimulationAbort(
            f"coding phase exceeded {guard} rounds (n={n}, m={m_actual})")

    z_val = [0] * n
    z_lin = [set() for _ in range(n)]
    for _, u, j in rap.accept_events:
        z_val[u] ^= y_val[j]
        z_lin[u].add(j)
    z_blocks = [v.to_bytes(plen, "little") for v in z_val]

    transmissions = {"precoding": pre.transmissions, "raptor": rap.transmissions}
    if inference is not None:
        transmissions["inference"] = inference["transmissions"]
    transmissions["total"] = sum(transmissions.values())

    nodes = []
    for u in range(n):
        st = NodeState(
            id=u, is_source=u in src_index, is_precode_output=bool(is_precode[u]),
            d_c=d_c[u], a_w=int(capacity[u]),
            accepted_sources=accepted.get(u, set()),
            y_block=y_blocks[y_index[u]] if u in y_index else None,
            y_lineage=frozenset(y_lin[y_index[u]]) if u in y_index else frozenset(),
            z_block=z_blocks[u], z_lineage=frozenset(z_lin[u]))
        if inference is not None:
            st.stats = inference["stats"][u]
            st.n_hat, st.k_hat, st.m_hat = inference["estimates"][u]
            st.estimate_fallback = inference["fallback"][u]
        nodes.append(st)

    return StorageOutcome(
        algorithm=algorithm, params=params, sources=tuple(src_list),
        precode_nodes=tuple(precode_nodes),
        y_lineages=tuple(frozenset(s) for s in y_lin),
        storage_blocks=tuple(z_blocks),
        storage_lineage=tuple(frozenset(s) for s in z_lin),
        d_c=tuple(d_c), transmissions=transmissions,
        discarded_copies=len(pre.discards),
        source_blocks=tuple(source_blocks), y_blocks=tuple(y_blocks),
        estimate_fallbacks=(sum(inference["fallback"]) if inference else 0),
        estimates=(tuple(inference["estimates"]) if inference else None),
        nodes=nodes)


def _check_run_inputs(g: GraphTopology, sources, params: SystemParams):
    if len(set(sources)) != params.k:
        raise ConfigError(f"expected {params.k} distinct sources, got {len(set(sources))}")
    if any(not 0 <= s < g.n for s in sources):
        raise ConfigError("source id out of range")
    if params.n != g.n:
        raise ConfigError(f"params.n={params.n} but graph has n={g.n}")
    if params.m > g.n:
        raise ConfigError(f"pre-code needs m={params.m} nodes but n={g.n}")
    if not is_connected(g):
        raise ConfigError("graph must be connected")


def rcds1_run(g: GraphTopology, sources, params: SystemParams, seed: int,
              source_blocks=None, trace=None) -> StorageOutcome:
    """Run the known-(n, k) algorithm; returns the full storage outcome."""
    _check_run_inputs(g, sources, params)
    if source_blocks is None:
        source_blocks = make_source_blocks(
            params.k, params.payload_len, derive_seed(seed, TAG_PAYLOAD))
    per_node = _uniform_per_node(params, g.n)
    return _storage_pipeline(g, sorted(sources), params, seed, source_blocks,
                             per_node, trace=trace, algorithm="rcds1")


def rcds2_run(g: GraphTopology, sources, params: SystemParams, seed: int,
              source_blocks=None, trace=None,
              oracle_estimates: bool = False) -> StorageOutcome:
    """Run the no-global-information algorithm: estimate first, then store.

    With `oracle_estimates` the inference phase is skipped and every node is
    handed the true (n, k); the run then reduces exactly to rcds1 (same seed,
    same draws), which the reduction tests exploit.
    """
    _check_run_inputs(g, sources, params)
    if source_blocks is None:
        source_blocks = make_source_blocks(
            params.k, params.payload_len, derive_seed(seed, TAG_PAYLOAD))
    src_list = sorted(sources)
    if oracle_estimates:
        per_node = _uniform_per_node(params, g.n)
        return _storage_pipeline(g, src_list, params, seed, source_blocks,
                                 per_node, trace=trace, algorithm="rcds2")

    if params.k < 2:
        raise ConfigError("estimation needs at least 2 sources")
    n = g.n
    engine = get_engine(trace=trace is not None)
    cap = 2 * params.c2 + 32
    guard = 200 * params.c2 * n
    inf = engine.inference_run(
        g.indptr, g.indices, np.asarray(src_list, dtype=np.int32),
        params.c2, cap, guard, derive_seed(seed, TAG_INFERENCE), trace)

    stats_per_node = []
    raw = []
    for u in range(n):
        st = TimingStats(k=params.k, stop_count=params.c2, cap=cap,
                         times=inf.times[u], first_seen=inf.first_seen[u],
                         stopped=inf.stopped[u],
                         merged_first=inf.merged_first[u],
                         merged_last=inf.merged_last[u],
                         merged_count=inf.merged_count[u])
        stats_per_node.append(st)
        if st.stopped:
            try:
                raw.append((u, estimate_counts(st, params.inference_pairing,
                                               params.visit_divisor)))
            except EstimateUnavailable:
                pass
    if not raw:
        raise SimulationAbort("no node produced an (n, k) estimate")
    have = {u: est for u, est in raw}
    med_n = median(est[0] for est in have.values())
    med_k = median(est[1] for est in have.values())

    r0 = params.r0
    estimates, fallback = [], []
    thresholds = np.empty(n, dtype=np.int64)
    accept_m, election_p, binom_k, in_p = [], [], [], []
    for u in range(n):
        fb = u not in have
        n_hat, k_hat = have.get(u, (med_n, med_k))
        n_hat = max(2.0, n_hat)
        k_hat = max(1.0, k_hat)
        m_hat = max(1, round(k_hat / r0), round(k_hat))
        estimates.append((n_hat, k_hat, m_hat))
        fallback.append(fb)
        thresholds[u] = cover_threshold(n_hat, params.c1)
        accept_m.append(m_hat)
        if n_hat > k_hat:
            election_p.append(min(1.0, max(0.0, (m_hat - k_hat) / (n_hat - k_hat))))
        else:
            election_p.append(1.0)
        binom_k.append(max(1, round(k_hat)))
        in_p.append(params.eb / m_hat)
    per_node = _PerNode(thresholds=thresholds, accept_m=accept_m,
                        election_p=election_p, binom_k=binom_k, in_p=in_p)
    inference = {
        "stats": stats_per_node,
        "estimates": estimates,
        "fallback": fallback,
        "transmissions": inf.transmissions,
    }
    return _storage_pipeline(g, src_list, params, seed, source_blocks, per_node,
                             trace=trace, inference=inference, algorithm="rcds2")


def centralized_run(n: int, params: SystemParams, seed: int,
                    source_blocks=None) -> StorageOutcome:
    """Idealized baseline: every node stores one reference-encoded symbol.

    No walks, no graph: this realizes the code the distributed pipeline
    approximates, so its Ps curve upper-bounds the protocol's.
    """
    from .codec import CentralizedEncoder

    if source_blocks is None:
        source_blocks = make_source_blocks(
            params.k, params.payload_len, derive_seed(seed, TAG_PAYLOAD))
    enc = CentralizedEncoder(source_blocks, params, derive_seed(seed, TAG_INIT))
    z_blocks, z_lin, d_c = [], [], []
    for _ in range(n):
        sym = enc.emit_one()
        z_blocks.append(sym.block)
        z_lin.append(frozenset(sym.y_ids))
        d_c.append(len(sym.y_ids))
    return StorageOutcome(
        algorithm="centralized-reference", params=params,
        sources=tuple(range(params.k)),
        precode_nodes=tuple(range(params.m)),
        y_lineages=tuple(enc.y_sources),
        storage_blocks=tuple(z_blocks),
        storage_lineage=tuple(z_lin),
        d_c=tuple(d_c),
        transmissions={"total": 0},
        discarded_copies=0,
        source_blocks=tuple(source_blocks), y_blocks=tuple(enc.y_blocks))


# ---------------------------------------------------------------------------
# Outcome text serialization
# ---------------------------------------------------------------------------

def dump_outcome(outcome: StorageOutcome) -> str:
    """Decode-complete text form of a storage outcome."""
    p = outcome.params
    lines = [
        "[params]",
        f"algorithm {outcome.algorithm}",
        f"n {p.n}", f"k {p.k}", f"epsilon {p.epsilon:.17g}", f"m {p.m}",
        f"C1 {p.c1:.17g}", f"C2 {p.c2}", f"payload_len {p.payload_len}",
        f"sources {' '.join(str(s) for s in outcome.sources)}",
        f"discarded_copies {outcome.discarded_copies}",
        "[nodes]",
    ]
    for u in range(p.n):
        z = outcome.storage_blocks[u]
        lines.append(f"{u} {outcome.d_c[u]} {len(outcome.storage_lineage[u])} {z.hex()}")
    lines.append("[storage-lineage]")
    for u in range(p.n):
        ids = " ".join(str(j) for j in sorted(outcome.storage_lineage[u]))
        lines.append(f"{u}: {ids}".rstrip())
    lines.append("[precode]")
    for j, node in enumerate(outcome.precode_nodes):
        ids = " ".join(str(s) for s in sorted(outcome.y_lineages[j]))
        lines.append(f"{j} {node}: {ids}".rstrip())
    lines.append("[transmissions]")
    for phase, count in sorted(outcome.transmissions.items()):
        lines.append(f"{phase} {count}")
    return "\n".join(lines) + "\n"


def load_outcome(text: str) -> StorageOutcome:
    """Parse dump_outcome output; ground-truth blocks come back as None."""
    from .codec import make_params

    section = None
    meta: dict = {}
    node_rows, storage_lin, precode_nodes, y_lins = [], {}, {}, {}
    transmissions: dict = {}
    for ln in text.splitlines():
        ln = ln.strip()
        if not ln:
            continue
        if ln.startswith("["):
            section = ln.strip("[]")
            continue
        if section == "params":
            key, _, val = ln.partition(" ")
            meta[key] = val
        elif section == "nodes":
            u, dc, _, zhex = ln.split()
            node_rows.append((int(u), int(dc), bytes.fromhex(zhex)))
        elif section == "storage-lineage":
            left, _, right = ln.partition(":")
            storage_lin[int(left)] = frozenset(int(x) for x in right.split())
        elif section == "precode":
            left, _, right = ln.partition(":")
            j, node = (int(x) for x in left.split())
            precode_nodes[j] = node
            y_lins[j] = frozenset(int(x) for x in right.split())
        elif section == "transmissions":
            phase, count = ln.split()
            transmissions[phase] = int(count)
    params = make_params(n=int(meta["n"]), k=int(meta["k"]),
                         epsilon=float(meta["epsilon"]), c1=float(meta["C1"]),
                         c2=int(meta["C2"]), payload_len=int(meta["payload_len"]))
    node_rows.sort()
    m = len(precode_nodes)
    return StorageOutcome(
        algorithm=meta["algorithm"], params=params,
        sources=tuple(int(s) for s in meta["sources"].split()),
        precode_nodes=tuple(precode_nodes[j] for j in range(m)),
        y_lineages=tuple(y_lins[j] for j in range(m)),
        storage_blocks=tuple(row[2] for row in node_rows),
        storage_lineage=tuple(storage_lin[u] for u in range(params.n)),
        d_c=tuple(row[1] for row in node_rows),
        transmissions=transmissions,
        discarded_copies=int(meta["discarded_copies"]))
