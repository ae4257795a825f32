"""Query-side evaluation: sample querying-node sets, decode their storage,
and estimate the probability that all k source blocks are recovered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .codec import composite_source_system, gauss_decode, two_stage_decode
from .network import ConfigError
from .protocol import StorageOutcome
from .rng import Stream

WILSON_Z = 1.959963984540054  # 95% two-sided


def wilson_interval(successes: int, samples: int) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if samples == 0:
        return 0.0, 1.0
    z2 = WILSON_Z * WILSON_Z
    p = successes / samples
    denom = 1.0 + z2 / samples
    center = (p + z2 / (2 * samples)) / denom
    half = (WILSON_Z / denom) * math.sqrt(p * (1 - p) / samples + z2 / (4 * samples * samples))
    return max(0.0, center - half), min(1.0, center + half)


def query_sample_count(n: int, h: int, m_cap: int) -> int:
    """M = min(floor(C(n, h) / 10), m_cap), evaluated in log space.

    C(n, h)/10 below 1 is forced up to a single sample (querying all nodes
    admits only one distinct set anyway).
    """
    log_c = math.lgamma(n + 1) - math.lgamma(h + 1) - math.lgamma(n - h + 1)
    if log_c - math.log(10.0) >= math.log(max(m_cap, 1)) + 1.0:
        return m_cap
    exact = math.comb(n, h) // 10
    return max(1, min(exact, m_cap))


def sample_query_sets(n: int, h: int, m_cap: int, stream: Stream) -> list[tuple[int, ...]]:
    """M sets of h distinct node ids, uniform without replacement."""
    if not 1 <= h <= n:
        raise ConfigError(f"need 1 <= h <= n, got h={h} n={n}")
    m_samples = query_sample_count(n, h, m_cap)
    return [tuple(stream.sample_without_replacement(n, h))
            for _ in range(m_samples)]


@dataclass
class DecodeDiagnostics:
    success: bool
    staged_success: bool               # two-stage decoder alone sufficed
    bp_pure: bool                      # pure peeling sufficed (no elimination)
    stage1_solved: int
    peel_recovered: int
    recovered_count: int
    oracle_success: bool | None = None


def attempt_decode(storage, lineage_table, k: int, payload_len: int,
                   stage2_gauss: bool = True, ml_fallback: bool = True):
    """Decode the queried nodes' storage; (success, recovered blocks, diag).

    `storage` is a list of (y-id set, z block) pairs; `lineage_table` maps the
    y index to its source-id set (public header data).  The two-stage peeling
    decoder runs first; when it stalls and `ml_fallback` is set, full GF(2)
    elimination over the composite source system finishes the job, mirroring
    the peel-then-eliminate structure of production rateless decoders.  The
    diagnostics keep the staged/pure-peeling results separate so the
    linear-time decoding claim stays testable in isolation.

    Success requires all k sources; the recovered list is in source order
    with None gaps.
    """
    eqs = [(sorted(y_ids), block) for y_ids, block in storage]
    res = two_stage_decode(eqs, lineage_table, k, payload_len,
                           stage2_gauss=stage2_gauss)
    success = res.success
    recovered = [res.recovered.get(i) for i in range(k)]
    diag = DecodeDiagnostics(success, res.success, res.bp_pure,
                             res.stage1_solved, res.peel_recovered,
                             len(res.recovered))
    if not success and ml_fallback:
        comp = composite_source_system(eqs, lineage_table, k, payload_len)
        assign, ok = gauss_decode(comp)
        if ok:
            success = True
            recovered = [assign[i] for i in range(k)]
        diag.success = success
        diag.oracle_success = ok
        diag.recovered_count = max(diag.recovered_count, len(assign))
    return success, recovered, diag


@dataclass
class QueryResult:
    """Ps estimate for one (outcome, eta) pair plus per-sample diagnostics."""

    eta: float
    h: int
    samples: int
    successes: int
    ps: float
    ps_lo: float
    ps_hi: float
    mean_peel_recovered: float
    staged_successes: int
    bp_pure_successes: int
    oracle_successes: int | None = None
    diagnostics: list = field(default_factory=list)


def estimate_ps(outcome: StorageOutcome, eta: float, m_cap: int, seed: int,
                stage2_gauss: bool = True, ml_fallback: bool = True,
                oracle_check: bool = True,
                keep_diagnostics: bool = False) -> QueryResult:
    """Monte-Carlo estimate of the successful decoding probability at `eta`.

    With `oracle_check` the composite-system elimination runs on every sample
    and the dominance invariant (staged success implies oracle success) is
    asserted; recovered blocks are verified bit-exact against ground truth
    whenever the outcome carries it.
    """
    params = outcome.params
    h = round(eta * params.k)
    if h > params.n:
        raise ConfigError(f"eta*k = {h} exceeds n = {params.n}")
    h = max(1, h)
    stream = Stream(seed)
    sets = sample_query_sets(params.n, h, m_cap, stream)

    successes = 0
    staged = 0
    bp_pure = 0
    oracle_successes = 0 if oracle_check else None
    peel_sum = 0
    diags = []
    for node_ids in sets:
        storage = outcome.storage_records(node_ids)
        ok, recovered, diag = attempt_decode(storage, outcome.y_lineages,
                                             params.k, params.payload_len,
                                             stage2_gauss=stage2_gauss,
                                             ml_fallback=ml_fallback)
        if ok:
            successes += 1
            if diag.staged_success:
                staged += 1
            if diag.bp_pure:
                bp_pure += 1
            if outcome.source_blocks is not None:
                for i in range(params.k):
                    if recovered[i] != outcome.source_blocks[i]:
                        raise AssertionError(
                            f"decoder claimed success but source {i} is wrong")
        if oracle_check:
            if diag.oracle_success is None:
                eqs = [(sorted(y_ids), block) for y_ids, block in storage]
                comp = composite_source_system(eqs, outcome.y_lineages,
                                               params.k, params.payload_len)
                _, oracle_ok = gauss_decode(comp)
                diag.oracle_success = oracle_ok
            if diag.oracle_success:
                oracle_successes += 1
            if diag.staged_success and not diag.oracle_success:
                raise AssertionError("staged decoder beat the ML oracle")
        peel_sum += diag.peel_recovered
        if keep_diagnostics:
            diags.append(diag)

    m_samples = len(sets)
    lo, hi = wilson_interval(successes, m_samples)
    return QueryResult(eta=eta, h=h, samples=m_samples, successes=successes,
                       ps=successes / m_samples, ps_lo=lo, ps_hi=hi,
                       mean_peel_recovered=peel_sum / m_samples,
                       staged_successes=staged, bp_pure_successes=bp_pure,
                       oracle_successes=oracle_successes,
                       diagnostics=diags)
