"""Acceptance suite: every criterion at its stated tolerance, one printed
PASS/FAIL line each (run with `pytest tests/test_acceptance.py -v -s`).

All experiments are pinned to master seed 2024 (the harness default), so
every number below is reproducible bit-for-bit.

Known result: criterion 1's eta=2.5 clause fails.  At the pinned desk scale
(k=20, m=24) the realized pre-code loses GF(2) column rank in ~12% of trials
(capacity-shortfall discards plus correlated absorption landings), which caps
even maximum-likelihood decoding near 0.88 on average; the same implementation
at k=50/k=100 has deficiency under 1% and clears 0.95 (see the supplementary
scale check at the bottom, and the decisions ledger for the full analysis).
"""

import itertools
import math
import time
from dataclasses import replace

import pytest

from raptorwalk.chart import render_chart
from raptorwalk.codec import (CentralizedEncoder, make_params,
                              make_source_blocks, raptor_lt_distribution,
                              two_stage_decode)
from raptorwalk.harness import ExperimentConfig, rows_to_csv, run_experiment
from raptorwalk.network import choose_sources, default_radius, generate_connected_rgg
from raptorwalk.protocol import rcds1_run
from raptorwalk.rng import Stream, derive_seed
from raptorwalk.walkers import visit_stats

SEED = 2024
BASE = ExperimentConfig(seed=SEED)


def _report(criterion: str, ok: bool, detail: str) -> bool:
    print(f"\nACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")
    return ok


@pytest.fixture(scope="module")
def rcds1_high_eta_rows():
    cfg = replace(BASE, algorithm="rcds1", trials=30, eta_grid=(2.0, 2.25, 2.5))
    return {r["eta"]: r for r in run_experiment(cfg)}


@pytest.fixture(scope="module")
def rcds2_c2_50_rows():
    cfg = replace(BASE, algorithm="rcds2", trials=30, c2=50,
                  eta_grid=(1.5, 2.0, 2.25, 2.5))
    return {r["eta"]: r for r in run_experiment(cfg)}


def _rcds2_ps_at(c2: int, eta: float = 1.5) -> float:
    cfg = replace(BASE, algorithm="rcds2", trials=30, c2=c2, eta_grid=(eta,))
    return run_experiment(cfg)[0]["ps"]


def test_criterion_1_ps_at_eta_2(rcds1_high_eta_rows):
    """Ps reaches ~0.95 for decoding ratios at and above 2."""
    ps20 = rcds1_high_eta_rows[2.0]["ps"]
    ps25 = rcds1_high_eta_rows[2.5]["ps"]
    ok = ps20 >= 0.90 and ps25 >= 0.95
    _report("1 (Ps at eta>=2)", ok,
            f"Ps(2.0)={ps20:.3f} (need >=0.90), Ps(2.5)={ps25:.3f} (need >=0.95)")
    assert ps20 >= 0.90
    assert ps25 >= 0.95


def test_criterion_2_c1_plateau():
    """Ps is flat in C1 beyond 4."""
    ps = {}
    for c1 in (4.0, 8.0):
        cfg = replace(BASE, algorithm="rcds1", trials=30, c1=c1, eta_grid=(2.0,))
        ps[c1] = run_experiment(cfg)[0]["ps"]
    diff = abs(ps[4.0] - ps[8.0])
    ok = diff <= 0.05
    _report("2 (C1 plateau)", ok,
            f"Ps(C1=4)={ps[4.0]:.3f}, Ps(C1=8)={ps[8.0]:.3f}, |diff|={diff:.3f} (need <=0.05)")
    assert ok


def test_criterion_3_c2_sensitivity(rcds2_c2_50_rows):
    """Small C2 is very poor; C2 >= 40 saturates."""
    ps10 = _rcds2_ps_at(10)
    ps40 = _rcds2_ps_at(40)
    ps50 = rcds2_c2_50_rows[1.5]["ps"]
    ps60 = _rcds2_ps_at(60)
    low_ok = ps10 <= ps50 - 0.15
    flat_ok = abs(ps40 - ps60) <= 0.05
    _report("3 (C2 sensitivity)", low_ok and flat_ok,
            f"Ps(C2=10)={ps10:.3f} vs Ps(C2=50)-0.15={ps50 - 0.15:.3f}; "
            f"|Ps(C2=40)-Ps(C2=60)|=|{ps40:.3f}-{ps60:.3f}|={abs(ps40 - ps60):.3f} (need <=0.05)")
    assert low_ok
    assert flat_ok


def test_criterion_4_rcds2_close_to_rcds1(rcds1_high_eta_rows, rcds2_c2_50_rows):
    """With C2=50 the estimator-driven variant trails by at most 0.10 at eta >= 2."""
    detail = []
    ok = True
    for eta in (2.0, 2.25, 2.5):
        ps1 = rcds1_high_eta_rows[eta]["ps"]
        ps2 = rcds2_c2_50_rows[eta]["ps"]
        detail.append(f"eta={eta:g}: II={ps2:.3f} vs I={ps1:.3f}")
        ok = ok and ps2 >= ps1 - 0.10
    _report("4 (RCDS-II vs RCDS-I)", ok, "; ".join(detail) + " (need II >= I-0.10)")
    assert ok


def test_criterion_5_transmission_scaling():
    """Total transmissions track (k+m) * n * ln n across sizes."""
    ratios = {}
    for n in (100, 200, 400):
        k = n // 10
        params = make_params(n=n, k=k, epsilon=0.5, c1=5.0)
        total = 0
        for t in range(10):
            g, _ = generate_connected_rgg(n, 5.0, default_radius(n, 5.0),
                                          derive_seed(SEED, 1, n, t))
            src = choose_sources(g, k, derive_seed(SEED, 2, n, t))
            out = rcds1_run(g, src, params, derive_seed(SEED, 3, n, t))
            total += out.transmissions["total"]
        ratios[n] = total / 10 / ((k + params.m) * n * math.log(n))
    band = max(ratios.values()) / min(ratios.values())
    ok = band <= 2.0
    _report("5 (transmission scaling)", ok,
            "ratios " + ", ".join(f"n={n}: {r:.2f}" for n, r in ratios.items())
            + f"; band={band:.2f} (need <=2)")
    assert ok


def test_criterion_6_return_time_laws():
    """Mean inter-visit ~ mu*n/d(u); inter-packet time divides by k."""
    g, _ = generate_connected_rgg(200, 5.0, default_radius(200, 5.0),
                                  derive_seed(SEED, 10))
    mu = g.mean_degree
    sample_stream = Stream(derive_seed(SEED, 11))
    sampled = sample_stream.sample_without_replacement(200, 20)

    rounds1 = 2_000_000
    counts, first, last = visit_stats(g, [0], rounds1, derive_seed(SEED, 12))
    worst1 = 0.0
    for u in sampled:
        emp = (last[u] - first[u]) / (counts[u] - 1)
        worst1 = max(worst1, abs(emp / (mu * 200 / g.degrees[u]) - 1))

    rounds2 = 400_000
    starts = list(choose_sources(g, 20, derive_seed(SEED, 13)))
    counts2, first2, last2 = visit_stats(g, starts, rounds2, derive_seed(SEED, 14))
    worst2 = 0.0
    for u in sampled:
        emp = (last2[u] - first2[u]) / (counts2[u] - 1)
        worst2 = max(worst2, abs(emp / (mu * 200 / g.degrees[u] / 20) - 1))

    ok = worst1 < 0.10 and worst2 < 0.10
    _report("6 (inter-visit / inter-packet laws)", ok,
            f"worst inter-visit error {worst1:.3f} over {rounds1} rounds, "
            f"worst inter-packet error {worst2:.3f} with k=20 walks over {rounds2} rounds "
            f"(need <0.10)")
    assert ok


def test_criterion_7_codec_property_suite():
    """Normalization, centralized decode rate, oracle dominance, bit-exactness."""
    stream = Stream(derive_seed(SEED, 20))
    worst = max(abs(math.fsum(raptor_lt_distribution(1e-3 + stream.random() * 0.999).mass) - 1.0)
                for _ in range(100))
    norm_ok = worst < 1e-12

    # Decode through the library's default path (two-stage peeling with an
    # elimination fallback, the same decoder behind every Ps figure); the
    # stricter peel-only rate sits at ~0.90 and is reported alongside.
    params = make_params(n=1000, k=100, epsilon=0.5)
    need = math.ceil(1.5 * 100)
    wins = staged_wins = 0
    for t in range(100):
        x = make_source_blocks(100, 16, derive_seed(SEED, 21, t))
        enc = CentralizedEncoder(x, params, derive_seed(SEED, 22, t))
        syms = list(itertools.islice(iter(enc), need))
        eqs = [(sorted(s.y_ids), s.block) for s in syms]
        res = two_stage_decode(eqs, enc.y_sources, 100, 16)
        if res.success:
            staged_wins += 1
        from raptorwalk.query import attempt_decode
        ok, recovered, _ = attempt_decode([(frozenset(s.y_ids), s.block) for s in syms],
                                          enc.y_sources, 100, 16)
        if ok:
            assert all(recovered[i] == x[i] for i in range(100))
            wins += 1
    rate_ok = wins / 100 >= 0.90

    from raptorwalk.codec import ConstraintSystem, gauss_decode, peel_decode, xor_combine
    dom_stream = Stream(derive_seed(SEED, 23))
    dominance_ok = True
    for _ in range(1000):
        k = 2 + dom_stream.below(11)
        truth = make_source_blocks(k, 8, dom_stream.u64())
        items = []
        for _ in range(dom_stream.below(2 * k) + 1):
            ids = dom_stream.sample_without_replacement(k, dom_stream.below(k) + 1)
            items.append((ids, xor_combine([truth[i] for i in ids], 8)))
        system = ConstraintSystem.build(k, 8, items)
        peeled, _ = peel_decode(system)
        eliminated, _ = gauss_decode(system)
        if not set(peeled) <= set(eliminated):
            dominance_ok = False
        for i, v in itertools.chain(peeled.items(), eliminated.items()):
            if v != truth[i]:
                dominance_ok = False

    ok = norm_ok and rate_ok and dominance_ok
    _report("7 (codec property suite)", ok,
            f"normalization worst={worst:.1e} (<1e-12); centralized decode "
            f"rate={wins}/100 (need >=90; peel-only two-stage: {staged_wins}/100); "
            f"dominance+bit-exact on 1000 systems: {dominance_ok}")
    assert ok


def test_criterion_8_byte_determinism():
    """Same master seed, same bytes out (CSV and SVG)."""
    cfg = replace(BASE, n=100, k=10, trials=2, eta_grid=(1.5, 2.5), m_cap=40,
                  c1=3.0, c2=20)
    rows1 = run_experiment(cfg)
    rows2 = run_experiment(cfg)
    csv1, csv2 = rows_to_csv(rows1, cfg), rows_to_csv(rows2, cfg)
    svg1, svg2 = render_chart(rows1), render_chart(rows2)
    ok = csv1 == csv2 and svg1 == svg2
    _report("8 (byte determinism)", ok,
            f"CSV identical={csv1 == csv2} ({len(csv1)} bytes), "
            f"SVG identical={svg1 == svg2} ({len(svg1)} bytes)")
    assert ok


def test_supplementary_scale_check():
    """Not a spec criterion: at k=50 the small-k rank losses vanish and the
    pipeline reaches the paper's ~0.95 figure, backing the criterion-1 analysis."""
    t0 = time.time()
    cfg = replace(BASE, n=500, k=50, trials=12, eta_grid=(2.0,), m_cap=60)
    ps = run_experiment(cfg)[0]["ps"]
    ok = ps >= 0.93
    _report("S (supplementary scale check, n=500 k=50)", ok,
            f"Ps(2.0)={ps:.3f} (expect >=0.93; {time.time() - t0:.0f}s)")
    assert ok
