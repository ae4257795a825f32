"""The compiled kernels must match the pure-Python reference draw-for-draw."""

import numpy as np
import pytest

from raptorwalk._engine import get_backend, have_compiled
from raptorwalk.network import choose_sources, generate_connected_rgg
from raptorwalk.rng import derive_seed

pytestmark = pytest.mark.skipif(not have_compiled(),
                                reason="compiled backend not built")


@pytest.fixture(scope="module")
def setup():
    g, _ = generate_connected_rgg(60, 5.0, 1.3, derive_seed(700, 1))
    src = choose_sources(g, 6, derive_seed(700, 2))
    thr = np.full(60, 300, dtype=np.int64)
    is_pre = np.zeros(60, dtype=np.uint8)
    cap = np.zeros(60, dtype=np.int32)
    owner = np.full(60, -1, dtype=np.int32)
    for i, s in enumerate(src):
        is_pre[s] = 1
        cap[s] = 2
        owner[s] = i
    for u in (3, 7, 11):
        is_pre[u] = 1
        cap[u] = 3
    return {
        "g": g, "src": src, "thr": thr, "is_pre": is_pre, "cap": cap,
        "owner": owner,
        "pkt_start": np.repeat(np.asarray(src, dtype=np.int32), 4),
        "pkt_src": np.repeat(np.arange(6, dtype=np.int32), 4),
        "origins": np.asarray([u for u in range(60) if is_pre[u]], dtype=np.int32),
        "prob": np.linspace(0.05, 0.5, 60),
    }


def test_precode_parity(setup):
    g = setup["g"]
    results = []
    for name in ("python", "compiled"):
        e = get_backend(name)
        results.append(e.precode_run(
            g.indptr, g.indices, setup["pkt_start"], setup["pkt_src"],
            setup["thr"], setup["is_pre"], setup["cap"].copy(), setup["owner"],
            6, 900, 30000, 12345))
    a, b = results
    assert a.absorb_events == b.absorb_events
    assert a.discards == b.discards
    assert a.counters == b.counters
    assert a.transmissions == b.transmissions
    assert a.rounds == b.rounds
    assert a.aborted == b.aborted == False


def test_raptor_parity(setup):
    g = setup["g"]
    results = []
    for name in ("python", "compiled"):
        e = get_backend(name)
        results.append(e.raptor_run(g.indptr, g.indices, setup["origins"],
                                    setup["thr"], setup["prob"], True, True,
                                    30000, 777))
    a, b = results
    assert a.accept_events == b.accept_events
    assert a.discard_counters == b.discard_counters
    assert a.transmissions == b.transmissions
    assert a.rounds == b.rounds


def test_raptor_parity_without_self_accept_or_precedence(setup):
    g = setup["g"]
    results = []
    for name in ("python", "compiled"):
        e = get_backend(name)
        results.append(e.raptor_run(g.indptr, g.indices, setup["origins"],
                                    setup["thr"], setup["prob"], False, False,
                                    30000, 778))
    a, b = results
    assert a.accept_events == b.accept_events
    assert a.discard_counters == b.discard_counters


def test_inference_parity(setup):
    g = setup["g"]
    starts = np.asarray(setup["src"], dtype=np.int32)
    results = []
    for name in ("python", "compiled"):
        e = get_backend(name)
        results.append(e.inference_run(g.indptr, g.indices, starts,
                                       12, 56, 100000, 999))
    a, b = results
    assert a.times == b.times
    assert a.first_seen == b.first_seen
    assert a.stopped == b.stopped
    assert a.stop_round == b.stop_round
    assert a.merged_first == b.merged_first
    assert a.merged_last == b.merged_last
    assert a.merged_count == b.merged_count
    assert a.counters == b.counters
    assert a.transmissions == b.transmissions
    assert a.rounds == b.rounds


def test_visit_and_cover_parity(setup):
    g = setup["g"]
    pe, ce = get_backend("python"), get_backend("compiled")
    assert (pe.visit_stats_run(g.indptr, g.indices, list(setup["src"]), 20000, 31337)
            == ce.visit_stats_run(g.indptr, g.indices, list(setup["src"]), 20000, 31337))
    assert (pe.cover_time_run(g.indptr, g.indices, 0, 10 ** 7, 555)
            == ce.cover_time_run(g.indptr, g.indices, 0, 10 ** 7, 555))


def test_guard_abort_flag(setup):
    g = setup["g"]
    for name in ("python", "compiled"):
        e = get_backend(name)
        res = e.precode_run(g.indptr, g.indices, setup["pkt_start"],
                            setup["pkt_src"], setup["thr"], setup["is_pre"],
                            setup["cap"].copy(), setup["owner"], 6, 900, 5, 12345)
        assert res.aborted
        assert res.rounds == 5


def test_full_protocol_parity(small_graph, small_params, monkeypatch):
    from raptorwalk import protocol
    from raptorwalk._engine import pure
    from raptorwalk.network import choose_sources as pick

    src = pick(small_graph, 6, derive_seed(800, 2))
    compiled_out = protocol.rcds1_run(small_graph, src, small_params, 4242)
    compiled_out2 = protocol.rcds2_run(small_graph, src, small_params, 4242)
    monkeypatch.setattr(protocol, "get_engine", lambda trace=False: pure)
    pure_out = protocol.rcds1_run(small_graph, src, small_params, 4242)
    pure_out2 = protocol.rcds2_run(small_graph, src, small_params, 4242)
    assert compiled_out.storage_blocks == pure_out.storage_blocks
    assert compiled_out.storage_lineage == pure_out.storage_lineage
    assert compiled_out.y_lineages == pure_out.y_lineages
    assert compiled_out.transmissions == pure_out.transmissions
    assert compiled_out2.storage_blocks == pure_out2.storage_blocks
    assert compiled_out2.estimates == pure_out2.estimates
    assert compiled_out2.transmissions == pure_out2.transmissions
