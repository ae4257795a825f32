"""Benchmark the compiled walk kernels against the pure-Python fallback.

Usage: python -m raptorwalk.bench [--n 200] [--k 20] [--c1 5] [--repeat 3]

Runs the pre-coding and coding phase kernels of one standard trial on both
backends, checks that the outputs match exactly, and reports the speedup.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from ._engine import get_backend, have_compiled
from .codec import make_params
from .network import choose_sources, default_radius, generate_connected_rgg
from .rng import derive_seed
from .walkers import cover_threshold


def _workload(n: int, k: int, c1: float, seed: int):
    g, _ = generate_connected_rgg(n, 5.0, default_radius(n, 5.0),
                                  derive_seed(seed, 1))
    sources = choose_sources(g, k, derive_seed(seed, 2))
    params = make_params(n=n, k=k, epsilon=0.5, c1=c1)
    thr = cover_threshold(n, c1)
    thresholds = np.full(n, thr, dtype=np.int64)
    is_precode = np.zeros(n, dtype=np.uint8)
    capacity = np.zeros(n, dtype=np.int32)
    owner = np.full(n, -1, dtype=np.int32)
    for i, s in enumerate(sources):
        is_precode[s] = 1
        capacity[s] = 3
        owner[s] = i
    extra = [u for u in range(n) if not is_precode[u]][: params.m - k]
    for u in extra:
        is_precode[u] = 1
        capacity[u] = 2
    pkt_start = np.repeat(np.asarray(sources, dtype=np.int32), 3)
    pkt_src = np.repeat(np.arange(k, dtype=np.int32), 3)
    origins = np.asarray([u for u in range(n) if is_precode[u]], dtype=np.int32)
    accept = np.full(n, 3.0 / params.m, dtype=np.float64)
    return {
        "graph": g, "k": k, "thr": thr, "thresholds": thresholds,
        "is_precode": is_precode, "capacity": capacity, "owner": owner,
        "pkt_start": pkt_start, "pkt_src": pkt_src, "origins": origins,
        "accept": accept, "seed": seed,
    }


def _run_once(engine, w):
    g = w["graph"]
    pre = engine.precode_run(g.indptr, g.indices, w["pkt_start"], w["pkt_src"],
                             w["thresholds"], w["is_precode"], w["capacity"],
                             w["owner"], w["k"], 3 * w["thr"], 100 * w["thr"],
                             derive_seed(w["seed"], 3))
    rap = engine.raptor_run(g.indptr, g.indices, w["origins"], w["thresholds"],
                            w["accept"], True, True, 100 * w["thr"],
                            derive_seed(w["seed"], 4))
    return pre, rap


def run_benchmark(n: int = 200, k: int = 20, c1: float = 5.0, repeat: int = 3,
                  seed: int = 7) -> dict:
    w = _workload(n, k, c1, seed)
    results = {}
    for name in ("python", "compiled") if have_compiled() else ("python",):
        engine = get_backend(name)
        best = float("inf")
        outputs = None
        for _ in range(repeat):
            t0 = time.perf_counter()
            outputs = _run_once(engine, w)
            best = min(best, time.perf_counter() - t0)
        moves = outputs[0].transmissions + outputs[1].transmissions
        results[name] = {"seconds": best, "moves": moves, "outputs": outputs}
    if len(results) == 2:
        a, b = results["python"]["outputs"], results["compiled"]["outputs"]
        match = (a[0].absorb_events == b[0].absorb_events
                 and a[0].transmissions == b[0].transmissions
                 and a[1].accept_events == b[1].accept_events
                 and a[1].transmissions == b[1].transmissions)
        results["match"] = match
    return results


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--k", type=int, default=20)
    ap.add_argument("--c1", type=float, default=5.0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    res = run_benchmark(args.n, args.k, args.c1, args.repeat)
    print(f"workload: n={args.n} k={args.k} C1={args.c1} "
          f"({res['python']['moves']} packet moves)")
    for name in ("python", "compiled"):
        if name in res:
            r = res[name]
            rate = r["moves"] / r["seconds"] / 1e6
            print(f"  {name:9s} {r['seconds']*1e3:9.1f} ms   {rate:7.2f} M moves/s")
    if "match" in res:
        print(f"  outputs identical: {res['match']}")
        speed = res["python"]["seconds"] / res["compiled"]["seconds"]
        print(f"  speedup: {speed:.1f}x")
        return 0 if res["match"] else 1
    print("  compiled backend not built; only python timed")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
