"""Experiment orchestration: seeded trials, parameter sweeps, CSV emission.

Everything is a pure function of the master seed.  Per-trial sub-seeds come
from `rng.derive_seed(master, TAG, trial, ...)`, so the trial count and the
eta grid can be extended without disturbing earlier trials, and trials can
run in a process pool with results reduced in trial order.
"""

from __future__ import annotations

import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

from .codec import SystemParams, make_params, make_source_blocks
from .network import (ConfigError, choose_sources, default_radius,
                      generate_connected_rgg)
from .protocol import centralized_run, rcds1_run, rcds2_run
from .query import estimate_ps, wilson_interval
from .rng import (TAG_GRAPH, TAG_PAYLOAD, TAG_PROTOCOL, TAG_QUERY,
                  TAG_SOURCES, derive_seed)

ALGORITHMS = ("rcds1", "rcds2", "centralized-reference")
SWEEPABLE = ("C1", "C2", "n", "k", "epsilon", "eta")
CSV_COLUMNS = ("algo", "n", "k", "eps", "C1", "C2", "eta", "h", "M", "Ms",
               "ps", "ps_lo", "ps_hi", "mean_peel_recovered")


@dataclass(frozen=True)
class ExperimentConfig:
    """Complete description of one experiment; flat key=value serializable."""

    algorithm: str = "rcds1"
    n: int = 200
    k: int = 20
    epsilon: float = 0.5
    side: float = 5.0
    radius: float = 0.0              # 0 -> auto (expected degree ~10)
    c1: float = 5.0
    c2: int = 50
    payload_len: int = 32
    eb: float = 4.0
    omega_left: str = "const"
    trials: int = 30
    eta_grid: tuple = (1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5)
    m_cap: int = 200
    seed: int = 2024
    literal_cutoff: bool = False
    visit_divisor: float = 2.0
    inference_pairing: str = "merged"
    origin_self_accept: bool = True
    own_packet_init: bool = True
    discard_precedence: bool = True
    stage2_gauss: bool = True
    ml_fallback: bool = True
    oracle_check: bool = True
    workers: int = 1
    out: str = ""
    svg: str = ""

    def resolved_radius(self) -> float:
        return self.radius if self.radius > 0 else default_radius(self.n, self.side)

    def system_params(self) -> SystemParams:
        return make_params(
            n=self.n, k=self.k, epsilon=self.epsilon, c1=self.c1, c2=self.c2,
            payload_len=self.payload_len, eb=self.eb, omega_left=self.omega_left,
            literal_cutoff=self.literal_cutoff, visit_divisor=self.visit_divisor,
            inference_pairing=self.inference_pairing,
            origin_self_accept=self.origin_self_accept,
            own_packet_init=self.own_packet_init,
            discard_precedence=self.discard_precedence)

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.eta_grid:
            raise ConfigError("eta grid is empty")
        self.system_params()  # raises on m > n etc.
        for eta in self.eta_grid:
            if round(eta * self.k) > self.n:
                raise ConfigError(f"eta={eta:g} needs {round(eta * self.k)} query "
                                  f"nodes but n={self.n}")

    def echo_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "eta_grid":
                v = ",".join(f"{x:g}" for x in v)
            out[f.name] = v
        return out


_BOOL_KEYS = {"literal_cutoff", "origin_self_accept", "own_packet_init",
              "discard_precedence", "stage2_gauss", "ml_fallback", "oracle_check"}
_INT_KEYS = {"n", "k", "c2", "payload_len", "trials", "m_cap", "seed", "workers"}
_FLOAT_KEYS = {"epsilon", "side", "radius", "c1", "eb", "visit_divisor"}
_ALIASES = {"algo": "algorithm", "eps": "epsilon", "c1": "c1", "c2": "c2",
            "C1": "c1", "C2": "c2", "eta": "eta_grid"}


def _coerce(key: str, value: str):
    if key == "eta_grid":
        return tuple(float(x) for x in str(value).replace(" ", "").split(",") if x)
    if key in _BOOL_KEYS:
        if isinstance(value, bool):
            return value
        return str(value).strip().lower() in ("1", "true", "yes", "on")
    if key in _INT_KEYS:
        return int(value)
    if key in _FLOAT_KEYS:
        return float(value)
    return value


def config_from_mapping(pairs: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Build a config from string key/value pairs (file or CLI), with aliases."""
    cfg = base or ExperimentConfig()
    known = {f.name for f in fields(ExperimentConfig)}
    updates = {}
    for raw_key, value in pairs.items():
        key = _ALIASES.get(raw_key, raw_key.lower())
        key = _ALIASES.get(key, key)
        if key not in known:
            raise ConfigError(f"unknown config key {raw_key!r}")
        updates[key] = _coerce(key, value)
    return replace(cfg, **updates)


def parse_config_file(text: str) -> dict:
    """Flat `key = value` lines; '#' starts a comment."""
    pairs = {}
    for ln in text.splitlines():
        ln = ln.split("#", 1)[0].strip()
        if not ln:
            continue
        if "=" not in ln:
            raise ConfigError(f"malformed config line {ln!r}")
        key, _, value = ln.partition("=")
        pairs[key.strip()] = value.strip()
    return pairs


# ---------------------------------------------------------------------------
# Trial execution
# ---------------------------------------------------------------------------

@dataclass
class TrialResult:
    trial: int
    graph_attempts: int
    transmissions: dict
    discarded_copies: int
    estimate_fallbacks: int
    per_eta: list          # aligned with eta_grid: dict of tallies


def run_single_trial(cfg: ExperimentConfig, trial: int,
                     keep_outcome: bool = False):
    """One seeded trial: graph, sources, protocol run, Ps at every eta."""
    params = cfg.system_params()
    master = cfg.seed
    g, attempts = generate_connected_rgg(
        cfg.n, cfg.side, cfg.resolved_radius(), derive_seed(master, TAG_GRAPH, trial))
    sources = choose_sources(g, cfg.k, derive_seed(master, TAG_SOURCES, trial))
    blocks = make_source_blocks(cfg.k, cfg.payload_len,
                                derive_seed(master, TAG_PAYLOAD, trial))
    proto_seed = derive_seed(master, TAG_PROTOCOL, trial)
    if cfg.algorithm == "rcds1":
        outcome = rcds1_run(g, sources, params, proto_seed, source_blocks=blocks)
    elif cfg.algorithm == "rcds2":
        outcome = rcds2_run(g, sources, params, proto_seed, source_blocks=blocks)
    else:
        outcome = centralized_run(g.n, params, proto_seed, source_blocks=blocks)

    per_eta = []
    for i, eta in enumerate(cfg.eta_grid):
        qr = estimate_ps(outcome, eta, cfg.m_cap,
                         derive_seed(master, TAG_QUERY, trial, i),
                         stage2_gauss=cfg.stage2_gauss,
                         ml_fallback=cfg.ml_fallback,
                         oracle_check=cfg.oracle_check)
        per_eta.append({
            "eta": eta, "h": qr.h, "M": qr.samples, "Ms": qr.successes,
            "peel_sum": qr.mean_peel_recovered * qr.samples,
            "bp_pure": qr.bp_pure_successes,
            "oracle": qr.oracle_successes,
        })
    result = TrialResult(trial=trial, graph_attempts=attempts,
                         transmissions=dict(outcome.transmissions),
                         discarded_copies=outcome.discarded_copies,
                         estimate_fallbacks=outcome.estimate_fallbacks,
                         per_eta=per_eta)
    if keep_outcome:
        return result, outcome
    return result


def _trial_worker(args):
    cfg, trial = args
    return run_single_trial(cfg, trial)


def run_trials(cfg: ExperimentConfig) -> list[TrialResult]:
    cfg.validate()
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_trial_worker,
                                    [(cfg, t) for t in range(cfg.trials)]))
    else:
        results = [run_single_trial(cfg, t) for t in range(cfg.trials)]
    results.sort(key=lambda r: r.trial)
    return results


def aggregate_rows(cfg: ExperimentConfig, results: list[TrialResult]) -> list[dict]:
    """One CSV row per eta, samples pooled across trials."""
    rows = []
    for i, eta in enumerate(cfg.eta_grid):
        m_total = sum(r.per_eta[i]["M"] for r in results)
        ms_total = sum(r.per_eta[i]["Ms"] for r in results)
        peel = sum(r.per_eta[i]["peel_sum"] for r in results)
        lo, hi = wilson_interval(ms_total, m_total)
        rows.append({
            "algo": cfg.algorithm, "n": cfg.n, "k": cfg.k, "eps": cfg.epsilon,
            "C1": cfg.c1, "C2": cfg.c2, "eta": eta,
            "h": results[0].per_eta[i]["h"] if results else 0,
            "M": m_total, "Ms": ms_total,
            "ps": ms_total / m_total if m_total else 0.0,
            "ps_lo": lo, "ps_hi": hi,
            "mean_peel_recovered": peel / m_total if m_total else 0.0,
        })
    return rows


def run_experiment(cfg: ExperimentConfig) -> list[dict]:
    """Run all trials and aggregate; deterministic given cfg.seed."""
    return aggregate_rows(cfg, run_trials(cfg))


def sweep(cfg: ExperimentConfig, parameter: str, values) -> list[dict]:
    """Cross-product sweep over one parameter; rows self-describe the value."""
    if parameter not in SWEEPABLE:
        raise ConfigError(f"cannot sweep {parameter!r}; choose from {SWEEPABLE}")
    if parameter == "eta":
        return run_experiment(replace(cfg, eta_grid=tuple(float(v) for v in values)))
    field_name = {"C1": "c1", "C2": "c2", "n": "n", "k": "k",
                  "epsilon": "epsilon"}[parameter]
    rows = []
    for v in values:
        coerced = int(v) if field_name in ("n", "k", "c2") else float(v)
        rows.extend(run_experiment(replace(cfg, **{field_name: coerced})))
    return rows


# ---------------------------------------------------------------------------
# CSV emission
# ---------------------------------------------------------------------------

def _format_cell(key: str, value) -> str:
    if key in ("ps", "ps_lo", "ps_hi"):
        return f"{value:.6f}"
    if key == "mean_peel_recovered":
        return f"{value:.4f}"
    if isinstance(value, float):
        return f"{value:g}"
    return str(value)


def rows_to_csv(rows: list[dict], cfg: ExperimentConfig | None = None) -> str:
    """Render rows with a config-echo comment header; byte-deterministic."""
    buf = io.StringIO()
    if cfg is not None:
        for key, value in sorted(cfg.echo_dict().items()):
            buf.write(f"# {key}={value}\n")
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for row in rows:
        buf.write(",".join(_format_cell(c, row[c]) for c in CSV_COLUMNS) + "\n")
    return buf.getvalue()


def csv_to_rows(text: str) -> list[dict]:
    """Parse a rows_to_csv document back into typed row dicts."""
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    if not lines:
        return []
    header = lines[0].split(",")
    rows = []
    for ln in lines[1:]:
        cells = ln.split(",")
        row = {}
        for key, cell in zip(header, cells):
            if key in ("n", "k", "h", "M", "Ms"):
                row[key] = int(cell)
            elif key == "algo":
                row[key] = cell
            else:
                row[key] = float(cell)
        rows.append(row)
    return rows
