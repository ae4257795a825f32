"""Command-line entry point.

Subcommands: run, sweep, chart, topology, trace.  Exit codes: 0 success,
2 configuration error, 3 simulation abort guard.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields

from ._engine import backend_name
from .chart import render_chart
from .harness import (ExperimentConfig, SWEEPABLE, config_from_mapping,
                      csv_to_rows, parse_config_file, rows_to_csv,
                      run_experiment, sweep)
from .network import (ConfigError, choose_sources, dump_topology, generate_rgg,
                      is_connected, load_topology)
from .protocol import SimulationAbort, rcds1_run, rcds2_run


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file")
    for f in fields(ExperimentConfig):
        flag = "--" + f.name.replace("_", "-")
        p.add_argument(flag, dest=f.name, default=None,
                       help=f"override {f.name} (default {f.default!r})")


def _build_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if args.config:
        with open(args.config) as fh:
            cfg = config_from_mapping(parse_config_file(fh.read()), cfg)
    overrides = {f.name: getattr(args, f.name)
                 for f in fields(ExperimentConfig)
                 if getattr(args, f.name, None) is not None}
    cfg = config_from_mapping(overrides, cfg)
    cfg.validate()
    return cfg


def _emit(text: str, path: str) -> None:
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_run(args) -> int:
    cfg = _build_config(args)
    rows = run_experiment(cfg)
    csv_text = rows_to_csv(rows, cfg)
    _emit(csv_text, cfg.out)
    if cfg.svg:
        with open(cfg.svg, "w", newline="") as fh:
            fh.write(render_chart(rows))
    if cfg.out:
        print(f"wrote {cfg.out} ({len(rows)} rows, engine={backend_name()})")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _build_config(args)
    values = [v for v in args.values.split(",") if v]
    rows = sweep(cfg, args.param, values)
    csv_text = rows_to_csv(rows, cfg)
    _emit(csv_text, cfg.out)
    if cfg.svg:
        series = ("algo", "n", "k", "C1", "C2")
        with open(cfg.svg, "w", newline="") as fh:
            fh.write(render_chart(rows, series_keys=series))
    return 0


def _cmd_chart(args) -> int:
    with open(args.csv) as fh:
        rows = csv_to_rows(fh.read())
    if not rows:
        raise ConfigError(f"no data rows in {args.csv}")
    series = tuple(s for s in args.series.split(",") if s)
    svg = render_chart(rows, x_key=args.x, series_keys=series, title=args.title)
    _emit(svg, args.out)
    return 0


def _cmd_topology(args) -> int:
    if args.action == "dump":
        g = generate_rgg(args.n, args.side, args.radius, args.seed)
        _emit(dump_topology(g), args.out)
        print(f"n={g.n} edges={g.edge_count} mean_degree={g.mean_degree:.2f} "
              f"connected={is_connected(g)}", file=sys.stderr)
        return 0
    with open(getattr(args, "in")) as fh:
        g = load_topology(fh.read())
    if args.out:
        _emit(dump_topology(g), args.out)
    print(f"loaded n={g.n} edges={g.edge_count} connected={is_connected(g)}",
          file=sys.stderr)
    return 0


def _cmd_trace(args) -> int:
    cfg = _build_config(args)
    from .codec import make_source_blocks
    from .network import generate_connected_rgg
    from .rng import (TAG_GRAPH, TAG_PAYLOAD, TAG_PROTOCOL, TAG_SOURCES,
                      derive_seed)

    g, _ = generate_connected_rgg(cfg.n, cfg.side, cfg.resolved_radius(),
                                  derive_seed(cfg.seed, TAG_GRAPH, 0))
    sources = choose_sources(g, cfg.k, derive_seed(cfg.seed, TAG_SOURCES, 0))
    blocks = make_source_blocks(cfg.k, cfg.payload_len,
                                derive_seed(cfg.seed, TAG_PAYLOAD, 0))
    lines: list[str] = []

    def tracer(rnd, node, event, pkt, counter):
        lines.append(f"{rnd} {node} {event} {pkt} {counter}")

    run = rcds2_run if cfg.algorithm == "rcds2" else rcds1_run
    outcome = run(g, sources, cfg.system_params(),
                  derive_seed(cfg.seed, TAG_PROTOCOL, 0),
                  source_blocks=blocks, trace=tracer)
    _emit("\n".join(lines) + "\n", cfg.out)
    print(f"trace: {len(lines)} events, transmissions="
          f"{outcome.transmissions['total']}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="raptorwalk",
        description="Distributed rateless-storage simulator on random geometric graphs")
    sub = ap.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment, emit a Ps CSV")
    _add_config_flags(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="sweep one parameter")
    _add_config_flags(p_sweep)
    p_sweep.add_argument("--param", required=True, choices=SWEEPABLE)
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated values")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_chart = sub.add_parser("chart", help="render a CSV to SVG")
    p_chart.add_argument("--csv", required=True)
    p_chart.add_argument("--out", default="")
    p_chart.add_argument("--x", default="eta")
    p_chart.add_argument("--series", default="algo,n,k,C1,C2")
    p_chart.add_argument("--title", default="")
    p_chart.set_defaults(func=_cmd_chart)

    p_topo = sub.add_parser("topology", help="dump or load a topology file")
    p_topo.add_argument("action", choices=("dump", "load"))
    p_topo.add_argument("--n", type=int, default=200)
    p_topo.add_argument("--side", type=float, default=5.0)
    p_topo.add_argument("--radius", type=float, default=0.8)
    p_topo.add_argument("--seed", type=int, default=1)
    p_topo.add_argument("--in", dest="in", default="")
    p_topo.add_argument("--out", default="")
    p_topo.set_defaults(func=_cmd_topology)

    p_trace = sub.add_parser("trace", help="single-trial event trace (python engine)")
    _add_config_flags(p_trace)
    p_trace.set_defaults(func=_cmd_trace)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SimulationAbort as exc:
        print(f"simulation aborted: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
