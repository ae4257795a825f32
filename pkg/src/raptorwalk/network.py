"""Random geometric graph generation and inspection.

Nodes are placed uniformly at random in the square [0, side]^2 and two nodes
are adjacent iff their Euclidean distance is at most `radius` (closed ball,
so a distance of exactly `radius` counts).  The graph is stored in CSR form
because the walk kernels index it millions of times per trial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .rng import Stream, derive_seed


class ConfigError(ValueError):
    """Invalid configuration or precondition violation (CLI exit code 2)."""


@dataclass(frozen=True)
class GraphTopology:
    """Immutable RGG: positions plus CSR adjacency with sorted neighbor ids."""

    n: int
    side: float
    radius: float
    positions: np.ndarray            # (n, 2) float64
    indptr: np.ndarray               # (n + 1,) int64
    indices: np.ndarray              # (#directed edges,) int32, sorted per node
    degrees: np.ndarray = field(init=False)  # (n,) int64

    def __post_init__(self):
        object.__setattr__(self, "degrees", np.diff(self.indptr))
        self.positions.setflags(write=False)
        self.indptr.setflags(write=False)
        self.indices.setflags(write=False)

    def neighbors(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    @property
    def edge_count(self) -> int:
        return int(self.indices.shape[0]) // 2

    @property
    def mean_degree(self) -> float:
        return float(self.degrees.mean())


def default_radius(n: int, side: float, target_degree: float = 10.0) -> float:
    """Radius giving an expected interior degree of `target_degree`."""
    return side * math.sqrt(target_degree / (math.pi * n))


def generate_rgg(n: int, side: float, radius: float, seed: int) -> GraphTopology:
    """Generate an RGG with i.i.d. uniform positions; deterministic per seed."""
    if n < 2:
        raise ConfigError(f"need at least 2 nodes, got {n}")
    if side <= 0 or radius <= 0:
        raise ConfigError("side and radius must be positive")
    stream = Stream(seed)
    pos = np.empty((n, 2), dtype=np.float64)
    for i in range(n):
        pos[i, 0] = stream.random() * side
        pos[i, 1] = stream.random() * side
    return _topology_from_positions(pos, side, radius)


def _topology_from_positions(pos: np.ndarray, side: float, radius: float) -> GraphTopology:
    n = pos.shape[0]
    dx = pos[:, 0:1] - pos[:, 0:1].T
    dy = pos[:, 1:2] - pos[:, 1:2].T
    adj = (dx * dx + dy * dy) <= radius * radius
    np.fill_diagonal(adj, False)
    indptr = np.zeros(n + 1, dtype=np.int64)
    indptr[1:] = np.cumsum(adj.sum(axis=1))
    indices = np.nonzero(adj)[1].astype(np.int32)
    return GraphTopology(n=n, side=float(side), radius=float(radius),
                         positions=pos, indptr=indptr, indices=indices)


def is_connected(g: GraphTopology) -> bool:
    """True iff a traversal from node 0 reaches all n nodes."""
    seen = np.zeros(g.n, dtype=bool)
    seen[0] = True
    frontier = [0]
    reached = 1
    while frontier:
        nxt = []
        for u in frontier:
            for v in g.neighbors(u):
                if not seen[v]:
                    seen[v] = True
                    reached += 1
                    nxt.append(int(v))
        frontier = nxt
    return reached == g.n


def generate_connected_rgg(n: int, side: float, radius: float, seed: int,
                           max_attempts: int = 200) -> tuple[GraphTopology, int]:
    """Resample (with derived sub-seeds) until connected.

    Returns (graph, attempts_used).  Raises ConfigError when the radius is so
    small that max_attempts samples all come out disconnected.
    """
    for attempt in range(max_attempts):
        g = generate_rgg(n, side, radius, derive_seed(seed, attempt))
        if is_connected(g):
            return g, attempt + 1
    raise ConfigError(
        f"no connected RGG with n={n} side={side} radius={radius} "
        f"in {max_attempts} attempts")


def choose_sources(g: GraphTopology, k: int, seed: int) -> tuple[int, ...]:
    """k distinct node ids, uniform without replacement, sorted."""
    if not 1 <= k <= g.n:
        raise ConfigError(f"need 1 <= k <= n, got k={k} n={g.n}")
    stream = Stream(seed)
    return tuple(sorted(stream.sample_without_replacement(g.n, k)))


def dump_topology(g: GraphTopology) -> str:
    """Plain-text dump: `n side radius`, node lines, then edge lines (u < v)."""
    lines = [f"{g.n} {g.side:.17g} {g.radius:.17g}"]
    for i in range(g.n):
        lines.append(f"{i} {g.positions[i, 0]:.17g} {g.positions[i, 1]:.17g}")
    for u in range(g.n):
        for v in g.neighbors(u):
            if u < v:
                lines.append(f"{u} {v}")
    return "\n".join(lines) + "\n"


def load_topology(text: str) -> GraphTopology:
    """Parse a dump_topology document; adjacency is recomputed and verified."""
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not rows or len(rows[0]) != 3:
        raise ConfigError("malformed topology header")
    n = int(rows[0][0])
    side = float(rows[0][1])
    radius = float(rows[0][2])
    if len(rows) < 1 + n:
        raise ConfigError("truncated topology file")
    pos = np.empty((n, 2), dtype=np.float64)
    for row in rows[1:1 + n]:
        i = int(row[0])
        pos[i, 0] = float(row[1])
        pos[i, 1] = float(row[2])
    g = _topology_from_positions(pos, side, radius)
    edges = {(int(r[0]), int(r[1])) for r in rows[1 + n:]}
    actual = {(u, int(v)) for u in range(n) for v in g.neighbors(u) if u < v}
    if edges != actual:
        raise ConfigError("edge list disagrees with the distance rule")
    return g
