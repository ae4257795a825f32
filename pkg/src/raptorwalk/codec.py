"""Coding mathematics: degree distributions, XOR block algebra, the peeling
(belief-propagation) decoder, a GF(2) Gaussian-elimination oracle, and a
centralized two-layer rateless encoder used to validate the distributed one.

Equations are stored as (bitmask over unknown ids, right-hand-side block);
GF(2) row operations are XORs of Python ints, which keeps the decoders fast
without any compiled code.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

from .network import ConfigError
from .rng import Stream, derive_seed

DEFAULT_PAYLOAD_LEN = 32


# ---------------------------------------------------------------------------
# Degree distributions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DegreeDistribution:
    """Discrete distribution over integer degrees with an inverse-CDF sampler."""

    support: tuple[int, ...]
    mass: tuple[float, ...]
    cdf: tuple[float, ...] = field(init=False)

    def __post_init__(self):
        if len(self.support) != len(self.mass) or not self.support:
            raise ValueError("support and mass must be equal-length, non-empty")
        if any(p < 0 for p in self.mass):
            raise ValueError("negative probability mass")
        total = math.fsum(self.mass)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"mass sums to {total}, not 1")
        acc, cdf = 0.0, []
        for p in self.mass:
            acc += p
            cdf.append(acc)
        cdf[-1] = 1.0
        object.__setattr__(self, "cdf", tuple(cdf))

    def mean(self) -> float:
        return math.fsum(d * p for d, p in zip(self.support, self.mass))

    def sample(self, stream: Stream) -> int:
        return self.support[bisect_left(self.cdf, stream.random())]


def sample_degree(dist: DegreeDistribution, stream: Stream) -> int:
    """Inverse-transform sample from a degree distribution."""
    return dist.sample(stream)


def lt_cutoff(epsilon: float, literal: bool = False) -> int:
    """Truncation degree D for the rateless output distribution.

    Default is ceil(4*(1+eps)/eps); the `literal` variant ceil(4*(1+eps)*eps)
    is available for comparison but collapses the distribution for small eps,
    so D is clamped to at least 2 either way.
    """
    if literal:
        d = math.ceil(4.0 * (1.0 + epsilon) * epsilon)
    else:
        d = math.ceil(4.0 * (1.0 + epsilon) / epsilon)
    return max(2, d)


def raptor_lt_distribution(epsilon: float, literal_cutoff: bool = False) -> DegreeDistribution:
    """Truncated-soliton output degree distribution with a spike at degree 1.

    mass(1) = rho/(1+rho), mass(i) = 1/(i(i-1)(1+rho)) for 2 <= i <= D, and
    mass(D+1) = 1/(D(1+rho)) with rho = eps/2 + (eps/2)^2.  The telescoping
    sum of 1/(i(i-1)) makes the total exactly 1.
    """
    if not 0.0 < epsilon <= 1.0:
        raise ConfigError(f"epsilon must be in (0, 1], got {epsilon}")
    rho = epsilon / 2.0 + (epsilon / 2.0) ** 2
    d_max = lt_cutoff(epsilon, literal_cutoff)
    scale = 1.0 / (1.0 + rho)
    support = tuple(range(1, d_max + 2))
    mass = [rho * scale]
    for i in range(2, d_max + 1):
        mass.append(scale / (i * (i - 1)))
    mass.append(scale / d_max)
    return DegreeDistribution(support, tuple(mass))


def precode_params(k: int, epsilon: float) -> tuple[int, float]:
    """Pre-code size m and rate R0 = (1+eps/2)/(1+eps), with m = round(k/R0).

    For very small k the rounding can give m == k; that degenerate case is
    allowed (the eps -> 0 limit is m == k by construction).
    """
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    if epsilon <= 0:
        raise ConfigError("epsilon must be positive")
    r0 = (1.0 + epsilon / 2.0) / (1.0 + epsilon)
    m = round(k / r0)
    return max(m, k), r0


def binomial_distribution(count: int, p: float) -> DegreeDistribution:
    """Binomial(count, p) as a sampleable DegreeDistribution."""
    q = 1.0 - p
    support = tuple(range(count + 1))
    mass = tuple(math.comb(count, d) * p ** d * q ** (count - d) for d in support)
    return DegreeDistribution(support, mass)


def precode_indegree_distribution(k: int, eb: float, m: int) -> DegreeDistribution:
    """Binomial(k, eb/m) law for the number of blocks a pre-code output absorbs."""
    if not 0.0 < eb / m < 1.0:
        raise ConfigError(f"need 0 < eb/m < 1, got eb={eb} m={m}")
    return binomial_distribution(k, eb / m)


def omega_left_distribution(eb: float = 4.0, kind: str = "const") -> DegreeDistribution:
    """Pre-code left-degree law: how many outputs each source block feeds.

    "const" (default) is the fixed-degree baseline (every source picks
    round(eb) outputs); "poisson" is a truncated Poisson with mean ~eb.
    """
    if kind == "const":
        b = round(eb)
        if b < 1:
            raise ConfigError("constant left degree must be >= 1")
        return DegreeDistribution((b,), (1.0,))
    if kind == "poisson":
        cap = max(8, int(4 * eb))
        raw = [math.exp(-eb) * eb ** d / math.factorial(d) for d in range(1, cap + 1)]
        total = math.fsum(raw)
        return DegreeDistribution(tuple(range(1, cap + 1)),
                                  tuple(p / total for p in raw))
    raise ConfigError(f"unknown left-degree kind {kind!r}")


# ---------------------------------------------------------------------------
# System parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SystemParams:
    """Every scalar the protocols need, plus behavioral switches.

    Derived fields (m, r0, rho, d_cutoff, eb) are computed by `make_params`;
    construct through it unless you are deliberately injecting odd values.
    """

    epsilon: float
    k: int
    n: int
    m: int
    r0: float
    d_cutoff: int
    rho: float
    c1: float
    c2: int
    payload_len: int = DEFAULT_PAYLOAD_LEN
    eb: float = 4.0
    omega_left: str = "const"
    literal_cutoff: bool = False
    origin_self_accept: bool = True
    own_packet_init: bool = True
    discard_precedence: bool = True
    inference_pairing: str = "merged"      # or "aligned-abs"
    visit_divisor: float = 2.0

    def lt_distribution(self) -> DegreeDistribution:
        return raptor_lt_distribution(self.epsilon, self.literal_cutoff)

    def left_distribution(self) -> DegreeDistribution:
        return omega_left_distribution(self.eb, self.omega_left)


def make_params(n: int, k: int, epsilon: float, c1: float = 5.0, c2: int = 50,
                **overrides) -> SystemParams:
    """Build a validated SystemParams from the free parameters."""
    if not 1 <= k <= n:
        raise ConfigError(f"need 1 <= k <= n, got k={k} n={n}")
    if c1 <= 0:
        raise ConfigError("C1 must be positive")
    if c2 < 1:
        raise ConfigError("C2 must be a positive integer")
    kind = overrides.pop("omega_left", "const")
    eb_target = overrides.pop("eb", 4.0)
    literal = overrides.pop("literal_cutoff", False)
    left = omega_left_distribution(eb_target, kind)
    m, r0 = precode_params(k, epsilon)
    if m > n:
        raise ConfigError(f"pre-code needs m={m} output nodes but n={n}")
    rho = epsilon / 2.0 + (epsilon / 2.0) ** 2
    return SystemParams(epsilon=epsilon, k=k, n=n, m=m, r0=r0,
                        d_cutoff=lt_cutoff(epsilon, literal), rho=rho,
                        c1=c1, c2=c2, eb=left.mean(), omega_left=kind,
                        literal_cutoff=literal, **overrides)


# ---------------------------------------------------------------------------
# Block algebra
# ---------------------------------------------------------------------------

def zero_block(length: int) -> bytes:
    return bytes(length)


def xor_blocks(a: bytes, b: bytes) -> bytes:
    if len(a) != len(b):
        raise ValueError(f"block length mismatch: {len(a)} vs {len(b)}")
    n = len(a)
    return (int.from_bytes(a, "little") ^ int.from_bytes(b, "little")).to_bytes(n, "little")


def xor_combine(blocks: Sequence[bytes], length: int | None = None) -> bytes:
    """Bytewise XOR fold; the empty list yields the zero block."""
    if not blocks:
        if length is None:
            raise ValueError("empty input needs an explicit length")
        return zero_block(length)
    n = len(blocks[0])
    acc = 0
    for b in blocks:
        if len(b) != n:
            raise ValueError(f"block length mismatch: {len(b)} vs {n}")
        acc ^= int.from_bytes(b, "little")
    return acc.to_bytes(n, "little")


def make_source_blocks(k: int, payload_len: int, seed: int) -> list[bytes]:
    """Seeded per-source payloads so recovery can be checked bit-for-bit."""
    return [Stream(derive_seed(seed, i)).bytes(payload_len) for i in range(k)]


# ---------------------------------------------------------------------------
# Constraint systems and decoders
# ---------------------------------------------------------------------------

@dataclass
class ConstraintSystem:
    """XOR equations over `unknown_count` block-valued unknowns.

    Each equation is (bitmask of unknown ids, rhs block).  Duplicate ids in
    one input equation cancel pairwise at construction time.
    """

    unknown_count: int
    block_len: int
    equations: list[tuple[int, bytes]] = field(default_factory=list)

    @classmethod
    def build(cls, unknown_count: int, block_len: int,
              items: Iterable[tuple[Iterable[int], bytes]]) -> "ConstraintSystem":
        eqs = []
        for ids, rhs in items:
            mask = 0
            for i in ids:
                if not 0 <= i < unknown_count:
                    raise ValueError(f"unknown id {i} out of range")
                mask ^= 1 << i
            if len(rhs) != block_len:
                raise ValueError("rhs length mismatch")
            eqs.append((mask, rhs))
        return cls(unknown_count, block_len, eqs)

    def dump_text(self) -> str:
        lines = [f"{self.unknown_count} {self.block_len}"]
        for mask, rhs in self.equations:
            ids = " ".join(str(i) for i in _mask_bits(mask))
            lines.append(f"{ids}|{rhs.hex()}" if ids else f"|{rhs.hex()}")
        return "\n".join(lines) + "\n"

    @classmethod
    def parse_text(cls, text: str) -> "ConstraintSystem":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        unknown_count, block_len = (int(x) for x in lines[0].split())
        items = []
        for ln in lines[1:]:
            ids_part, hex_part = ln.split("|")
            ids = [int(x) for x in ids_part.split()] if ids_part.strip() else []
            items.append((ids, bytes.fromhex(hex_part)))
        return cls.build(unknown_count, block_len, items)


def _mask_bits(mask: int) -> list[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def peel_decode(system: ConstraintSystem) -> tuple[dict[int, bytes], int]:
    """Iterative degree-1 peeling; returns (partial assignment, solved count).

    Sound by construction: every assignment is a direct consequence of the
    input equations, so partial recovery is always correct.
    """
    masks = [mask for mask, _ in system.equations]
    rhs = [int.from_bytes(r, "little") for _, r in system.equations]
    occurs: dict[int, list[int]] = {}
    for e, mask in enumerate(masks):
        for u in _mask_bits(mask):
            occurs.setdefault(u, []).append(e)
    stack = [e for e, mask in enumerate(masks) if mask and mask & (mask - 1) == 0]
    solved: dict[int, int] = {}
    while stack:
        e = stack.pop()
        mask = masks[e]
        if not mask or mask & (mask - 1):
            continue  # stale entry: equation no longer degree 1
        u = mask.bit_length() - 1
        value = rhs[e]
        solved[u] = value
        for f in occurs.get(u, ()):
            if masks[f] >> u & 1:
                masks[f] ^= 1 << u
                rhs[f] ^= value
                if masks[f] and masks[f] & (masks[f] - 1) == 0:
                    stack.append(f)
    n = system.block_len
    return {u: v.to_bytes(n, "little") for u, v in solved.items()}, len(solved)


def gauss_decode(system: ConstraintSystem) -> tuple[dict[int, bytes], bool]:
    """GF(2) elimination oracle; success iff rank equals unknown_count.

    On rank deficit it still returns every unknown the row space pins down,
    which is always a superset of what peeling recovers.
    """
    pivot: dict[int, list[int]] = {}  # pivot column -> [mask, rhs]
    for mask, rhs_bytes in system.equations:
        cur_m = mask
        cur_r = int.from_bytes(rhs_bytes, "little")
        while cur_m:
            col = (cur_m & -cur_m).bit_length() - 1
            if col in pivot:
                cur_m ^= pivot[col][0]
                cur_r ^= pivot[col][1]
            else:
                pivot[col] = [cur_m, cur_r]
                break
    # Back-substitute from the highest pivot down to reach reduced form.
    # A pivot row's pivot is its lowest set bit, so the bits to clear are all
    # higher pivot columns, whose rows are already reduced when we get there.
    for col in sorted(pivot, reverse=True):
        row = pivot[col]
        for b in _mask_bits(row[0] ^ (1 << col)):
            if b in pivot:
                row[0] ^= pivot[b][0]
                row[1] ^= pivot[b][1]
    n = system.block_len
    assignment = {col: row[1].to_bytes(n, "little")
                  for col, row in pivot.items() if row[0] == 1 << col}
    success = len(pivot) == system.unknown_count
    return assignment, success


# ---------------------------------------------------------------------------
# Centralized two-layer reference encoder
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EncodedSymbol:
    """One rateless output: which intermediates it XORs, the expanded source
    lineage, and the payload."""

    y_ids: frozenset[int]
    source_ids: frozenset[int]
    block: bytes


def build_random_precode(source_blocks: Sequence[bytes], m: int,
                         left_dist: DegreeDistribution, stream: Stream,
                         ) -> tuple[list[bytes], list[frozenset[int]]]:
    """Randomized sparse pre-code: each source feeds `b` distinct outputs."""
    if m < 1:
        raise ConfigError("pre-code needs at least one output")
    payload_len = len(source_blocks[0])
    y_val = [0] * m
    y_src: list[set[int]] = [set() for _ in range(m)]
    for i, block in enumerate(source_blocks):
        b = min(left_dist.sample(stream), m)
        for j in stream.sample_without_replacement(m, b):
            y_val[j] ^= int.from_bytes(block, "little")
            y_src[j].add(i)
    blocks = [v.to_bytes(payload_len, "little") for v in y_val]
    return blocks, [frozenset(s) for s in y_src]


class CentralizedEncoder:
    """Non-distributed reference encoder: pre-code once, then emit a stream of
    XOR combinations of the intermediates with truncated-soliton degrees.

    Exposes the pre-code tables (`y_blocks`, `y_sources`) so validation code
    can decode its own output and audit lineages.
    """

    def __init__(self, source_blocks: Sequence[bytes], params: SystemParams,
                 seed: int):
        if len(source_blocks) != params.k:
            raise ConfigError("need exactly k source blocks")
        self._stream = Stream(seed)
        self.m = params.m
        self.payload_len = len(source_blocks[0])
        self.y_blocks, self.y_sources = build_random_precode(
            source_blocks, params.m, params.left_distribution(), self._stream)
        self._lt = params.lt_distribution()

    def emit_one(self) -> EncodedSymbol:
        d = min(self._lt.sample(self._stream), self.m)
        ys = self._stream.sample_without_replacement(self.m, d)
        acc = 0
        lineage: set[int] = set()
        for j in ys:
            acc ^= int.from_bytes(self.y_blocks[j], "little")
            lineage ^= self.y_sources[j]
        return EncodedSymbol(frozenset(ys), frozenset(lineage),
                             acc.to_bytes(self.payload_len, "little"))

    def __iter__(self) -> Iterator[EncodedSymbol]:
        while True:
            yield self.emit_one()


def centralized_raptor_encode(source_blocks: Sequence[bytes], params: SystemParams,
                              seed: int) -> Iterator[EncodedSymbol]:
    """Endless stream of reference-encoded symbols (see CentralizedEncoder)."""
    return iter(CentralizedEncoder(source_blocks, params, seed))


# ---------------------------------------------------------------------------
# Two-stage decoding
# ---------------------------------------------------------------------------

@dataclass
class TwoStageResult:
    success: bool
    bp_pure: bool                       # solved with peeling alone
    recovered: dict[int, bytes]         # source id -> block
    stage1_solved: int                  # intermediates recovered
    peel_recovered: int                 # sources recovered before any elimination


def two_stage_decode(storage_eqs: Sequence[tuple[Iterable[int], bytes]],
                     y_sources: Sequence[frozenset[int]], k: int, block_len: int,
                     stage2_gauss: bool = True) -> TwoStageResult:
    """Decode storage equations over intermediates, then intermediates to sources.

    Stage 1 peels the storage system.  Intermediates with an empty lineage are
    known-zero from their public headers and enter stage 1 as free equations.
    Stage 2 peels the pre-code relations restricted to recovered intermediates
    and, when `stage2_gauss`, falls back to GF(2) elimination on those same
    relations if peeling stalls.
    """
    m = len(y_sources)
    stage1_items = [(ids, rhs) for ids, rhs in storage_eqs]
    stage1_items += [((j,), zero_block(block_len))
                     for j in range(m) if not y_sources[j]]
    sys1 = ConstraintSystem.build(m, block_len, stage1_items)
    y_solved, _ = peel_decode(sys1)

    stage2_items = [(sorted(y_sources[j]), val) for j, val in sorted(y_solved.items())
                    if y_sources[j]]
    sys2 = ConstraintSystem.build(k, block_len, stage2_items)
    x_peel, _ = peel_decode(sys2)
    if len(x_peel) == k:
        return TwoStageResult(True, True, x_peel, len(y_solved), k)
    recovered = dict(x_peel)
    success = False
    if stage2_gauss:
        x_ge, ok = gauss_decode(sys2)
        recovered.update(x_ge)
        success = ok
    return TwoStageResult(success, False, recovered, len(y_solved), len(x_peel))


def composite_source_system(storage_eqs: Sequence[tuple[Iterable[int], bytes]],
                            y_sources: Sequence[frozenset[int]], k: int,
                            block_len: int) -> ConstraintSystem:
    """Eliminate the intermediates symbolically: equations directly over sources.

    Gaussian elimination on this system is the maximum-likelihood oracle that
    upper-bounds any staged decoder on the same query.
    """
    items = []
    for ids, rhs in storage_eqs:
        lineage: set[int] = set()
        for j in ids:
            lineage ^= y_sources[j]
        items.append((sorted(lineage), rhs))
    return ConstraintSystem.build(k, block_len, items)
