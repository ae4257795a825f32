"""Deterministic random number generation shared by every simulation layer.

The whole pipeline is driven by a single 64-bit master seed.  Sub-streams
(graph generation, source choice, payloads, protocol phases, query sampling)
are derived with `derive_seed`, a counter-style splitmix64 fold, so that any
trial can be re-run in isolation and so that adding trials or eta points
never shifts the randomness of existing ones.

The generator itself is splitmix64.  The compiled walk kernels implement the
exact same update, bounded-integer and float mappings in C, so a simulation
produces bit-identical trajectories on either backend.

Derivation scheme (documented for reproducibility):

    stream_seed = mix64(master); then for each path element x:
    stream_seed = mix64(stream_seed XOR mix64((x + GOLDEN) mod 2^64))

with GOLDEN = 0x9E3779B97F4A7C15 and mix64 the splitmix64 finalizer.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

# Purpose tags used by the harness when splitting the master seed.
TAG_GRAPH = 1
TAG_SOURCES = 2
TAG_PAYLOAD = 3
TAG_PROTOCOL = 4
TAG_QUERY = 5

# Phase tags used by the protocol when splitting a protocol seed.
TAG_INIT = 11
TAG_PRECODE = 12
TAG_RAPTOR = 13
TAG_INFERENCE = 14


def mix64(z: int) -> int:
    """splitmix64 finalizer: a bijective 64-bit mixer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, *path: int) -> int:
    """Derive an independent stream seed for (master, path...)."""
    s = mix64(master)
    for x in path:
        if x < 0:
            raise ValueError("path elements must be non-negative")
        s = mix64(s ^ mix64((x + GOLDEN) & MASK64))
    return s


class Stream:
    """splitmix64 stream with unbiased bounded integers and [0,1) floats."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform integer in [0, n) (Lemire multiply-shift with rejection)."""
        if n <= 0:
            raise ValueError("bound must be positive")
        v = self.u64()
        m = v * n
        low = m & MASK64
        if low < n:
            threshold = (1 << 64) % n
            while low < threshold:
                v = self.u64()
                m = v * n
                low = m & MASK64
        return m >> 64

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.u64() >> 11) * (1.0 / 9007199254740992.0)

    def bernoulli(self, p: float) -> bool:
        return self.random() < p

    def sample_without_replacement(self, n: int, k: int) -> list[int]:
        """k distinct integers from range(n), via partial Fisher-Yates."""
        if not 0 <= k <= n:
            raise ValueError("need 0 <= k <= n")
        pool = list(range(n))
        for i in range(k):
            j = i + self.below(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]

    def bytes(self, length: int) -> bytes:
        """length pseudo-random bytes (little-endian u64 chunks)."""
        n_words = (length + 7) // 8
        raw = b"".join(self.u64().to_bytes(8, "little") for _ in range(n_words))
        return raw[:length]
