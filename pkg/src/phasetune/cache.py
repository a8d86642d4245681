"""Configurable L1 cache model: design space and trace-driven LRU simulation.

The cache is built from four 2 KB banks. Banks can be shut down to shrink
capacity, concatenated to raise associativity, and physical 16-byte lines can
be fetched together to form 32- or 64-byte logical lines. Because ways are
formed from banks, a 2 KB cache can only be direct-mapped and a 4 KB cache
can be at most 2-way.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Literal, Optional

import numpy as np

if TYPE_CHECKING:
    from .trace import PhaseTrace

PHYSICAL_LINE_BYTES = 16

SIZES = (2048, 4096, 8192)
ASSOCIATIVITIES = (1, 2, 4)
LINE_SIZES = (16, 32, 64)

Stream = Literal["instruction", "data"]
Param = Literal["size", "assoc", "line"]
STREAMS: tuple[Stream, ...] = ("instruction", "data")


class InfeasibleConfigError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class CacheConfig:
    size_bytes: int
    associativity: int
    line_bytes: int

    def __str__(self) -> str:
        return f"{self.size_bytes}:{self.associativity}:{self.line_bytes}"

    @classmethod
    def parse(cls, text: str) -> "CacheConfig":
        """Parse ``"size:assoc:line"`` (the form produced by ``str``)."""
        parts = text.replace(",", ":").split(":")
        if len(parts) != 3:
            raise ValueError(f"expected size:assoc:line, got {text!r}")
        try:
            size, assoc, line = (int(p, 0) for p in parts)
        except ValueError:
            raise ValueError(f"non-integer field in cache config {text!r}") from None
        return cls(size, assoc, line)

    @property
    def num_sets(self) -> int:
        return self.size_bytes // (self.associativity * self.line_bytes)

    @property
    def physical_lines_per_fill(self) -> int:
        return self.line_bytes // PHYSICAL_LINE_BYTES


BASE_CONFIG = CacheConfig(8192, 4, 64)
SMALLEST_CONFIG = CacheConfig(2048, 1, 16)


@dataclass(frozen=True)
class Bounds:
    size: tuple[int, int] = (SIZES[0], SIZES[-1])
    assoc: tuple[int, int] = (ASSOCIATIVITIES[0], ASSOCIATIVITIES[-1])
    line: tuple[int, int] = (LINE_SIZES[0], LINE_SIZES[-1])


@dataclass(frozen=True)
class DesignSpace:
    configs: tuple[CacheConfig, ...]
    bounds: Bounds = Bounds()

    def __len__(self) -> int:
        return len(self.configs)

    def __iter__(self):
        return iter(self.configs)

    def __contains__(self, c: object) -> bool:
        return c in self.configs

    def index(self, c: CacheConfig) -> int:
        return self.configs.index(c)


def _is_pow2(x: int) -> bool:
    return x > 0 and x & (x - 1) == 0


def is_feasible(c: CacheConfig) -> bool:
    if c.size_bytes not in SIZES or c.associativity not in ASSOCIATIVITIES:
        return False
    if c.line_bytes not in LINE_SIZES or c.line_bytes % PHYSICAL_LINE_BYTES:
        return False
    # one way per 2 KB bank
    return c.associativity * 2048 <= c.size_bytes


def enumerate_design_space() -> DesignSpace:
    """All feasible configurations, ordered size-major, then associativity, then line."""
    configs = tuple(
        CacheConfig(s, a, l)
        for s in SIZES
        for a in ASSOCIATIVITIES
        for l in LINE_SIZES
        if is_feasible(CacheConfig(s, a, l))
    )
    return DesignSpace(configs)


DESIGN_SPACE = enumerate_design_space()


def _clamp(x: int, lo: int, hi: int) -> int:
    return max(lo, min(hi, x))


def snap_to_feasible(size: int, assoc: int, line: int) -> CacheConfig:
    """Clamp each value into its bounds, then lower associativity until the
    combination fits the banked layout. Size and line size are preserved."""
    b = DESIGN_SPACE.bounds
    size = _clamp(size, *b.size)
    assoc = _clamp(assoc, *b.assoc)
    line = _clamp(line, *b.line)
    for v, name in ((size, "size"), (assoc, "associativity"), (line, "line")):
        if not _is_pow2(v):
            raise ValueError(f"{name} must be a power of two, got {v}")
    c = CacheConfig(size, assoc, line)
    while not is_feasible(c):
        c = CacheConfig(c.size_bytes, c.associativity // 2, c.line_bytes)
    return c


def next_value_up(c: CacheConfig, param: Param) -> Optional[CacheConfig]:
    if param == "size":
        nxt = CacheConfig(c.size_bytes * 2, c.associativity, c.line_bytes)
    elif param == "assoc":
        nxt = CacheConfig(c.size_bytes, c.associativity * 2, c.line_bytes)
    elif param == "line":
        nxt = CacheConfig(c.size_bytes, c.associativity, c.line_bytes * 2)
    else:
        raise ValueError(f"unknown parameter {param!r}")
    return nxt if is_feasible(nxt) else None


@dataclass(frozen=True)
class CacheStats:
    accesses: int = 0
    misses: int = 0
    physical_line_fetches: int = 0

    @property
    def miss_rate(self) -> float:
        return self.misses / self.accesses if self.accesses else 0.0


def _collapse_repeats(addresses, offset_bits: int) -> tuple[int, list[int]]:
    """Line numbers with consecutive duplicates removed, plus the original
    access count. A repeat of the line just touched is an MRU hit and leaves
    the LRU order unchanged, so dropping it cannot alter the miss count."""
    arr = np.asarray(addresses, dtype=np.int64)
    if arr.size == 0:
        return 0, []
    lines = arr >> offset_bits
    keep = np.empty(lines.size, dtype=bool)
    keep[0] = True
    np.not_equal(lines[1:], lines[:-1], out=keep[1:])
    return int(arr.size), lines[keep].tolist()


def simulate_addresses(addresses: Iterable[int], c: CacheConfig) -> CacheStats:
    """Run an LRU set-associative cache over a sequence of byte addresses.

    Each set is a short list ordered from least to most recently used. With
    at most four ways the list operations beat any fancier structure.
    """
    if not is_feasible(c):
        raise InfeasibleConfigError(f"infeasible cache configuration {c}")
    offset_bits = c.line_bytes.bit_length() - 1
    set_mask = c.num_sets - 1
    ways = c.associativity
    sets: list[list[int]] = [[] for _ in range(c.num_sets)]
    if not isinstance(addresses, (list, tuple, np.ndarray)):
        addresses = list(addresses)
    accesses, lines = _collapse_repeats(addresses, offset_bits)
    misses = 0
    for line in lines:
        s = sets[line & set_mask]
        if line in s:
            if s[-1] != line:
                s.remove(line)
                s.append(line)
        else:
            misses += 1
            if len(s) == ways:
                del s[0]
            s.append(line)
    return CacheStats(accesses, misses, misses * c.physical_lines_per_fill)


def simulate(
    trace: "PhaseTrace", stream: Stream, c: CacheConfig, limit: Optional[int] = None
) -> CacheStats:
    """Simulate one stream of ``trace`` (optionally only its first ``limit``
    records) on a cold cache configured as ``c``."""
    return simulate_addresses(trace.stream_addresses(stream, limit), c)
