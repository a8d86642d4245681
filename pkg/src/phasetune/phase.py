"""Phase characterization, phase distance, and the phase history table."""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass
from typing import Optional

from .cache import CacheConfig, is_feasible, simulate


@dataclass(frozen=True)
class PhaseCharacteristics:
    phase_id: str
    i_miss_rate: float
    d_miss_rate: float

    def __post_init__(self):
        for r in (self.i_miss_rate, self.d_miss_rate):
            if not 0.0 <= r <= 1.0:
                raise ValueError(f"miss rate out of [0, 1]: {r}")

    def rate(self, stream: str) -> float:
        if stream == "instruction":
            return self.i_miss_rate
        if stream == "data":
            return self.d_miss_rate
        raise ValueError(f"unknown stream {stream!r}")


def characterize(trace, base_cfg: CacheConfig, interval_accesses: Optional[int] = None,
                 evaluator=None) -> PhaseCharacteristics:
    """Miss rates of both streams under ``base_cfg`` over the first
    ``interval_accesses`` records (the whole trace when shorter or None)."""
    if evaluator is not None:
        ist = evaluator.stats(trace, "instruction", base_cfg, interval_accesses)
        dst = evaluator.stats(trace, "data", base_cfg, interval_accesses)
    else:
        ist = simulate(trace, "instruction", base_cfg, interval_accesses)
        dst = simulate(trace, "data", base_cfg, interval_accesses)
    return PhaseCharacteristics(trace.phase_id, ist.miss_rate, dst.miss_rate)


def phase_distance(p: PhaseCharacteristics, base: PhaseCharacteristics, stream: str) -> float:
    """|m_p - m_base| / m_base for one stream.

    Not symmetric: the difference is normalized by the base phase's rate. A
    base rate of zero gives 0 for an identical rate and +inf otherwise.
    """
    m_i, m_b = p.rate(stream), base.rate(stream)
    if m_b == 0.0:
        return 0.0 if m_i == 0.0 else math.inf
    return abs(m_i - m_b) / m_b


def combined_distance(p: PhaseCharacteristics, base: PhaseCharacteristics) -> float:
    return phase_distance(p, base, "instruction") + phase_distance(p, base, "data")


@dataclass
class HistoryEntry:
    icfg: CacheConfig
    dcfg: CacheConfig
    recorded_edp: float
    last_used_tick: int


class PhaseHistoryTable:
    """Best configuration pair per characterized phase, LRU-evicted."""

    def __init__(self, capacity: int = 64):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._entries: OrderedDict[str, HistoryEntry] = OrderedDict()
        self._tick = 0

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, phase_id: str) -> bool:
        return phase_id in self._entries

    def ids(self) -> list[str]:
        """Phase ids from least to most recently used."""
        return list(self._entries)

    def lookup(self, phase_id: str) -> Optional[HistoryEntry]:
        return self._entries.get(phase_id)

    def touch(self, phase_id: str) -> None:
        self._tick += 1
        self._entries[phase_id].last_used_tick = self._tick
        self._entries.move_to_end(phase_id)

    def insert(self, phase_id: str, icfg: CacheConfig, dcfg: CacheConfig,
               recorded_edp: float) -> Optional[str]:
        """Store (or replace) an entry; returns the evicted phase id, if any."""
        if not (is_feasible(icfg) and is_feasible(dcfg)):
            raise ValueError(f"infeasible configuration pair {icfg} / {dcfg}")
        if recorded_edp < 0:
            raise ValueError("recorded_edp must be >= 0")
        evicted = None
        if phase_id not in self._entries and len(self._entries) >= self.capacity:
            evicted, _ = self._entries.popitem(last=False)
        self._tick += 1
        self._entries[phase_id] = HistoryEntry(icfg, dcfg, recorded_edp, self._tick)
        self._entries.move_to_end(phase_id)
        return evicted
