"""Dynamic phase distance mapping.

Distance windows are created at runtime as phases execute instead of being
fixed up front. A window maps a range of phase distances (relative to the
base phase) to a configuration distance: the per-parameter power-of-two step
from the base phase's best configuration. Windows with identical
configuration distances that touch are merged, growing the window size.

A phase that maps to no window starts from the best configuration of its
most similar previously executed phase and climbs by EDP: cache size, then
associativity, then line size are raised one step at a time for as long as
the interval EDP does not get worse.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Optional

from .cache import (
    BASE_CONFIG,
    DESIGN_SPACE,
    SMALLEST_CONFIG,
    CacheConfig,
    DesignSpace,
    next_value_up,
    snap_to_feasible,
)
from .energy import Evaluator
from .phase import (
    PhaseCharacteristics,
    PhaseHistoryTable,
    characterize,
    combined_distance,
    phase_distance,
)

MIN_WINDOW_SIZE = 0.25
# relative EDP gain needed before a mapped window's stored distance is replaced
WINDOW_UPDATE_FLOOR = 1e-6
ADJUST_ORDER = ("size", "assoc", "line")


def _log2(x: int) -> int:
    return x.bit_length() - 1


@dataclass(frozen=True)
class ConfigurationDistance:
    d_size_exp: int = 0
    d_assoc_exp: int = 0
    d_line_exp: int = 0

    @classmethod
    def between(cls, base: CacheConfig, target: CacheConfig) -> "ConfigurationDistance":
        return cls(
            _log2(target.size_bytes) - _log2(base.size_bytes),
            _log2(target.associativity) - _log2(base.associativity),
            _log2(target.line_bytes) - _log2(base.line_bytes),
        )

    def __str__(self) -> str:
        return f"({self.d_size_exp:+d},{self.d_assoc_exp:+d},{self.d_line_exp:+d})"


def _shift(x: int, exp: int) -> int:
    return x << exp if exp >= 0 else x >> -exp


def apply_distance(base_best: CacheConfig, dist: ConfigurationDistance,
                   space: DesignSpace = DESIGN_SPACE) -> CacheConfig:
    b = space.bounds
    # clamp the exponents first so large negative steps cannot underflow to 0
    size = _shift(base_best.size_bytes, max(dist.d_size_exp, _log2(b.size[0]) - _log2(base_best.size_bytes)))
    assoc = _shift(base_best.associativity, max(dist.d_assoc_exp, _log2(b.assoc[0]) - _log2(base_best.associativity)))
    line = _shift(base_best.line_bytes, max(dist.d_line_exp, _log2(b.line[0]) - _log2(base_best.line_bytes)))
    return snap_to_feasible(size, assoc, line)


def _check_window_size(s_d: float) -> None:
    if not s_d >= MIN_WINDOW_SIZE or not math.isfinite(s_d):
        raise ValueError(f"window size must be >= {MIN_WINDOW_SIZE}, got {s_d}")
    if (s_d / MIN_WINDOW_SIZE) != round(s_d / MIN_WINDOW_SIZE):
        raise ValueError(f"window size must be a multiple of {MIN_WINDOW_SIZE}, got {s_d}")


def create_window(d: float, s_d: float, win_u_max: float = math.inf) -> tuple[float, float]:
    """Bounds of a new window for distance ``d``.

    Below ``s_d`` the first window [0, s_d) is used; above ``win_u_max`` the
    open-ended last window; otherwise the s_d-aligned window holding ``d``.
    A ``d`` sitting exactly on a multiple of ``s_d`` starts its own window.
    """
    if not d >= 0:
        raise ValueError(f"phase distance must be >= 0, got {d}")
    if not s_d > 0:
        raise ValueError(f"window size must be > 0, got {s_d}")
    if d < s_d:
        return 0.0, s_d
    if d > win_u_max or math.isinf(d):
        return (win_u_max if math.isfinite(win_u_max) else 0.0), math.inf
    lo = math.floor(d / s_d) * s_d
    if lo > d:
        lo -= s_d
    elif lo + s_d <= d:
        lo += s_d
    return lo, lo + s_d


@dataclass
class DistanceWindow:
    id: int
    win_l: float
    win_u: float
    icache_dist: ConfigurationDistance
    dcache_dist: ConfigurationDistance
    last_hit: int = 0

    def contains(self, d: float) -> bool:
        # an open-ended window also holds D = inf
        return self.win_l <= d and (d < self.win_u or self.win_u == math.inf)

    @property
    def distances(self) -> tuple[ConfigurationDistance, ConfigurationDistance]:
        return self.icache_dist, self.dcache_dist


class DistanceWindowTable:
    def __init__(self, s_d: float = MIN_WINDOW_SIZE, win_u_max: float = math.inf,
                 capacity: int = 32, dynamic: bool = True):
        _check_window_size(s_d)
        if not win_u_max > 0:
            raise ValueError("win_u_max must be > 0")
        if math.isfinite(win_u_max) and win_u_max / MIN_WINDOW_SIZE != round(win_u_max / MIN_WINDOW_SIZE):
            raise ValueError(f"win_u_max must be a multiple of {MIN_WINDOW_SIZE}, got {win_u_max}")
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.s_d = s_d
        self.win_u_max = win_u_max
        self.capacity = capacity
        self.dynamic = dynamic
        self.windows: list[DistanceWindow] = []
        self._next_id = 0
        self._tick = 0
        self.merges = 0
        self.evictions = 0

    def __len__(self) -> int:
        return len(self.windows)

    def __iter__(self):
        return iter(self.windows)

    @property
    def effective_capacity(self) -> int:
        if math.isfinite(self.win_u_max):
            return min(self.capacity, int(self.win_u_max / self.s_d) + 1)
        return self.capacity

    def find(self, d: float, touch: bool = True) -> Optional[DistanceWindow]:
        for w in self.windows:
            if w.contains(d):
                if touch:
                    self._tick += 1
                    w.last_hit = self._tick
                return w
        return None

    def add(self, d: float, icache_dist: ConfigurationDistance,
            dcache_dist: ConfigurationDistance) -> DistanceWindow:
        """Create the window for ``d`` (which must not already be covered),
        trimmed so it does not overlap its neighbours or the last window."""
        if self.find(d, touch=False) is not None:
            raise ValueError(f"distance {d} already maps to a window")
        lo, hi = create_window(d, self.s_d, self.win_u_max)
        if d < self.win_u_max:
            hi = min(hi, self.win_u_max)
        for w in self.windows:
            if w.win_u <= d:
                lo = max(lo, w.win_u)
            elif w.win_l > d:
                hi = min(hi, w.win_l)
        self._tick += 1
        win = DistanceWindow(self._next_id, lo, hi, icache_dist, dcache_dist, self._tick)
        self._next_id += 1
        self.windows.append(win)
        self.windows.sort(key=lambda w: w.win_l)
        self._enforce_capacity(keep=win)
        return win

    def _enforce_capacity(self, keep: Optional[DistanceWindow] = None) -> None:
        while len(self.windows) > self.effective_capacity:
            victim = min((w for w in self.windows if w is not keep), key=lambda w: w.last_hit)
            self.windows.remove(victim)
            self.evictions += 1

    def merge_adjacent(self) -> int:
        """Fuse touching windows with equal configuration distances; each
        fusion grows the window size by the minimum window size. Returns the
        number of fusions. A static table never merges."""
        if not self.dynamic:
            return 0
        merged = 0
        i = 0
        while i + 1 < len(self.windows):
            a, b = self.windows[i], self.windows[i + 1]
            if a.win_u == b.win_l and a.distances == b.distances:
                a.win_u = b.win_u
                a.last_hit = max(a.last_hit, b.last_hit)
                del self.windows[i + 1]
                merged += 1
            else:
                i += 1
        if merged:
            self.s_d += MIN_WINDOW_SIZE * merged
            self.merges += merged
            self._enforce_capacity()
        return merged


def merge_adjacent(table: DistanceWindowTable) -> DistanceWindowTable:
    table.merge_adjacent()
    return table


def find_window(table: DistanceWindowTable, d: float) -> Optional[DistanceWindow]:
    return table.find(d)


@dataclass(frozen=True)
class Evaluation:
    phase_id: str
    cache: str
    config: str
    edp: float
    decision: str

    def as_dict(self) -> dict:
        return {"phase_id": self.phase_id, "cache": self.cache, "config": self.config,
                "edp": self.edp, "decision": self.decision}


@dataclass
class AdjustResult:
    icfg: CacheConfig
    dcfg: CacheConfig
    edp: float
    explored: list[Evaluation]

    def explored_for(self, cache: str) -> list[Evaluation]:
        return [e for e in self.explored if e.cache == cache]


def adjust_configuration(phase, start: tuple[CacheConfig, CacheConfig], interval_accesses: Optional[int],
                         evaluator: Evaluator) -> AdjustResult:
    """Greedy upward EDP descent, one cache at a time.

    The instruction cache is climbed with the data cache held at its start
    configuration, then the data cache with the instruction cache at its new
    best. A step is kept when its interval EDP is no worse than the
    incumbent's; the first worse step ends that parameter.
    """
    pid = phase.phase_id
    explored: list[Evaluation] = []
    best = list(start)
    best_edp = math.inf
    for idx, cache in enumerate(("icache", "dcache")):

        def edp_of(c: CacheConfig) -> float:
            pair = (c, best[1]) if idx == 0 else (best[0], c)
            return evaluator.edp(phase, *pair, interval_accesses)

        incumbent = best[idx]
        best_edp = edp_of(incumbent)
        explored.append(Evaluation(pid, cache, str(incumbent), best_edp, "start"))
        for param in ADJUST_ORDER:
            while (cand := next_value_up(incumbent, param)) is not None:
                e = edp_of(cand)
                if e <= best_edp:
                    incumbent, best_edp = cand, e
                    explored.append(Evaluation(pid, cache, str(cand), e, "accept"))
                else:
                    explored.append(Evaluation(pid, cache, str(cand), e, "reject"))
                    break
        best[idx] = incumbent
    return AdjustResult(best[0], best[1], best_edp, explored)


def window_table_footprint_bits(entries: int, bound_bits: int = 8, distance_bits: int = 5) -> dict:
    """Storage for a distance window table with ``entries`` rows.

    Each row holds an id, both window bounds (fixed-point multiples of the
    minimum window size) and one configuration-distance field per cache.
    """
    if entries < 1:
        raise ValueError("entries must be >= 1")
    id_bits = math.ceil(math.log2(entries)) if entries > 1 else 0
    entry_bits = id_bits + 2 * bound_bits + 2 * distance_bits
    return {
        "entries": entries,
        "id_bits": id_bits,
        "bound_bits": bound_bits,
        "distance_bits": distance_bits,
        "entry_bits": entry_bits,
        "total_bits": entries * entry_bits,
    }


@dataclass
class PhaseRecord:
    characteristics: PhaseCharacteristics
    icfg: CacheConfig
    dcfg: CacheConfig
    edp: float
    base_edp: float
    initial: tuple[CacheConfig, CacheConfig]
    route: str


@dataclass
class TunerOptions:
    s_d: float = MIN_WINDOW_SIZE
    dynamic_sd: bool = True
    win_u_max: float = math.inf
    window_capacity: int = 32
    history_capacity: int = 64
    rho: float = 0.10
    interval_cycles: float = 500_000
    # fixed interval length in records; None sizes it per phase from interval_cycles
    interval_accesses: Optional[int] = None
    base_cfg: CacheConfig = BASE_CONFIG
    base_start: CacheConfig = SMALLEST_CONFIG


@dataclass
class TunerState:
    options: TunerOptions
    history: PhaseHistoryTable
    windows: DistanceWindowTable
    base_id: Optional[str] = None
    base_best: Optional[tuple[CacheConfig, CacheConfig]] = None
    # executed phases in execution order
    phases: "OrderedDict[str, PhaseRecord]" = field(default_factory=OrderedDict)
    log: list[Evaluation] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.phases)

    @property
    def base_characteristics(self) -> Optional[PhaseCharacteristics]:
        return self.phases[self.base_id].characteristics if self.base_id else None


def most_similar_phase(state: TunerState, p: PhaseCharacteristics) -> str:
    """Executed phase closest to ``p``: the sum of both stream distances,
    each normalized by ``p``'s own miss rate so every candidate is measured
    on the same scale. Ties go to the earliest executed."""
    if not state.phases:
        raise ValueError("no executed phases")
    best_id, best_d = None, math.inf
    for pid, rec in state.phases.items():
        d = combined_distance(rec.characteristics, p)
        if best_id is None or d < best_d:
            best_id, best_d = pid, d
    return best_id


class DynaPDM:
    """Runtime tuner: owns the history and distance window tables."""

    def __init__(self, evaluator: Evaluator, options: Optional[TunerOptions] = None):
        self.evaluator = evaluator
        opts = options or TunerOptions()
        if opts.rho < 0:
            raise ValueError("rho must be >= 0")
        self.state = TunerState(
            options=opts,
            history=PhaseHistoryTable(opts.history_capacity),
            windows=DistanceWindowTable(opts.s_d, opts.win_u_max, opts.window_capacity, opts.dynamic_sd),
        )
        self._intervals: dict[str, int] = {}

    @property
    def options(self) -> TunerOptions:
        return self.state.options

    @property
    def log(self) -> list[Evaluation]:
        return self.state.log

    def interval_for(self, phase) -> int:
        n = self._intervals.get(phase.phase_id)
        if n is None:
            if self.options.interval_accesses is not None:
                n = min(self.options.interval_accesses, len(phase))
            else:
                n = self.evaluator.interval_accesses(phase, self.options.base_cfg, self.options.interval_cycles)
            self._intervals[phase.phase_id] = n
        return n

    def distances(self, ch: PhaseCharacteristics) -> tuple[float, float]:
        base = self.state.base_characteristics
        return phase_distance(ch, base, "instruction"), phase_distance(ch, base, "data")

    def on_phase_enter(self, phase) -> tuple[CacheConfig, CacheConfig]:
        st = self.state
        pid = phase.phase_id
        entry = st.history.lookup(pid)
        if entry is not None:
            st.history.touch(pid)
            return entry.icfg, entry.dcfg

        interval = self.interval_for(phase)
        base_cfg = self.options.base_cfg
        ch = characterize(phase, base_cfg, interval, self.evaluator)
        base_edp = self.evaluator.edp(phase, base_cfg, base_cfg, interval)
        st.log.append(Evaluation(pid, "both", str(base_cfg), base_edp, "characterize"))

        if st.base_id is None:
            start = (self.options.base_start, self.options.base_start)
            result = self._adjust(phase, start, interval)
            pair, edp = self._safe(result, base_cfg, base_edp)
            st.base_id = pid
            st.base_best = pair
            st.windows.add(0.0, ConfigurationDistance(), ConfigurationDistance())
            route = "base"
        elif pid in st.phases:
            # evicted from history but seen before: start from the last best
            rec = st.phases[pid]
            start = (rec.icfg, rec.dcfg)
            result = self._adjust(phase, start, interval)
            pair, edp = self._safe(result, base_cfg, base_edp)
            route = "reload"
        else:
            di, dd = self.distances(ch)
            d = di + dd
            win = st.windows.find(d)
            bi, bd = st.base_best
            if win is not None:
                start = (apply_distance(bi, win.icache_dist), apply_distance(bd, win.dcache_dist))
                applied_edp = self.evaluator.edp(phase, *start, interval)
                result = self._adjust(phase, start, interval)
                pair, edp = self._safe(result, base_cfg, base_edp)
                if edp < applied_edp * (1 - WINDOW_UPDATE_FLOOR):
                    win.icache_dist = ConfigurationDistance.between(bi, pair[0])
                    win.dcache_dist = ConfigurationDistance.between(bd, pair[1])
                route = "window"
            else:
                msp = most_similar_phase(st, ch)
                rec = st.phases[msp]
                start = (rec.icfg, rec.dcfg)
                result = self._adjust(phase, start, interval)
                pair, edp = self._safe(result, base_cfg, base_edp)
                st.windows.add(d, ConfigurationDistance.between(bi, pair[0]),
                               ConfigurationDistance.between(bd, pair[1]))
                route = f"similar:{msp}"

        st.phases[pid] = PhaseRecord(ch, pair[0], pair[1], edp, base_edp, start, route)
        st.phases.move_to_end(pid)
        st.history.insert(pid, pair[0], pair[1], edp)
        st.windows.merge_adjacent()
        return pair

    def monitor_and_retune(self, phase, measured_edp: float) -> Optional[tuple[CacheConfig, CacheConfig]]:
        """Re-tune a known phase whose EDP rose by more than ``rho`` over the
        recorded value, starting from its stored configuration."""
        st = self.state
        entry = st.history.lookup(phase.phase_id)
        if entry is None:
            raise KeyError(f"phase {phase.phase_id!r} has not been characterized")
        if not measured_edp > (1 + self.options.rho) * entry.recorded_edp:
            return None
        interval = self.interval_for(phase)
        result = self._adjust(phase, (entry.icfg, entry.dcfg), interval)
        pair = (result.icfg, result.dcfg)
        st.history.insert(phase.phase_id, *pair, result.edp)
        rec = st.phases.get(phase.phase_id)
        if rec is not None:
            rec.icfg, rec.dcfg, rec.edp = pair[0], pair[1], result.edp
        return pair

    def _adjust(self, phase, start, interval) -> AdjustResult:
        result = adjust_configuration(phase, start, interval, self.evaluator)
        self.state.log.extend(result.explored)
        return result

    @staticmethod
    def _safe(result: AdjustResult, base_cfg: CacheConfig, base_edp: float):
        # new phases default to the base configuration; only a pair at least
        # as good replaces it
        if result.edp <= base_edp:
            return (result.icfg, result.dcfg), result.edp
        return (base_cfg, base_cfg), base_edp
