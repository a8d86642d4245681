"""Static phase distance mapping: seven fixed distance windows and the
configuration estimation rules that map a window to a cache configuration."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

from .cache import (
    BASE_CONFIG,
    DESIGN_SPACE,
    CacheConfig,
    DesignSpace,
    is_feasible,
    snap_to_feasible,
)
from .energy import Evaluator
from .phase import PhaseCharacteristics, characterize, phase_distance

# lower bounds of R1..R7; each window is [lo, next lo), R7 is unbounded
WINDOW_LOWER_BOUNDS = (0.0, 0.25, 0.5, 0.75, 1.25, 1.5, 2.5)


@dataclass(frozen=True)
class StaticWindows:
    lower_bounds: tuple[float, ...] = WINDOW_LOWER_BOUNDS

    def bounds(self, window: int) -> tuple[float, float]:
        lo = self.lower_bounds[window - 1]
        hi = self.lower_bounds[window] if window < len(self.lower_bounds) else math.inf
        return lo, hi


STATIC_WINDOWS = StaticWindows()


@dataclass(frozen=True)
class Thresholds:
    c_thr: int = 8192
    a_thr: int = 2
    # part of the estimation inputs but never read by the rules
    l_thr: int = 64

    def __post_init__(self):
        b = DESIGN_SPACE.bounds
        for v, (lo, hi), name in ((self.c_thr, b.size, "c_thr"), (self.a_thr, b.assoc, "a_thr"),
                                  (self.l_thr, b.line, "l_thr")):
            if not lo <= v <= hi:
                raise ValueError(f"{name}={v} outside [{lo}, {hi}]")


def map_to_window(d: float, windows: StaticWindows = STATIC_WINDOWS) -> int:
    """Window number 1..7 containing ``d``; windows are half-open [lo, hi)."""
    if not d >= 0:
        raise ValueError(f"phase distance must be >= 0, got {d}")
    return bisect.bisect_right(windows.lower_bounds, d)


def estimate_configuration(
    base_best: CacheConfig,
    d: float,
    t: Thresholds = Thresholds(),
    space: DesignSpace = DESIGN_SPACE,
) -> CacheConfig:
    """Configuration estimate for a phase at distance ``d`` from the base phase."""
    if not is_feasible(base_best):
        raise ValueError(f"infeasible base configuration {base_best}")
    c_min, c_max = space.bounds.size
    a_min, a_max = space.bounds.assoc
    l_min, _ = space.bounds.line
    cb, ab, lb = base_best.size_bytes, base_best.associativity, base_best.line_bytes
    c, a, l = cb, ab, lb

    window = map_to_window(d)
    if window in (1, 2, 7):
        c = t.c_thr
    elif window == 3:
        c = cb * 2 if cb == c_min else t.c_thr
        if ab == a_min:
            a = ab * 2
    elif window == 4:
        c = t.c_thr
        if ab != a_max:
            a = ab * 2
        if lb != l_min:
            l = lb // 2
    elif window == 5:
        c = t.c_thr
        if ab == 1:
            a = t.a_thr
    elif window == 6:
        if cb != c_max:
            c = c_max // 2
    return snap_to_feasible(c, a, l)


def calibrate_threshold(
    param: Literal["size", "assoc", "line"],
    phases: Sequence,
    fixed: CacheConfig,
    evaluator: Evaluator,
    stream: str = "data",
) -> int:
    """Sweep one parameter of the ``stream`` cache (the other cache stays at
    ``fixed``) and return the value with the lowest mean phase EDP. Ties go
    to the smaller value."""
    if not phases:
        raise ValueError("need at least one phase")
    candidates = []
    for c in DESIGN_SPACE:
        if param == "size" and (c.associativity, c.line_bytes) == (fixed.associativity, fixed.line_bytes):
            candidates.append((c.size_bytes, c))
        elif param == "assoc" and (c.size_bytes, c.line_bytes) == (fixed.size_bytes, fixed.line_bytes):
            candidates.append((c.associativity, c))
        elif param == "line" and (c.size_bytes, c.associativity) == (fixed.size_bytes, fixed.associativity):
            candidates.append((c.line_bytes, c))
    if not candidates:
        raise ValueError(f"no feasible {param} values around {fixed}")
    best_value, best_edp = None, math.inf
    for value, c in sorted(candidates):
        pair = (c, fixed) if stream == "instruction" else (fixed, c)
        mean = sum(evaluator.edp(ph, *pair) for ph in phases) / len(phases)
        if mean < best_edp:
            best_value, best_edp = value, mean
    return best_value


def calibrate_thresholds(phases: Sequence, evaluator: Evaluator,
                         fixed: CacheConfig = BASE_CONFIG) -> Thresholds:
    """Calibrate all three thresholds on the data cache.

    Size is swept direct-mapped so every capacity is available."""
    size_fixed = CacheConfig(fixed.size_bytes, 1, fixed.line_bytes)
    return Thresholds(
        c_thr=calibrate_threshold("size", phases, size_fixed, evaluator),
        a_thr=calibrate_threshold("assoc", phases, fixed, evaluator),
        l_thr=calibrate_threshold("line", phases, fixed, evaluator),
    )


@dataclass(frozen=True)
class BasePhase:
    characteristics: PhaseCharacteristics
    icfg: CacheConfig
    dcfg: CacheConfig


@dataclass(frozen=True)
class PdmEstimate:
    icfg: CacheConfig
    dcfg: CacheConfig
    i_distance: float
    d_distance: float
    characteristics: PhaseCharacteristics


def pdm_estimate(
    phase,
    base: BasePhase,
    t: Thresholds = Thresholds(),
    space: DesignSpace = DESIGN_SPACE,
    interval_accesses: Optional[int] = None,
    evaluator: Optional[Evaluator] = None,
    base_cfg: CacheConfig = BASE_CONFIG,
) -> PdmEstimate:
    ch = characterize(phase, base_cfg, interval_accesses, evaluator)
    di = phase_distance(ch, base.characteristics, "instruction")
    dd = phase_distance(ch, base.characteristics, "data")
    return PdmEstimate(
        estimate_configuration(base.icfg, di, t, space),
        estimate_configuration(base.dcfg, dd, t, space),
        di,
        dd,
        ch,
    )


def pdm_tune(phase, base: BasePhase, t: Thresholds = Thresholds(),
             space: DesignSpace = DESIGN_SPACE, **kw) -> tuple[CacheConfig, CacheConfig]:
    """Characterize ``phase`` under the base cache and estimate each cache
    from its own stream's distance to the base phase."""
    est = pdm_estimate(phase, base, t, space, **kw)
    return est.icfg, est.dcfg
