"""Cycle, energy and energy-delay-product accounting for an I/D cache pair.

Cycles follow a blocking-stall model: every access costs the hit latency and
every miss additionally stalls for a base penalty plus a per-physical-line
transfer charge for lines wider than 16 bytes. Energy is cache dynamic
energy, off-chip refill energy, cache leakage and a constant core power.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Optional, Union

from .cache import (
    DESIGN_SPACE,
    PHYSICAL_LINE_BYTES,
    CacheConfig,
    CacheStats,
    is_feasible,
    simulate,
)

PARAMS_ENV_VAR = "PHASETUNE_PARAMS"


class ParamsError(ValueError):
    pass


def _key(c: CacheConfig) -> str:
    return f"{c.size_bytes}:{c.associativity}"


@dataclass(frozen=True)
class EnergyParams:
    frequency_hz: float = 2e9
    hit_latency_cycles: float = 1.0
    miss_penalty_base_cycles: float = 40.0
    extra_cycles_per_physical_line: float = 4.0
    offchip_energy_per_physical_line_J: float = 5e-10
    core_power_W: float = 0.06
    # keyed "size:assoc"; configurations missing from the tables use the
    # analytic fallbacks below
    cache_hit_energy_J: dict = field(default_factory=dict)
    cache_static_power_W: dict = field(default_factory=dict)
    hit_energy_2k_direct_J: float = 6e-12
    static_power_per_kb_W: float = 5e-4

    def hit_energy(self, c: CacheConfig) -> float:
        e = self.cache_hit_energy_J.get(_key(c))
        if e is not None:
            return e
        # sqrt growth with capacity, +50% per extra way probed
        return (self.hit_energy_2k_direct_J * math.sqrt(c.size_bytes / 2048)
                * (1 + 0.5 * (c.associativity - 1)))

    def static_power(self, c: CacheConfig) -> float:
        p = self.cache_static_power_W.get(_key(c))
        if p is not None:
            return p
        return self.static_power_per_kb_W * c.size_bytes / 1024

    def miss_penalty_cycles(self, c: CacheConfig) -> float:
        extra_lines = c.line_bytes // PHYSICAL_LINE_BYTES - 1
        return self.miss_penalty_base_cycles + extra_lines * self.extra_cycles_per_physical_line

    def validate(self) -> "EnergyParams":
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, dict):
                for k, x in v.items():
                    if not isinstance(x, (int, float)) or not x > 0:
                        raise ParamsError(f"{f.name}[{k!r}] must be > 0, got {x!r}")
            elif not isinstance(v, (int, float)) or not v > 0 or not math.isfinite(v):
                raise ParamsError(f"{f.name} must be a finite value > 0, got {v!r}")
        for c in DESIGN_SPACE:
            up_assoc = CacheConfig(c.size_bytes, c.associativity * 2, c.line_bytes)
            if is_feasible(up_assoc) and self.hit_energy(up_assoc) < self.hit_energy(c):
                raise ParamsError(f"cache_hit_energy_J decreases with associativity at {_key(c)}")
            up_size = CacheConfig(c.size_bytes * 2, c.associativity, c.line_bytes)
            if is_feasible(up_size):
                if self.hit_energy(up_size) < self.hit_energy(c):
                    raise ParamsError(f"cache_hit_energy_J decreases with size at {_key(c)}")
                if self.static_power(up_size) < self.static_power(c):
                    raise ParamsError(f"cache_static_power_W decreases with size at {_key(c)}")
        return self


@dataclass(frozen=True)
class PhaseCost:
    cycles: float
    time_s: float
    energy_J: float
    avg_power_W: float
    edp_Js: float


ZERO_COST = PhaseCost(0.0, 0.0, 0.0, 0.0, 0.0)


def cost(
    istats: CacheStats, dstats: CacheStats, icfg: CacheConfig, dcfg: CacheConfig, p: EnergyParams
) -> PhaseCost:
    if istats.accesses == 0 and dstats.accesses == 0:
        return ZERO_COST
    cycles = (istats.accesses + dstats.accesses) * p.hit_latency_cycles
    cycles += istats.misses * p.miss_penalty_cycles(icfg)
    cycles += dstats.misses * p.miss_penalty_cycles(dcfg)
    time_s = cycles / p.frequency_hz
    energy = p.core_power_W * time_s
    for st, c in ((istats, icfg), (dstats, dcfg)):
        energy += st.accesses * p.hit_energy(c)
        energy += st.physical_line_fetches * p.offchip_energy_per_physical_line_J
        energy += p.static_power(c) * time_s
    avg_power = energy / time_s
    return PhaseCost(cycles, time_s, energy, avg_power, avg_power * time_s * time_s)


def default_params_path() -> Path:
    env = os.environ.get(PARAMS_ENV_VAR)
    if env:
        return Path(env)
    return Path(str(resources.files("phasetune") / "data" / "default_params.json"))


def load_params(path: Optional[Union[str, Path]] = None) -> EnergyParams:
    """Load and validate a JSON parameter file.

    Omitted fields keep the dataclass defaults (which match the shipped
    default file); keys starting with ``_`` are documentation and ignored.
    """
    path = Path(path) if path is not None else default_params_path()
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ParamsError(f"{path}: invalid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise ParamsError(f"{path}: parameter file must be a JSON object")
    known = {f.name for f in fields(EnergyParams)}
    values = {}
    for k, v in doc.items():
        if k.startswith("_"):
            continue
        if k not in known:
            raise ParamsError(f"{path}: unknown parameter {k!r}")
        values[k] = v
    for table in ("cache_hit_energy_J", "cache_static_power_W"):
        if table in values and not isinstance(values[table], dict):
            raise ParamsError(f"{table} must be an object keyed 'size:assoc'")
    return EnergyParams(**values).validate()


class Evaluator:
    """Memoizing front end for simulate + cost.

    Cache statistics for a stream depend only on that stream's configuration,
    so results are cached per (trace, stream, config, prefix length) and any
    I/D pairing is then priced without re-simulating.
    """

    def __init__(self, params: EnergyParams):
        self.params = params
        self._stats: dict[tuple, CacheStats] = {}
        self._traces: dict[int, object] = {}

    def with_params(self, params: EnergyParams) -> "Evaluator":
        ev = Evaluator(params)
        ev._stats, ev._traces = self._stats, self._traces
        return ev

    def stats(self, trace, stream: str, c: CacheConfig, limit: Optional[int] = None) -> CacheStats:
        if limit is not None and limit >= len(trace):
            limit = None
        key = (id(trace), stream, c, limit)
        st = self._stats.get(key)
        if st is None:
            self._traces[id(trace)] = trace  # pin so id() is not reused
            st = self._stats[key] = simulate(trace, stream, c, limit)
        return st

    def cost(self, trace, icfg: CacheConfig, dcfg: CacheConfig, limit: Optional[int] = None) -> PhaseCost:
        return cost(
            self.stats(trace, "instruction", icfg, limit),
            self.stats(trace, "data", dcfg, limit),
            icfg,
            dcfg,
            self.params,
        )

    def edp(self, trace, icfg: CacheConfig, dcfg: CacheConfig, limit: Optional[int] = None) -> float:
        return self.cost(trace, icfg, dcfg, limit).edp_Js

    def interval_accesses(self, trace, base: CacheConfig, target_cycles: float = 500_000) -> int:
        """Records needed for the base pair to spend about ``target_cycles``."""
        c = self.cost(trace, base, base)
        if c.cycles <= 0:
            return len(trace)
        per_access = c.cycles / len(trace)
        return max(1, min(len(trace), round(target_cycles / per_access)))


def scaled(p: EnergyParams, **factors: float) -> EnergyParams:
    """Copy of ``p`` with the named scalar coefficients multiplied."""
    return replace(p, **{k: getattr(p, k) * v for k, v in factors.items()})
