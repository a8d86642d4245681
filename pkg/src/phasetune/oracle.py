"""Exhaustive search over every instruction/data cache configuration pair."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, Iterable, Optional

from .cache import BASE_CONFIG, DESIGN_SPACE, CacheConfig
from .energy import Evaluator, PhaseCost

Pair = tuple[CacheConfig, CacheConfig]


@dataclass
class OracleResult:
    phase_id: str
    best: Pair
    best_edp: float
    table: dict[Pair, PhaseCost]

    def edp(self, icfg: CacheConfig, dcfg: CacheConfig) -> float:
        return self.table[(icfg, dcfg)].edp_Js


def exhaustive_search(phase, evaluator: Evaluator, limit: Optional[int] = None,
                      configs: Iterable[CacheConfig] = DESIGN_SPACE) -> OracleResult:
    """Price all 18 x 18 pairs on the whole phase (or its first ``limit``
    records). Ties resolve to the pair earliest in design-space order,
    whatever order ``configs`` is given in."""
    if len(phase) == 0:
        raise ValueError(f"phase {phase.phase_id!r} is empty")
    configs = list(configs)
    table = {(i, d): evaluator.cost(phase, i, d, limit) for i in configs for d in configs}
    order = {c: k for k, c in enumerate(DESIGN_SPACE)}
    best = min(table, key=lambda p: (table[p].edp_Js, order.get(p[0], math.inf), order.get(p[1], math.inf)))
    return OracleResult(phase.phase_id, best, table[best].edp_Js, table)


def gap(tuner_edp: float, best_edp: float) -> float:
    if not best_edp > 0:
        raise ValueError("oracle EDP must be > 0")
    return (tuner_edp - best_edp) / best_edp


@dataclass(frozen=True)
class IndependenceCheck:
    phase_id: str
    independent: Pair
    independent_edp: float
    joint: Pair
    joint_edp: float

    @property
    def agrees(self) -> bool:
        return self.independent == self.joint

    @property
    def gap(self) -> float:
        return gap(self.independent_edp, self.joint_edp)


def independence_check(result: OracleResult, reference: CacheConfig = BASE_CONFIG) -> IndependenceCheck:
    """Minimize each cache on its own with the other held at ``reference``
    and compare the combined pair with the joint optimum. The caches only
    interact through total run time, which EDP weighs quadratically."""
    order = {c: k for k, c in enumerate(DESIGN_SPACE)}
    configs = sorted({p[0] for p in result.table}, key=order.get)
    best_i = min(configs, key=lambda c: result.edp(c, reference))
    best_d = min(configs, key=lambda c: result.edp(reference, c))
    return IndependenceCheck(result.phase_id, (best_i, best_d), result.edp(best_i, best_d),
                             result.best, result.best_edp)


CSV_FIELDS = ("phase_id", "icfg", "dcfg", "cycles", "energy", "edp")


def write_table_csv(results: Iterable[OracleResult], fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in results:
        for (i, d), c in r.table.items():
            w.writerow([r.phase_id, str(i), str(d), repr(c.cycles), repr(c.energy_J), repr(c.edp_Js)])
