"""Experiment drivers: run PDM, DynaPDM and the oracle over a phase schedule
and assemble comparison reports."""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from .cache import BASE_CONFIG, CacheConfig
from .dynapdm import DynaPDM, Evaluation, TunerOptions
from .energy import Evaluator
from .oracle import OracleResult, exhaustive_search, gap, independence_check
from .pdm import BasePhase, Thresholds, pdm_estimate
from .phase import PhaseHistoryTable, characterize
from .trace import (
    PhaseTrace,
    SyntheticSpec,
    WorkloadError,
    generate_synthetic,
    parse_workload,
    write_trace,
    write_workload,
)

log = logging.getLogger(__name__)


@dataclass
class Suite:
    traces: dict[str, PhaseTrace]
    schedule: list[str]
    regimes: dict[str, str] = field(default_factory=dict)
    alternate_head: Optional[str] = None

    def with_head(self, head: str) -> list[str]:
        """The schedule with ``head`` moved to the front."""
        if head not in self.traces:
            raise KeyError(head)
        rest = list(self.schedule)
        rest.remove(head)
        return [head] + rest


BUILTIN_SUITES = ("suite", "stress")


def suite_spec_path(name: str = "suite") -> Path:
    return Path(str(resources.files("phasetune") / "data" / f"{name}.json"))


def load_suite_spec(path=None) -> dict:
    path = Path(path) if path is not None else suite_spec_path()
    doc = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(doc.get("phases"), list) or not doc["phases"]:
        raise ValueError(f"{path}: suite spec needs a non-empty 'phases' list")
    return doc


def _phase_specs(doc: dict):
    default_n = doc.get("access_count")
    for entry in doc["phases"]:
        params = {k: v for k, v in entry.items() if k not in ("id", "regime")}
        if "access_count" not in params and default_n is not None:
            params["access_count"] = default_n
        yield entry["id"], entry.get("regime", ""), SyntheticSpec.from_dict(params)


def load_suite(path=None) -> Suite:
    """Generate every phase of a suite spec in memory."""
    doc = load_suite_spec(path)
    traces, regimes = {}, {}
    for pid, regime, spec in _phase_specs(doc):
        traces[pid] = generate_synthetic(spec, pid)
        regimes[pid] = regime
    schedule = list(doc.get("schedule") or traces)
    for pid in schedule:
        if pid not in traces:
            raise ValueError(f"schedule references unknown phase {pid!r}")
    return Suite(traces, schedule, regimes, doc.get("alternate_head"))


def load_workload(source) -> Suite:
    """Load a workload from a trace manifest, a suite spec, or the name of a
    shipped suite spec (``suite`` or ``stress``)."""
    text = str(source)
    path = Path(text)
    if not path.exists() and text in BUILTIN_SUITES:
        path = suite_spec_path(text)
    if not path.is_file():
        raise FileNotFoundError(f"workload not found: {text}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise WorkloadError(f"{path}: invalid JSON: {e}") from None
    entries = doc.get("phases") if isinstance(doc, dict) else None
    if entries and all(isinstance(e, dict) and "path" in e for e in entries):
        wl = parse_workload(path)
        return Suite(wl.load_traces(), list(wl.schedule), alternate_head=doc.get("alternate_head"))
    return load_suite(path)


def generate_suite_files(spec_path, outdir) -> Path:
    """Write one trace per phase plus ``workload.json``; returns the manifest path."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    suite = load_suite(spec_path)
    paths = {}
    for pid, trace in suite.traces.items():
        name = f"{pid}.trace"
        write_trace(trace, outdir / name)
        paths[pid] = name
    manifest = outdir / "workload.json"
    write_workload(paths, suite.schedule, manifest)
    return manifest


@dataclass
class Execution:
    phase_id: str
    icfg: CacheConfig
    dcfg: CacheConfig
    evaluations: int
    retuned: bool = False


@dataclass
class TunerRun:
    mode: str
    executions: list[Execution]
    log: list[Evaluation]
    best: dict[str, tuple[CacheConfig, CacheConfig]]
    windows: list[dict] = field(default_factory=list)
    s_d: Optional[float] = None
    # DynaPDM only: per-phase records and tuning interval lengths
    records: dict = field(default_factory=dict)
    intervals: dict[str, int] = field(default_factory=dict)

    def explored(self, phase_id: str) -> int:
        return sum(1 for e in self.log if e.phase_id == phase_id)


def run_dynapdm(traces: dict[str, PhaseTrace], schedule: Sequence[str], evaluator: Evaluator,
                options: Optional[TunerOptions] = None) -> TunerRun:
    tuner = DynaPDM(evaluator, options)
    executions = []
    for pid in schedule:
        phase = traces[pid]
        before = len(tuner.log)
        known = tuner.state.history.lookup(pid) is not None
        pair = tuner.on_phase_enter(phase)
        retuned = False
        if known:
            measured = evaluator.edp(phase, *pair, tuner.interval_for(phase))
            new = tuner.monitor_and_retune(phase, measured)
            if new is not None:
                pair, retuned = new, True
        executions.append(Execution(pid, pair[0], pair[1], len(tuner.log) - before, retuned))
    best = {pid: (r.icfg, r.dcfg) for pid, r in tuner.state.phases.items()}
    windows = [
        # an open-ended window has no upper bound; JSON has no infinity
        {"id": w.id, "win_l": w.win_l, "win_u": w.win_u if math.isfinite(w.win_u) else None,
         "icache_dist": str(w.icache_dist), "dcache_dist": str(w.dcache_dist)}
        for w in tuner.state.windows
    ]
    return TunerRun("dynapdm", executions, list(tuner.log), best, windows, tuner.state.windows.s_d,
                    dict(tuner.state.phases), {pid: tuner.interval_for(traces[pid]) for pid in best})


def run_pdm(traces: dict[str, PhaseTrace], schedule: Sequence[str], evaluator: Evaluator,
            thresholds: Thresholds = Thresholds(), options: Optional[TunerOptions] = None) -> TunerRun:
    """Static PDM. The first scheduled phase is the base phase; its best pair
    is found at design time by exhaustive search over one tuning interval."""
    opts = options or TunerOptions()
    base_cfg = opts.base_cfg
    history = PhaseHistoryTable(opts.history_capacity)
    logrec: list[Evaluation] = []
    executions = []
    best: dict[str, tuple[CacheConfig, CacheConfig]] = {}
    base: Optional[BasePhase] = None
    probe = DynaPDM(evaluator, opts)  # reused for interval sizing only
    for pid in schedule:
        phase = traces[pid]
        entry = history.lookup(pid)
        if entry is not None:
            history.touch(pid)
            executions.append(Execution(pid, entry.icfg, entry.dcfg, 0))
            continue
        interval = probe.interval_for(phase)
        base_edp = evaluator.edp(phase, base_cfg, base_cfg, interval)
        logrec.append(Evaluation(pid, "both", str(base_cfg), base_edp, "characterize"))
        if base is None:
            ch = characterize(phase, base_cfg, interval, evaluator)
            design = exhaustive_search(phase, evaluator, interval)
            base = BasePhase(ch, *design.best)
            pair = design.best
        else:
            est = pdm_estimate(phase, base, thresholds, interval_accesses=interval,
                               evaluator=evaluator, base_cfg=base_cfg)
            pair = (est.icfg, est.dcfg)
        history.insert(pid, *pair, evaluator.edp(phase, *pair, interval))
        best[pid] = pair
        executions.append(Execution(pid, pair[0], pair[1], 1))
    return TunerRun("pdm", executions, logrec, best)


def run_oracle(traces: dict[str, PhaseTrace], evaluator: Evaluator, phase_ids=None,
               workers: int = 1) -> dict[str, OracleResult]:
    ids = list(phase_ids if phase_ids is not None else traces)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda p: exhaustive_search(traces[p], evaluator), ids))
    else:
        results = [exhaustive_search(traces[p], evaluator) for p in ids]
    return dict(zip(ids, results))


def _mean(xs) -> float:
    xs = list(xs)
    return sum(xs) / len(xs) if xs else 0.0


def build_report(traces: dict[str, PhaseTrace], schedule: Sequence[str], evaluator: Evaluator,
                 selected: TunerRun, dyn: TunerRun, pdm: TunerRun,
                 oracle: dict[str, OracleResult], regimes: Optional[dict] = None) -> dict:
    """Per-phase full-phase EDPs for every method, normalized to the base pair."""
    rows = []
    for pid in dict.fromkeys(schedule):
        phase = traces[pid]
        base_edp = evaluator.edp(phase, BASE_CONFIG, BASE_CONFIG)
        o = oracle[pid]
        di, dd = dyn.best[pid]
        pi, pd = pdm.best[pid]
        dyn_edp = evaluator.edp(phase, di, dd)
        pdm_edp = evaluator.edp(phase, pi, pd)
        ind = independence_check(o)
        rows.append({
            "phase_id": pid,
            "regime": (regimes or {}).get(pid, ""),
            "executions": [e.evaluations for e in selected.executions if e.phase_id == pid],
            "explored": selected.explored(pid),
            "base_edp": base_edp,
            "pdm_edp": pdm_edp,
            "dynapdm_edp": dyn_edp,
            "oracle_edp": o.best_edp,
            "pdm_savings": 1 - pdm_edp / base_edp,
            "dynapdm_savings": 1 - dyn_edp / base_edp,
            "oracle_savings": 1 - o.best_edp / base_edp,
            "pdm_gap": gap(pdm_edp, o.best_edp),
            "dynapdm_gap": gap(dyn_edp, o.best_edp),
            "pdm_config": [str(pi), str(pd)],
            "dynapdm_config": [str(di), str(dd)],
            "oracle_config": [str(o.best[0]), str(o.best[1])],
            "independent_tuning_agrees": ind.agrees,
            "independent_tuning_gap": ind.gap,
        })
    agg = {
        key: _mean(r[key] for r in rows)
        for key in ("pdm_savings", "dynapdm_savings", "oracle_savings", "pdm_gap", "dynapdm_gap",
                    "base_edp", "pdm_edp", "dynapdm_edp", "oracle_edp")
    }
    agg["phases"] = len(rows)
    agg["executions"] = len(schedule)
    agg["total_explored"] = len(selected.log)
    return {
        "mode": selected.mode,
        "schedule": list(schedule),
        "phases": rows,
        "aggregate": agg,
        "windows": dyn.windows,
        "final_window_size": dyn.s_d,
    }


def options_dict(opts: TunerOptions) -> dict:
    d = asdict(opts)
    d["base_cfg"] = str(opts.base_cfg)
    d["base_start"] = str(opts.base_start)
    if not math.isfinite(opts.win_u_max):
        d["win_u_max"] = None
    return d


def run_workload(traces: dict[str, PhaseTrace], schedule: Sequence[str], evaluator: Evaluator,
                 mode: str = "dynapdm", options: Optional[TunerOptions] = None,
                 thresholds: Thresholds = Thresholds(), regimes: Optional[dict] = None,
                 workers: int = 1) -> tuple[dict, TunerRun]:
    if mode not in ("dynapdm", "pdm"):
        raise ValueError(f"unknown mode {mode!r}")
    options = options or TunerOptions()
    dyn = run_dynapdm(traces, schedule, evaluator, options)
    pdm = run_pdm(traces, schedule, evaluator, thresholds, options)
    oracle = run_oracle(traces, evaluator, dict.fromkeys(schedule), workers)
    selected = dyn if mode == "dynapdm" else pdm
    report = build_report(traces, schedule, evaluator, selected, dyn, pdm, oracle, regimes)
    report["options"] = options_dict(options)
    report["thresholds"] = asdict(thresholds)
    return report, selected


def sweep_window_size(traces: dict[str, PhaseTrace], schedule: Sequence[str], evaluator: Evaluator,
                      sizes: Sequence[float] = (0.25, 0.5, 1.0),
                      base_options: Optional[TunerOptions] = None) -> list[dict]:
    """Run DynaPDM with each fixed window size (no merging)."""
    rows = []
    base_options = base_options or TunerOptions()
    for s_d in sizes:
        opts = TunerOptions(**{**base_options.__dict__, "s_d": s_d, "dynamic_sd": False})
        run = run_dynapdm(traces, schedule, evaluator, opts)
        savings = []
        for pid, (i, d) in run.best.items():
            phase = traces[pid]
            savings.append(1 - evaluator.edp(phase, i, d) / evaluator.edp(phase, BASE_CONFIG, BASE_CONFIG))
        rows.append({"s_d": s_d, "windows": len(run.windows), "mean_savings": _mean(savings),
                     "explored": len(run.log)})
    return rows


REPORT_CSV_FIELDS = (
    "phase_id", "regime", "base_edp", "pdm_edp", "dynapdm_edp", "oracle_edp",
    "pdm_savings", "dynapdm_savings", "oracle_savings", "explored",
)


def write_report_csv(report: dict, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(REPORT_CSV_FIELDS)
    for row in report["phases"]:
        w.writerow([row[k] if isinstance(row[k], str) else repr(row[k]) for k in REPORT_CSV_FIELDS])


def write_interval_log(entries: Sequence[Evaluation], fh) -> None:
    """One JSON object per line, in evaluation order."""
    for e in entries:
        fh.write(json.dumps(e.as_dict(), sort_keys=True) + "\n")


def dump_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"
