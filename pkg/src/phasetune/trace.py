"""Trace and workload files, plus a synthetic phase generator.

Trace format, one access per line::

    # phase: <id>
    I 0x1000
    L 0x2040
    S 0x2044

``I`` is an instruction fetch, ``L`` a load, ``S`` a store. Lines starting
with ``#`` are comments; a ``# phase: <id>`` comment names the phase,
otherwise the file stem is used. A desk-scale trace of 10^7 accesses is
roughly 120-150 MB in this format.
"""

from __future__ import annotations

import enum
import json
import random
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

ADDRESS_LIMIT = 1 << 48
INSTRUCTION_BYTES = 4

PathLike = Union[str, Path]


class TraceFormatError(ValueError):
    pass


class WorkloadError(ValueError):
    pass


class Kind(str, enum.Enum):
    IFETCH = "I"
    LOAD = "L"
    STORE = "S"


class MemoryAccess(NamedTuple):
    kind: Kind
    address: int


@dataclass(eq=False)
class PhaseTrace:
    phase_id: str
    accesses: Sequence[MemoryAccess] = field(default_factory=tuple)

    def __post_init__(self):
        if not self.phase_id:
            raise ValueError("phase_id must be non-empty")
        self.accesses = tuple(self.accesses)

    def __len__(self) -> int:
        return len(self.accesses)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PhaseTrace):
            return NotImplemented
        return self.phase_id == other.phase_id and self.accesses == other.accesses

    __hash__ = object.__hash__

    @cached_property
    def _stream_index(self):
        # addresses per stream plus the record position of every access, so
        # prefixes can be cut without rescanning
        n = len(self.accesses)
        addrs = np.fromiter((a for _, a in self.accesses), dtype=np.int64, count=n)
        is_i = np.fromiter((k is Kind.IFETCH for k, _ in self.accesses), dtype=bool, count=n)
        pos = np.arange(n)
        return addrs[is_i], addrs[~is_i], pos[is_i], pos[~is_i]

    def stream_addresses(self, stream: str, limit: Optional[int] = None) -> np.ndarray:
        """Addresses of one stream among the first ``limit`` records."""
        i_addr, d_addr, i_pos, d_pos = self._stream_index
        if stream == "instruction":
            addrs, pos = i_addr, i_pos
        elif stream == "data":
            addrs, pos = d_addr, d_pos
        else:
            raise ValueError(f"unknown stream {stream!r}")
        if limit is None or limit >= len(self.accesses):
            return addrs
        return addrs[: int(np.searchsorted(pos, limit))]


_KINDS = {k.value: k for k in Kind}


def parse_trace(path: PathLike) -> PhaseTrace:
    path = Path(path)
    phase_id = None
    accesses = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if phase_id is None and body.startswith("phase:"):
                    phase_id = body[len("phase:"):].strip() or None
                continue
            parts = line.split()
            if len(parts) != 2:
                raise TraceFormatError(f"{path}:{lineno}: expected '<kind> <address>', got {line!r}")
            kind = _KINDS.get(parts[0])
            if kind is None:
                raise TraceFormatError(f"{path}:{lineno}: unknown access kind {parts[0]!r}")
            try:
                addr = int(parts[1], 16)
            except ValueError:
                raise TraceFormatError(f"{path}:{lineno}: bad hex address {parts[1]!r}") from None
            if not 0 <= addr < ADDRESS_LIMIT:
                raise TraceFormatError(f"{path}:{lineno}: address out of range {parts[1]}")
            accesses.append(MemoryAccess(kind, addr))
    return PhaseTrace(phase_id or path.stem, accesses)


def write_trace(trace: PhaseTrace, path: PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# phase: {trace.phase_id}\n")
        fh.writelines(f"{k.value} {a:#x}\n" for k, a in trace.accesses)


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of a synthetic phase.

    Data accesses sweep ``working_set_bytes`` at ``stride``. With
    ``data_regions`` > 1 the working set is split into that many equal
    regions placed ``region_spacing`` bytes apart and visited round-robin,
    which makes them collide in low-associativity caches. A
    ``random_fraction`` of data accesses instead go to a uniformly random
    word in a heap of ``random_span_bytes``, giving a steady miss floor.
    Instruction fetches walk a loop body of ``instruction_footprint_bytes``.
    """

    working_set_bytes: int
    stride: int
    instruction_footprint_bytes: int
    access_count: int
    load_fraction: float = 0.7
    seed: int = 0
    data_fraction: float = 0.35
    data_regions: int = 1
    region_spacing: int = 1 << 16
    random_fraction: float = 0.0
    random_span_bytes: int = 1 << 20
    data_base: int = 0x1000_0000
    heap_base: int = 0x2000_0000
    code_base: int = 0x0040_0000

    def __post_init__(self):
        for name in ("working_set_bytes", "stride", "instruction_footprint_bytes",
                     "access_count", "data_regions", "region_spacing", "random_span_bytes"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.stride & (self.stride - 1):
            raise ValueError("stride must be a power of two")
        if not 0.0 <= self.load_fraction <= 1.0:
            raise ValueError("load_fraction must be in [0, 1]")
        if not 0.0 <= self.data_fraction <= 1.0:
            raise ValueError("data_fraction must be in [0, 1]")
        if not 0.0 <= self.random_fraction <= 1.0:
            raise ValueError("random_fraction must be in [0, 1]")

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown synthetic spec fields: {sorted(unknown)}")
        return cls(**d)


def generate_synthetic(spec: SyntheticSpec, phase_id: str = "synthetic") -> PhaseTrace:
    """Deterministic for a given spec: ``random.Random`` is seeded from
    ``spec.seed`` and its Mersenne Twister output is platform independent."""
    rng = random.Random(spec.seed)
    region_bytes = max(spec.stride, spec.working_set_bytes // spec.data_regions)
    region_steps = max(1, region_bytes // spec.stride)
    code_steps = max(1, spec.instruction_footprint_bytes // INSTRUCTION_BYTES)
    heap_words = max(1, spec.random_span_bytes // 4)
    accesses = []
    pc = 0
    d = 0
    for _ in range(spec.access_count):
        if rng.random() < spec.data_fraction:
            if spec.random_fraction and rng.random() < spec.random_fraction:
                addr = spec.heap_base + rng.randrange(heap_words) * 4
            else:
                region = d % spec.data_regions
                step = (d // spec.data_regions) % region_steps
                addr = spec.data_base + region * spec.region_spacing + step * spec.stride
                d += 1
            kind = Kind.LOAD if rng.random() < spec.load_fraction else Kind.STORE
            accesses.append(MemoryAccess(kind, addr))
        else:
            accesses.append(MemoryAccess(Kind.IFETCH, spec.code_base + pc * INSTRUCTION_BYTES))
            pc = (pc + 1) % code_steps
    return PhaseTrace(phase_id, accesses)


@dataclass(frozen=True)
class WorkloadSchedule:
    phase_paths: dict[str, Path]
    schedule: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.schedule)

    def load_traces(self) -> dict[str, PhaseTrace]:
        traces = {}
        for pid in dict.fromkeys(self.schedule):
            t = parse_trace(self.phase_paths[pid])
            traces[pid] = PhaseTrace(pid, t.accesses) if t.phase_id != pid else t
        return traces


def parse_workload(path: PathLike) -> WorkloadSchedule:
    """Read a JSON manifest ``{"phases": [{"id", "path"}], "schedule": [id...]}``.

    Relative trace paths resolve against the manifest's directory.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise WorkloadError(f"{path}: invalid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise WorkloadError(f"{path}: manifest must be a JSON object")
    phases: dict[str, Path] = {}
    for entry in doc.get("phases", []):
        try:
            pid, p = entry["id"], entry["path"]
        except (KeyError, TypeError):
            raise WorkloadError(f"{path}: phase entries need 'id' and 'path'") from None
        if pid in phases:
            raise WorkloadError(f"{path}: duplicate phase id {pid!r}")
        phases[pid] = (path.parent / p) if not Path(p).is_absolute() else Path(p)
    schedule = tuple(doc.get("schedule", []))
    for pid in schedule:
        if pid not in phases:
            raise WorkloadError(f"{path}: schedule references unknown phase {pid!r}")
        if not phases[pid].is_file():
            raise WorkloadError(f"{path}: trace for phase {pid!r} not found: {phases[pid]}")
    return WorkloadSchedule(phases, schedule)


def write_workload(phase_paths: dict[str, PathLike], schedule: Sequence[str], path: PathLike) -> None:
    path = Path(path)
    doc = {
        "phases": [{"id": pid, "path": str(p)} for pid, p in phase_paths.items()],
        "schedule": list(schedule),
    }
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
