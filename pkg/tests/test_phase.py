import math

import pytest

from phasetune.cache import BASE_CONFIG, CacheConfig
from phasetune.phase import (
    PhaseCharacteristics,
    PhaseHistoryTable,
    characterize,
    combined_distance,
    phase_distance,
)
from phasetune.trace import Kind, MemoryAccess, PhaseTrace, SyntheticSpec, generate_synthetic


def ch(i, d, pid="p"):
    return PhaseCharacteristics(pid, i, d)


def test_streaming_quarter_miss_rate():
    t = generate_synthetic(SyntheticSpec(1 << 17, 16, 256, 80_000, seed=3), "s")
    assert characterize(t, BASE_CONFIG).d_miss_rate == pytest.approx(0.25, abs=0.002)


def test_warm_loop_miss_rate_near_zero():
    t = generate_synthetic(SyntheticSpec(2048, 16, 512, 80_000, seed=3), "w")
    c = characterize(t, BASE_CONFIG)
    assert c.d_miss_rate < 0.002 and c.i_miss_rate < 0.002


def test_empty_data_stream_rate_zero():
    t = PhaseTrace("i-only", [MemoryAccess(Kind.IFETCH, 4 * k) for k in range(100)])
    assert characterize(t, BASE_CONFIG).d_miss_rate == 0.0


def test_characterize_interval_prefix():
    t = generate_synthetic(SyntheticSpec(1 << 16, 16, 256, 20_000, seed=1), "pre")
    head = PhaseTrace("pre", t.accesses[:5000])
    assert characterize(t, BASE_CONFIG, 5000) == characterize(head, BASE_CONFIG)


@pytest.mark.parametrize("mi,mb,expected", [
    (0.10, 0.05, 1.0),
    (0.05, 0.05, 0.0),
    (0.2, 0.0, math.inf),
    (0.0, 0.0, 0.0),
    (0.0, 0.4, 1.0),
])
def test_phase_distance(mi, mb, expected):
    assert phase_distance(ch(0, mi), ch(0, mb), "data") == pytest.approx(expected)


def test_distance_not_symmetric():
    a, b = ch(0.1, 0.1), ch(0.2, 0.2)
    assert phase_distance(a, b, "instruction") == pytest.approx(0.5)
    assert phase_distance(b, a, "instruction") == pytest.approx(1.0)


def test_combined_distance_sums_streams():
    assert combined_distance(ch(0.2, 0.3), ch(0.1, 0.1)) == pytest.approx(1.0 + 2.0)


def test_rates_validated():
    with pytest.raises(ValueError):
        ch(1.5, 0)


def test_history_insert_lookup():
    h = PhaseHistoryTable(4)
    h.insert("A", BASE_CONFIG, CacheConfig(2048, 1, 16), 1.0)
    e = h.lookup("A")
    assert (e.icfg, e.dcfg, e.recorded_edp) == (BASE_CONFIG, CacheConfig(2048, 1, 16), 1.0)
    assert h.lookup("Z") is None


def test_history_lru_eviction():
    h = PhaseHistoryTable(2)
    assert h.insert("A", BASE_CONFIG, BASE_CONFIG, 1) is None
    h.insert("B", BASE_CONFIG, BASE_CONFIG, 1)
    assert h.insert("C", BASE_CONFIG, BASE_CONFIG, 1) == "A"
    assert h.ids() == ["B", "C"]


def test_history_touch_changes_victim():
    h = PhaseHistoryTable(2)
    h.insert("A", BASE_CONFIG, BASE_CONFIG, 1)
    h.insert("B", BASE_CONFIG, BASE_CONFIG, 1)
    h.touch("A")
    assert h.insert("C", BASE_CONFIG, BASE_CONFIG, 1) == "B"
    assert len(h) == 2


def test_history_rejects_infeasible():
    with pytest.raises(ValueError):
        PhaseHistoryTable().insert("A", CacheConfig(2048, 4, 16), BASE_CONFIG, 1)
