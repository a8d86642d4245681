import random

import pytest

from naive_lru import naive_misses
from phasetune.cache import (
    BASE_CONFIG,
    DESIGN_SPACE,
    CacheConfig,
    CacheStats,
    InfeasibleConfigError,
    enumerate_design_space,
    is_feasible,
    next_value_up,
    simulate,
    simulate_addresses,
    snap_to_feasible,
)
from phasetune.trace import Kind, MemoryAccess, PhaseTrace


def test_design_space_has_eighteen_configs():
    space = enumerate_design_space()
    assert len(space) == 18
    assert BASE_CONFIG in space
    assert CacheConfig(2048, 2, 16) not in space
    assert CacheConfig(4096, 4, 32) not in space
    assert all(is_feasible(c) for c in space)
    assert len(set(space)) == 18


@pytest.mark.parametrize("cfg,expected", [
    ((8192, 1, 16), True),
    ((2048, 4, 64), False),
    ((8192, 4, 128), False),
    ((4096, 2, 64), True),
    ((4096, 4, 16), False),
    ((16384, 1, 16), False),
])
def test_is_feasible(cfg, expected):
    assert is_feasible(CacheConfig(*cfg)) is expected


def test_config_text_round_trip():
    for c in DESIGN_SPACE:
        assert CacheConfig.parse(str(c)) == c
    with pytest.raises(ValueError):
        CacheConfig.parse("8192:4")


def test_sequential_ifetches_cold_misses():
    addrs = [0x1000 + 16 * k for k in range(32)]
    assert simulate_addresses(addrs, CacheConfig(2048, 1, 16)).misses == 32


def test_two_way_set_thrash():
    # lines A, B, C share one set of a 2-way cache: A B C A misses every time
    c = CacheConfig(4096, 2, 16)
    stride = c.num_sets * c.line_bytes
    addrs = [0, stride, 2 * stride, 0]
    st = simulate_addresses(addrs, c)
    assert st.misses == 4
    assert st.physical_line_fetches == 4


def test_empty_trace():
    assert simulate_addresses([], BASE_CONFIG) == CacheStats(0, 0, 0)
    assert CacheStats().miss_rate == 0.0


def test_rejects_infeasible():
    with pytest.raises(InfeasibleConfigError):
        simulate_addresses([0], CacheConfig(2048, 2, 16))


def test_fetches_scale_with_line():
    st = simulate_addresses([0, 64, 128], CacheConfig(2048, 1, 64))
    assert st.misses == 3 and st.physical_line_fetches == 12


def test_stream_selection():
    t = PhaseTrace("p", [
        MemoryAccess(Kind.IFETCH, 0), MemoryAccess(Kind.LOAD, 0x8000),
        MemoryAccess(Kind.STORE, 0x9000), MemoryAccess(Kind.IFETCH, 4),
    ])
    i = simulate(t, "instruction", BASE_CONFIG)
    d = simulate(t, "data", BASE_CONFIG)
    assert (i.accesses, i.misses) == (2, 1)
    assert (d.accesses, d.misses) == (2, 2)
    # prefix limit counts records of both kinds
    assert simulate(t, "data", BASE_CONFIG, limit=2).accesses == 1


@pytest.mark.parametrize("cfg,param,expected", [
    ((4096, 2, 32), "size", (8192, 2, 32)),
    ((4096, 2, 32), "assoc", None),
    ((8192, 4, 64), "line", None),
    ((2048, 1, 16), "line", (2048, 1, 32)),
    ((8192, 4, 16), "size", None),
])
def test_next_value_up(cfg, param, expected):
    got = next_value_up(CacheConfig(*cfg), param)
    assert got == (CacheConfig(*expected) if expected else None)


@pytest.mark.parametrize("raw,expected", [
    ((4096, 4, 32), (4096, 2, 32)),
    ((2048, 2, 16), (2048, 1, 16)),
    ((8192, 4, 64), (8192, 4, 64)),
    ((1024, 8, 128), (2048, 1, 64)),
])
def test_snap_to_feasible(raw, expected):
    assert snap_to_feasible(*raw) == CacheConfig(*expected)


def _random_addresses(rng, n):
    style = rng.randrange(3)
    if style == 0:
        return [rng.randrange(1 << 16) for _ in range(n)]
    if style == 1:
        # small hot region with heavy reuse, exercises consecutive repeats
        return [rng.randrange(4096) & ~3 for _ in range(n)]
    base = rng.randrange(1 << 12)
    stride = rng.choice((4, 16, 64, 2048, 4096))
    span = rng.choice((1024, 8192, 32768))
    return [(base + (k * stride) % span) for k in range(n)]


def test_matches_reference_simulator():
    rng = random.Random(1234)
    for _ in range(200):
        addrs = _random_addresses(rng, rng.randrange(0, 10_000))
        for c in DESIGN_SPACE:
            got = simulate_addresses(addrs, c)
            assert got.misses == naive_misses(addrs, c.size_bytes, c.associativity, c.line_bytes), (c, len(addrs))
            assert got.accesses == len(addrs)


def shared_set_pairs():
    """(smaller-assoc, larger-assoc) pairs with equal set count and line size."""
    out = []
    for a in DESIGN_SPACE:
        for b in DESIGN_SPACE:
            if (a.num_sets, a.line_bytes) == (b.num_sets, b.line_bytes) and a.associativity < b.associativity:
                out.append((a, b))
    return out


def test_lru_inclusion():
    pairs = shared_set_pairs()
    assert (CacheConfig(4096, 1, 16), CacheConfig(8192, 2, 16)) in pairs
    assert (CacheConfig(2048, 1, 64), CacheConfig(8192, 4, 64)) in pairs
    rng = random.Random(99)
    for _ in range(200):
        addrs = _random_addresses(rng, rng.randrange(1, 10_000))
        for small, big in pairs:
            assert simulate_addresses(addrs, big).misses <= simulate_addresses(addrs, small).misses


def test_deterministic():
    rng = random.Random(5)
    addrs = _random_addresses(rng, 5000)
    assert simulate_addresses(addrs, BASE_CONFIG) == simulate_addresses(list(addrs), BASE_CONFIG)
