import json
import math

import pytest

from phasetune.cache import BASE_CONFIG, SMALLEST_CONFIG, CacheConfig, CacheStats
from phasetune.energy import (
    PARAMS_ENV_VAR,
    EnergyParams,
    Evaluator,
    ParamsError,
    cost,
    load_params,
    scaled,
)
from phasetune.harness import load_suite, suite_spec_path
from phasetune.trace import SyntheticSpec, generate_synthetic

SMALL = CacheConfig(2048, 1, 16)


def test_default_file_matches_dataclass(params):
    assert params.frequency_hz == 2e9
    d = EnergyParams()
    for name in ("hit_latency_cycles", "miss_penalty_base_cycles", "extra_cycles_per_physical_line",
                 "offchip_energy_per_physical_line_J", "core_power_W"):
        assert getattr(params, name) == getattr(d, name)


def test_hand_computed_cost(params):
    # 150 accesses, 15 misses on 16-byte lines:
    # cycles 150 + 15*40 = 750, t = 3.75e-7 s
    # E = 0.06*t + 150*6e-12 + 15*5e-10 + 2*1e-3*t = 3.165e-8 J
    c = cost(CacheStats(100, 10, 10), CacheStats(50, 5, 5), SMALL, SMALL, params)
    assert c.cycles == 750
    assert c.time_s == pytest.approx(3.75e-7, rel=1e-12)
    assert c.energy_J == pytest.approx(3.165e-8, rel=1e-12)
    assert c.edp_Js == pytest.approx(3.165e-8 * 3.75e-7, rel=1e-12)


def test_line_transfer_cycles(params):
    # a 64-byte line is four physical lines: 40 + 3*4 cycles per miss
    assert params.miss_penalty_cycles(CacheConfig(8192, 4, 64)) == 52
    c = cost(CacheStats(0, 0, 0), CacheStats(10, 1, 4), SMALL, CacheConfig(8192, 4, 64), params)
    assert c.cycles == 10 + 52


def test_edp_formula_identity():
    p = EnergyParams(frequency_hz=2e9)
    # pick stats so cycles = 2e9 at 1 cycle per access and no misses
    c = cost(CacheStats(2 * 10**9, 0, 0), CacheStats(0, 0, 0), SMALL, SMALL, p)
    assert c.time_s == pytest.approx(1.0)
    assert c.edp_Js == pytest.approx(c.avg_power_W * 1.0)
    assert math.isclose(c.edp_Js, c.energy_J * c.time_s, rel_tol=1e-12)


def test_edp_quadratic_in_time():
    # with zero energy per access and miss, power is constant: doubling time quadruples EDP
    p = EnergyParams()
    a = cost(CacheStats(1000, 10, 10), CacheStats(0, 0, 0), SMALL, SMALL, p)
    b = cost(CacheStats(2000, 20, 20), CacheStats(0, 0, 0), SMALL, SMALL, p)
    assert b.avg_power_W == pytest.approx(a.avg_power_W)
    assert b.edp_Js == pytest.approx(4 * a.edp_Js)


def test_empty_stats_cost_zero(params):
    assert cost(CacheStats(), CacheStats(), SMALL, SMALL, params).edp_Js == 0


def test_energy_monotone_in_coefficients(params):
    ist, dst = CacheStats(1000, 50, 200), CacheStats(500, 40, 40)
    base = cost(ist, dst, BASE_CONFIG, SMALL, params).energy_J
    for name in ("offchip_energy_per_physical_line_J", "core_power_W"):
        bigger = scaled(params, **{name: 1.5})
        assert cost(ist, dst, BASE_CONFIG, SMALL, bigger).energy_J >= base


def test_small_loop_prefers_small_cache(evaluator):
    t = generate_synthetic(SyntheticSpec(512, 16, 256, 40_000, seed=4), "loop")
    assert evaluator.edp(t, SMALL, SMALL) < evaluator.edp(t, BASE_CONFIG, BASE_CONFIG)


def test_associativity_diminishing_returns(evaluator):
    stress = load_suite(suite_spec_path("stress"))
    t = stress.traces["conflict-2"]
    one, two, four = (evaluator.edp(t, BASE_CONFIG, CacheConfig(8192, a, 64)) for a in (1, 2, 4))
    assert one > two < four


def test_edp_identity_across_space(evaluator, suite):
    t = suite.traces["fft-mid"]
    for cfg in (SMALLEST_CONFIG, BASE_CONFIG, CacheConfig(4096, 2, 32)):
        c = evaluator.cost(t, cfg, cfg)
        assert math.isclose(c.edp_Js, c.energy_J * c.time_s, rel_tol=1e-12)


def _params_file(tmp_path, doc):
    p = tmp_path / "p.json"
    p.write_text(json.dumps(doc))
    return p


def test_load_zero_penalty_rejected(tmp_path):
    with pytest.raises(ParamsError, match="miss_penalty_base_cycles"):
        load_params(_params_file(tmp_path, {"miss_penalty_base_cycles": 0}))


def test_load_missing_field_uses_default(tmp_path):
    p = load_params(_params_file(tmp_path, {"frequency_hz": 1e9}))
    assert p.core_power_W == EnergyParams().core_power_W
    assert p.frequency_hz == 1e9


def test_load_unknown_field_rejected(tmp_path):
    with pytest.raises(ParamsError, match="bogus"):
        load_params(_params_file(tmp_path, {"bogus": 1}))


def test_env_var_selects_file(tmp_path, monkeypatch):
    monkeypatch.setenv(PARAMS_ENV_VAR, str(_params_file(tmp_path, {"core_power_W": 0.5})))
    assert load_params().core_power_W == 0.5


def test_non_monotone_table_rejected(tmp_path):
    with pytest.raises(ParamsError):
        load_params(_params_file(tmp_path, {"cache_hit_energy_J": {"8192:4": 1e-12}}))


def test_interval_accesses_targets_cycles(evaluator, suite):
    t = suite.traces["stream-copy"]
    n = evaluator.interval_accesses(t, BASE_CONFIG, 500_000)
    cycles = evaluator.cost(t, BASE_CONFIG, BASE_CONFIG, n).cycles
    assert 0 < n <= len(t)
    assert cycles == pytest.approx(500_000, rel=0.05)


def test_evaluator_memoizes(params, suite):
    ev = Evaluator(params)
    t = suite.traces["rotate-small"]
    a = ev.stats(t, "data", SMALL)
    assert ev.stats(t, "data", SMALL) is a
    assert ev.stats(t, "data", SMALL, len(t) + 5) is a
