import io
import random

import pytest

from phasetune.cache import BASE_CONFIG, DESIGN_SPACE, CacheConfig
from phasetune.oracle import CSV_FIELDS, exhaustive_search, gap, independence_check, write_table_csv
from phasetune.trace import PhaseTrace, SyntheticSpec, generate_synthetic


@pytest.fixture(scope="module")
def small_phase():
    return generate_synthetic(SyntheticSpec(1024, 16, 512, 40_000, seed=7), "small")


@pytest.fixture(scope="module")
def small_result(small_phase, evaluator):
    return exhaustive_search(small_phase, evaluator)


def test_table_has_all_pairs(small_result):
    assert len(small_result.table) == 324


def test_small_phase_prefers_2k(small_result):
    icfg, dcfg = small_result.best
    assert icfg.size_bytes == 2048 and dcfg.size_bytes == 2048


def test_best_is_minimum(small_result):
    assert small_result.best_edp == min(c.edp_Js for c in small_result.table.values())
    assert small_result.best_edp <= small_result.edp(BASE_CONFIG, BASE_CONFIG)


def test_permutation_invariant(small_phase, evaluator, small_result):
    configs = list(DESIGN_SPACE)
    random.Random(3).shuffle(configs)
    again = exhaustive_search(small_phase, evaluator, configs=configs)
    assert again.best == small_result.best and again.best_edp == small_result.best_edp


def test_tie_break_design_order(evaluator):
    # no data accesses, so data configurations differing only in line size tie exactly
    t = generate_synthetic(SyntheticSpec(64, 16, 64, 1000, data_fraction=0.0, seed=1), "ionly")
    lines = [CacheConfig(2048, 1, l) for l in (64, 32, 16)]
    r = exhaustive_search(t, evaluator, configs=lines)
    assert r.best[1] == CacheConfig(2048, 1, 16)


@pytest.mark.parametrize("tuner,best,expected", [(1.0, 1.0, 0.0), (1.05, 1.0, 0.05)])
def test_gap(tuner, best, expected):
    assert gap(tuner, best) == pytest.approx(expected)


def test_gap_nonnegative_for_table_pairs(small_result):
    assert all(gap(c.edp_Js, small_result.best_edp) >= 0 for c in small_result.table.values())


def test_empty_phase_rejected(evaluator):
    with pytest.raises(ValueError):
        exhaustive_search(PhaseTrace("e", ()), evaluator)


def test_independence_check(small_result):
    ind = independence_check(small_result)
    assert ind.joint == small_result.best
    assert ind.gap >= 0
    assert ind.agrees == (ind.independent == ind.joint)


def test_csv_table(small_result):
    buf = io.StringIO()
    write_table_csv([small_result], buf)
    rows = buf.getvalue().splitlines()
    assert rows[0] == ",".join(CSV_FIELDS)
    assert len(rows) == 325
    assert rows[1].startswith("small,2048:1:16,2048:1:16,")
