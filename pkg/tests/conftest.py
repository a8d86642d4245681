import time

import pytest

from phasetune.energy import Evaluator, load_params
from phasetune.harness import load_suite, run_workload

# wall-clock seconds spent building the shared suite fixtures
TIMINGS = {}


@pytest.fixture(scope="session")
def params():
    return load_params()


@pytest.fixture(scope="session")
def evaluator(params):
    return Evaluator(params)


@pytest.fixture(scope="session")
def suite():
    return load_suite()


@pytest.fixture(scope="session")
def suite_run(suite, evaluator):
    """Report and DynaPDM run for the standard suite in its shipped order."""
    t0 = time.perf_counter()
    out = run_workload(suite.traces, suite.schedule, evaluator, regimes=suite.regimes)
    TIMINGS["suite_run"] = time.perf_counter() - t0
    return out


@pytest.fixture(scope="session")
def alt_suite_run(suite, evaluator):
    t0 = time.perf_counter()
    schedule = suite.with_head(suite.alternate_head)
    out = run_workload(suite.traces, schedule, evaluator, regimes=suite.regimes)
    TIMINGS["alt_suite_run"] = time.perf_counter() - t0
    return out
