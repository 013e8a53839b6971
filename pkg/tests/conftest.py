import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "dwsg", deadline=None, suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large]
)
settings.load_profile("dwsg")


@pytest.fixture(scope="session")
def e2():
    from dwsg.pipeline import RunConfig, compute_e

    return compute_e(RunConfig(order=2))


@pytest.fixture(scope="session")
def e4():
    from dwsg.pipeline import RunConfig, compute_e

    return compute_e(RunConfig(order=4, jobs=min(4, os.cpu_count() or 1)))


@pytest.fixture(scope="session")
def e4_n4():
    from dwsg.pipeline import RunConfig, compute_e

    return compute_e(RunConfig(order=4, dimension="n4", jobs=min(4, os.cpu_count() or 1)))


@pytest.fixture(scope="session")
def minimal4():
    from dwsg.pipeline import RunConfig, compute_e
    from dwsg.symbolcalc import OperatorSpec

    return compute_e(RunConfig(operator=OperatorSpec("minimal"), order=4))


# ------------------------------------------------------------ acceptance gate

CRITERIA = {
    1: "E2 nonminimal exactness",
    2: "tr E4 exactness",
    3: "full E4 exactness",
    4: "n=4 specialization",
    5: "minimal-operator degeneration",
    6: "odd-coefficient vanishing",
    7: "dependency rank",
    8: "integral oracle",
    9: "property suites standalone",
}
_OUTCOMES: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(k): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    rep = (yield).get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    k = mark.args[0]
    if rep.when == "call" or rep.outcome != "passed":
        # xfail counts as a failed criterion: the gate must not hide it
        ok = rep.passed and not hasattr(rep, "wasxfail")
        _OUTCOMES.setdefault(k, []).append((item.name, ok))


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        runs = _OUTCOMES.get(k)
        if not runs:
            continue
        bad = [name for name, ok in runs if not ok]
        status = "FAIL" if bad else "PASS"
        tail = f" ({', '.join(bad)})" if bad else ""
        terminalreporter.write_line(f"{status} criterion {k}: {CRITERIA[k]}{tail}")
