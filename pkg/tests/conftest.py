import numpy as np
import pytest

from ordinal_cpd import cpd


@pytest.fixture(scope="session")
def small_table():
    """A cheap sn_cusum table for tests that only need *a* table."""
    return cpd.null_quantiles("sn_cusum", (0.05,), grid_size=400, reps=2000, seed=11)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(autouse=True)
def _isolated_cache(tmp_path, monkeypatch):
    monkeypatch.setenv("ORDINAL_CPD_CACHE_DIR", str(tmp_path / "cache"))


# -- acceptance reporting -------------------------------------------------------

_CRITERIA: dict[int, tuple[str, bool, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.fixture
def record_criterion(request):
    marker = request.node.get_closest_marker("criterion")
    number, title = marker.args

    def record(passed: bool, detail: str) -> None:
        _CRITERIA[number] = (title, bool(passed), detail)
        print(f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {title} -- {detail}")

    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker and report.when == "call" and report.failed:
        number, title = marker.args
        if number not in _CRITERIA or _CRITERIA[number][1]:
            _CRITERIA[number] = (title, False, "raised before completing")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, passed, detail = _CRITERIA[number]
        terminalreporter.write_line(
            f"{'PASS' if passed else 'FAIL'}  {number:>2}. {title}: {detail}")
