"""Shared waves, operators and spectra (session scoped: they are expensive)."""

import pytest

from nlsinstab import Grid, NonlinearitySpec, assemble, compute_spectrum, solve_radial

# acceptance bookkeeping: criterion number -> (title, outcome, details)
_CRITERIA: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


def pytest_runtest_logreport(report):
    marker = getattr(report, "_criterion", None)
    if marker is None:
        return
    num, title = marker
    entry = _CRITERIA.setdefault(num, [title, "PASS", []])
    if report.failed:
        entry[1] = "FAIL"
    elif report.skipped and entry[1] != "FAIL":
        entry[1] = "SKIP"
    if report.when == "call":
        entry[2].extend(f"{k}={v}" for k, v in report.user_properties)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is not None:
        rep._criterion = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        title, status, details = _CRITERIA[num]
        line = f"criterion {num:2d} {status}: {title}"
        if details:
            line += "  [" + ", ".join(details) + "]"
        tr.write_line(line)


# ---------------------------------------------------------------------------
# N=1, p=3 (stable)


@pytest.fixture(scope="session")
def spec3():
    return NonlinearitySpec(3.0, 1)


@pytest.fixture(scope="session")
def wave3(spec3):
    return solve_radial(spec3, 1.0).on_grid(Grid(1, 40.0, 512))


@pytest.fixture(scope="session")
def op3(wave3):
    return assemble(wave3)


@pytest.fixture(scope="session")
def report3(op3):
    return compute_spectrum(op3, mode="dense")


# ---------------------------------------------------------------------------
# N=1, p=7 (unstable)


@pytest.fixture(scope="session")
def spec7():
    return NonlinearitySpec(7.0, 1)


@pytest.fixture(scope="session")
def radial7(spec7):
    return solve_radial(spec7, 1.0)


@pytest.fixture(scope="session")
def wave7(radial7):
    return radial7.on_grid(Grid(1, 25.0, 512))


@pytest.fixture(scope="session")
def op7(wave7):
    return assemble(wave7)


@pytest.fixture(scope="session")
def report7(op7):
    return compute_spectrum(op7, mode="dense")


@pytest.fixture(scope="session")
def wave7_fine(radial7):
    return radial7.on_grid(Grid(1, 25.0, 1024))


@pytest.fixture(scope="session")
def run7(wave7, report7):
    from nlsinstab import run_instability

    return run_instability(wave7, report7, 1e-4, 1e-2)


@pytest.fixture(scope="session")
def sweep7(wave7, report7):
    from nlsinstab import sweep_delta

    return sweep_delta(wave7, report7, [1e-3, 1e-4, 1e-5], 0.1)


# ---------------------------------------------------------------------------
# N=2, p=5


@pytest.fixture(scope="session")
def spec5_2d():
    return NonlinearitySpec(5.0, 2)


@pytest.fixture(scope="session")
def wave2d(spec5_2d):
    return solve_radial(spec5_2d, 1.0).on_grid(Grid(2, 24.0, 128))


@pytest.fixture(scope="session")
def report2d(wave2d):
    return compute_spectrum(assemble(wave2d), mode="iterative")
