import numpy as np
import pytest

from picardop import GridSpec, TorusField


@pytest.fixture
def grid64():
    return GridSpec(1, 64, 33)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def band_limited(spec, rng, band, amp=1.0):
    """Random real field whose spectrum lives on |xi_r| <= band."""
    c = np.zeros(spec.shape, dtype=complex)
    noise = rng.standard_normal(spec.shape) + 1j * rng.standard_normal(spec.shape)
    inside = np.ones(spec.shape, dtype=bool)
    for k in spec.frequencies():
        inside &= np.abs(k) <= band
    c[inside] = noise[inside]
    vals = np.real(np.fft.ifftn(c)) * spec.size
    return TorusField(spec, amp * vals / np.max(np.abs(vals)))


# Acceptance reporting: every test marked ``acceptance(number, title)`` gets one
# PASS/FAIL line in the terminal summary, in criterion order.
_ACCEPTANCE: dict[int, tuple[str, str, float]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when != "call":
        return
    number, title = marker.args
    _ACCEPTANCE[number] = ("PASS" if report.passed else "FAIL", title, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        status, title, seconds = _ACCEPTANCE[number]
        terminalreporter.write_line(f"{status} criterion {number}: {title} ({seconds:.2f} s)")
