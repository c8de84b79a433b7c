import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    'default', deadline=None, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile('default')


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker('criterion')
    if mark is None or not (rep.when == 'call' or rep.failed):
        return
    detail = dict(item.user_properties).get('detail', '')
    if rep.failed and not detail:
        detail = str(call.excinfo.value).splitlines()[0] if call.excinfo else ''
    prev = _CRITERIA.get(mark.args[0])
    passed = rep.passed and (prev is None or prev[0])
    _CRITERIA[mark.args[0]] = (passed, detail or (prev[1] if prev else ''))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section('acceptance criteria')
    for n in sorted(_CRITERIA):
        ok, detail = _CRITERIA[n]
        terminalreporter.write_line('criterion %2d: %s  %s'
                                    % (n, 'PASS' if ok else 'FAIL', detail))
