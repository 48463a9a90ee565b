import os

import pytest

from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("thorough", deadline=None, max_examples=500)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))



# one summary line per acceptance criterion, printed after the run
_ACCEPTANCE = pytest.StashKey[dict]()


def _sort_key(k: str):
    return (int("".join(ch for ch in k if ch.isdigit())), k)


@pytest.fixture
def record(request):
    lines = request.config.stash.setdefault(_ACCEPTANCE, {})

    def _record(key: str, ok: bool, detail: str) -> None:
        line = f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines[key] = line
        print(line)

    return _record


def pytest_terminal_summary(terminalreporter):
    lines = terminalreporter.config.stash.get(_ACCEPTANCE, {})
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(lines, key=_sort_key):
        terminalreporter.write_line(lines[key])
