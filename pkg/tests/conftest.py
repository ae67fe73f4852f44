from collections import defaultdict

import pytest

_CRITERIA = defaultdict(list)


@pytest.fixture
def criterion():
    """Record one sub-check of a numbered acceptance criterion.

    Returns ``passed`` so the caller can assert on it after recording.
    """

    def record(number: int, passed: bool, detail: str) -> bool:
        _CRITERIA[number].append((bool(passed), detail))
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        checks = _CRITERIA[number]
        status = "PASS" if all(ok for ok, _ in checks) else "FAIL"
        details = "; ".join(f"{d} [{'ok' if ok else 'FAIL'}]" for ok, d in checks)
        terminalreporter.write_line(f"criterion {number}: {status}  {details}")
