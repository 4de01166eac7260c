import pytest

_VERDICTS = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record one ``ACCEPTANCE n: PASS|FAIL`` line and fail the test on FAIL."""
    lines = request.config.stash.setdefault(_VERDICTS, [])

    def record(criterion, failures, detail=""):
        status = "FAIL" if failures else "PASS"
        line = f"ACCEPTANCE {criterion}: {status} {detail}".rstrip()
        if failures:
            line += " | " + "; ".join(str(f) for f in failures[:5])
        print(line)
        lines.append(line)
        assert not failures, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance")
        for line in lines:
            terminalreporter.write_line(line)
