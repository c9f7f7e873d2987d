import pytest

# (criterion, passed, detail) lines collected by the acceptance suite
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def report():
    def _report(k, ok, detail):
        ACCEPTANCE.append((k, bool(ok), detail))
        print(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
    return _report
