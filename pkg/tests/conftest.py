import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    try:
        import test_acceptance
    except ImportError:
        return
    results = getattr(test_acceptance, "RESULTS", [])
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, ok, detail in results:
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {criterion}: {status} — {detail}")
