import sys


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n, name, ok, secs, detail in sorted(results):
        line = f"criterion {n:2d} {'PASS' if ok else 'FAIL'} {name} ({secs:.1f}s)"
        terminalreporter.write_line(line + (f" - {detail}" if detail else ""))
