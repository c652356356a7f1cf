import sys


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for c in sorted(results):
        parts = results[c]
        status = "PASS" if all(ok for ok, _ in parts) else "FAIL"
        terminalreporter.write_line("criterion %d: %s | %s"
                                    % (c, status, "; ".join(d for _, d in parts)))
