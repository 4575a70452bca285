import warnings

# numba's TBB probe warns on hosts without a matching libtbb; it is harmless
warnings.filterwarnings("ignore", message=".*TBB.*")

ACCEPTANCE = {}


def record(number, passed, detail):
    """Store one acceptance result and echo it for ``pytest -s`` runs."""
    line = f"acceptance {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
