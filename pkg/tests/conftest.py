import pytest

from speedpart.graph_io import EdgeStream, gen_powerlaw

# node ids for the hand-traced six-edge example
A, B, C, D, H = 0, 1, 2, 3, 4
TOY_EDGES = [(A, H, 1.0), (B, H, 2.0), (A, B, 3.0), (C, H, 4.0), (C, D, 5.0), (B, D, 6.0)]


@pytest.fixture
def toy_stream():
    return EdgeStream.from_edges(TOY_EDGES)


@pytest.fixture(scope="session")
def pl_stream():
    return gen_powerlaw(2000, 20000, 2.5, seed=11)


def write_csv(path, rows, header="src,dst,ts"):
    path.write_text(header + "\n" + "".join(",".join(str(v) for v in r) + "\n" for r in rows))
    return path


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
