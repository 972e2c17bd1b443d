from pathlib import Path

import numpy as np
import pytest

from haqjsk.graph import Graph, GraphDataset

DATA = Path(__file__).parent / "data"
MUTAG_DIR = DATA / "MUTAG"


def random_connected_graph(rng, n, p=0.3, label=None) -> Graph:
    """Random spanning tree plus Erdos-Renyi extra edges."""
    a = np.zeros((n, n))
    order = rng.permutation(n)
    for i in range(1, n):
        u, v = order[i], order[rng.integers(0, i)]
        a[u, v] = a[v, u] = 1
    extra = np.triu(rng.random((n, n)) < p, 1)
    a = np.maximum(a, extra + extra.T)
    return Graph(a, label)


def random_graph(rng, n, p=0.3, label=None) -> Graph:
    upper = np.triu(rng.random((n, n)) < p, 1).astype(float)
    return Graph(upper + upper.T, label)


def random_dataset(rng, n_graphs, sizes=(4, 12), p=0.3, classes=2, connected=True, name="random"):
    make = random_connected_graph if connected else random_graph
    graphs = tuple(
        make(rng, int(rng.integers(sizes[0], sizes[1] + 1)), p, int(i % classes))
        for i in range(n_graphs)
    )
    return GraphDataset(graphs, classes, name)


def write_tud(directory: Path, name: str, graphs, labels, node_labels=False):
    """Write graphs (list of edge lists with vertex counts) in the TU layout."""
    directory.mkdir(parents=True, exist_ok=True)
    a_lines, ind, off = [], [], 0
    for gid, (n, edges) in enumerate(graphs, start=1):
        for u, v in edges:
            a_lines.append(f"{u + 1 + off}, {v + 1 + off}")
            a_lines.append(f"{v + 1 + off}, {u + 1 + off}")
        ind.extend([gid] * n)
        off += n
    (directory / f"{name}_A.txt").write_text("\n".join(a_lines) + "\n")
    (directory / f"{name}_graph_indicator.txt").write_text("\n".join(map(str, ind)) + "\n")
    if labels is not None:
        (directory / f"{name}_graph_labels.txt").write_text("\n".join(map(str, labels)) + "\n")
    if node_labels:
        (directory / f"{name}_node_labels.txt").write_text("\n".join("0" for _ in ind) + "\n")
    return directory


@pytest.fixture
def toy_bundle(tmp_path):
    """K2 and P3, labels 1 and -1."""
    return write_tud(tmp_path / "toy", "TOY", [(2, [(0, 1)]), (3, [(0, 1), (1, 2)])], [1, -1])


@pytest.fixture
def four_graph_bundle(tmp_path):
    graphs = [
        (3, [(0, 1), (1, 2)]),
        (4, [(0, 1), (1, 2), (2, 3)]),
        (3, [(0, 1), (1, 2), (2, 0)]),
        (4, [(0, 1), (1, 2), (2, 3), (3, 0)]),
    ]
    return write_tud(tmp_path / "four", "FOUR", graphs, [0, 0, 1, 1])


# acceptance criteria report: one line per criterion at the end of the run

_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when != "call":
        return
    status = "PASS" if rep.passed else "FAIL"
    for mark in item.iter_markers("criterion"):
        num, text = mark.args
        prev = _CRITERIA.get(num)
        if prev is None:
            _CRITERIA[num] = (status, text)
        elif status == "FAIL":
            _CRITERIA[num] = (status, prev[1])


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        status, text = _CRITERIA[num]
        terminalreporter.write_line(f"criterion {num}: {status}  {text}")
