"""Small analytic checks that exercise the numerical core end to end."""

from __future__ import annotations

import math
import time
from typing import Callable

import numpy as np

from .ctqw import density_matrix_infinite, density_matrix_time_avg, qjsd, von_neumann_entropy
from .graph import Graph, GraphDataset
from .kernels import KernelConfig, kernel_matrix

LN2 = math.log(2.0)


def _k2_density():
    rho = density_matrix_infinite(Graph([[0, 1], [1, 0]]))
    err = np.max(np.abs(rho - 0.5))
    return err <= 1e-12, f"max deviation from 1/2: {err:.2e}"


def _entropy_closed_forms():
    cases = [
        (np.diag([1.0, 0.0, 0.0]), 0.0),
        (np.eye(2) / 2, LN2),
        (np.eye(4) / 4, 2 * LN2),
        (np.diag([0.5, 0.25, 0.25]), 1.5 * LN2),
    ]
    worst = max(abs(von_neumann_entropy(r) - h) for r, h in cases)
    return worst <= 1e-12, f"max error {worst:.2e}"


def _qjsd_bounds():
    rng = np.random.default_rng(7)
    e0, e1 = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
    ok = abs(qjsd(e0, e1) - LN2) <= 1e-12
    for _ in range(200):
        d = int(rng.integers(2, 7))
        pair = []
        for _ in range(2):
            x = rng.standard_normal((d, d))
            r = x @ x.T
            pair.append(r / np.trace(r))
        v = qjsd(*pair)
        ok &= -1e-10 <= v <= LN2 + 1e-10 and v == qjsd(pair[1], pair[0])
    return bool(ok), "orthogonal pure states give ln 2; random pairs within [0, ln 2]"


def _time_average():
    g = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)])
    err = np.max(np.abs(density_matrix_infinite(g) - density_matrix_time_avg(g, 200.0, 20000)))
    return err <= 2e-2, f"closed form vs time average: {err:.2e}"


def _kernel_diagonal():
    graphs = (
        Graph.from_edges(3, [(0, 1), (1, 2)], 0),
        Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)], 1),
        Graph.from_edges(3, [(0, 1), (1, 2), (2, 0)], 1),
    )
    km = kernel_matrix(GraphDataset(graphs, 2, "selftest"), KernelConfig(levels=3, prototypes=4), jobs=1)
    v = km.values
    ok = np.all(np.abs(np.diag(v) - 3) <= 1e-9) and np.array_equal(v, v.T)
    ok &= bool(np.all(v >= 1.5 - 1e-12)) and bool(np.all(v <= 3 + 1e-12))
    return bool(ok), "diagonal = H, symmetric, entries in [H/2, H]"


CHECKS: list[tuple[str, Callable]] = [
    ("k2_density", _k2_density),
    ("entropy_closed_forms", _entropy_closed_forms),
    ("qjsd_bounds", _qjsd_bounds),
    ("time_average_convergence", _time_average),
    ("kernel_diagonal", _kernel_diagonal),
]


def run_selftest(out=print) -> bool:
    """Run every check, report one line each, return True iff all pass."""
    all_ok = True
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as e:  # a crash is a failed check, not a crashed run
            ok, detail = False, f"{type(e).__name__}: {e}"
        all_ok &= bool(ok)
        out(f"[{'PASS' if ok else 'FAIL'}] {name} ({time.perf_counter() - t0:.2f}s): {detail}")
    out("selftest: " + ("all checks passed" if all_ok else "FAILED"))
    return all_ok
