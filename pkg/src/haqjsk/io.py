"""TU-format dataset ingestion, kernel-matrix files and CV report JSON."""

from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path
from typing import Optional

import numpy as np

from .graph import Graph, GraphDataset
from .kernels import KernelConfig, KernelMatrix
from .svm import CvReport

log = logging.getLogger(__name__)

KM_HEADER = "HAQJSK-KM v1"


class ParseError(ValueError):
    """Malformed input file; the message names the file and line or byte offset."""


def _int_lines(path: Path, width: int) -> list[tuple[int, ...]]:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            tokens = [t.strip() for t in text.split(",")]
            if len(tokens) != width:
                raise ParseError(f"{path}:{lineno}: expected {width} value(s), got {len(tokens)}")
            try:
                rows.append(tuple(int(t) for t in tokens))
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-integer token in {text!r}") from None
    return rows


def tud_paths(directory, name: str) -> dict[str, Path]:
    d = Path(directory)
    return {
        "A": d / f"{name}_A.txt",
        "graph_indicator": d / f"{name}_graph_indicator.txt",
        "graph_labels": d / f"{name}_graph_labels.txt",
    }


def load_tud(directory, name: str, require_labels: bool = True) -> GraphDataset:
    """Read a dataset in the TU plain-text layout.

    Edges in ``<name>_A.txt`` are 1-based global vertex ids; an edge may be
    listed once or in both directions, and repeats collapse to weight 1.
    Self-loops are dropped with a warning. Graph labels are remapped to
    ``0..class_count-1`` in sorted order. Node-label and attribute files are
    ignored.
    """
    paths = tud_paths(directory, name)
    needed = ["A", "graph_indicator"] + (["graph_labels"] if require_labels else [])
    for key in needed:
        if not paths[key].is_file():
            raise FileNotFoundError(f"missing dataset file {paths[key]}")

    indicator = np.array([r[0] for r in _int_lines(paths["graph_indicator"], 1)], dtype=np.int64)
    if indicator.size == 0:
        raise ParseError(f"{paths['graph_indicator']}: no vertices")
    if np.any(np.diff(indicator) < 0):
        line = int(np.flatnonzero(np.diff(indicator) < 0)[0]) + 2
        raise ParseError(f"{paths['graph_indicator']}:{line}: graph ids must be non-decreasing")
    graph_ids = np.unique(indicator)
    n_graphs = len(graph_ids)
    if graph_ids[0] != 1 or graph_ids[-1] != n_graphs:
        raise ParseError(f"{paths['graph_indicator']}: graph ids must run 1..{n_graphs} without gaps")

    labels: Optional[np.ndarray] = None
    class_count = 1
    if paths["graph_labels"].is_file():
        raw = np.array([r[0] for r in _int_lines(paths["graph_labels"], 1)], dtype=np.int64)
        if len(raw) != n_graphs:
            raise ParseError(
                f"{paths['graph_labels']}:{len(raw)}: {len(raw)} labels for {n_graphs} graphs"
            )
        classes, labels = np.unique(raw, return_inverse=True)
        class_count = len(classes)

    n_vertices = len(indicator)
    starts = np.searchsorted(indicator, graph_ids)
    sizes = np.diff(np.append(starts, n_vertices))
    adj = [np.zeros((s, s)) for s in sizes]
    loops = 0
    with open(paths["A"]) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            tokens = [t.strip() for t in text.split(",")]
            if len(tokens) != 2:
                raise ParseError(f"{paths['A']}:{lineno}: expected 'i, j', got {text!r}")
            try:
                i, j = int(tokens[0]), int(tokens[1])
            except ValueError:
                raise ParseError(f"{paths['A']}:{lineno}: non-integer token in {text!r}") from None
            for v in (i, j):
                if not 1 <= v <= n_vertices:
                    raise ParseError(f"{paths['A']}:{lineno}: dangling vertex id {v} (have {n_vertices})")
            gi, gj = indicator[i - 1], indicator[j - 1]
            if gi != gj:
                raise ParseError(f"{paths['A']}:{lineno}: edge ({i}, {j}) joins graphs {gi} and {gj}")
            if i == j:
                loops += 1
                continue
            off = starts[gi - 1]
            a = adj[gi - 1]
            a[i - 1 - off, j - 1 - off] = a[j - 1 - off, i - 1 - off] = 1.0
    if loops:
        log.warning("%s: dropped %d self-loop(s)", paths["A"], loops)

    graphs = tuple(
        Graph(a, None if labels is None else int(labels[k])) for k, a in enumerate(adj)
    )
    meta = {"source": str(Path(directory)), "self_loops_dropped": loops}
    return GraphDataset(graphs, class_count, name, meta)


def dataset_fingerprint(directory, name: str) -> str:
    """sha256 over the bundle files that define the dataset."""
    h = hashlib.sha256()
    for key, path in tud_paths(directory, name).items():
        h.update(key.encode())
        if path.is_file():
            h.update(path.read_bytes())
    return h.hexdigest()


def _km_metadata(km: KernelMatrix) -> dict:
    return {
        "dataset": km.dataset_name,
        "config": km.config.to_dict(),
        "labels": km.labels,
        "min_eigenvalue": km.min_eigenvalue,
        "meta": km.meta,
    }


def format_kernel_matrix(km: KernelMatrix) -> str:
    values = np.asarray(km.values, dtype=float)
    n = values.shape[0]
    lines = [KM_HEADER, json.dumps(_km_metadata(km), sort_keys=True), str(n)]
    lines.extend(" ".join(format(x, ".17g") for x in row) for row in values)
    return "\n".join(lines) + "\n"


def write_kernel_matrix(km: KernelMatrix, path) -> Path:
    """Header line, one JSON metadata line, N, then N rows at 17 significant digits."""
    path = Path(path)
    path.write_text(format_kernel_matrix(km))
    return path


def read_kernel_matrix(path) -> KernelMatrix:
    path = Path(path)
    data = path.read_text()
    lines = data.split("\n")
    offsets = np.concatenate([[0], np.cumsum([len(l) + 1 for l in lines])])

    def fail(lineno: int, msg: str):
        raise ParseError(f"{path}: line {lineno + 1} (byte offset {offsets[lineno]}): {msg}")

    if not lines or lines[0] != KM_HEADER:
        fail(0, f"expected header {KM_HEADER!r}")
    if len(lines) < 3:
        fail(min(len(lines) - 1, 1), "file ends before the metadata and size lines")
    try:
        meta = json.loads(lines[1])
    except json.JSONDecodeError as e:
        fail(1, f"bad metadata JSON: {e.msg}")
    try:
        n = int(lines[2])
    except ValueError:
        fail(2, f"bad matrix size {lines[2]!r}")
    if n < 0:
        fail(2, "negative matrix size")
    # text ends with a newline, so split leaves a trailing empty string
    body = lines[3:]
    if body and body[-1] == "":
        body = body[:-1]
    if len(body) < n:
        fail(3 + len(body), f"truncated: {len(body)} of {n} rows present")
    if len(body) > n:
        fail(3 + n, "unexpected data after the last row")
    values = np.empty((n, n))
    for r, line in enumerate(body):
        tokens = line.split()
        if len(tokens) != n:
            fail(3 + r, f"row has {len(tokens)} values, expected {n}")
        try:
            values[r] = [float(t) for t in tokens]
        except ValueError:
            fail(3 + r, "non-numeric value")
    if not data.endswith("\n"):
        fail(len(lines) - 1, "truncated: missing final newline")
    try:
        cfg = KernelConfig(**meta["config"])
    except (KeyError, TypeError, ValueError) as e:
        fail(1, f"bad config in metadata: {e}")
    return KernelMatrix(
        values, cfg, meta.get("dataset", ""), meta.get("labels"),
        meta.get("min_eigenvalue"), meta.get("meta", {}),
    )


def cv_report_dict(report: CvReport, dataset: str, config: Optional[KernelConfig]) -> dict:
    cfg = config.to_dict() if config is not None else {}
    out = {
        "dataset": dataset,
        "variant": cfg.get("variant"),
        "H": cfg.get("levels"),
        "M1": cfg.get("prototypes"),
        "K": cfg.get("max_layer"),
        "seed": report.seed,
        "folds": report.folds,
        "repeats": report.repeats,
        "mean_accuracy": report.mean_accuracy,
        "std_error": report.std_error,
        "per_repeat": list(report.per_repeat),
        "c_selected": list(report.c_selected),
    }
    out.update(report.meta)
    return out


def write_cv_report(report: CvReport, path, dataset: str, config: Optional[KernelConfig] = None) -> Path:
    path = Path(path)
    path.write_text(json.dumps(cv_report_dict(report, dataset, config), indent=2) + "\n")
    return path


def read_cv_report(path) -> CvReport:
    d = json.loads(Path(path).read_text())
    known = {"dataset", "variant", "H", "M1", "K", "seed", "folds", "repeats",
             "mean_accuracy", "std_error", "per_repeat", "c_selected"}
    return CvReport(
        d["mean_accuracy"], d["std_error"], d["per_repeat"], d["c_selected"],
        d["seed"], d["folds"], d["repeats"],
        {k: v for k, v in d.items() if k not in known},
    )
