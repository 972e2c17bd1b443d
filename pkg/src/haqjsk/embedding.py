"""Depth-based vertex representations.

Each vertex gets a K-vector whose k-th entry is the Shannon entropy of the
degree distribution of the k-layer expansion subgraph rooted at it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import UNREACHABLE, Graph, GraphDataset, expansion_vertices, shortest_path_distances

MAX_LAYER_CAP = 10


def _degree_entropy(degrees: np.ndarray) -> float:
    total = math.fsum(degrees)
    if total <= 0:
        return 0.0
    p = degrees[degrees > 0] / total
    # fsum is exactly rounded, so the value depends only on the multiset of degrees.
    return -math.fsum(p * np.log(p))


def subgraph_entropy(g: Graph, root: int, layer: int) -> float:
    keep = expansion_vertices(g, root, layer)
    sub = g.adjacency[np.ix_(keep, keep)]
    return _degree_entropy(sub.sum(axis=1))


def _representations(g: Graph, max_layer: int, dist=None) -> np.ndarray:
    if max_layer < 1:
        raise ValueError("max_layer must be >= 1")
    if dist is None:
        dist = shortest_path_distances(g)
    a = g.adjacency
    n = g.vertex_count
    out = np.zeros((n, max_layer))
    ecc = np.where(dist == UNREACHABLE, -1, dist).max(axis=1)
    for k in range(1, max_layer + 1):
        inside = (dist <= k).astype(float)
        # row r: degree of every vertex within the k-layer subgraph rooted at r
        sub_deg = (inside @ a) * inside
        for r in range(n):
            if k > 1 and k > ecc[r]:
                out[r, k - 1] = out[r, k - 2]
            else:
                out[r, k - 1] = _degree_entropy(sub_deg[r])
    return out


def db_representation(g: Graph, root: int, max_layer: int) -> np.ndarray:
    """Entropies of the 1..max_layer expansion subgraphs rooted at ``root``."""
    if not 0 <= root < g.vertex_count:
        raise ValueError(f"root {root} out of range")
    return _representations(g, max_layer)[root]


@dataclass(frozen=True)
class EmbeddingTable:
    """Vertex representations for a whole dataset, rows in (graph, vertex) order."""

    values: np.ndarray
    graph_index: np.ndarray
    vertex_index: np.ndarray
    offsets: np.ndarray
    max_layer: int

    def __len__(self):
        return self.values.shape[0]

    def rows_for(self, graph: int, dim: int | None = None) -> np.ndarray:
        block = self.values[self.offsets[graph]:self.offsets[graph + 1]]
        return block if dim is None else block[:, :dim]


def default_max_layer(ds: GraphDataset, cap: int = MAX_LAYER_CAP) -> int:
    """Longest finite shortest path over the dataset, capped at ``cap`` and at least 1."""
    longest = 0
    for g in ds:
        d = shortest_path_distances(g)
        finite = d[d != UNREACHABLE]
        longest = max(longest, int(finite.max()))
    return max(1, min(longest, cap))


def dataset_embeddings(ds: GraphDataset, max_layer: int) -> EmbeddingTable:
    if max_layer < 1:
        raise ValueError("max_layer must be >= 1")
    blocks, gi, vi = [], [], []
    for i, g in enumerate(ds):
        blocks.append(_representations(g, max_layer))
        gi.append(np.full(g.vertex_count, i))
        vi.append(np.arange(g.vertex_count))
    sizes = [g.vertex_count for g in ds]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    return EmbeddingTable(
        np.vstack(blocks), np.concatenate(gi), np.concatenate(vi), offsets, max_layer
    )


def write_embedding_table(table: EmbeddingTable, path) -> None:
    """Tab-separated dump: graph index, vertex index, then K values (12 significant digits)."""
    with open(Path(path), "w") as fh:
        for g, v, row in zip(table.graph_index, table.vertex_index, table.values):
            vals = "\t".join(format(x, ".12g") for x in row)
            fh.write(f"{g}\t{v}\t{vals}\n")
