import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from haqjsk.embedding import (
    dataset_embeddings,
    db_representation,
    default_max_layer,
    subgraph_entropy,
    write_embedding_table,
)
from haqjsk.graph import Graph, GraphDataset, expansion_subgraph

from conftest import random_connected_graph, random_graph


def brute_entropy(g, root, layer):
    """Shannon entropy from the explicit expansion subgraph, one vertex at a time."""
    sub = expansion_subgraph(g, root, layer)
    deg = [sum(row) for row in sub.adjacency.tolist()]
    total = sum(deg)
    if total == 0:
        return 0.0
    return -sum(d / total * math.log(d / total) for d in deg if d > 0)


def test_subgraph_entropy_examples():
    k2 = Graph([[0, 1], [1, 0]])
    assert subgraph_entropy(k2, 0, 1) == pytest.approx(math.log(2), abs=1e-15)
    iso = Graph.from_edges(3, [(1, 2)])
    assert subgraph_entropy(iso, 0, 4) == 0.0
    star = Graph.from_edges(4, [(0, 1), (0, 2), (0, 3)])
    ref = -(0.5 * math.log(0.5) + 3 * (1 / 6) * math.log(1 / 6))
    assert subgraph_entropy(star, 0, 1) == pytest.approx(ref, abs=1e-12)
    assert ref == pytest.approx(1.2425, abs=1e-4)


def test_path_representation():
    p3 = Graph.from_edges(3, [(0, 1), (1, 2)])
    r = db_representation(p3, 0, 2)
    # degrees (1, 2, 1) -> distribution (1/4, 1/2, 1/4)
    np.testing.assert_allclose(r, [math.log(2), 1.5 * math.log(2)], atol=1e-15)
    assert r[1] == pytest.approx(1.0397, abs=1e-4)


def test_single_vertex_and_bad_arguments():
    np.testing.assert_array_equal(db_representation(Graph(np.zeros((1, 1))), 0, 3), [0, 0, 0])
    with pytest.raises(ValueError):
        db_representation(Graph(np.zeros((1, 1))), 0, 0)
    with pytest.raises(ValueError):
        db_representation(Graph(np.zeros((1, 1))), 2, 1)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 12), st.floats(0.05, 0.8), st.integers(0, 2**31))
def test_matches_brute_force_entropy(n, p, seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n, p)
    root = int(rng.integers(0, n))
    r = db_representation(g, root, 6)
    for k in range(1, 7):
        assert r[k - 1] == pytest.approx(brute_entropy(g, root, k), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 12), st.integers(0, 2**31))
def test_prefix_property(n, seed):
    g = random_graph(np.random.default_rng(seed), n, 0.3)
    full = dataset_embeddings(GraphDataset((g,), 1), 7).values
    for k in (1, 3, 5):
        np.testing.assert_array_equal(dataset_embeddings(GraphDataset((g,), 1), k).values, full[:, :k])


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 14), st.integers(0, 2**31))
def test_permutation_equivariance_is_exact(n, seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n, 0.35)
    perm = rng.permutation(n)
    a = dataset_embeddings(GraphDataset((g,), 1), 6).values
    b = dataset_embeddings(GraphDataset((g.permuted(perm),), 1), 6).values
    np.testing.assert_array_equal(b, a[perm])


def test_nondecreasing_on_connected_graphs_empirically():
    rng = np.random.default_rng(11)
    dips = Counter()
    for _ in range(200):
        g = random_connected_graph(rng, int(rng.integers(3, 15)), 0.2)
        v = dataset_embeddings(GraphDataset((g,), 1), 8).values
        dips[bool(np.any(np.diff(v, axis=1) < -1e-12))] += 1
    # Not a theorem: counterexamples exist, but on sparse random graphs it holds almost always.
    assert dips[True] <= dips[False]


def test_values_finite_nonnegative():
    rng = np.random.default_rng(12)
    ds = GraphDataset(tuple(random_graph(rng, 9, 0.3) for _ in range(5)), 1)
    t = dataset_embeddings(ds, 5)
    assert np.all(np.isfinite(t.values)) and np.all(t.values >= 0)


def test_dataset_table_layout(tmp_path):
    k2 = Graph([[0, 1], [1, 0]])
    p3 = Graph.from_edges(3, [(0, 1), (1, 2)])
    t = dataset_embeddings(GraphDataset((k2, p3), 1), 1)
    assert len(t) == 5
    np.testing.assert_allclose(t.values[:2, 0], math.log(2))
    np.testing.assert_array_equal(t.graph_index, [0, 0, 1, 1, 1])
    np.testing.assert_array_equal(t.vertex_index, [0, 1, 0, 1, 2])
    np.testing.assert_array_equal(t.rows_for(1), t.values[2:])
    with pytest.raises(ValueError):
        dataset_embeddings(GraphDataset((k2,), 1), 0)

    out = tmp_path / "emb.tsv"
    write_embedding_table(t, out)
    first = out.read_text().splitlines()[0].split("\t")
    assert first[:2] == ["0", "0"] and first[2] == format(math.log(2), ".12g")


def test_default_max_layer():
    p5 = Graph.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4)])
    assert default_max_layer(GraphDataset((p5,), 1)) == 4
    long_path = Graph.from_edges(20, [(i, i + 1) for i in range(19)])
    assert default_max_layer(GraphDataset((long_path,), 1)) == 10
    assert default_max_layer(GraphDataset((Graph(np.zeros((3, 3))),), 1)) == 1
