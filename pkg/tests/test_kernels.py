import itertools
import math

import numpy as np
import pytest

from haqjsk.ctqw import density_matrix_infinite, qjsd
from haqjsk.graph import Graph, GraphDataset
from haqjsk.kernels import (
    AlignedStructures,
    ConfigMismatchError,
    KernelConfig,
    haqjsk_a,
    haqjsk_d,
    kernel_matrix,
    prepare,
    psd_diagnostics,
    qjsu,
    resolve_jobs,
    shift_diagonal,
)

from conftest import random_connected_graph, random_dataset, random_graph

K2 = Graph([[0, 1], [1, 0]])


def test_config_validation():
    assert KernelConfig("HAQJSK-A").variant == "haqjsk-a"
    for bad in ({"variant": "wl"}, {"levels": 0}, {"prototypes": 0}, {"max_layer": 0}, {"mu": 0.0}):
        with pytest.raises(ValueError):
            KernelConfig(**bad)
    assert KernelConfig().to_dict()["levels"] == 5


def test_config_resolves_max_layer():
    p4 = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3)])
    ds = GraphDataset((p4, K2), 1)
    assert KernelConfig().resolved(ds).max_layer == 3
    assert KernelConfig(max_layer=7).resolved(ds).max_layer == 7


def test_two_identical_graphs():
    ds = GraphDataset((K2, K2), 1)
    km = kernel_matrix(ds, KernelConfig("haqjsk-d", levels=5))
    np.testing.assert_array_equal(km.values, [[5, 5], [5, 5]])


def test_relabelled_k2_gives_h():
    g = Graph.from_edges(3, [(0, 1), (1, 2)])
    ds = GraphDataset((g, g.permuted([2, 0, 1])), 1)
    for v in ("haqjsk-a", "haqjsk-d"):
        np.testing.assert_allclose(kernel_matrix(ds, KernelConfig(v, levels=4, prototypes=8)).values, 4, atol=1e-12)
    ds = GraphDataset((K2, K2.permuted([1, 0])), 1)
    np.testing.assert_array_equal(kernel_matrix(ds, KernelConfig("haqjsk-d")).values, 5)


def test_orthogonal_pure_states_give_half():
    fp = {"levels": 1}
    # disjoint K2 blocks in prototype space: the walk densities are orthogonal pure states
    a_p = np.zeros((4, 4)); a_p[0, 1] = a_p[1, 0] = 1
    a_q = np.zeros((4, 4)); a_q[2, 3] = a_q[3, 2] = 1
    rho_p = np.zeros((4, 4)); rho_p[0, 0] = 1
    rho_q = np.zeros((4, 4)); rho_q[3, 3] = 1
    sp = AlignedStructures([a_p], [rho_p], fp)
    sq = AlignedStructures([a_q], [rho_q], fp)
    assert haqjsk_a(sp, sq) == pytest.approx(0.5, abs=1e-12)
    assert haqjsk_d(sp, sq) == pytest.approx(0.5, abs=1e-12)
    assert haqjsk_a(sp, sp) == 1.0 and haqjsk_d(sq, sq) == 1.0


def test_per_level_recomputation_oracle():
    rng = np.random.default_rng(0)
    ds = GraphDataset((random_connected_graph(rng, 8, 0.3), random_connected_graph(rng, 8, 0.3)), 1)
    prep = prepare(ds, KernelConfig(levels=2, prototypes=6))
    sp, sq = prep.structures
    # independent path: full-size matrices, no support restriction, no cached entropies
    ref_a = sum(math.exp(-qjsd(density_matrix_infinite(a), density_matrix_infinite(b)))
                for a, b in zip(sp.adjacency, sq.adjacency))
    ref_d = sum(math.exp(-qjsd(a, b)) for a, b in zip(sp.density, sq.density))
    assert haqjsk_a(sp, sq) == pytest.approx(ref_a, abs=1e-9)
    assert haqjsk_d(sp, sq) == pytest.approx(ref_d, abs=1e-9)
    assert haqjsk_d(sp, sq) == haqjsk_d(sq, sp)
    assert haqjsk_a(sp, sq) == haqjsk_a(sq, sp)


def test_mismatched_structures_are_rejected():
    rng = np.random.default_rng(1)
    ds = random_dataset(rng, 3)
    a = prepare(ds, KernelConfig(levels=2, prototypes=8)).structures[0]
    b = prepare(ds, KernelConfig(levels=3, prototypes=8)).structures[0]
    with pytest.raises(ConfigMismatchError, match="levels: 2 != 3"):
        haqjsk_d(a, b)
    c = prepare(ds, KernelConfig(levels=2, prototypes=8)).structures[0]
    with pytest.raises(ConfigMismatchError, match="alignment"):
        haqjsk_a(a, c)


def test_batch_equals_pairwise_calls():
    ds = random_dataset(np.random.default_rng(2), 10)
    for variant, fn in (("haqjsk-a", haqjsk_a), ("haqjsk-d", haqjsk_d)):
        cfg = KernelConfig(variant, levels=3, prototypes=16)
        prep = prepare(ds, cfg)
        km = kernel_matrix(ds, cfg, prepared=prep)
        ref = np.array([[fn(p, q) for q in prep.structures] for p in prep.structures])
        np.testing.assert_allclose(km.values, ref, atol=1e-12)


def test_matrix_invariants_and_determinism():
    ds = random_dataset(np.random.default_rng(3), 12, sizes=(3, 10), connected=False)
    for variant in ("haqjsk-a", "haqjsk-d"):
        cfg = KernelConfig(variant, levels=4, prototypes=32)
        a = kernel_matrix(ds, cfg, jobs=1).values
        b = kernel_matrix(ds, cfg, jobs=3).values
        np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(a, a.T)
        assert np.all(np.abs(np.diag(a) - 4) <= 1e-9)
        assert a.min() >= 2 - 1e-12 and a.max() <= 4 + 1e-12


def test_kernel_matrix_records_labels_and_timings():
    ds = random_dataset(np.random.default_rng(4), 4)
    timings = {}
    km = kernel_matrix(ds, KernelConfig(levels=2, prototypes=4), timings=timings)
    assert km.labels == [0, 1, 0, 1]
    assert km.config.max_layer is not None
    assert set(timings) == {"embeddings", "prototypes", "densities", "correspondences", "pairwise"}


def test_kernel_matrix_needs_two_graphs():
    with pytest.raises(ValueError, match="at least 2"):
        kernel_matrix(GraphDataset((K2,), 1), KernelConfig())


def test_qjsu_examples():
    rng = np.random.default_rng(5)
    g, h = random_graph(rng, 6, 0.5), random_graph(rng, 4, 0.6)
    assert qjsu(g, g, 1.0) == 1.0
    assert 0 < qjsu(g, h) <= 1
    assert qjsu(g, h, 1e-12) == pytest.approx(1.0, abs=1e-11)
    assert qjsu(g, h, 2.0) < qjsu(g, h, 1.0)
    with pytest.raises(ValueError):
        qjsu(g, h, 0.0)


def test_qjsu_is_not_permutation_invariant():
    path = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3)])
    paw = Graph.from_edges(4, [(0, 1), (1, 2), (2, 0), (2, 3)])
    base = qjsu(path, paw)
    changed = [p for p in itertools.permutations(range(4)) if abs(qjsu(path, paw.permuted(p)) - base) > 1e-6]
    assert changed


def test_qjsu_matrix():
    ds = random_dataset(np.random.default_rng(6), 6)
    km = kernel_matrix(ds, KernelConfig("qjsu", mu=0.5))
    np.testing.assert_array_equal(np.diag(km.values), 1.0)
    assert np.all(km.values > 0) and np.all(km.values <= 1)
    assert km.values[0, 1] == pytest.approx(qjsu(ds[0], ds[1], 0.5), abs=1e-14)


def test_psd_diagnostics_examples():
    r = psd_diagnostics(np.eye(3))
    assert r.min_eigenvalue == pytest.approx(1.0) and r.suggested_shift == 0.0 and r.is_psd
    r = psd_diagnostics(np.array([[1, 0.999], [0.999, 1]]))
    assert r.min_eigenvalue == pytest.approx(0.001, abs=1e-12) and r.suggested_shift == 0.0
    r = psd_diagnostics(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert r.suggested_shift == pytest.approx(1.0 + 1e-10, abs=1e-14)


def test_shift_diagonal_records_shift():
    ds = random_dataset(np.random.default_rng(7), 3)
    km = kernel_matrix(ds, KernelConfig(levels=2, prototypes=4))
    before = km.values.copy()
    shifted = shift_diagonal(km, 0.25)
    np.testing.assert_array_equal(km.values, before)
    np.testing.assert_array_equal(shifted.values, before + 0.25 * np.eye(3))
    assert shifted.meta["diagonal_shift"] == 0.25


def test_resolve_jobs(monkeypatch):
    monkeypatch.setenv("HAQJSK_JOBS", "3")
    assert resolve_jobs() == 3
    assert resolve_jobs(2) == 2
    monkeypatch.delenv("HAQJSK_JOBS")
    assert resolve_jobs() >= 1


def test_prepared_dataset_serves_both_variants():
    ds = random_dataset(np.random.default_rng(21), 6)
    prep = prepare(ds, KernelConfig("haqjsk-d", levels=2, prototypes=8))
    a = kernel_matrix(ds, KernelConfig("haqjsk-a", levels=2, prototypes=8), prepared=prep)
    assert a.config.variant == "haqjsk-a"
    np.testing.assert_array_equal(a.values, kernel_matrix(ds, KernelConfig("haqjsk-a", levels=2, prototypes=8)).values)
    with pytest.raises(ConfigMismatchError, match="prototypes"):
        kernel_matrix(ds, KernelConfig("haqjsk-a", levels=2, prototypes=16), prepared=prep)
