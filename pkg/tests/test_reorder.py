from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csrk import (
    band_k,
    build_csr,
    build_graph,
    coarsen,
    csr_from_arrays,
    heavy_edge_matching,
    pack_csrk,
    permute_vector,
    spmv_csr2,
    spmv_csr_ref,
    unpermute_vector,
    weighted_bandwidth_order,
)

from conftest import random_csr, tridiagonal
from oracles import matrix_bandwidth, max_rel_error, permuted_bandwidth


def graph_from_edges(n, edges):
    """Build a graph through the library by packing edges into a matrix."""
    rows = [u for u, v in edges] + [v for u, v in edges]
    cols = [v for u, v in edges] + [u for u, v in edges]
    vals = np.ones(len(rows))
    return build_graph(csr_from_arrays(n, n, np.array(rows), np.array(cols), vals))


def adjacency_sets(g):
    return [set(g.adj_idx[g.adj_ptr[i]:g.adj_ptr[i + 1]].tolist())
            for i in range(g.n_nodes)]


def test_build_graph_identity_is_isolated():
    a = build_csr(4, 4, [(i, i, 1.0) for i in range(4)])
    g = build_graph(a)
    assert g.n_nodes == 4
    assert g.adj_ptr.tolist() == [0, 0, 0, 0, 0]
    assert g.node_weight.tolist() == [1, 1, 1, 1]


def test_build_graph_symmetrizes_lower_triangle():
    a = build_csr(3, 3, [(1, 0, 1.0), (2, 1, 1.0)])
    g = build_graph(a)
    assert adjacency_sets(g) == [{1}, {0, 2}, {1}]


def test_build_graph_matches_dense_pattern_oracle():
    rng = np.random.default_rng(2)
    a = random_csr(rng, 10, 10, 0.2)
    g = build_graph(a)
    dense = np.zeros((10, 10), dtype=bool)
    counts = np.diff(a.row_ptr.astype(np.int64))
    rows = np.repeat(np.arange(10), counts)
    dense[rows, a.col_idx] = True
    want = dense | dense.T
    np.fill_diagonal(want, False)
    got = adjacency_sets(g)
    for i in range(10):
        assert got[i] == set(np.flatnonzero(want[i]).tolist())


def test_build_graph_rejects_rectangular():
    a = build_csr(2, 3, [(0, 0, 1.0)])
    with pytest.raises(ValueError):
        build_graph(a)


def test_matching_on_star_center_pairs_once():
    g = graph_from_edges(6, [(0, i) for i in range(1, 6)])
    match = heavy_edge_matching(g)
    partner = match[0]
    assert partner != 0
    assert match[partner] == 0
    singles = [v for v in range(1, 6) if v != partner]
    assert all(match[v] == v for v in singles)


def test_coarsen_path_to_pairs():
    g = graph_from_edges(4, [(0, 1), (1, 2), (2, 3)])
    coarse, cmap = coarsen(g, 2)
    assert coarse.n_nodes == 2
    assert coarse.node_weight.tolist() == [2, 2]
    members = [sorted(m.tolist()) for m in cmap.coarse_members]
    assert members == [[0, 1], [2, 3]]


def test_coarsen_target_one_is_identity():
    g = graph_from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4)])
    coarse, cmap = coarsen(g, 1)
    assert coarse.n_nodes == 5
    np.testing.assert_array_equal(cmap.fine_to_coarse, np.arange(5))
    assert adjacency_sets(coarse) == adjacency_sets(g)


def test_coarsen_sums_collapsed_edge_weights():
    g = graph_from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
    coarse, _ = coarsen(g, 2)
    assert coarse.n_nodes == 2
    assert coarse.edge_weight.tolist() == [2, 2]


def test_coarsen_isolated_nodes_pass_through():
    a = build_csr(3, 3, [(i, i, 1.0) for i in range(3)])
    coarse, cmap = coarsen(build_graph(a), 2)
    assert coarse.n_nodes == 3
    assert [m.tolist() for m in cmap.coarse_members] == [[0], [1], [2]]


def test_order_makes_scrambled_path_contiguous():
    edges = [(0, 2), (2, 1)]
    g = graph_from_edges(3, edges)
    p = weighted_bandwidth_order(g)
    bw = max(abs(int(p.fwd[u]) - int(p.fwd[v])) for u, v in edges)
    assert bw == 1
    best = min(
        max(abs(f[u] - f[v]) for u, v in edges)
        for f in itertools.permutations(range(3)))
    assert bw == best


def test_order_does_not_worsen_tridiagonal():
    a = tridiagonal(12)
    p = weighted_bandwidth_order(build_graph(a))
    assert permuted_bandwidth(a, p.fwd) <= matrix_bandwidth(a)


def test_order_restores_permuted_grid_band():
    from oracles import five_point_laplacian_triplets
    rows, cols, vals = five_point_laplacian_triplets(8)
    rng = np.random.default_rng(0)
    scramble = rng.permutation(64)
    a = csr_from_arrays(64, 64, scramble[rows], scramble[cols], vals)
    before = matrix_bandwidth(a)
    p = weighted_bandwidth_order(build_graph(a))
    after = permuted_bandwidth(a, p.fwd)
    assert after <= before / 2


def test_band_k_identity_matrix():
    a = build_csr(6, 6, [(i, i, 2.0) for i in range(6)])
    res = band_k(a, 2, [2])
    assert sorted(res.perm.fwd.tolist()) == list(range(6))
    assert sum(res.level_group_sizes[0]) == 6
    assert all(s >= 1 for s in res.level_group_sizes[0])
    packed = pack_csrk(a, res.perm, res.level_group_sizes)
    x = np.arange(6, dtype=float)
    y = unpermute_vector(res.perm, spmv_csr2(packed, permute_vector(res.perm, x)))
    np.testing.assert_array_equal(y, 2.0 * x)


def test_band_k_tridiagonal_pairs_and_bandwidth():
    a = tridiagonal(8)
    res = band_k(a, 2, [2])
    sizes = res.level_group_sizes[0]
    assert sizes == [2, 2, 2, 2]
    assert permuted_bandwidth(a, res.perm.fwd) == 1
    inv = res.perm.inv
    for s in range(4):
        pair = sorted(int(inv[r]) for r in range(2 * s, 2 * s + 2))
        assert pair[1] == pair[0] + 1


def test_band_k_three_levels_near_rcm_bandwidth():
    scipy_sparse = pytest.importorskip("scipy.sparse")
    from scipy.sparse.csgraph import reverse_cuthill_mckee

    rng = np.random.default_rng(9)
    n = 40
    rows, cols = [], []
    for i in range(n):
        for j in range(max(0, i - 3), min(n, i + 4)):
            if i == j or abs(i - j) == 1 or rng.random() < 0.4:
                rows.append(i)
                cols.append(j)
    pairs = sorted(set(zip(rows, cols)) | set(zip(cols, rows)))
    rows = np.array([p[0] for p in pairs])
    cols = np.array([p[1] for p in pairs])
    a = csr_from_arrays(n, n, rows, cols, np.ones(len(rows)))

    res = band_k(a, 3, [2, 2])
    band_bw = permuted_bandwidth(a, res.perm.fwd)

    sp = scipy_sparse.csr_matrix(
        (a.vals, a.col_idx.astype(np.int64), a.row_ptr.astype(np.int64)),
        shape=(n, n))
    rcm_inv = reverse_cuthill_mckee(sp, symmetric_mode=True)
    rcm_fwd = np.empty(n, dtype=np.int64)
    rcm_fwd[rcm_inv] = np.arange(n)
    rcm_bw = permuted_bandwidth(a, rcm_fwd)
    assert band_bw <= 1.5 * rcm_bw


def test_band_k_group_contiguity(fig1_matrix):
    res = band_k(fig1_matrix, 3, [2, 2])
    level1, level2 = res.level_group_sizes
    assert sum(level1) == 9
    assert sum(level2) == len(level1)
    packed = pack_csrk(fig1_matrix, res.perm, res.level_group_sizes)
    assert packed.sr_ptr[-1] == 9
    assert packed.ssr_ptr[-1] == len(level1)


def test_band_k_rejects_bad_arguments(fig1_matrix):
    with pytest.raises(ValueError):
        band_k(fig1_matrix, 4, [2, 2, 2])
    with pytest.raises(ValueError):
        band_k(fig1_matrix, 3, [2])
    with pytest.raises(ValueError):
        band_k(build_csr(0, 0, []), 2, [2])


def test_band_k_deterministic_on_disconnected_input():
    edges3 = [(0, 1), (1, 2)]
    edges5 = [(3, 4), (4, 5), (5, 6), (6, 7)]
    rows = [u for u, v in edges3 + edges5] + [v for u, v in edges3 + edges5]
    cols = [v for u, v in edges3 + edges5] + [u for u, v in edges3 + edges5]
    rows += list(range(8))
    cols += list(range(8))
    a = csr_from_arrays(8, 8, np.array(rows), np.array(cols),
                        np.ones(len(rows)))
    r1 = band_k(a, 2, [2])
    r2 = band_k(a, 2, [2])
    np.testing.assert_array_equal(r1.perm.fwd, r2.perm.fwd)
    assert r1.level_group_sizes == r2.level_group_sizes
    comp = np.array([0, 0, 0, 1, 1, 1, 1, 1])
    placed = comp[r1.perm.inv]
    changes = np.count_nonzero(np.diff(placed))
    assert changes == 1


@settings(max_examples=40)
@given(st.integers(0, 2 ** 31), st.sampled_from([2, 3]))
def test_band_k_valid_on_random_inputs(seed, k):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 40))
    a = random_csr(rng, n, n, float(rng.uniform(0.02, 0.3)))
    targets = [2] if k == 2 else [2, 2]
    res = band_k(a, k, targets)
    assert sorted(res.perm.fwd.tolist()) == list(range(n))
    assert sum(res.level_group_sizes[0]) == n
    if k == 3:
        assert sum(res.level_group_sizes[1]) == len(res.level_group_sizes[0])
    packed = pack_csrk(a, res.perm, res.level_group_sizes)
    x = rng.uniform(0.5, 1.5, n)
    if k == 2:
        y = spmv_csr2(packed, permute_vector(res.perm, x))
        y = unpermute_vector(res.perm, y)
        assert max_rel_error(y, spmv_csr_ref(a, x)) < 1e-12
