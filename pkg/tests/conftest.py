from __future__ import annotations

import numpy as np
import pytest

from csrk import CsrMatrix, Permutation, csr_from_arrays, pack_csrk

try:
    from hypothesis import HealthCheck, settings

    settings.register_profile(
        "suite", deadline=None,
        suppress_health_check=[HealthCheck.too_slow])
    settings.load_profile("suite")
except ImportError:
    pass


def tridiagonal(n: int, seed: int = 0) -> CsrMatrix:
    """n x n tridiagonal matrix with positive random values."""
    rng = np.random.default_rng(seed)
    rows, cols = [], []
    for i in range(n):
        for j in (i - 1, i, i + 1):
            if 0 <= j < n:
                rows.append(i)
                cols.append(j)
    vals = rng.uniform(0.5, 1.5, len(rows))
    return csr_from_arrays(n, n, np.array(rows), np.array(cols), vals)


def random_csr(rng, n_rows, n_cols, density, value_low=0.5,
               value_high=1.5) -> CsrMatrix:
    """Random matrix with unique positions and positive values."""
    want = min(max(0, int(round(density * n_rows * n_cols))),
               n_rows * n_cols)
    flat = rng.choice(n_rows * n_cols, size=want, replace=False)
    return csr_from_arrays(
        n_rows, n_cols,
        (flat // n_cols).astype(np.int64),
        (flat % n_cols).astype(np.int64),
        rng.uniform(value_low, value_high, size=want),
    )


def assert_valid_csr(a: CsrMatrix) -> None:
    """Re-check the storage invariants from primitive reads."""
    assert a.row_ptr[0] == 0
    assert a.row_ptr[-1] == a.nnz
    assert np.all(np.diff(a.row_ptr.astype(np.int64)) >= 0)
    if a.nnz:
        assert a.col_idx.min() >= 0
        assert a.col_idx.max() < a.n_cols
    for i in range(a.n_rows):
        seg = a.col_idx[a.row_ptr[i]:a.row_ptr[i + 1]].astype(np.int64)
        assert np.all(np.diff(seg) > 0), f"row {i} columns not increasing"


@pytest.fixture
def fig1_matrix() -> CsrMatrix:
    """9-row tridiagonal example: 25 nonzeros, rdensity 25/9."""
    return tridiagonal(9, seed=42)


@pytest.fixture
def fig1_packed(fig1_matrix):
    """The 9-row example packed as k = 3 with the documented grouping."""
    return pack_csrk(fig1_matrix, Permutation.identity(9),
                     [[2, 3, 2, 2], [2, 2]])
