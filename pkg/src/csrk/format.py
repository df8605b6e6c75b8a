"""CSR and CSR-k containers, construction, packing, and row permutations.

The base storage is the usual three-array CSR layout.  A CSR-k matrix adds
k-1 grouping pointer arrays on top of an already permuted CSR matrix: level 1
groups rows into super-rows (``sr_ptr``), level 2 groups super-rows into
super-super-rows (``ssr_ptr``, only when k = 3).  Dropping the grouping
arrays and the permutation always leaves a valid plain CSR matrix, so the
hierarchical form can be consumed by ordinary CSR code as-is.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "INDEX_DTYPE",
    "VALUE_DTYPE",
    "MAX_NNZ",
    "CsrMatrix",
    "CsrKMatrix",
    "Permutation",
    "build_csr",
    "csr_from_arrays",
    "pack_csrk",
    "permute_vector",
    "unpermute_vector",
]

INDEX_DTYPE = np.uint32
VALUE_DTYPE = np.float64

# Index arrays are 32-bit unsigned; the builders guard the entry count so
# that row_ptr never overflows.
MAX_NNZ = 2**31 - 1


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False, repr=False)
class CsrMatrix:
    """Compressed sparse row matrix with float64 values and uint32 indices.

    Parameters
    ----------
    n_rows, n_cols : int
        Matrix dimensions.
    row_ptr : array of length n_rows + 1
        Cumulative nonzero counts, ``row_ptr[0] == 0``.
    col_idx : array of length nnz
        0-based column indices, strictly increasing within each row.
    vals : array of length nnz
        Nonzero values aligned with ``col_idx``.

    Instances are immutable after construction and safe to share across
    threads.  Use :func:`build_csr` or :func:`csr_from_arrays` instead of
    constructing raw instances from unchecked data.
    """

    n_rows: int
    n_cols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    vals: np.ndarray

    def __post_init__(self) -> None:
        if self.n_rows < 0 or self.n_cols < 0:
            raise ValueError("matrix dimensions must be non-negative")
        row_ptr = np.array(self.row_ptr, dtype=INDEX_DTYPE, copy=True)
        col_idx = np.array(self.col_idx, dtype=INDEX_DTYPE, copy=True)
        vals = np.array(self.vals, dtype=VALUE_DTYPE, copy=True)
        if row_ptr.ndim != 1 or len(row_ptr) != self.n_rows + 1:
            raise ValueError("row_ptr must have length n_rows + 1")
        if row_ptr[0] != 0:
            raise ValueError("row_ptr[0] must be 0")
        if np.any(np.diff(row_ptr.astype(np.int64)) < 0):
            raise ValueError("row_ptr must be non-decreasing")
        nnz = int(row_ptr[-1])
        if nnz > MAX_NNZ:
            raise ValueError(f"nnz {nnz} exceeds the 32-bit index limit {MAX_NNZ}")
        if len(col_idx) != nnz or len(vals) != nnz:
            raise ValueError("col_idx and vals must have length row_ptr[-1]")
        if nnz and int(col_idx.max()) >= self.n_cols:
            raise ValueError("column index out of range")
        if nnz:
            starts = row_ptr[:-1].astype(np.int64)
            inner = np.ones(nnz, dtype=bool)
            inner[starts[starts < nnz]] = False
            if np.any(np.diff(col_idx.astype(np.int64))[inner[1:]] <= 0):
                raise ValueError("col_idx must be strictly increasing within each row")
        object.__setattr__(self, "row_ptr", _frozen(row_ptr))
        object.__setattr__(self, "col_idx", _frozen(col_idx))
        object.__setattr__(self, "vals", _frozen(vals))

    @property
    def nnz(self) -> int:
        return int(self.row_ptr[-1])

    def row_nnz(self) -> np.ndarray:
        """Number of stored entries per row, as int64."""
        ptr = self.row_ptr.astype(np.int64)
        return ptr[1:] - ptr[:-1]

    def __repr__(self) -> str:
        return (
            f"CsrMatrix(n_rows={self.n_rows}, n_cols={self.n_cols}, "
            f"nnz={self.nnz})"
        )


@dataclass(frozen=True, eq=False, repr=False)
class Permutation:
    """A bijection on row indices, stored in both directions.

    ``fwd[old] = new`` gives the permuted position of an original row and
    ``inv[new] = old`` recovers the original row at a permuted position.
    """

    fwd: np.ndarray
    inv: np.ndarray

    def __post_init__(self) -> None:
        fwd = np.array(self.fwd, dtype=np.int64, copy=True)
        inv = np.array(self.inv, dtype=np.int64, copy=True)
        n = len(fwd)
        if len(inv) != n:
            raise ValueError("fwd and inv must have equal length")
        if n and (fwd.min() < 0 or fwd.max() >= n):
            raise ValueError("permutation entries out of range")
        if np.any(fwd[inv] != np.arange(n)) or np.any(inv[fwd] != np.arange(n)):
            raise ValueError("fwd and inv are not mutually inverse bijections")
        object.__setattr__(self, "fwd", _frozen(fwd))
        object.__setattr__(self, "inv", _frozen(inv))

    @classmethod
    def from_forward(cls, fwd: Sequence[int]) -> "Permutation":
        """Build from the old-to-new mapping, validating bijectivity."""
        fwd = np.asarray(fwd, dtype=np.int64)
        n = len(fwd)
        inv = np.empty(n, dtype=np.int64)
        if n:
            if fwd.min() < 0 or fwd.max() >= n:
                raise ValueError("permutation entries out of range")
            inv[fwd] = np.arange(n)
        return cls(fwd, inv)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        idx = np.arange(n, dtype=np.int64)
        return cls(idx, idx.copy())

    def __len__(self) -> int:
        return len(self.fwd)

    def __repr__(self) -> str:
        return f"Permutation(n={len(self.fwd)})"


@dataclass(frozen=True, eq=False, repr=False)
class CsrKMatrix:
    """A permuted CSR matrix plus k-1 levels of row grouping.

    ``base`` holds P.A.Pt in plain CSR form.  ``group_ptrs[0]`` is the
    super-row pointer array (prefix sums of rows per super-row) and, when
    k = 3, ``group_ptrs[1]`` is the super-super-row pointer array (prefix
    sums of super-rows per super-super-row).  ``perm`` maps original row
    indices to their permuted positions.
    """

    base: CsrMatrix
    k: int
    group_ptrs: tuple
    perm: Permutation

    def __post_init__(self) -> None:
        if self.k not in (2, 3):
            raise ValueError("k must be 2 or 3")
        ptrs = tuple(
            _frozen(np.array(p, dtype=INDEX_DTYPE, copy=True))
            for p in self.group_ptrs
        )
        if len(ptrs) != self.k - 1:
            raise ValueError("expected k - 1 grouping pointer arrays")
        below = self.base.n_rows
        for level, ptr in enumerate(ptrs, start=1):
            if len(ptr) < 1 or ptr[0] != 0:
                raise ValueError(f"level {level} pointer array must start at 0")
            if np.any(np.diff(ptr.astype(np.int64)) <= 0):
                raise ValueError(f"level {level} pointer array must be strictly increasing")
            if int(ptr[-1]) != below:
                raise ValueError(
                    f"level {level} pointer array must end at {below}, got {int(ptr[-1])}"
                )
            below = len(ptr) - 1
        if len(self.perm) != self.base.n_rows:
            raise ValueError("permutation length must match n_rows")
        object.__setattr__(self, "group_ptrs", ptrs)

    @property
    def sr_ptr(self) -> np.ndarray:
        return self.group_ptrs[0]

    @property
    def ssr_ptr(self) -> np.ndarray:
        if self.k != 3:
            raise AttributeError("ssr_ptr exists only for k = 3")
        return self.group_ptrs[1]

    @property
    def num_super_rows(self) -> int:
        return len(self.group_ptrs[0]) - 1

    @property
    def num_ssr(self) -> int:
        return len(self.ssr_ptr) - 1

    def as_csr(self) -> CsrMatrix:
        """View the matrix as plain CSR.  Shares the base arrays, no copy."""
        return self.base

    def __repr__(self) -> str:
        return (
            f"CsrKMatrix(k={self.k}, n_rows={self.base.n_rows}, "
            f"nnz={self.base.nnz}, num_super_rows={self.num_super_rows})"
        )


def csr_from_arrays(
    n_rows: int,
    n_cols: int,
    rows: np.ndarray,
    cols: np.ndarray,
    vals: np.ndarray,
) -> CsrMatrix:
    """Build canonical CSR from parallel coordinate arrays.

    Entries may appear in any order; duplicate (row, col) coordinates are
    summed.  Raises ``ValueError`` naming the position of the first
    out-of-range entry.
    """
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=VALUE_DTYPE)
    if not (len(rows) == len(cols) == len(vals)):
        raise ValueError("coordinate arrays must have equal length")
    if len(rows) > MAX_NNZ:
        raise ValueError(f"entry count {len(rows)} exceeds the 32-bit index limit")
    bad = np.nonzero((rows < 0) | (rows >= n_rows))[0]
    if len(bad):
        p = int(bad[0])
        raise ValueError(
            f"triplet {p}: row index {int(rows[p])} out of range [0, {n_rows})"
        )
    bad = np.nonzero((cols < 0) | (cols >= n_cols))[0]
    if len(bad):
        p = int(bad[0])
        raise ValueError(
            f"triplet {p}: column index {int(cols[p])} out of range [0, {n_cols})"
        )
    order = np.lexsort((cols, rows))
    rows = rows[order]
    cols = cols[order]
    vals = vals[order]
    if len(rows):
        fresh = np.empty(len(rows), dtype=bool)
        fresh[0] = True
        fresh[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
        starts = np.nonzero(fresh)[0]
        urows = rows[starts]
        ucols = cols[starts]
        uvals = np.add.reduceat(vals, starts)
    else:
        urows = rows
        ucols = cols
        uvals = vals
    counts = np.bincount(urows, minlength=n_rows)
    row_ptr = np.zeros(n_rows + 1, dtype=np.int64)
    np.cumsum(counts, out=row_ptr[1:])
    return CsrMatrix(n_rows, n_cols, row_ptr, ucols, uvals)


def build_csr(
    n_rows: int,
    n_cols: int,
    triplets: Iterable[tuple],
) -> CsrMatrix:
    """Build a canonical CSR matrix from (row, col, value) triplets.

    Parameters
    ----------
    n_rows, n_cols : int
        Matrix dimensions.
    triplets : iterable of (int, int, float)
        Coordinate entries, any order.  Duplicates are summed.

    Returns
    -------
    CsrMatrix
        Canonical form: columns sorted and unique within each row.
    """
    data = list(triplets)
    if data:
        rows = np.fromiter((t[0] for t in data), dtype=np.int64, count=len(data))
        cols = np.fromiter((t[1] for t in data), dtype=np.int64, count=len(data))
        vals = np.fromiter((t[2] for t in data), dtype=VALUE_DTYPE, count=len(data))
    else:
        rows = np.empty(0, dtype=np.int64)
        cols = np.empty(0, dtype=np.int64)
        vals = np.empty(0, dtype=VALUE_DTYPE)
    return csr_from_arrays(n_rows, n_cols, rows, cols, vals)


def _permute_symmetric(a: CsrMatrix, perm: Permutation) -> CsrMatrix:
    """Apply P.A.Pt: row and column i of the result hold old row/col inv[i]."""
    n = a.n_rows
    fwd = perm.fwd
    inv = perm.inv
    ptr = a.row_ptr.astype(np.int64)
    lens = ptr[1:] - ptr[:-1]
    new_lens = lens[inv]
    new_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(new_lens, out=new_ptr[1:])
    nnz = a.nnz
    if nnz:
        src = (
            np.arange(nnz, dtype=np.int64)
            - np.repeat(new_ptr[:-1], new_lens)
            + np.repeat(ptr[inv], new_lens)
        )
        row_of = np.repeat(np.arange(n, dtype=np.int64), new_lens)
        new_cols = fwd[a.col_idx.astype(np.int64)[src]]
        new_vals = a.vals[src]
        order = np.lexsort((new_cols, row_of))
        new_cols = new_cols[order]
        new_vals = new_vals[order]
    else:
        new_cols = np.empty(0, dtype=np.int64)
        new_vals = np.empty(0, dtype=VALUE_DTYPE)
    return CsrMatrix(n, n, new_ptr, new_cols, new_vals)


def pack_csrk(
    a: CsrMatrix,
    perm: Permutation,
    groups: Sequence[Sequence[int]],
) -> CsrKMatrix:
    """Assemble a CSR-k matrix from a permutation and group sizes.

    Parameters
    ----------
    a : CsrMatrix
        Square input matrix in original row order.
    perm : Permutation
        Row ordering to apply symmetrically (P.A.Pt).
    groups : sequence of k-1 size sequences
        ``groups[0]`` lists rows per super-row in permuted order;
        ``groups[1]`` (optional) lists super-rows per super-super-row.

    Returns
    -------
    CsrKMatrix
        The permuted matrix with grouping pointer arrays built as prefix
        sums of the given sizes.
    """
    if a.n_rows != a.n_cols:
        raise ValueError("CSR-k packing requires a square matrix")
    if len(groups) not in (1, 2):
        raise ValueError("groups must hold 1 or 2 levels (k = 2 or 3)")
    if len(perm) != a.n_rows:
        raise ValueError("permutation length must match n_rows")
    k = len(groups) + 1
    ptrs = []
    below = a.n_rows
    for level, sizes in enumerate(groups, start=1):
        sizes = np.asarray(sizes, dtype=np.int64)
        if len(sizes) == 0 or np.any(sizes < 1):
            raise ValueError(f"level {level} group sizes must be positive")
        total = int(sizes.sum())
        if total != below:
            raise ValueError(
                f"level {level} group sizes sum to {total}, expected {below}"
            )
        ptr = np.zeros(len(sizes) + 1, dtype=np.int64)
        np.cumsum(sizes, out=ptr[1:])
        ptrs.append(ptr)
        below = len(sizes)
    base = _permute_symmetric(a, perm)
    return CsrKMatrix(base, k, tuple(ptrs), perm)


def permute_vector(p: Permutation, x: np.ndarray) -> np.ndarray:
    """Reorder a vector into the permuted index space: out[fwd[i]] = x[i]."""
    x = np.asarray(x, dtype=VALUE_DTYPE)
    if len(x) != len(p):
        raise ValueError(f"vector length {len(x)} does not match permutation {len(p)}")
    return x[p.inv]


def unpermute_vector(p: Permutation, y: np.ndarray) -> np.ndarray:
    """Undo :func:`permute_vector`: out[i] = y[fwd[i]]."""
    y = np.asarray(y, dtype=VALUE_DTYPE)
    if len(y) != len(p):
        raise ValueError(f"vector length {len(y)} does not match permutation {len(p)}")
    return y[p.fwd]
