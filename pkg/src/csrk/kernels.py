"""SpMV kernels over CSR and CSR-k storage.

Every kernel computes each output element as the strict left-to-right sum
of that row's products, so all variants produce bitwise-identical results
for a given row regardless of grouping or worker count.  The sequential
CSR kernel is the reference the others are verified against.

The two GPU-mapping emulators reproduce a CUDA-style grid/block index
assignment deterministically on the CPU.  Their job is index-mapping
fidelity, recorded in an :class:`EmulationTrace`, not speed.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .format import VALUE_DTYPE, CsrKMatrix, CsrMatrix

__all__ = [
    "MAX_BLOCK_THREADS",
    "BlockDims",
    "EmulationTrace",
    "spmv_csr_ref",
    "spmv_csr2",
    "spmv_csr3",
    "emulate_gpu_spmv3",
    "emulate_gpu_spmv35",
]

MAX_BLOCK_THREADS = 1024


@dataclass(frozen=True)
class BlockDims:
    """CUDA-style block dimensions; z defaults to 1 when absent."""

    x: int
    y: int
    z: int = 1

    def __post_init__(self) -> None:
        for name in ("x", "y", "z"):
            if getattr(self, name) < 1:
                raise ValueError(f"block dimension {name} must be at least 1")
        if self.x * self.y * self.z > MAX_BLOCK_THREADS:
            raise ValueError(
                f"block holds {self.x * self.y * self.z} threads, "
                f"limit is {MAX_BLOCK_THREADS}"
            )


@dataclass(eq=False)
class EmulationTrace:
    """Lane assignment evidence from a GPU-mapping emulation.

    One record per processed row, stored column-wise: the block id, the z
    and y lane that owned the row, the first x lane and the count of x
    lanes its products were strided over, and the depth of the reduction
    tree that combined the partial sums (0 for a serial inner product).
    """

    row: np.ndarray
    block: np.ndarray
    z_lane: np.ndarray
    y_lane: np.ndarray
    x_first: np.ndarray
    x_count: np.ndarray
    reduction_depth: np.ndarray

    @classmethod
    def from_records(cls, records: list) -> "EmulationTrace":
        cols = (
            np.array([r[i] for r in records], dtype=np.int64)
            for i in range(7)
        )
        return cls(*cols)

    def __len__(self) -> int:
        return len(self.row)

    def validate_partition(self, n_rows: int) -> None:
        """Check every row is assigned exactly once; raise otherwise."""
        if not np.array_equal(np.sort(self.row), np.arange(n_rows)):
            raise ValueError("trace does not assign every row exactly once")


def _check_x(a: CsrMatrix, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=VALUE_DTYPE)
    if x.ndim != 1 or len(x) != a.n_cols:
        raise ValueError(f"x must have length {a.n_cols}, got {x.shape}")
    return x


def spmv_csr_ref(a: CsrMatrix, x: np.ndarray) -> np.ndarray:
    """Sequential reference SpMV: per row, products summed left to right.

    This is the correctness oracle for every other kernel; it is kept
    deliberately simple and deterministic.
    """
    x = _check_x(a, x)
    ptr = a.row_ptr.tolist()
    cols = a.col_idx.tolist()
    vals = a.vals.tolist()
    xs = x.tolist()
    out = [0.0] * a.n_rows
    for i in range(a.n_rows):
        acc = 0.0
        for p in range(ptr[i], ptr[i + 1]):
            acc += vals[p] * xs[cols[p]]
        out[i] = acc
    return np.asarray(out, dtype=VALUE_DTYPE)


def _rows_spmv(ptr: np.ndarray, cols: np.ndarray, vals: np.ndarray,
               x: np.ndarray, row_lo: int, row_hi: int, y: np.ndarray) -> None:
    """Fill y[row_lo:row_hi] with exact left-to-right row sums.

    Rows of equal length are batched and accumulated one column step at a
    time, which preserves the per-row summation order of the reference
    kernel bit for bit while staying vectorized.
    """
    if row_hi <= row_lo:
        return
    lo = int(ptr[row_lo])
    hi = int(ptr[row_hi])
    prods = vals[lo:hi] * x[cols[lo:hi]]
    starts = ptr[row_lo:row_hi] - lo
    lens = ptr[row_lo + 1:row_hi + 1] - ptr[row_lo:row_hi]
    order = np.argsort(lens, kind="stable")
    sorted_lens = lens[order]
    bounds = np.searchsorted(sorted_lens, np.unique(sorted_lens), side="left")
    bounds = np.append(bounds, len(sorted_lens))
    for b in range(len(bounds) - 1):
        group = order[bounds[b]:bounds[b + 1]]
        length = int(lens[group[0]])
        rows_out = group + row_lo
        if length == 0:
            y[rows_out] = 0.0
            continue
        gathered = prods[starts[group][:, None] + np.arange(length)]
        acc = np.zeros(len(group), dtype=VALUE_DTYPE)
        for j in range(length):
            acc += gathered[:, j]
        y[rows_out] = acc


def _static_chunks(count: int, parts: int) -> list:
    """Contiguous near-even split of range(count) into at most ``parts``."""
    parts = max(1, min(parts, count)) if count else 1
    bounds = np.linspace(0, count, parts + 1, dtype=np.int64)
    return [(int(bounds[i]), int(bounds[i + 1]))
            for i in range(parts) if bounds[i + 1] > bounds[i]]


def _grouped_spmv(m: CsrKMatrix, x: np.ndarray, group_ptr: np.ndarray,
                  workers: int, executor) -> np.ndarray:
    a = m.base
    x = _check_x(a, x)
    y = np.zeros(a.n_rows, dtype=VALUE_DTYPE)
    ptr = a.row_ptr.astype(np.int64)
    cols = a.col_idx.astype(np.int64)
    vals = a.vals
    gp = group_ptr.astype(np.int64)
    n_groups = len(gp) - 1
    chunks = _static_chunks(n_groups, workers)

    def work(chunk):
        g0, g1 = chunk
        _rows_spmv(ptr, cols, vals, x, int(gp[g0]), int(gp[g1]), y)

    if len(chunks) <= 1 or (workers <= 1 and executor is None):
        for chunk in chunks:
            work(chunk)
    elif executor is not None:
        list(executor.map(work, chunks))
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            list(pool.map(work, chunks))
    return y


def spmv_csr2(m: CsrKMatrix, x: np.ndarray, workers: int = 1,
              executor=None) -> np.ndarray:
    """SpMV over a k = 2 matrix, parallel across super-rows.

    Parameters
    ----------
    m : CsrKMatrix
        Packed matrix with k = 2; ``x`` must already be permuted to match.
    x : array
        Dense input vector of length n_cols.
    workers : int
        Number of static contiguous partitions of the super-row range.
        Each super-row is computed entirely by one worker.
    executor : concurrent.futures.Executor, optional
        Caller-provided pool; a transient thread pool is created when
        ``workers > 1`` and no executor is given.

    The result is bitwise independent of ``workers``.
    """
    if m.k != 2:
        raise ValueError(f"spmv_csr2 requires k = 2, got k = {m.k}")
    return _grouped_spmv(m, x, m.sr_ptr, workers, executor)


def spmv_csr3(m: CsrKMatrix, x: np.ndarray, workers: int = 1,
              executor=None) -> np.ndarray:
    """SpMV over a k = 3 matrix, parallel across super-super-rows.

    The outermost loop over super-super-rows is statically partitioned;
    all inner loops stay sequential within a worker, and each row's
    accumulator is written exactly once.
    """
    if m.k != 3:
        raise ValueError(f"spmv_csr3 requires k = 3, got k = {m.k}")
    a = m.base
    row_ptr_of_ssr = m.sr_ptr.astype(np.int64)[m.ssr_ptr.astype(np.int64)]
    return _grouped_spmv(m, x, row_ptr_of_ssr, workers, executor)


def _serial_row_sum(vals, cols, xs, lo, hi):
    acc = 0.0
    for p in range(lo, hi):
        acc += vals[p] * xs[cols[p]]
    return acc


def emulate_gpu_spmv3(m: CsrKMatrix, x: np.ndarray, dims: BlockDims) -> tuple:
    """Deterministic emulation of the 2D-block GPU mapping.

    Block b owns super-super-row b.  Within a block, y lanes stride the
    super-rows and x lanes stride the rows of a super-row; each row's
    inner product is computed serially.  Returns ``(y, trace)``.
    """
    if m.k != 3:
        raise ValueError("emulate_gpu_spmv3 requires k = 3")
    if dims.z != 1:
        raise ValueError("the 2D mapping does not use the z dimension")
    a = m.base
    x = _check_x(a, x)
    out = [0.0] * a.n_rows
    ptr = a.row_ptr.tolist()
    cols = a.col_idx.tolist()
    vals = a.vals.tolist()
    xs = x.tolist()
    sr_ptr = m.sr_ptr.tolist()
    ssr_ptr = m.ssr_ptr.tolist()
    records = []
    for block in range(m.num_ssr):
        ssr_lo = ssr_ptr[block]
        ssr_hi = ssr_ptr[block + 1]
        for sr_off, sr in enumerate(range(ssr_lo, ssr_hi)):
            y_lane = sr_off % dims.y
            for row_off, row in enumerate(range(sr_ptr[sr], sr_ptr[sr + 1])):
                x_lane = row_off % dims.x
                out[row] = _serial_row_sum(vals, cols, xs, ptr[row], ptr[row + 1])
                records.append((row, block, 0, y_lane, x_lane, 1, 0))
    return np.asarray(out, dtype=VALUE_DTYPE), EmulationTrace.from_records(records)


def _tree_depth(n: int) -> int:
    return (n - 1).bit_length()


def _tree_reduce(temp: list) -> float:
    """Fixed halving-stride pairwise reduction (zero-padded to a power of
    two), mirroring a block-level tree reduction."""
    n = len(temp)
    if n == 1:
        return temp[0]
    size = 1 << _tree_depth(n)
    buf = temp + [0.0] * (size - n)
    stride = size // 2
    while stride:
        for i in range(stride):
            buf[i] += buf[i + stride]
        stride //= 2
    return buf[0]


def emulate_gpu_spmv35(m: CsrKMatrix, x: np.ndarray, dims: BlockDims) -> tuple:
    """Deterministic emulation of the 3D-block GPU mapping.

    Block b owns super-super-row b; z lanes stride super-rows, y lanes
    stride rows, and the nonzeros of one row are strided across the x
    lanes into a temp array of length ``dims.x`` that a fixed pairwise
    tree reduces into the output element.  With ``dims.x == 1`` this
    degenerates to the serial inner product of the 2D mapping and the
    results match it bitwise.  Returns ``(y, trace)``.
    """
    if m.k != 3:
        raise ValueError("emulate_gpu_spmv35 requires k = 3")
    a = m.base
    x = _check_x(a, x)
    out = [0.0] * a.n_rows
    ptr = a.row_ptr.tolist()
    cols = a.col_idx.tolist()
    vals = a.vals.tolist()
    xs = x.tolist()
    sr_ptr = m.sr_ptr.tolist()
    ssr_ptr = m.ssr_ptr.tolist()
    nx = dims.x
    depth = _tree_depth(nx)
    records = []
    for block in range(m.num_ssr):
        ssr_lo = ssr_ptr[block]
        ssr_hi = ssr_ptr[block + 1]
        for sr_off, sr in enumerate(range(ssr_lo, ssr_hi)):
            z_lane = sr_off % dims.z
            for row_off, row in enumerate(range(sr_ptr[sr], sr_ptr[sr + 1])):
                y_lane = row_off % dims.y
                temp = [0.0] * nx
                lane = 0
                for p in range(ptr[row], ptr[row + 1]):
                    temp[lane] += vals[p] * xs[cols[p]]
                    lane += 1
                    if lane == nx:
                        lane = 0
                out[row] = _tree_reduce(temp)
                records.append((row, block, z_lane, y_lane, 0, nx, depth))
    return np.asarray(out, dtype=VALUE_DTYPE), EmulationTrace.from_records(records)
