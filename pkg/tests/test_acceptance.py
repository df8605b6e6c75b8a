"""Acceptance checks: one test per release criterion.

Each test prints a single "[acceptance] criterion N: ..." line so a
plain run reads as a checklist.  Criteria with a stated time budget
assert it.  Criterion 10 measures a speedup on this machine and is
advisory: it always reports, but only fails when CSRK_PERF_ASSERT=1
is set in the environment.
"""

from __future__ import annotations

import math
import os
import time

import numpy as np
import pytest

from csrk import (
    AMPERE,
    VOLTA,
    BlockDims,
    MatrixClass,
    MatrixStats,
    Permutation,
    adjust_sizes,
    band_k,
    base_sizes,
    classify,
    compute_stats,
    cpu_candidate_srs,
    cpu_fallback_srs,
    csr_from_arrays,
    emulate_gpu_spmv3,
    emulate_gpu_spmv35,
    fit_log_model,
    gpu_candidate_grid,
    pack_csrk,
    permute_vector,
    run_benchmark,
    select_case,
    spmv_csr2,
    spmv_csr3,
    spmv_csr_ref,
    time_kernel,
    unpermute_vector,
)
from csrk.cli import build_parser

from conftest import random_csr, tridiagonal
from oracles import csr_to_dense, dense_spmv, matrix_bandwidth, max_rel_error, permuted_bandwidth


def report(criterion: int, ok: bool, detail: str = "") -> None:
    """Print the checklist line, then fail the test if the check failed."""
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    line = f"[acceptance] criterion {criterion}: {status}{suffix}"
    print(line)
    assert ok, line


def coo_of(a):
    counts = np.diff(a.row_ptr.astype(np.int64))
    return np.repeat(np.arange(a.n_rows, dtype=np.int64), counts), a.col_idx.astype(np.int64)


# --- criterion 1: golden packing -----------------------------------------


def test_criterion_01_golden_packing():
    t0 = time.perf_counter()
    a = tridiagonal(9, seed=42)
    packed = pack_csrk(a, Permutation.identity(9), [[2, 3, 2, 2], [2, 2]])
    ok = (packed.sr_ptr.dtype == np.uint32
          and packed.ssr_ptr.dtype == np.uint32
          and np.array_equal(packed.sr_ptr, np.array([0, 2, 5, 7, 9], dtype=np.uint32))
          and np.array_equal(packed.ssr_ptr, np.array([0, 2, 4], dtype=np.uint32)))
    elapsed = time.perf_counter() - t0
    report(1, ok and elapsed < 1.0, f"{elapsed:.3f}s")


# --- criterion 2: oracle equivalence sweep --------------------------------


def _sweep_matrix(seed: int):
    """One matrix per seed, cycling through four structural shapes."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 301))
    density = float(rng.uniform(0.005, 0.1))
    kind = seed % 4
    if kind == 0:
        return random_csr(rng, n, n, density), rng
    if kind == 1:
        n1 = int(rng.integers(1, n))
        b1 = random_csr(rng, n1, n1, density)
        b2 = random_csr(rng, n - n1, n - n1, density)
        r1, c1 = coo_of(b1)
        r2, c2 = coo_of(b2)
        rows = np.concatenate([r1, r2 + n1])
        cols = np.concatenate([c1, c2 + n1])
        vals = rng.uniform(0.5, 1.5, len(rows))
        return csr_from_arrays(n, n, rows, cols, vals), rng
    if kind == 2:
        a0 = random_csr(rng, n, n, density)
        rows, cols = coo_of(a0)
        holes = rng.choice(n, size=max(1, n // 10), replace=False)
        keep = ~np.isin(rows, holes)
        vals = rng.uniform(0.5, 1.5, int(keep.sum()))
        return csr_from_arrays(n, n, rows[keep], cols[keep], vals), rng
    a0 = random_csr(rng, n, n, density)
    rows, cols = coo_of(a0)
    dense_row = int(rng.integers(0, n))
    keep = rows != dense_row
    rows = np.concatenate([rows[keep], np.full(n, dense_row, dtype=np.int64)])
    cols = np.concatenate([cols[keep], np.arange(n, dtype=np.int64)])
    vals = rng.uniform(0.5, 1.5, len(rows))
    return csr_from_arrays(n, n, rows, cols, vals), rng


def _all_kernel_errors(a, x, want):
    """Worst componentwise error of each kernel, reorder included."""
    errs = [max_rel_error(spmv_csr_ref(a, x), want)]
    for k, targets in ((2, [4]), (3, [4, 2])):
        res = band_k(a, k, targets)
        packed = pack_csrk(a, res.perm, res.level_group_sizes)
        xp = permute_vector(res.perm, x)
        if k == 2:
            outs = [spmv_csr2(packed, xp)]
        else:
            outs = [
                spmv_csr3(packed, xp),
                emulate_gpu_spmv3(packed, xp, BlockDims(8, 12))[0],
                emulate_gpu_spmv35(packed, xp, BlockDims(4, 8, 12))[0],
            ]
        for yp in outs:
            y = unpermute_vector(res.perm, np.asarray(yp))
            errs.append(max_rel_error(y, want))
    return errs


def test_criterion_02_kernel_oracle_sweep():
    t0 = time.perf_counter()
    worst = 0.0
    count = 0
    for seed in range(200):
        a, rng = _sweep_matrix(seed)
        x = rng.uniform(0.5, 1.5, a.n_cols)
        want = dense_spmv(csr_to_dense(a), x)
        worst = max(worst, *_all_kernel_errors(a, x, want))
        count += 1
    elapsed = time.perf_counter() - t0
    ok = count >= 200 and worst <= 1e-12 and elapsed < 60.0
    report(2, ok, f"{count} matrices, worst {worst:.2e}, {elapsed:.1f}s")


# --- criterion 3: tuned size tables ---------------------------------------


VOLTA_SIZES = {1: (9, 10), 8: (6, 7), 16: (8, 12), 20: (20, 10),
               32: (20, 10), 100: (15, 7)}
AMPERE_SIZES = {1: (9, 21), 8: (6, 13), 16: (6, 44), 20: (13, 39),
                32: (13, 39), 100: (6, 12)}


def test_criterion_03_size_tables():
    ok = True
    for profile, table in ((VOLTA, VOLTA_SIZES), (AMPERE, AMPERE_SIZES)):
        for rd, expected in table.items():
            case, _ = select_case(float(rd))
            got = adjust_sizes(profile, case, *base_sizes(profile, float(rd)))
            ok = ok and got == expected
    report(3, ok, "12 table entries")


# --- criterion 4: search candidate sets -----------------------------------


def test_criterion_04_candidate_sets():
    ladder = (4, 6, 8, 12, 16, 24, 32, 48)
    grid = gpu_candidate_grid()
    srs = cpu_candidate_srs()
    ok = (len(grid) == 64
          and set(grid) == {(a, b) for a in ladder for b in ladder}
          and len(srs) == 18
          and srs[0] == 8 and srs[-1] == 3072
          and all(s1 < s2 for s1, s2 in zip(srs, srs[1:]))
          and cpu_fallback_srs() == 96)
    report(4, ok, "64 GPU pairs, 18 CPU sizes, fallback 96")


# --- criterion 5: regularity boundary -------------------------------------


def test_criterion_05_classification_boundary():
    counts = [10, 10, 0, 0, 5, 5, 5, 5, 5, 5]
    entries = [(i, j, 1.0) for i, c in enumerate(counts) for j in range(c)]
    rows = np.array([e[0] for e in entries])
    cols = np.array([e[1] for e in entries])
    a = csr_from_arrays(10, 10, rows, cols, np.ones(len(entries)))
    at_ten = compute_stats(a)
    just_over = MatrixStats(
        n=at_ten.n, nnz=at_ten.nnz, rdensity=at_ten.rdensity,
        variance=float(np.nextafter(10.0, 11.0)),
        max_row_nnz=at_ten.max_row_nnz,
        pattern_symmetry=at_ten.pattern_symmetry)
    constant = compute_stats(tridiagonal(9))
    ok = (at_ten.variance == 10.0
          and classify(at_ten) is MatrixClass.REGULAR
          and classify(just_over) is MatrixClass.IRREGULAR
          and constant.variance < 10.0
          and classify(constant) is MatrixClass.REGULAR)
    report(5, ok, f"variance {at_ten.variance}")


# --- criterion 6: bandwidth recovery on a scrambled grid ------------------


def _permuted_grid_laplacian(m: int, seed: int):
    idx = np.arange(m * m).reshape(m, m)
    rows = [idx.ravel()]
    cols = [idx.ravel()]
    vals = [np.full(m * m, 4.0)]
    for u, v in ((idx[:, :-1].ravel(), idx[:, 1:].ravel()),
                 (idx[:-1, :].ravel(), idx[1:, :].ravel())):
        rows += [u, v]
        cols += [v, u]
        vals += [np.full(len(u), -1.0), np.full(len(v), -1.0)]
    p = np.random.default_rng(seed).permutation(m * m)
    return csr_from_arrays(m * m, m * m,
                           p[np.concatenate(rows)],
                           p[np.concatenate(cols)],
                           np.concatenate(vals))


def test_criterion_06_bandwidth_vs_rcm():
    scipy_sparse = pytest.importorskip("scipy.sparse")
    from scipy.sparse.csgraph import reverse_cuthill_mckee

    t0 = time.perf_counter()
    a = _permuted_grid_laplacian(64, seed=7)
    before = matrix_bandwidth(a)
    res = band_k(a, 2, [2])
    after = permuted_bandwidth(a, res.perm.fwd)

    sp = scipy_sparse.csr_matrix(
        (a.vals, a.col_idx.astype(np.int64), a.row_ptr.astype(np.int64)),
        shape=(a.n_rows, a.n_cols))
    rcm_inv = reverse_cuthill_mckee(sp, symmetric_mode=True)
    rcm_fwd = np.empty(a.n_rows, dtype=np.int64)
    rcm_fwd[rcm_inv] = np.arange(a.n_rows)
    rcm = permuted_bandwidth(a, rcm_fwd)
    elapsed = time.perf_counter() - t0

    ok = after * 2 <= before and after <= 1.5 * rcm and elapsed < 10.0
    report(6, ok, f"{before} -> {after}, rcm {rcm}, {elapsed:.2f}s")


# --- criterion 7: emulation traces ----------------------------------------


def test_criterion_07_trace_partition_and_single_lane():
    rng = np.random.default_rng(123)
    ok = True
    for _ in range(20):
        n = int(rng.integers(2, 61))
        a = random_csr(rng, n, n, float(rng.uniform(0.05, 0.4)))
        res = band_k(a, 3, [4, 2])
        packed = pack_csrk(a, res.perm, res.level_group_sizes)
        xp = permute_vector(res.perm, rng.uniform(0.5, 1.5, n))
        p = int(rng.integers(1, 9))
        q = int(rng.integers(1, 13))
        y3, t3 = emulate_gpu_spmv3(packed, xp, BlockDims(p, q))
        y35, t35 = emulate_gpu_spmv35(packed, xp, BlockDims(1, q, p))
        t3.validate_partition(n)
        t35.validate_partition(n)
        ok = ok and np.array_equal(y35, y3)
        _, wide = emulate_gpu_spmv35(packed, xp, BlockDims(4, 3, 2))
        wide.validate_partition(n)
    report(7, ok, "20 matrix/dims pairs")


# --- criterion 8: log-model round-trip ------------------------------------


def test_criterion_08_log_model_round_trip():
    a_true, b_true = 8.9, 1.25
    samples = [(rd, a_true - b_true * math.log(rd))
               for rd in (1.0, 2.0, 4.0, 10.0, 33.0)]
    a_fit, b_fit = fit_log_model(samples)
    ok = abs(a_fit - a_true) <= 1e-9 and abs(b_fit - b_true) <= 1e-9
    report(8, ok, f"a {a_fit:.12f}, b {b_fit:.12f}")


# --- criterion 9: timing protocol -----------------------------------------


def test_criterion_09_timing_protocol():
    args = build_parser().parse_args(["run", "m.mtx"])
    defaults_ok = args.warmups == 5 and args.reps == 20

    # Clock script: five warmup laps of 1000 s, then timed laps of
    # 1, 2, ..., 20 s.  Only an arithmetic mean over exactly the last
    # 20 laps yields 10.5; any warmup leakage or other average differs.
    ticks = []
    t = 0.0
    for lap in range(25):
        span = 1000.0 if lap < 5 else float(lap - 4)
        ticks.append(t)
        ticks.append(t + span)
        t += span + 0.25
    clock = iter(ticks).__next__

    calls = 0

    def counting(step):
        def wrapped():
            nonlocal calls
            calls += 1
            return step()
        return wrapped

    a = tridiagonal(9)
    record = run_benchmark(a, "tri9", "ref", clock=clock,
                           step_wrapper=counting, threads=1)
    ok = (defaults_ok
          and calls == 25
          and record.warmups == 5
          and record.reps == 20
          and record.mean_seconds == 10.5
          and record.gflops == 2.0 * a.nnz / 10.5 / 1e9)
    report(9, ok, f"{calls} calls, mean {record.mean_seconds}")


# --- criterion 10: large-matrix speedup (advisory) -------------------------


def _banded_million(n: int = 100_000, half_band: int = 5):
    rng = np.random.default_rng(5)
    parts_r, parts_c = [], []
    for d in range(-half_band, half_band + 1):
        r = np.arange(max(0, -d), n - max(0, d), dtype=np.int64)
        parts_r.append(r)
        parts_c.append(r + d)
    rows = np.concatenate(parts_r)
    cols = np.concatenate(parts_c)
    return csr_from_arrays(n, n, rows, cols,
                           rng.uniform(0.5, 1.5, len(rows)))


def test_criterion_10_speedup_smoke():
    a = _banded_million()
    assert a.nnz >= 1_000_000
    n = a.n_rows
    sizes = [96] * (n // 96)
    if n % 96:
        sizes.append(n % 96)
    packed = pack_csrk(a, Permutation.identity(n), [sizes])
    x = np.random.default_rng(6).uniform(0.5, 1.5, n)

    ref_durs, ref_y = time_kernel(lambda: spmv_csr_ref(a, x),
                                  warmups=1, reps=2)
    par_durs, par_y = time_kernel(lambda: spmv_csr2(packed, x, workers=8),
                                  warmups=1, reps=2)
    assert max_rel_error(np.asarray(par_y), np.asarray(ref_y)) <= 1e-12

    ref_mean = sum(ref_durs) / len(ref_durs)
    par_mean = sum(par_durs) / len(par_durs)
    faster = par_mean < ref_mean
    detail = (f"nnz {a.nnz}, ref {ref_mean:.3f}s, "
              f"csr2x8 {par_mean:.3f}s, advisory")
    if os.environ.get("CSRK_PERF_ASSERT") == "1":
        report(10, faster, detail)
    else:
        status = "PASS" if faster else "SLOWER (advisory, not enforced)"
        print(f"[acceptance] criterion 10: {status} ({detail})")
