"""Benchmark engine: timing protocol, verification, pipeline assembly.

The measurement protocol is fixed: a configurable number of untimed
warmup runs (default 5) followed by timed repetitions (default 20)
whose arithmetic mean is reported.  Only the multiply itself is inside
the timed window; reordering and packing are timed separately and never
mixed in.  Every record embeds the exact tuning parameters used.
"""

from __future__ import annotations

import os
import time
from dataclasses import asdict, dataclass

import numpy as np

from .format import CsrMatrix, pack_csrk, permute_vector, unpermute_vector
from .kernels import (
    BlockDims,
    emulate_gpu_spmv3,
    emulate_gpu_spmv35,
    spmv_csr2,
    spmv_csr3,
    spmv_csr_ref,
)
from .reorder import band_k
from .tuning import (
    DeviceProfile,
    VOLTA,
    compute_stats,
    cpu_candidate_srs,
    cpu_fallback_srs,
    gpu_candidate_grid,
    grid_search,
    tune_gpu,
)

__all__ = [
    "SCHEMA_VERSION",
    "DEFAULT_WARMUPS",
    "DEFAULT_REPS",
    "DEFAULT_TOLERANCE",
    "TARGETS",
    "BenchRecord",
    "default_threads",
    "max_rel_error",
    "time_kernel",
    "empirical_search",
    "run_benchmark",
]

SCHEMA_VERSION = 1
DEFAULT_WARMUPS = 5
DEFAULT_REPS = 20
DEFAULT_TOLERANCE = 1e-10

TARGETS = ("ref", "cpu2", "cpu3", "gpu3-emu", "gpu35-emu")


def default_threads() -> int:
    """Worker count: OMP_NUM_THREADS when set, else hardware parallelism."""
    env = os.environ.get("OMP_NUM_THREADS", "").strip()
    if env.isdigit() and int(env) > 0:
        return int(env)
    return os.cpu_count() or 1


def max_rel_error(y: np.ndarray, ref: np.ndarray) -> float:
    """Largest componentwise relative deviation of y from ref.

    The denominator is |ref| floored at 1e-300 so exact zeros compare
    exactly and near-zero reference entries are not forgiven.
    """
    y = np.asarray(y, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if y.shape != ref.shape:
        raise ValueError("shape mismatch between result and reference")
    if y.size == 0:
        return 0.0
    denom = np.maximum(np.abs(ref), 1e-300)
    return float((np.abs(y - ref) / denom).max())


def time_kernel(step, warmups: int = DEFAULT_WARMUPS, reps: int = DEFAULT_REPS,
                clock=time.perf_counter):
    """Run ``step`` warmups + reps times; time the last ``reps`` of them.

    Returns ``(durations, last_result)`` where durations has one entry
    per timed repetition and last_result is the value of the final call,
    reused for verification so no extra untimed run is needed.
    """
    if warmups < 0:
        raise ValueError("warmups must be non-negative")
    if reps < 1:
        raise ValueError("reps must be at least 1")
    durations = []
    result = None
    for i in range(warmups + reps):
        t0 = clock()
        result = step()
        t1 = clock()
        if i >= warmups:
            durations.append(t1 - t0)
    return durations, result


@dataclass(frozen=True)
class BenchRecord:
    """One benchmark outcome with everything needed to reproduce it."""

    schema_version: int
    matrix_id: str
    kernel: str
    tuning: dict
    warmups: int
    reps: int
    mean_seconds: float
    gflops: float
    max_rel_error: float
    tolerance: float
    passed: bool
    reorder_seconds: float
    pack_seconds: float

    def to_dict(self) -> dict:
        return asdict(self)


def _tuning_dict(k, ssrs, srs, dims, variant: str) -> dict:
    return {
        "k": k,
        "ssrs": ssrs,
        "srs": srs,
        "block_dims": None if dims is None else [dims.x, dims.y, dims.z],
        "kernel_variant": variant,
    }


def _k_for_target(target: str) -> int | None:
    if target == "ref":
        return None
    if target == "cpu2":
        return 2
    return 3


def _resolve_sizes(a: CsrMatrix, target: str, k: int, profile: DeviceProfile,
                   tune_mode: str, x: np.ndarray, threads: int,
                   grid_reps: int):
    """Pick (ssrs, srs, dims) for a non-ref target per the tuning mode."""
    stats = compute_stats(a)
    if k == 2:
        dims = None
        ssrs = None
        if tune_mode == "grid":
            srs = empirical_search(a, target, k, x, threads, grid_reps).best
        else:
            srs = cpu_fallback_srs()
        return ssrs, srs, dims
    params = tune_gpu(stats, profile)
    ssrs, srs, dims = params.ssrs, params.srs, params.block_dims
    if tune_mode == "grid":
        ssrs, srs = empirical_search(a, target, k, x, threads, grid_reps,
                                     dims).best
    return ssrs, srs, dims


def _make_step(target: str, packed, xp, threads: int, dims):
    if target == "cpu2":
        return lambda: spmv_csr2(packed, xp, workers=threads)
    if target == "cpu3":
        return lambda: spmv_csr3(packed, xp, workers=threads)
    if target == "gpu3-emu":
        return lambda: emulate_gpu_spmv3(packed, xp, dims)[0]
    if target == "gpu35-emu":
        return lambda: emulate_gpu_spmv35(packed, xp, dims)[0]
    raise ValueError(f"unknown kernel target {target!r}")


def empirical_search(a: CsrMatrix, target: str, k: int, x: np.ndarray,
                     threads: int, reps: int = 3,
                     dims: BlockDims | None = None):
    """Per-matrix empirical parameter search for one kernel target.

    Candidates come from the CPU ladder (k = 2, bare srs values) or the
    GPU grid (k = 3, (ssrs, srs) pairs).  Each candidate's reordering and
    packing happen once, outside timing; a runner call times exactly one
    multiply.  Returns the full GridSearchResult.
    """
    cache = {}

    def prepare(cand):
        if cand not in cache:
            targets = [cand] if k == 2 else [cand[1], cand[0]]
            res = band_k(a, k, targets)
            packed = pack_csrk(a, res.perm, res.level_group_sizes)
            xp = permute_vector(res.perm, x)
            cache[cand] = _make_step(target, packed, xp, threads, dims)
        return cache[cand]

    def runner(_a, cand):
        step = prepare(cand)
        t0 = time.perf_counter()
        step()
        return time.perf_counter() - t0

    cands = cpu_candidate_srs() if k == 2 else gpu_candidate_grid()
    return grid_search(a, cands, runner, reps=reps)


def run_benchmark(
    a: CsrMatrix,
    matrix_id: str,
    target: str,
    *,
    ssrs: int | None = None,
    srs: int | None = None,
    block_dims: BlockDims | None = None,
    profile: DeviceProfile = VOLTA,
    tune_mode: str = "auto",
    warmups: int = DEFAULT_WARMUPS,
    reps: int = DEFAULT_REPS,
    threads: int | None = None,
    tolerance: float = DEFAULT_TOLERANCE,
    seed: int = 0,
    clock=time.perf_counter,
    step_wrapper=None,
) -> BenchRecord:
    """Benchmark one kernel target on one matrix.

    Pipeline: statistics -> tuning -> reordering -> packing -> timed
    multiplies -> verification against the sequential reference.  The
    reference result is computed once outside the timed window; the last
    timed repetition's output is what gets verified.

    Parameters
    ----------
    a : CsrMatrix
        Matrix in original order.
    matrix_id : str
        Identifier embedded in the record.
    target : str
        One of ``ref``, ``cpu2``, ``cpu3``, ``gpu3-emu``, ``gpu35-emu``.
    ssrs, srs, block_dims
        Explicit overrides; when given they replace the tuned values.
    profile : DeviceProfile
        Device model used for auto tuning of k = 3 targets.
    tune_mode : str
        ``auto`` (constant-time model) or ``grid`` (per-matrix search).
    threads : int, optional
        Worker count for the CPU kernels; defaults per environment.
    seed : int
        Seed for the dense input vector, uniform in [-1, 1).
    clock, step_wrapper
        Test hooks: the timing clock, and a wrapper applied to the step
        callable before timing.

    Raises
    ------
    ValueError
        Unknown target, invalid protocol counts, or block dimensions
        incompatible with the chosen emulation.
    """
    if target not in TARGETS:
        raise ValueError(f"unknown kernel target {target!r}")
    if tune_mode not in ("auto", "grid"):
        raise ValueError(f"unknown tuning mode {tune_mode!r}")
    threads = threads if threads else default_threads()
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, a.n_cols)
    ref_y = spmv_csr_ref(a, x)

    k = _k_for_target(target)
    reorder_s = 0.0
    pack_s = 0.0
    if target == "ref":
        step = lambda: spmv_csr_ref(a, x)  # noqa: E731
        perm = None
        tuning = _tuning_dict(None, None, None, None, "ref")
    else:
        t_ssrs, t_srs, t_dims = _resolve_sizes(
            a, target, k, profile, tune_mode, x, threads, grid_reps=3)
        if ssrs is not None:
            t_ssrs = ssrs
        if srs is not None:
            t_srs = srs
        if block_dims is not None:
            t_dims = block_dims
        level_targets = [t_srs] if k == 2 else [t_srs, t_ssrs]
        t0 = time.perf_counter()
        res = band_k(a, k, level_targets)
        reorder_s = time.perf_counter() - t0
        t0 = time.perf_counter()
        packed = pack_csrk(a, res.perm, res.level_group_sizes)
        pack_s = time.perf_counter() - t0
        perm = res.perm
        xp = permute_vector(perm, x)
        step = _make_step(target, packed, xp, threads, t_dims)
        tuning = _tuning_dict(k, t_ssrs, t_srs,
                              t_dims if target.startswith("gpu") else None,
                              target)
    if step_wrapper is not None:
        step = step_wrapper(step)

    durations, last = time_kernel(step, warmups, reps, clock)
    mean = sum(durations) / len(durations)
    y = last if perm is None else unpermute_vector(perm, last)
    err = max_rel_error(y, ref_y)
    passed = bool(err <= tolerance)
    gflops = 2.0 * a.nnz / mean / 1e9 if mean > 0 else float("inf")
    return BenchRecord(
        schema_version=SCHEMA_VERSION,
        matrix_id=matrix_id,
        kernel=target,
        tuning=tuning,
        warmups=warmups,
        reps=reps,
        mean_seconds=mean,
        gflops=gflops,
        max_rel_error=err,
        tolerance=tolerance,
        passed=passed,
        reorder_seconds=reorder_s,
        pack_seconds=pack_s,
    )
