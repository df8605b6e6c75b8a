"""Constant-time kernel tuning model.

Given cheap matrix statistics (row density, row-count variance, pattern
symmetry), this module selects a kernel variant, block dimensions, and
super-row / super-super-row sizes without running the kernel.  Device
behavior is captured in a :class:`DeviceProfile`: two logarithmic size
formulas plus a four-case adjustment table keyed on row density.  Two
profiles are built in and profiles round-trip through JSON so new
devices can be fitted without code changes.

An empirical path is also provided: :func:`grid_search` times candidate
parameters directly, and :func:`fit_log_model` refits the logarithmic
formula coefficients from observed optima.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass

import numpy as np

from .format import CsrMatrix
from .kernels import BlockDims

__all__ = [
    "REGULARITY_THRESHOLD",
    "SERIAL_INNER_THRESHOLD",
    "CPU_FALLBACK_SRS",
    "MatrixClass",
    "KernelVariant",
    "MatrixStats",
    "SizeAdjust",
    "CaseRule",
    "DeviceProfile",
    "TuningParams",
    "GridSearchResult",
    "VOLTA",
    "AMPERE",
    "BUILTIN_PROFILES",
    "compute_stats",
    "classify",
    "round_half_up",
    "select_case",
    "base_sizes",
    "adjust_sizes",
    "tune_gpu",
    "tune_cpu",
    "gpu_candidate_grid",
    "cpu_candidate_srs",
    "cpu_fallback_srs",
    "grid_search",
    "fit_log_model",
    "load_profile",
    "save_profile",
    "profile_to_dict",
    "profile_from_dict",
]

REGULARITY_THRESHOLD = 10.0
SERIAL_INNER_THRESHOLD = 8.0
CPU_FALLBACK_SRS = 96


class MatrixClass(enum.Enum):
    REGULAR = "regular"
    IRREGULAR = "irregular"


class KernelVariant(enum.Enum):
    """Kernel targets; values double as CLI spellings."""

    CPU_CSR2 = "cpu2"
    CPU_CSR3 = "cpu3"
    GPU3 = "gpu3-emu"
    GPU35 = "gpu35-emu"


@dataclass(frozen=True)
class MatrixStats:
    """Structural statistics driving tuning decisions.

    Attributes
    ----------
    n, nnz : int
        Row count and structural nonzero count.
    rdensity : float
        Average nonzeros per row, nnz / n.
    variance : float
        Population variance of per-row nonzero counts.
    max_row_nnz : int
        Largest per-row nonzero count.
    pattern_symmetry : float
        Fraction of off-diagonal nonzeros whose transpose position is
        also structurally nonzero; 1.0 when there are none.
    """

    n: int
    nnz: int
    rdensity: float
    variance: float
    max_row_nnz: int
    pattern_symmetry: float


def compute_stats(a: CsrMatrix) -> MatrixStats:
    """Compute tuning statistics for a matrix; rejects empty matrices."""
    if a.n_rows == 0:
        raise ValueError("statistics are undefined for a matrix with no rows")
    counts = a.row_nnz().astype(np.int64)
    nnz = a.nnz
    rows = np.repeat(np.arange(a.n_rows, dtype=np.int64), counts)
    cols = a.col_idx.astype(np.int64)
    off = rows != cols
    n_off = int(np.count_nonzero(off))
    if n_off == 0:
        sy = 1.0
    else:
        keys = rows * a.n_cols + cols
        r = rows[off]
        c = cols[off]
        inside = (c < a.n_rows) & (r < a.n_cols)
        tkeys = c[inside] * a.n_cols + r[inside]
        sy = float(np.count_nonzero(np.isin(tkeys, keys))) / n_off
    return MatrixStats(
        n=a.n_rows,
        nnz=nnz,
        rdensity=nnz / a.n_rows,
        variance=float(np.var(counts)),
        max_row_nnz=int(counts.max()) if a.n_rows else 0,
        pattern_symmetry=sy,
    )


def classify(stats: MatrixStats) -> MatrixClass:
    """A matrix is regular when its row-count variance is at most 10."""
    if stats.variance <= REGULARITY_THRESHOLD:
        return MatrixClass.REGULAR
    return MatrixClass.IRREGULAR


def round_half_up(x: float) -> int:
    """Round to nearest integer, halves toward positive infinity."""
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class SizeAdjust:
    """One size-update rule inside a case table.

    ``source`` picks the input: ``"self"`` is the size being updated,
    ``"ssrs"`` is the already-updated super-super-row size (rules are
    applied in ssrs-then-srs order).  The input is multiplied by
    ``factor`` and then rounded per ``mode``: ``"exact"`` for integral
    factors, ``"half_up"`` for round-half-toward-positive-infinity,
    ``"floor"`` for truncation.  Results are clamped to at least 1.
    """

    source: str = "self"
    factor: float = 1.0
    mode: str = "exact"

    def __post_init__(self) -> None:
        if self.source not in ("self", "ssrs"):
            raise ValueError(f"unknown adjustment source {self.source!r}")
        if self.mode not in ("exact", "half_up", "floor"):
            raise ValueError(f"unknown rounding mode {self.mode!r}")

    def apply(self, value: int, ssrs: int) -> int:
        base = value if self.source == "self" else ssrs
        scaled = base * self.factor
        if self.mode == "half_up":
            out = round_half_up(scaled)
        elif self.mode == "floor":
            out = math.floor(scaled)
        else:
            out = round(scaled)
        return max(1, int(out))


_KEEP = SizeAdjust()


@dataclass(frozen=True)
class CaseRule:
    """One row-density interval with its dims and size adjustments.

    ``upper`` is the inclusive upper bound of the interval; ``None``
    marks the final unbounded case.
    """

    upper: float | None
    dims: BlockDims
    ssrs_adjust: SizeAdjust = _KEEP
    srs_adjust: SizeAdjust = _KEEP


@dataclass(frozen=True)
class DeviceProfile:
    """Per-device tuning data: size formulas plus the case table.

    The formulas are ``size = round_half_up(a - b * ln(rdensity))`` with
    ``(a, b)`` in ``ssrs_coeff`` / ``srs_coeff``.  ``case_table`` holds
    ascending row-density intervals that must partition (0, inf).
    """

    name: str
    ssrs_coeff: tuple
    srs_coeff: tuple
    case_table: tuple
    serial_inner_threshold: float = SERIAL_INNER_THRESHOLD

    def __post_init__(self) -> None:
        uppers = [rule.upper for rule in self.case_table]
        if len(uppers) < 1 or uppers[-1] is not None:
            raise ValueError("case table must end with an unbounded interval")
        finite = uppers[:-1]
        if any(u is None for u in finite) or sorted(finite) != finite:
            raise ValueError("case intervals must be ascending and contiguous")

    def case_for(self, rdensity: float) -> tuple:
        """Return (1-based case id, BlockDims) for a row density."""
        if rdensity <= 0:
            raise ValueError("rdensity must be positive")
        for i, rule in enumerate(self.case_table, start=1):
            if rule.upper is None or rdensity <= rule.upper:
                return i, rule.dims
        raise AssertionError("unreachable: final case is unbounded")


_CASE_DIMS = (
    BlockDims(8, 12),
    BlockDims(4, 8, 12),
    BlockDims(8, 8, 8),
    BlockDims(16, 8, 4),
)

VOLTA = DeviceProfile(
    name="volta",
    ssrs_coeff=(8.900, 1.25),
    srs_coeff=(10.146, 1.50),
    case_table=(
        CaseRule(8.0, _CASE_DIMS[0]),
        CaseRule(
            16.0,
            _CASE_DIMS[1],
            SizeAdjust("self", 1.5, "half_up"),
            SizeAdjust("self", 2.0, "exact"),
        ),
        CaseRule(
            32.0,
            _CASE_DIMS[2],
            SizeAdjust("self", 4.0, "exact"),
            SizeAdjust("ssrs", 0.5, "floor"),
        ),
        CaseRule(
            None,
            _CASE_DIMS[3],
            SizeAdjust("self", 5.0, "exact"),
            SizeAdjust("ssrs", 0.5, "floor"),
        ),
    ),
)

AMPERE = DeviceProfile(
    name="ampere",
    ssrs_coeff=(9.175, 1.32),
    srs_coeff=(20.500, 3.50),
    case_table=(
        CaseRule(8.0, _CASE_DIMS[0]),
        CaseRule(
            16.0,
            _CASE_DIMS[1],
            _KEEP,
            SizeAdjust("self", 4.0, "exact"),
        ),
        CaseRule(
            32.0,
            _CASE_DIMS[2],
            SizeAdjust("self", 2.5, "half_up"),
            SizeAdjust("ssrs", 3.0, "exact"),
        ),
        CaseRule(
            None,
            _CASE_DIMS[3],
            SizeAdjust("self", 2.0, "exact"),
            SizeAdjust("ssrs", 2.0, "exact"),
        ),
    ),
)

BUILTIN_PROFILES = {"volta": VOLTA, "ampere": AMPERE}


def select_case(rdensity: float) -> tuple:
    """Map a positive row density to its case id and block dimensions.

    Case 1: rdensity <= 8 -> 8x12.  Case 2: (8, 16] -> 4x8x12.
    Case 3: (16, 32] -> 8x8x8.  Case 4: > 32 -> 16x8x4.
    """
    return VOLTA.case_for(rdensity)


def base_sizes(profile: DeviceProfile, rdensity: float) -> tuple:
    """Evaluate the profile's logarithmic size formulas, clamped to >= 1."""
    if rdensity <= 0:
        raise ValueError("rdensity must be positive")
    lr = math.log(rdensity)
    ssrs = round_half_up(profile.ssrs_coeff[0] - profile.ssrs_coeff[1] * lr)
    srs = round_half_up(profile.srs_coeff[0] - profile.srs_coeff[1] * lr)
    return max(1, ssrs), max(1, srs)


def adjust_sizes(profile: DeviceProfile, case: int, ssrs: int, srs: int) -> tuple:
    """Apply the profile's case adjustments; ssrs updates first so srs
    rules referencing it see the adjusted value."""
    if not 1 <= case <= len(profile.case_table):
        raise ValueError(f"case must be in 1..{len(profile.case_table)}")
    rule = profile.case_table[case - 1]
    new_ssrs = rule.ssrs_adjust.apply(ssrs, ssrs)
    new_srs = rule.srs_adjust.apply(srs, new_ssrs)
    return new_ssrs, new_srs


@dataclass(frozen=True)
class TuningParams:
    """A complete kernel configuration; block_dims only for GPU targets."""

    k: int
    ssrs: int | None
    srs: int
    block_dims: BlockDims | None
    kernel_variant: KernelVariant

    def __post_init__(self) -> None:
        if self.k not in (2, 3):
            raise ValueError("k must be 2 or 3")
        if self.srs < 1 or (self.ssrs is not None and self.ssrs < 1):
            raise ValueError("group sizes must be at least 1")
        gpu = self.kernel_variant in (KernelVariant.GPU3, KernelVariant.GPU35)
        if gpu and self.block_dims is None:
            raise ValueError("GPU targets require block dimensions")

    def to_dict(self) -> dict:
        dims = self.block_dims
        return {
            "k": self.k,
            "ssrs": self.ssrs,
            "srs": self.srs,
            "block_dims": None if dims is None else [dims.x, dims.y, dims.z],
            "kernel_variant": self.kernel_variant.value,
        }


def tune_gpu(stats: MatrixStats, profile: DeviceProfile) -> TuningParams:
    """Constant-time GPU tuning: k = 3, sizes from the profile formulas
    plus case adjustments, serial-inner-product variant for sparse rows.
    """
    case, dims = profile.case_for(stats.rdensity)
    ssrs, srs = base_sizes(profile, stats.rdensity)
    ssrs, srs = adjust_sizes(profile, case, ssrs, srs)
    if stats.rdensity <= profile.serial_inner_threshold:
        variant = KernelVariant.GPU3
    else:
        variant = KernelVariant.GPU35
    return TuningParams(k=3, ssrs=ssrs, srs=srs, block_dims=dims,
                        kernel_variant=variant)


def tune_cpu(stats: MatrixStats) -> TuningParams:
    """Constant-time CPU tuning: k = 2 with the fixed fallback super-row
    size; per-matrix grid search is the empirical alternative."""
    return TuningParams(k=2, ssrs=None, srs=CPU_FALLBACK_SRS,
                        block_dims=None, kernel_variant=KernelVariant.CPU_CSR2)


def _size_ladder(lo: int, hi: int) -> tuple:
    vals = set()
    for i in range(lo, hi + 1):
        vals.add(2 ** i)
        vals.add(3 * 2 ** (i - 1))
    return tuple(sorted(vals))


def gpu_candidate_grid() -> tuple:
    """All 64 (ssrs, srs) pairs over {4,6,8,12,16,24,32,48} squared."""
    base = _size_ladder(2, 5)
    return tuple((s, r) for s in base for r in base)


def cpu_candidate_srs() -> tuple:
    """The 18 candidate super-row sizes from 8 to 3072."""
    return _size_ladder(3, 11)


def cpu_fallback_srs() -> int:
    """The constant super-row size used when skipping per-matrix search."""
    return CPU_FALLBACK_SRS


@dataclass(frozen=True)
class GridSearchResult:
    """Winning candidate plus the full (candidate, mean seconds) table."""

    best: object
    table: tuple


def grid_search(a: CsrMatrix, candidates, runner, reps: int = 20) -> GridSearchResult:
    """Time every candidate and return the argmin of mean runtime.

    Parameters
    ----------
    a : CsrMatrix
        Matrix handed to the runner unchanged.
    candidates : iterable
        Orderable parameter values; ties break toward the smaller one.
    runner : callable
        ``runner(a, candidate) -> seconds`` for one full multiply.
    reps : int
        Timed repetitions per candidate, at least 1.

    Candidates run sequentially to avoid timing interference.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    ordered = sorted(candidates)
    if not ordered:
        raise ValueError("candidate set is empty")
    table = []
    best = None
    best_mean = math.inf
    for cand in ordered:
        mean = sum(runner(a, cand) for _ in range(reps)) / reps
        table.append((cand, mean))
        if mean < best_mean:
            best = cand
            best_mean = mean
    return GridSearchResult(best=best, table=tuple(table))


def fit_log_model(samples, b_override: float | None = None) -> tuple:
    """Least-squares fit of size = a - b * ln(rdensity).

    ``samples`` is a sequence of (rdensity, optimal_size) pairs with at
    least two distinct positive rdensity values.  Returns ``(a, b)``
    where b is the negated slope.  ``b_override`` replaces the fitted b,
    mirroring the practice of hand-lowering the slope so predicted sizes
    stay useful at high density; a is kept from the fit.
    """
    pts = [(float(r), float(s)) for r, s in samples]
    if len(pts) < 2:
        raise ValueError("need at least two samples")
    rd = np.array([p[0] for p in pts])
    if np.any(rd <= 0):
        raise ValueError("rdensity samples must be positive")
    lx = np.log(rd)
    if np.unique(lx).size < 2:
        raise ValueError("samples are degenerate: all rdensity equal")
    sz = np.array([p[1] for p in pts])
    slope, intercept = np.polyfit(lx, sz, 1)
    a = float(intercept)
    b = float(-slope)
    if b_override is not None:
        b = float(b_override)
    return a, b


def _adjust_to_dict(adj: SizeAdjust) -> dict:
    return {"source": adj.source, "factor": adj.factor, "mode": adj.mode}


def _adjust_from_dict(d: dict) -> SizeAdjust:
    return SizeAdjust(source=d["source"], factor=float(d["factor"]),
                      mode=d["mode"])


def profile_to_dict(profile: DeviceProfile) -> dict:
    cases = []
    for rule in profile.case_table:
        cases.append({
            "upper": rule.upper,
            "dims": [rule.dims.x, rule.dims.y, rule.dims.z],
            "ssrs": _adjust_to_dict(rule.ssrs_adjust),
            "srs": _adjust_to_dict(rule.srs_adjust),
        })
    return {
        "name": profile.name,
        "ssrs_coeff": list(profile.ssrs_coeff),
        "srs_coeff": list(profile.srs_coeff),
        "serial_inner_threshold": profile.serial_inner_threshold,
        "cases": cases,
    }


def profile_from_dict(data: dict) -> DeviceProfile:
    rules = []
    for c in data["cases"]:
        x, y, z = (int(v) for v in c["dims"])
        rules.append(CaseRule(
            upper=None if c["upper"] is None else float(c["upper"]),
            dims=BlockDims(x, y, z),
            ssrs_adjust=_adjust_from_dict(c["ssrs"]),
            srs_adjust=_adjust_from_dict(c["srs"]),
        ))
    return DeviceProfile(
        name=str(data["name"]),
        ssrs_coeff=tuple(float(v) for v in data["ssrs_coeff"]),
        srs_coeff=tuple(float(v) for v in data["srs_coeff"]),
        case_table=tuple(rules),
        serial_inner_threshold=float(
            data.get("serial_inner_threshold", SERIAL_INNER_THRESHOLD)),
    )


def load_profile(path) -> DeviceProfile:
    """Read a device profile from a JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        return profile_from_dict(json.load(fh))


def save_profile(profile: DeviceProfile, path) -> None:
    """Write a device profile to a JSON file, human-editable."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(profile_to_dict(profile), fh, indent=2)
        fh.write("\n")
