"""Hierarchical CSR storage with bandwidth-limiting reordering, tuned
parallel SpMV kernels, and a benchmarking harness.

The base format is plain CSR; packing adds k - 1 grouping pointer
arrays (super-rows, and for k = 3 super-super-rows) over the rows of a
reordered matrix, so existing CSR consumers can keep using the base
arrays unchanged.  See the module docstrings for the moving parts:

- :mod:`csrk.format` -- storage types, validation, packing.
- :mod:`csrk.reorder` -- multilevel bandwidth-limiting row ordering.
- :mod:`csrk.kernels` -- sequential, parallel, and GPU-emulating SpMV.
- :mod:`csrk.tuning` -- constant-time parameter model and grid search.
- :mod:`csrk.io` -- Matrix Market files and the dataset manifest.
- :mod:`csrk.bench` / :mod:`csrk.cli` -- measurement protocol and CLI.
"""

from .format import (
    INDEX_DTYPE,
    MAX_NNZ,
    VALUE_DTYPE,
    CsrKMatrix,
    CsrMatrix,
    Permutation,
    build_csr,
    csr_from_arrays,
    pack_csrk,
    permute_vector,
    unpermute_vector,
)
from .io import (
    ManifestEntry,
    MatrixMarketError,
    MatrixMarketHeader,
    default_manifest_path,
    load_manifest,
    read_matrix_market,
    read_permutation_file,
    write_matrix_market,
    write_permutation_file,
)
from .kernels import (
    MAX_BLOCK_THREADS,
    BlockDims,
    EmulationTrace,
    emulate_gpu_spmv3,
    emulate_gpu_spmv35,
    spmv_csr2,
    spmv_csr3,
    spmv_csr_ref,
)
from .reorder import (
    AdjacencyGraph,
    BandKResult,
    CoarseningMap,
    band_k,
    build_graph,
    coarsen,
    heavy_edge_matching,
    weighted_bandwidth_order,
)
from .tuning import (
    AMPERE,
    BUILTIN_PROFILES,
    CPU_FALLBACK_SRS,
    REGULARITY_THRESHOLD,
    SERIAL_INNER_THRESHOLD,
    VOLTA,
    CaseRule,
    DeviceProfile,
    GridSearchResult,
    KernelVariant,
    MatrixClass,
    MatrixStats,
    SizeAdjust,
    TuningParams,
    adjust_sizes,
    base_sizes,
    classify,
    compute_stats,
    cpu_candidate_srs,
    cpu_fallback_srs,
    fit_log_model,
    gpu_candidate_grid,
    grid_search,
    load_profile,
    profile_from_dict,
    profile_to_dict,
    round_half_up,
    save_profile,
    select_case,
    tune_cpu,
    tune_gpu,
)
from .bench import (
    DEFAULT_REPS,
    DEFAULT_TOLERANCE,
    DEFAULT_WARMUPS,
    SCHEMA_VERSION,
    BenchRecord,
    default_threads,
    empirical_search,
    max_rel_error,
    run_benchmark,
    time_kernel,
)

__version__ = "0.1.0"

__all__ = [
    "INDEX_DTYPE",
    "MAX_NNZ",
    "VALUE_DTYPE",
    "CsrMatrix",
    "CsrKMatrix",
    "Permutation",
    "build_csr",
    "csr_from_arrays",
    "pack_csrk",
    "permute_vector",
    "unpermute_vector",
    "ManifestEntry",
    "MatrixMarketError",
    "MatrixMarketHeader",
    "default_manifest_path",
    "load_manifest",
    "read_matrix_market",
    "read_permutation_file",
    "write_matrix_market",
    "write_permutation_file",
    "MAX_BLOCK_THREADS",
    "BlockDims",
    "EmulationTrace",
    "emulate_gpu_spmv3",
    "emulate_gpu_spmv35",
    "spmv_csr2",
    "spmv_csr3",
    "spmv_csr_ref",
    "AdjacencyGraph",
    "BandKResult",
    "CoarseningMap",
    "band_k",
    "build_graph",
    "coarsen",
    "heavy_edge_matching",
    "weighted_bandwidth_order",
    "AMPERE",
    "BUILTIN_PROFILES",
    "CPU_FALLBACK_SRS",
    "REGULARITY_THRESHOLD",
    "SERIAL_INNER_THRESHOLD",
    "VOLTA",
    "CaseRule",
    "DeviceProfile",
    "GridSearchResult",
    "KernelVariant",
    "MatrixClass",
    "MatrixStats",
    "SizeAdjust",
    "TuningParams",
    "adjust_sizes",
    "base_sizes",
    "classify",
    "compute_stats",
    "cpu_candidate_srs",
    "cpu_fallback_srs",
    "fit_log_model",
    "gpu_candidate_grid",
    "grid_search",
    "load_profile",
    "profile_from_dict",
    "profile_to_dict",
    "round_half_up",
    "save_profile",
    "select_case",
    "tune_cpu",
    "tune_gpu",
    "DEFAULT_REPS",
    "DEFAULT_TOLERANCE",
    "DEFAULT_WARMUPS",
    "SCHEMA_VERSION",
    "BenchRecord",
    "default_threads",
    "empirical_search",
    "max_rel_error",
    "run_benchmark",
    "time_kernel",
]
