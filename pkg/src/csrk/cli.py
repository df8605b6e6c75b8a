"""Command-line front end.

Subcommands: ``info`` (matrix statistics), ``run`` (benchmark one
kernel), ``tune`` (print tuning parameters), ``compare`` (benchmark
several kernels against the sequential reference).  Machine-readable
output is JSON by default, CSV on request; records carry a schema
version.  Exit status is 0 on success, 1 when a correctness
verification exceeded tolerance, 2 for usage or input errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from .bench import (
    DEFAULT_REPS,
    DEFAULT_TOLERANCE,
    DEFAULT_WARMUPS,
    TARGETS,
    default_threads,
    empirical_search,
    run_benchmark,
)
from .format import CsrMatrix
from .io import MatrixMarketError, load_manifest, read_matrix_market
from .kernels import BlockDims
from .tuning import (
    BUILTIN_PROFILES,
    TuningParams,
    classify,
    compute_stats,
    load_profile,
    tune_cpu,
    tune_gpu,
)

__all__ = ["build_parser", "main"]


def _parse_block_dims(text: str) -> BlockDims:
    parts = text.split(",")
    if len(parts) not in (2, 3):
        raise argparse.ArgumentTypeError(
            "block dims must be X,Y or X,Y,Z")
    try:
        nums = [int(p) for p in parts]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    try:
        return BlockDims(*nums)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _resolve_profile(name: str):
    if name in BUILTIN_PROFILES:
        return BUILTIN_PROFILES[name]
    return load_profile(name)


def _load_matrix(path: str) -> CsrMatrix:
    return read_matrix_market(path)


def _matrix_id(args) -> str:
    if getattr(args, "id", None):
        return args.id
    name = str(args.matrix)
    base = name.rsplit("/", 1)[-1]
    return base.removesuffix(".mtx")


def _print_csv(header, rows) -> None:
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)


_RECORD_COLUMNS = (
    "schema_version", "matrix_id", "kernel", "k", "ssrs", "srs",
    "block_dims", "warmups", "reps", "mean_seconds", "gflops",
    "max_rel_error", "tolerance", "passed", "reorder_seconds",
    "pack_seconds",
)


def _record_row(record) -> list:
    t = record.tuning
    dims = t.get("block_dims")
    return [
        record.schema_version, record.matrix_id, record.kernel,
        t.get("k"), t.get("ssrs"), t.get("srs"),
        "x".join(str(d) for d in dims) if dims else "",
        record.warmups, record.reps,
        repr(record.mean_seconds), repr(record.gflops),
        repr(record.max_rel_error), repr(record.tolerance),
        record.passed, repr(record.reorder_seconds),
        repr(record.pack_seconds),
    ]


def cmd_info(args) -> int:
    a = _load_matrix(args.matrix)
    stats = compute_stats(a)
    label = classify(stats).value
    report = {
        "matrix": str(args.matrix),
        "n": stats.n,
        "nnz": stats.nnz,
        "max_row_nnz": stats.max_row_nnz,
        "rdensity": stats.rdensity,
        "variance": stats.variance,
        "pattern_symmetry": stats.pattern_symmetry,
        "class": label,
    }
    if args.format == "json":
        print(json.dumps(report, indent=2))
    else:
        for key, value in report.items():
            if isinstance(value, float):
                print(f"{key}: {value:.6f}")
            else:
                print(f"{key}: {value}")
    if args.manifest is not False or args.id is not None:
        path = args.manifest if args.manifest not in (False, None) else None
        _verify_against_manifest(path, args, stats, label)
    return 0


def _verify_against_manifest(path, args, stats, label: str) -> None:
    entries = load_manifest(path)
    wanted = args.id or _matrix_id(args)
    match = [e for e in entries if e.id == wanted or e.name == wanted]
    if not match:
        print(f"warning: {wanted!r} not found in manifest", file=sys.stderr)
        return
    entry = match[0]
    n_m = stats.n / 1e6
    nnz_m = stats.nnz / 1e6
    if abs(n_m - entry.n) > 0.005 + 1e-12:
        print(f"warning: n = {n_m:.2f}M, manifest says {entry.n:.2f}M",
              file=sys.stderr)
    if abs(nnz_m - entry.nnz) > 0.005 + 1e-12:
        print(f"warning: nnz = {nnz_m:.2f}M, manifest says {entry.nnz:.2f}M",
              file=sys.stderr)
    if stats.max_row_nnz != entry.max_row_nnz:
        print(f"warning: max row nnz = {stats.max_row_nnz}, manifest says "
              f"{entry.max_row_nnz}", file=sys.stderr)
    if label != entry.matrix_class:
        print(f"warning: computed class {label}, manifest says "
              f"{entry.matrix_class}", file=sys.stderr)


def _target_from_args(args) -> str:
    if args.kernel is None:
        if args.k is None:
            return "cpu2"
        return "cpu2" if args.k == 2 else "cpu3"
    if args.k is not None:
        implied = {"cpu2": 2, "cpu3": 3, "gpu3-emu": 3, "gpu35-emu": 3}
        if args.kernel == "ref" or implied[args.kernel] != args.k:
            raise ValueError(
                f"--k {args.k} conflicts with --kernel {args.kernel}")
    return args.kernel


def cmd_run(args) -> int:
    a = _load_matrix(args.matrix)
    target = _target_from_args(args)
    if args.tune == "grid" and (args.ssrs or args.srs):
        raise ValueError("--tune grid conflicts with explicit --ssrs/--srs")
    record = run_benchmark(
        a,
        _matrix_id(args),
        target,
        ssrs=args.ssrs,
        srs=args.srs,
        block_dims=args.block_dims,
        profile=_resolve_profile(args.profile),
        tune_mode=args.tune,
        warmups=args.warmups,
        reps=args.reps,
        threads=args.threads,
        tolerance=args.tolerance,
        seed=args.seed,
    )
    if args.format == "csv":
        _print_csv(_RECORD_COLUMNS, [_record_row(record)])
    else:
        print(json.dumps(record.to_dict(), indent=2))
    return 0 if record.passed else 1


def cmd_tune(args) -> int:
    a = _load_matrix(args.matrix)
    stats = compute_stats(a)
    use_cpu = args.device == "cpu" and not args.profile
    out = {
        "matrix_id": _matrix_id(args),
        "device": args.profile or args.device,
        "rdensity": stats.rdensity,
    }
    threads = args.threads or default_threads()
    if use_cpu:
        params = tune_cpu(stats)
        if args.grid:
            x = np.random.default_rng(args.seed).uniform(-1.0, 1.0, a.n_cols)
            result = empirical_search(a, "cpu2", 2, x, threads,
                                      reps=args.grid_reps)
            params = TuningParams(k=2, ssrs=None, srs=result.best,
                                  block_dims=None,
                                  kernel_variant=params.kernel_variant)
            out["table"] = [[cand, mean] for cand, mean in result.table]
    else:
        profile = _resolve_profile(args.profile or args.device)
        params = tune_gpu(stats, profile)
        if args.grid:
            x = np.random.default_rng(args.seed).uniform(-1.0, 1.0, a.n_cols)
            result = empirical_search(a, params.kernel_variant.value, 3, x,
                                      threads, reps=args.grid_reps,
                                      dims=params.block_dims)
            ssrs, srs = result.best
            params = TuningParams(k=3, ssrs=ssrs, srs=srs,
                                  block_dims=params.block_dims,
                                  kernel_variant=params.kernel_variant)
            out["table"] = [[list(cand), mean] for cand, mean in result.table]
    out["params"] = params.to_dict()
    print(json.dumps(out, indent=2))
    return 0


def cmd_compare(args) -> int:
    a = _load_matrix(args.matrix)
    matrix_id = _matrix_id(args)
    common = dict(
        profile=_resolve_profile(args.profile),
        warmups=args.warmups,
        reps=args.reps,
        threads=args.threads,
        tolerance=args.tolerance,
        seed=args.seed,
    )
    ref_record = run_benchmark(a, matrix_id, "ref", **common)
    records = []
    for target in args.targets:
        if target == "ref":
            records.append(ref_record)
        else:
            records.append(run_benchmark(a, matrix_id, target, **common))
    rows = []
    for rec in records:
        speedup = ref_record.mean_seconds / rec.mean_seconds
        rows.append({
            "kernel": rec.kernel,
            "mean_seconds": rec.mean_seconds,
            "gflops": rec.gflops,
            "speedup": speedup,
            "max_rel_error": rec.max_rel_error,
            "passed": rec.passed,
        })
    if args.format == "csv":
        header = list(rows[0].keys())
        _print_csv(header, [[_csv_cell(r[k]) for k in header] for r in rows])
    else:
        print(json.dumps({
            "schema_version": 1,
            "matrix_id": matrix_id,
            "baseline_mean_seconds": ref_record.mean_seconds,
            "results": rows,
        }, indent=2))
    return 0 if all(r["passed"] for r in rows) else 1


def _csv_cell(value):
    if isinstance(value, float):
        return repr(value)
    return value


def _add_common_bench_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--warmups", type=int, default=DEFAULT_WARMUPS,
                   help="untimed warmup runs (default 5)")
    p.add_argument("--reps", type=int, default=DEFAULT_REPS,
                   help="timed repetitions averaged arithmetically (default 20)")
    p.add_argument("--threads", type=int, default=None,
                   help="CPU kernel workers (default: OMP_NUM_THREADS or all cores)")
    p.add_argument("--profile", default="volta",
                   help="device profile: volta, ampere, or a JSON file path")
    p.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE,
                   help="max relative error accepted at verification (default 1e-10)")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for the dense input vector")
    p.add_argument("--format", choices=("json", "csv"), default="json",
                   help="output format (default json)")
    p.add_argument("--id", default=None, help="matrix id for the record")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="csrk",
        description="Hierarchical CSR SpMV: reordering, tuning, benchmarking.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_info = sub.add_parser("info", help="print matrix statistics")
    p_info.add_argument("matrix", help="Matrix Market file")
    p_info.add_argument("--manifest", nargs="?", const=None, default=False,
                        metavar="CSV",
                        help="check stats against the dataset manifest "
                             "(no value: the packaged manifest)")
    p_info.add_argument("--id", default=None,
                        help="manifest id or name to check against")
    p_info.add_argument("--format", choices=("text", "json"), default="text")
    p_info.set_defaults(func=cmd_info)

    p_run = sub.add_parser("run", help="benchmark one kernel")
    p_run.add_argument("matrix", help="Matrix Market file")
    p_run.add_argument("--kernel", choices=TARGETS, default=None,
                       help="kernel target (default cpu2, or per --k)")
    p_run.add_argument("--k", type=int, choices=(2, 3), default=None,
                       help="hierarchy depth; implies cpu2/cpu3 when --kernel is absent")
    p_run.add_argument("--ssrs", type=int, default=None,
                       help="super-rows per super-super-row (k = 3 targets)")
    p_run.add_argument("--srs", type=int, default=None,
                       help="rows per super-row")
    p_run.add_argument("--block-dims", type=_parse_block_dims, default=None,
                       metavar="X,Y[,Z]", help="emulation block dimensions")
    p_run.add_argument("--tune", choices=("auto", "grid"), default="auto",
                       help="tuning source when sizes are not explicit")
    _add_common_bench_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_tune = sub.add_parser("tune", help="print tuning parameters")
    p_tune.add_argument("matrix", help="Matrix Market file")
    p_tune.add_argument("--device", choices=("volta", "ampere", "cpu"),
                        default="volta")
    p_tune.add_argument("--profile", default=None,
                        help="JSON device profile overriding --device")
    p_tune.add_argument("--grid", action="store_true",
                        help="per-matrix empirical search (cpu: timed table)")
    p_tune.add_argument("--grid-reps", type=int, default=3,
                        help="timed repetitions per grid candidate (default 3)")
    p_tune.add_argument("--threads", type=int, default=None)
    p_tune.add_argument("--seed", type=int, default=0)
    p_tune.add_argument("--id", default=None)
    p_tune.set_defaults(func=cmd_tune)

    p_cmp = sub.add_parser("compare", help="benchmark kernels against the reference")
    p_cmp.add_argument("matrix", help="Matrix Market file")
    p_cmp.add_argument("--targets", nargs="+", required=True,
                       choices=TARGETS, help="kernel targets to measure")
    _add_common_bench_flags(p_cmp)
    p_cmp.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MatrixMarketError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
