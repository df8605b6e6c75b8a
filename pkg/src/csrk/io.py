"""Matrix Market ingestion and emission, plus the benchmark-suite manifest.

Reading handles the coordinate format with real, integer, or pattern fields
and general, symmetric, or skew-symmetric storage.  Symmetric storage is
expanded to the full pattern on load.  Writing always emits coordinate real
general with full-precision values, so a write/read round trip reproduces
the matrix exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import IO, Iterable, Union

import numpy as np

from .format import VALUE_DTYPE, CsrMatrix, csr_from_arrays

__all__ = [
    "MatrixMarketHeader",
    "ManifestEntry",
    "read_matrix_market",
    "write_matrix_market",
    "load_manifest",
    "default_manifest_path",
    "read_permutation_file",
    "write_permutation_file",
]

Source = Union[str, Path, IO[str]]

_FIELDS = ("real", "integer", "pattern")
_SYMMETRIES = ("general", "symmetric", "skew-symmetric")


@dataclass(frozen=True)
class MatrixMarketHeader:
    """Parsed banner line of a Matrix Market file."""

    object: str
    format: str
    field: str
    symmetry: str


@dataclass(frozen=True)
class ManifestEntry:
    """One row of the benchmark-suite manifest.

    ``n`` and ``nnz`` are in millions, as published; ``max_row_nnz`` is the
    maximum number of nonzeros in any row, rounded where the source rounds.
    ``matrix_class`` is ``"regular"`` or ``"irregular"``.
    """

    id: str
    name: str
    n: float
    nnz: float
    max_row_nnz: int
    matrix_class: str


class MatrixMarketError(ValueError):
    """Raised on malformed Matrix Market input, with a 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def _parse_banner(line: str, line_no: int) -> MatrixMarketHeader:
    if not line.startswith("%%MatrixMarket"):
        raise MatrixMarketError(line_no, "banner must begin with %%MatrixMarket")
    tokens = line.split()
    if len(tokens) != 5:
        raise MatrixMarketError(
            line_no, "banner must be '%%MatrixMarket object format field symmetry'"
        )
    _, obj, fmt, field, symmetry = (t.lower() for t in tokens)
    if obj != "matrix":
        raise MatrixMarketError(line_no, f"unsupported object '{obj}'")
    if fmt != "coordinate":
        raise MatrixMarketError(line_no, f"unsupported format '{fmt}'")
    if field == "complex":
        raise MatrixMarketError(line_no, "complex matrices are not supported")
    if field not in _FIELDS:
        raise MatrixMarketError(line_no, f"unsupported field '{field}'")
    if symmetry not in _SYMMETRIES:
        raise MatrixMarketError(line_no, f"unsupported symmetry '{symmetry}'")
    return MatrixMarketHeader(obj, fmt, field, symmetry)


def read_matrix_market(source: Source) -> CsrMatrix:
    """Read a coordinate Matrix Market file into canonical CSR.

    Parameters
    ----------
    source : path or open text stream
        File to parse.  Entries use 1-based indices.

    Returns
    -------
    CsrMatrix
        Full (expanded) matrix.  Off-diagonal entries of symmetric files
        are mirrored; skew-symmetric mirrors are negated; pattern entries
        get the value 1.0.  Duplicate coordinates are summed.

    Raises
    ------
    MatrixMarketError
        On malformed input, carrying the offending line number.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="ascii") as handle:
            return _read_stream(handle)
    return _read_stream(source)


def _read_stream(stream: Iterable[str]) -> CsrMatrix:
    lines = iter(enumerate(stream, start=1))
    try:
        line_no, raw = next(lines)
    except StopIteration:
        raise MatrixMarketError(0, "empty file") from None
    header = _parse_banner(raw.rstrip("\n"), line_no)

    n_rows = n_cols = n_entries = None
    for line_no, raw in lines:
        text = raw.strip()
        if not text or text.startswith("%"):
            continue
        parts = text.split()
        if len(parts) != 3:
            raise MatrixMarketError(line_no, "size line must be 'rows cols nnz'")
        try:
            n_rows, n_cols, n_entries = (int(p) for p in parts)
        except ValueError:
            raise MatrixMarketError(line_no, "size line must hold three integers") from None
        if n_rows < 0 or n_cols < 0 or n_entries < 0:
            raise MatrixMarketError(line_no, "size line entries must be non-negative")
        break
    if n_rows is None:
        raise MatrixMarketError(line_no, "missing size line")

    want_value = header.field != "pattern"
    rows = np.empty(n_entries, dtype=np.int64)
    cols = np.empty(n_entries, dtype=np.int64)
    vals = np.ones(n_entries, dtype=VALUE_DTYPE)
    count = 0
    last_line = line_no
    for line_no, raw in lines:
        text = raw.strip()
        if not text or text.startswith("%"):
            continue
        last_line = line_no
        if count >= n_entries:
            raise MatrixMarketError(
                line_no, f"more than the declared {n_entries} entries"
            )
        parts = text.split()
        expected = 3 if want_value else 2
        if len(parts) != expected:
            raise MatrixMarketError(
                line_no, f"expected {expected} tokens for a {header.field} entry"
            )
        try:
            i = int(parts[0])
            j = int(parts[1])
        except ValueError:
            raise MatrixMarketError(line_no, "entry indices must be integers") from None
        if not (1 <= i <= n_rows):
            raise MatrixMarketError(line_no, f"row index {i} out of range [1, {n_rows}]")
        if not (1 <= j <= n_cols):
            raise MatrixMarketError(line_no, f"column index {j} out of range [1, {n_cols}]")
        if want_value:
            try:
                v = float(parts[2])
            except ValueError:
                raise MatrixMarketError(line_no, f"bad value '{parts[2]}'") from None
            vals[count] = v
        if header.symmetry == "skew-symmetric" and i == j:
            raise MatrixMarketError(
                line_no, "skew-symmetric files must not store diagonal entries"
            )
        rows[count] = i - 1
        cols[count] = j - 1
        count += 1
    if count != n_entries:
        raise MatrixMarketError(
            last_line, f"file holds {count} entries, header declared {n_entries}"
        )

    if header.symmetry != "general":
        off = rows != cols
        mirror_vals = vals[off]
        if header.symmetry == "skew-symmetric":
            mirror_vals = -mirror_vals
        rows, cols = (
            np.concatenate([rows, cols[off]]),
            np.concatenate([cols, rows[off]]),
        )
        vals = np.concatenate([vals, mirror_vals])
    return csr_from_arrays(n_rows, n_cols, rows, cols, vals)


def write_matrix_market(a: CsrMatrix, destination: Source) -> None:
    """Write a matrix as 'coordinate real general', 1-based, row-major.

    Values are written with ``repr`` so they round-trip exactly in 64-bit.
    """
    if isinstance(destination, (str, Path)):
        with open(destination, "w", encoding="ascii") as handle:
            _write_stream(a, handle)
            return
    _write_stream(a, destination)


def _write_stream(a: CsrMatrix, stream: IO[str]) -> None:
    stream.write("%%MatrixMarket matrix coordinate real general\n")
    stream.write(f"{a.n_rows} {a.n_cols} {a.nnz}\n")
    ptr = a.row_ptr.astype(np.int64)
    cols = a.col_idx.tolist()
    vals = a.vals.tolist()
    for i in range(a.n_rows):
        for p in range(ptr[i], ptr[i + 1]):
            stream.write(f"{i + 1} {cols[p] + 1} {vals[p]!r}\n")


def default_manifest_path() -> Path:
    """Path of the packaged benchmark-suite manifest."""
    return Path(str(resources.files("csrk").joinpath("data/manifest.csv")))


def load_manifest(path: Source | None = None) -> list[ManifestEntry]:
    """Load the dataset manifest (CSV header: id,name,n,nnz,max,class).

    With no argument the packaged manifest is loaded.  ``n`` and ``nnz``
    are kept in millions exactly as published.  Matrices themselves are not
    fetched; the manifest records what a separately downloaded copy should
    look like.
    """
    if path is None:
        path = default_manifest_path()
    if isinstance(path, (str, Path)):
        with open(path, "r", encoding="ascii", newline="") as handle:
            return _load_manifest_stream(handle)
    return _load_manifest_stream(path)


def _load_manifest_stream(stream: IO[str]) -> list[ManifestEntry]:
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("manifest is missing its header row") from None
    if [h.strip() for h in header] != ["id", "name", "n", "nnz", "max", "class"]:
        raise ValueError("manifest header must be 'id,name,n,nnz,max,class'")
    entries = []
    for row_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 6:
            raise ValueError(f"manifest row {row_no}: expected 6 fields, got {len(row)}")
        mid, name, n, nnz, mx, cls = (f.strip() for f in row)
        if cls not in ("regular", "irregular"):
            raise ValueError(f"manifest row {row_no}: unknown class '{cls}'")
        try:
            entry = ManifestEntry(mid, name, float(n), float(nnz), int(mx), cls)
        except ValueError:
            raise ValueError(f"manifest row {row_no}: malformed numeric field") from None
        entries.append(entry)
    return entries


def write_permutation_file(perm, destination: Source) -> None:
    """Write a permutation as one 0-based integer per line.

    Line i holds the permuted position of original row i (the forward map).
    """
    if isinstance(destination, (str, Path)):
        with open(destination, "w", encoding="ascii") as handle:
            write_permutation_file(perm, handle)
            return
    for v in perm.fwd.tolist():
        destination.write(f"{v}\n")


def read_permutation_file(source: Source):
    """Read a permutation written by :func:`write_permutation_file`."""
    from .format import Permutation

    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="ascii") as handle:
            return read_permutation_file(handle)
    fwd = [int(line) for line in source if line.strip()]
    return Permutation.from_forward(np.asarray(fwd, dtype=np.int64))
