"""Reading, writing, and lookup of word/entity embedding tables.

Two on-disk formats are supported:

* binary (word2vec-compatible): an ASCII header line ``"<count> <dim>\\n"``
  followed by ``count`` entries of ``label bytes, 0x20, dim little-endian
  float32``.  A single 0x0A after an entry is tolerated on read; writes never
  emit it, so round-trips are byte-identical for files in that canonical
  form.
* text: one ``"<label> v1 v2 ... vd"`` line per entry, floats printed with 9
  significant digits (enough to round-trip float32 exactly).

Labels are raw bytes apart from 0x20/0x0A; they are decoded with
surrogateescape so arbitrary dump artifacts survive a load/save cycle.
Tables are immutable after construction and safe for concurrent reads.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, NamedTuple, Optional

import numpy as np

from .errors import (
    DuplicateLabelError,
    FormatError,
    MissingLabelError,
    NonFiniteError,
    TruncatedError,
)

_F32 = np.dtype("<f4")


class VectorRef(NamedTuple):
    """A labelled, read-only view into an embedding table row."""

    label: str
    values: np.ndarray


class EmbeddingTable:
    """Named dense vectors of a fixed dimension, in insertion order."""

    def __init__(self, dim: int, labels: Iterable[str] = (), matrix: Optional[np.ndarray] = None):
        if int(dim) < 1:
            raise ValueError(f"dimension must be positive, got {dim}")
        self.dim = int(dim)
        labels = list(labels)
        if matrix is None:
            matrix = np.empty((0, self.dim), dtype=_F32)
        matrix = np.ascontiguousarray(matrix, dtype=_F32)
        if matrix.shape != (len(labels), self.dim):
            raise ValueError(
                f"matrix shape {matrix.shape} does not match "
                f"{len(labels)} labels of dimension {self.dim}"
            )
        if not np.isfinite(matrix).all():
            bad = int(np.argwhere(~np.isfinite(matrix).all(axis=1))[0, 0])
            raise NonFiniteError(f"non-finite value in vector for label {labels[bad]!r}")
        index: dict[str, int] = {}
        for i, label in enumerate(labels):
            if not label:
                raise FormatError("empty label")
            if label in index:
                raise DuplicateLabelError(f"duplicate label {label!r}")
            index[label] = i
        self.labels = labels
        self.matrix = matrix
        self.matrix.flags.writeable = False
        self._index = index

    @classmethod
    def from_pairs(cls, pairs, dim: Optional[int] = None) -> "EmbeddingTable":
        labels, rows = [], []
        for label, values in pairs:
            labels.append(label)
            rows.append(np.asarray(values, dtype=np.float64))
        if dim is None:
            if not rows:
                raise ValueError("cannot infer dimension from an empty table")
            dim = len(rows[0])
        for label, row in zip(labels, rows):
            if row.shape != (dim,):
                raise FormatError(f"vector for {label!r} has length {row.size}, expected {dim}")
        matrix = np.array(rows, dtype=_F32).reshape(len(rows), dim)
        return cls(dim, labels, matrix)

    def __len__(self) -> int:
        return len(self.labels)

    def __contains__(self, label) -> bool:
        return label in self._index

    def __iter__(self):
        return iter(self.labels)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingTable):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.labels == other.labels
            and np.array_equal(self.matrix, other.matrix)
        )

    def __repr__(self) -> str:
        return f"EmbeddingTable(entries={len(self)}, dim={self.dim})"

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise MissingLabelError(f"label {label!r} not in table") from None

    def lookup(self, label: str) -> Optional[VectorRef]:
        i = self._index.get(label)
        if i is None:
            return None
        return VectorRef(label, self.matrix[i])

    def vector(self, label: str) -> np.ndarray:
        """Row for ``label``; raises MissingLabelError when absent."""
        return self.matrix[self.index(label)]

    def normalized(self) -> "EmbeddingTable":
        """Copy with L2-normalized rows; zero rows are left untouched."""
        m = self.matrix.astype(np.float64)
        norms = np.linalg.norm(m, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        return EmbeddingTable(self.dim, list(self.labels), (m / norms).astype(_F32))


def lookup(table: EmbeddingTable, label: str) -> Optional[VectorRef]:
    """Exact-match lookup; absent labels yield None, not an error."""
    return table.lookup(label)


def _decode_label(raw: bytes) -> str:
    return raw.decode("utf-8", errors="surrogateescape")


def _encode_label(label: str) -> bytes:
    raw = label.encode("utf-8", errors="surrogateescape")
    if not raw:
        raise FormatError("empty label")
    if b" " in raw or b"\n" in raw:
        raise FormatError(f"label {label!r} contains whitespace")
    return raw


def load_binary(path, normalize: bool = False) -> EmbeddingTable:
    """Load a word2vec-style binary embedding file."""
    buf = Path(path).read_bytes()
    nl = buf.find(b"\n")
    if nl < 0:
        raise FormatError("missing header line", path=path)
    try:
        header = buf[:nl].decode("ascii")
    except UnicodeDecodeError:
        raise FormatError("header is not ASCII", path=path) from None
    parts = header.split(" ")
    if len(parts) != 2 or not all(p.isdigit() for p in parts):
        raise FormatError(f"malformed header {header!r}", path=path)
    count, dim = int(parts[0]), int(parts[1])
    if dim < 1:
        raise FormatError(f"dimension must be positive, got {dim}", path=path)

    vec_bytes = dim * 4
    labels: list[str] = []
    matrix = np.empty((count, dim), dtype=_F32)
    pos = nl + 1
    for i in range(count):
        sp = buf.find(b" ", pos)
        if sp < 0:
            raise TruncatedError(f"file ends inside entry {i}", path=path)
        raw = buf[pos:sp]
        if not raw:
            raise FormatError(f"empty label in entry {i}", path=path)
        if b"\n" in raw:
            raise FormatError(f"label in entry {i} contains a newline", path=path)
        end = sp + 1 + vec_bytes
        if end > len(buf):
            raise TruncatedError(f"file ends inside vector of entry {i}", path=path)
        matrix[i] = np.frombuffer(buf, dtype=_F32, count=dim, offset=sp + 1)
        labels.append(_decode_label(raw))
        pos = end
        # entries may carry a single trailing newline
        if pos < len(buf) and buf[pos] == 0x0A:
            pos += 1
    if pos != len(buf):
        raise FormatError(f"{len(buf) - pos} trailing bytes after last entry", path=path)

    seen: set[str] = set()
    for label in labels:
        if label in seen:
            raise DuplicateLabelError(f"duplicate label {label!r}")
        seen.add(label)
    if not np.isfinite(matrix).all():
        bad = int(np.argwhere(~np.isfinite(matrix).all(axis=1))[0, 0])
        raise NonFiniteError(f"non-finite value in vector for label {labels[bad]!r}")

    table = EmbeddingTable(dim, labels, matrix)
    return table.normalized() if normalize else table


def save_binary(table: EmbeddingTable, path) -> None:
    """Write the canonical binary form (no per-entry newlines)."""
    pieces = [f"{len(table)} {table.dim}\n".encode("ascii")]
    for i, label in enumerate(table.labels):
        pieces.append(_encode_label(label))
        pieces.append(b" ")
        pieces.append(table.matrix[i].tobytes())
    Path(path).write_bytes(b"".join(pieces))


def load_text(path, dim: Optional[int] = None, normalize: bool = False) -> EmbeddingTable:
    """Load a one-entry-per-line text embedding file."""
    labels: list[str] = []
    rows: list[np.ndarray] = []
    with open(path, "r", encoding="utf-8", errors="surrogateescape") as fh:
        for line_no, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            label, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
                if dim == 0:
                    raise FormatError("entry has no values", path=path, line=line_no)
            if len(values) != dim:
                raise FormatError(
                    f"ragged row: {len(values)} values, expected {dim}",
                    path=path,
                    line=line_no,
                )
            try:
                rows.append(np.array([float(v) for v in values], dtype=_F32))
            except ValueError:
                raise FormatError("unparseable float", path=path, line=line_no) from None
            labels.append(label)
    if dim is None:
        raise FormatError("empty text table and no dimension given", path=path)
    matrix = np.array(rows, dtype=_F32).reshape(len(rows), dim)
    table = EmbeddingTable(dim, labels, matrix)
    return table.normalized() if normalize else table


def save_text(table: EmbeddingTable, path) -> None:
    """Write the text form with 9 significant digits per component."""
    with open(path, "w", encoding="utf-8", errors="surrogateescape") as fh:
        for i, label in enumerate(table.labels):
            _encode_label(label)  # same charset rule as the binary format
            values = " ".join(format(float(v), ".9g") for v in table.matrix[i])
            fh.write(f"{label} {values}\n")


def load_table(path, normalize: bool = False) -> EmbeddingTable:
    """Dispatch on extension: .txt/.tsv load as text, everything else binary."""
    suffix = Path(path).suffix.lower()
    if suffix in (".txt", ".tsv", ".text"):
        return load_text(path, normalize=normalize)
    return load_binary(path, normalize=normalize)


def save_table(table: EmbeddingTable, path) -> None:
    suffix = Path(path).suffix.lower()
    if suffix in (".txt", ".tsv", ".text"):
        save_text(table, path)
    else:
        save_binary(table, path)
