"""LIBSVM-format datasets, row normalization and single-pass sample streams."""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy import sparse

from .core import SamplePoint, SparseVector

__all__ = [
    "Dataset",
    "LibsvmParseError",
    "SampleStream",
    "export_libsvm",
    "load_libsvm",
    "normalize_rows",
    "parse_libsvm",
    "split_validation",
    "stream_shuffled",
]


class LibsvmParseError(ValueError):
    """Malformed LIBSVM input; carries the 1-based line and column."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


@dataclass
class Dataset:
    """Immutable collection of sparse samples backed by a CSR matrix.

    Parameters
    ----------
    features : scipy.sparse.csr_matrix
        ``(m, n)`` matrix, one sample per row. Explicit zeros are never stored.
    labels : ndarray
        ``(m,)`` real labels; ignored by E-PCA, carries ``b_i`` for phase
        retrieval.
    metadata : dict
        Provenance (``source``, ``normalized``, ...).
    """

    features: sparse.csr_matrix
    labels: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = sparse.csr_matrix(self.features, dtype=np.float64)
        self.features.eliminate_zeros()
        self.features.sort_indices()
        self.labels = np.asarray(self.labels, dtype=np.float64).reshape(-1)
        if self.labels.shape[0] != self.features.shape[0]:
            raise ValueError("labels and features disagree on the number of rows")

    @classmethod
    def from_dense(cls, X, labels=None, **metadata) -> "Dataset":
        X = np.asarray(X, dtype=np.float64)
        if labels is None:
            labels = np.zeros(X.shape[0])
        return cls(sparse.csr_matrix(X), labels, dict(metadata))

    @property
    def dimension(self) -> int:
        return self.features.shape[1]

    @property
    def normalized(self) -> bool:
        return bool(self.metadata.get("normalized", False))

    def __len__(self) -> int:
        return self.features.shape[0]

    def row(self, i: int) -> SamplePoint:
        F = self.features
        lo, hi = F.indptr[i], F.indptr[i + 1]
        vec = SparseVector(F.indices[lo:hi].copy(), F.data[lo:hi].copy(), self.dimension)
        return SamplePoint(vec, float(self.labels[i]))

    @property
    def rows(self) -> list[SamplePoint]:
        return [self.row(i) for i in range(len(self))]

    def dense(self, index=None) -> np.ndarray:
        """Dense copy of all rows, or of the rows selected by ``index``."""
        F = self.features if index is None else self.features[index]
        return F.toarray()

    def subset(self, index) -> "Dataset":
        return Dataset(self.features[index], self.labels[index], dict(self.metadata))

    def with_dimension(self, n: int) -> "Dataset":
        """Widen the logical dimension (trailing all-zero features)."""
        if n < self.dimension:
            raise ValueError(f"cannot shrink dimension {self.dimension} to {n}")
        F = self.features.copy()
        F.resize((F.shape[0], n))
        return Dataset(F, self.labels.copy(), dict(self.metadata))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        a, b = self.features, other.features
        return (
            a.shape == b.shape
            and np.array_equal(a.indptr, b.indptr)
            and np.array_equal(a.indices, b.indices)
            and np.array_equal(a.data, b.data)
            and np.array_equal(self.labels, other.labels)
        )


def _number(token: str, line: int, col: int, what: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise LibsvmParseError(f"non-numeric {what} {token!r}", line, col) from None
    if not np.isfinite(value):
        raise LibsvmParseError(f"non-finite {what} {token!r}", line, col)
    return value


def parse_libsvm(text, dimension: int | None = None, source: str | None = None) -> Dataset:
    """Parse LIBSVM text (``label idx:val idx:val ...``, 1-based indices).

    Parameters
    ----------
    text : str or file-like
        The document. Blank lines are skipped.
    dimension : int, optional
        Override the dimension upward; defaults to the largest index seen.

    Raises
    ------
    LibsvmParseError
        On non-numeric tokens, non-increasing or non-positive indices, or an
        input without a single sample.
    """
    if not isinstance(text, str):
        text = text.read()
    labels, indptr, indices, data = [], [0], [], []
    max_index = 0
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        col = 0
        tokens = []
        for tok in line.split(" "):
            if tok:
                tokens.append((tok, col + 1))
            col += len(tok) + 1
        (label_tok, label_col), rest = tokens[0], tokens[1:]
        if ":" in label_tok:
            raise LibsvmParseError("missing label", lineno, label_col)
        labels.append(_number(label_tok, lineno, label_col, "label"))
        prev = 0
        for tok, c in rest:
            idx_tok, sep, val_tok = tok.partition(":")
            if not sep:
                raise LibsvmParseError(f"expected idx:val, got {tok!r}", lineno, c)
            if not idx_tok.isdigit():
                raise LibsvmParseError(f"bad feature index {idx_tok!r}", lineno, c)
            idx = int(idx_tok)
            if idx < 1:
                raise LibsvmParseError("feature indices are 1-based", lineno, c)
            if idx <= prev:
                raise LibsvmParseError(f"index {idx} not strictly increasing", lineno, c)
            prev = idx
            val = _number(val_tok, lineno, c + len(idx_tok) + 1, "value")
            if val != 0.0:
                indices.append(idx - 1)
                data.append(val)
        max_index = max(max_index, prev)
        indptr.append(len(indices))
    if not labels:
        raise LibsvmParseError("empty input", 1, 1)
    n = max_index if dimension is None else dimension
    if n < max_index:
        raise ValueError(f"dimension {n} smaller than largest index {max_index}")
    F = sparse.csr_matrix(
        (np.asarray(data, dtype=np.float64), np.asarray(indices, dtype=np.int64), np.asarray(indptr)),
        shape=(len(labels), n),
    )
    return Dataset(F, np.asarray(labels), {"source": source, "normalized": False})


def load_libsvm(path, dimension: int | None = None) -> Dataset:
    with open(path, "r", encoding="ascii") as fh:
        return parse_libsvm(fh, dimension=dimension, source=os.fspath(path))


def _fmt(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def export_libsvm(dataset: Dataset, fh=None) -> str:
    """Write ``dataset`` in LIBSVM format; returns the text (and writes to ``fh``)."""
    F = dataset.features
    lines = []
    for i in range(len(dataset)):
        lo, hi = F.indptr[i], F.indptr[i + 1]
        parts = [_fmt(dataset.labels[i])]
        parts.extend(f"{j + 1}:{_fmt(v)}" for j, v in zip(F.indices[lo:hi], F.data[lo:hi]))
        lines.append(" ".join(parts) + "\n")
    text = "".join(lines)
    if fh is not None:
        fh.write(text)
    return text


def normalize_rows(dataset: Dataset) -> Dataset:
    """Scale every row to unit Euclidean norm.

    Raises
    ------
    ValueError
        If a row is identically zero (the message names the row).
    """
    F = dataset.features.copy()
    sq = np.asarray(F.multiply(F).sum(axis=1)).ravel()
    zero = np.flatnonzero(sq == 0.0)
    if zero.size:
        raise ValueError(f"row {int(zero[0])} is zero and cannot be normalized")
    norms = np.sqrt(sq)
    F.data /= np.repeat(norms, np.diff(F.indptr))
    meta = dict(dataset.metadata, normalized=True)
    return Dataset(F, dataset.labels.copy(), meta)


def split_validation(dataset: Dataset, fraction: float = 0.2, seed: int = 0):
    """Seeded random hold-out split; returns ``(train, validation)``."""
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie in (0, 1)")
    perm = np.random.default_rng(seed).permutation(len(dataset))
    n_val = max(1, int(round(fraction * len(dataset))))
    val_idx, train_idx = np.sort(perm[:n_val]), np.sort(perm[n_val:])
    return dataset.subset(train_idx), dataset.subset(val_idx)


class SampleStream:
    """Single pass over a dataset in a fixed (seeded) order.

    Rows are densified one at a time on demand; the dataset itself is never
    copied. ``consumed`` counts successful draws.
    """

    def __init__(self, dataset: Dataset, order: np.ndarray):
        self.dataset = dataset
        self.order = np.asarray(order, dtype=np.int64)
        self.cursor = 0

    def __len__(self) -> int:
        return len(self.order)

    @property
    def consumed(self) -> int:
        return self.cursor

    @property
    def remaining(self) -> int:
        return len(self.order) - self.cursor

    @property
    def exhausted(self) -> bool:
        return self.cursor >= len(self.order)

    def draw(self):
        """Next sample as ``(dense features, label)``, or ``None`` at end of stream."""
        if self.cursor >= len(self.order):
            return None
        i = self.order[self.cursor]
        self.cursor += 1
        F = self.dataset.features
        x = np.zeros(F.shape[1])
        lo, hi = F.indptr[i], F.indptr[i + 1]
        x[F.indices[lo:hi]] = F.data[lo:hi]
        return x, float(self.dataset.labels[i])

    def draw_block(self, m: int):
        """Up to ``m`` next samples as a dense ``(m', n)`` block plus labels."""
        idx = self.order[self.cursor:self.cursor + m]
        self.cursor += len(idx)
        return self.dataset.features[idx].toarray(), self.dataset.labels[idx]

    def __iter__(self) -> Iterator[SamplePoint]:
        while self.cursor < len(self.order):
            i = self.order[self.cursor]
            self.cursor += 1
            yield self.dataset.row(i)


def stream_shuffled(dataset: Dataset, seed) -> SampleStream:
    """Shuffle with a seeded Fisher-Yates permutation and stream each row once."""
    if len(dataset) == 0:
        raise ValueError("cannot stream an empty dataset")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return SampleStream(dataset, rng.permutation(len(dataset)))
