"""Datasets in LIBSVM sparse format, train/validation splits and kernels."""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Union

import numpy as np
import scipy.sparse as sp
from scipy.spatial.distance import cdist


class DataFormatError(ValueError):
    """Raised for malformed LIBSVM input."""


@dataclass(frozen=True)
class Dataset:
    """Labelled instances with sparse (CSR) feature storage.

    ``X`` is an ``n x d`` CSR matrix; column ``j`` holds LIBSVM feature
    index ``j + 1``. For classification every label is -1 or +1.
    """

    X: sp.csr_matrix
    y: np.ndarray
    classification: bool = True
    _grams: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.X.shape[0] != self.y.shape[0]:
            raise ValueError("X and y disagree on the number of instances")
        if self.classification and self.y.size and not np.all(np.abs(self.y) == 1.0):
            raise ValueError("classification labels must be -1 or +1")

    def gram(self, kernel: "KernelSpec") -> np.ndarray:
        """Gram matrix of the instances, computed once per kernel."""
        if kernel not in self._grams:
            self._grams[kernel] = gram_dense(self.dense, kernel)
        return self._grams[kernel]

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @cached_property
    def dense(self) -> np.ndarray:
        return np.asarray(self.X.toarray(), dtype=float)

    def with_dim(self, d: int) -> "Dataset":
        """Return the same data viewed in a feature space of dimension ``d``."""
        if d < self.d:
            raise ValueError(f"cannot shrink dimension {self.d} to {d}")
        if d == self.d:
            return self
        X = sp.csr_matrix((self.X.data, self.X.indices, self.X.indptr), shape=(self.n, d))
        return Dataset(X, self.y, self.classification)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.X[idx], self.y[idx].copy(), self.classification)

    @classmethod
    def from_dense(cls, X, y, classification: bool = True) -> "Dataset":
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return cls(sp.csr_matrix(X), np.asarray(y, dtype=float), classification)


def align(*datasets: Dataset) -> tuple[Dataset, ...]:
    """Pad every dataset to the largest feature dimension among them."""
    d = max(ds.d for ds in datasets)
    return tuple(ds.with_dim(d) for ds in datasets)


def _parse_label(tok: str, lineno: int, classification: bool) -> float:
    try:
        label = float(tok)
    except ValueError:
        raise DataFormatError(f"line {lineno}: bad label {tok!r}") from None
    if not math.isfinite(label):
        raise DataFormatError(f"line {lineno}: non-finite label {tok!r}")
    if classification and label not in (-1.0, 1.0):
        raise DataFormatError(f"line {lineno}: label {tok!r} is not -1 or +1")
    return label


def parse_libsvm(text: Union[str, bytes, Iterable[str]], classification: bool = True) -> Dataset:
    """Parse LIBSVM text ``<label> <idx>:<val> ...`` into a :class:`Dataset`.

    Indices are 1-based and must be strictly ascending within a line. Blank
    lines are skipped. ``d`` is the largest index seen.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    lines = text.splitlines() if isinstance(text, str) else text

    labels, indptr, indices, values = [], [0], [], []
    d = 0
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        toks = line.split()
        labels.append(_parse_label(toks[0], lineno, classification))
        prev = 0
        for tok in toks[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise DataFormatError(f"line {lineno}: expected idx:val, got {tok!r}")
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise DataFormatError(f"line {lineno}: bad feature {tok!r}") from None
            if idx < 1:
                raise DataFormatError(f"line {lineno}: feature index {idx} < 1")
            if idx <= prev:
                kind = "duplicate" if idx == prev else "non-ascending"
                raise DataFormatError(f"line {lineno}: {kind} index {idx}")
            prev = idx
            indices.append(idx - 1)
            values.append(val)
        d = max(d, prev)
        indptr.append(len(indices))

    n = len(labels)
    X = sp.csr_matrix(
        (np.asarray(values, dtype=float), np.asarray(indices, dtype=np.int64), np.asarray(indptr)),
        shape=(n, d),
    )
    return Dataset(X, np.asarray(labels, dtype=float), classification)


def load_libsvm(path, classification: bool = True) -> Dataset:
    with open(path, "rb") as fh:
        return parse_libsvm(fh.read(), classification=classification)


def to_libsvm(ds: Dataset) -> str:
    """Serialize a dataset back to LIBSVM text (``repr`` floats, so lossless)."""
    out = io.StringIO()
    X = ds.X.tocsr()
    X.sort_indices()
    for i in range(ds.n):
        lo, hi = X.indptr[i], X.indptr[i + 1]
        label = ds.y[i]
        if ds.classification:
            head = "+1" if label > 0 else "-1"
        else:
            head = repr(float(label))
        feats = " ".join(f"{j + 1}:{float(v)!r}" for j, v in zip(X.indices[lo:hi], X.data[lo:hi]))
        out.write(f"{head} {feats}".rstrip() + "\n")
    return out.getvalue()


def split(ds: Dataset, fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded shuffle, then cut after ``round(fraction * n)`` instances.

    The cut is clamped to ``[1, n - 1]`` so neither part is empty.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie in (0, 1)")
    if ds.n < 2:
        raise ValueError("need at least 2 instances to split")
    perm = np.random.default_rng(seed).permutation(ds.n)
    cut = min(max(int(math.floor(fraction * ds.n + 0.5)), 1), ds.n - 1)
    return ds.subset(perm[:cut]), ds.subset(perm[cut:])


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "linear"
    gamma: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise ValueError(f"unknown kernel {self.kind!r}")
        if self.kind == "rbf" and not (self.gamma is not None and self.gamma > 0):
            raise ValueError("rbf kernel needs gamma > 0")

    @property
    def linear(self) -> bool:
        return self.kind == "linear"

    @classmethod
    def rbf(cls, gamma: float) -> "KernelSpec":
        return cls("rbf", float(gamma))

    @classmethod
    def default_rbf(cls, d: int) -> "KernelSpec":
        """Gaussian kernel with ``gamma = 1/d``."""
        return cls("rbf", 1.0 / max(d, 1))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "gamma": self.gamma}


def kernel_matrix(A: np.ndarray, B: np.ndarray, kernel: KernelSpec) -> np.ndarray:
    """Cross-kernel ``K[i, j] = K(A[i], B[j])`` for dense point arrays."""
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    if kernel.linear:
        return A @ B.T
    return np.exp(-kernel.gamma * cdist(A, B, "sqeuclidean"))


def kernel_diag(A: np.ndarray, kernel: KernelSpec) -> np.ndarray:
    """``K(a, a)`` for every row of ``A``."""
    A = np.atleast_2d(A)
    if kernel.linear:
        return np.einsum("ij,ij->i", A, A)
    return np.ones(A.shape[0])


def gram_dense(A: np.ndarray, kernel: KernelSpec) -> np.ndarray:
    """Symmetric Gram matrix; the upper triangle is mirrored so ``G == G.T`` exactly."""
    G = kernel_matrix(A, A, kernel)
    if not kernel.linear:
        np.fill_diagonal(G, 1.0)
    upper = np.triu(G)
    G = upper + np.triu(upper, 1).T
    return G


def gram(ds: Dataset, kernel: KernelSpec) -> np.ndarray:
    return ds.gram(kernel)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def gram_to_csv(G: np.ndarray) -> str:
    return "".join(",".join(_fmt(v) for v in row) + "\r\n" for row in G)


def split_to_json(train: Dataset, val: Dataset) -> str:
    """Debug dump of a split as JSON (LIBSVM text per part)."""
    return json.dumps({"train": to_libsvm(train), "val": to_libsvm(val)}, indent=2)
