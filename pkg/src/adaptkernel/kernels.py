"""Gram matrices over (weighted) feature rows, kernel embeddings and counting oracles."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .exceptions import DatasetFormatError
from .features import KernelKind, WlVocabulary, relabel_graph, shortest_path_counts
from .graphs import Graph


@dataclass(frozen=True)
class KernelMatrix:
    values: np.ndarray
    kernel_kind: Optional[KernelKind] = None
    adaptive: bool = False

    def __post_init__(self) -> None:
        if self.values.ndim != 2 or self.values.shape[0] != self.values.shape[1]:
            raise ValueError(f"kernel matrix must be square, got shape {self.values.shape}")

    @property
    def size(self) -> int:
        return self.values.shape[0]


def gram(
    Xw: np.ndarray,
    kernel_kind: Optional[KernelKind] = None,
    adaptive: bool = False,
) -> KernelMatrix:
    """``K = Xw @ Xw.T``. Integer input stays integer, so raw counts are exact."""
    Xw = np.asarray(Xw)
    if Xw.ndim != 2:
        raise ValueError(f"expected an N x L matrix, got shape {Xw.shape}")
    if np.issubdtype(Xw.dtype, np.floating) and not np.isfinite(Xw).all():
        raise ValueError("weighted features must be finite")
    return KernelMatrix(Xw @ Xw.T, kernel_kind, adaptive)


def gram_backward(grad_kernel: np.ndarray, Xw: np.ndarray) -> np.ndarray:
    """Gradient with respect to ``Xw`` given ``dLoss/dK``: ``(G + G.T) @ Xw``."""
    return (grad_kernel + grad_kernel.T) @ Xw


def _wl_counts(
    g: Graph, i_max: int, vocabulary: WlVocabulary, *, grow: bool
) -> Counter[tuple[int, int]]:
    counts: Counter[tuple[int, int]] = Counter()
    for iteration, labels in enumerate(relabel_graph(g, i_max, vocabulary, grow=grow)):
        counts.update((iteration, int(label)) for label in labels)
    return counts


def kernel_value_by_counting(
    g_p: Graph,
    g_q: Graph,
    kernel_kind: KernelKind | str,
    i_max: int = 1,
    vocabulary: Optional[WlVocabulary] = None,
) -> int:
    """Count shared substructures of two graphs directly.

    WL sums ``n(G_p, l) * n(G_q, l)`` over the subtree labels of iterations
    ``0..i_max``; SP sums the same product over shortest-path lengths. Passing the
    dataset's ``vocabulary`` makes the lookup read-only.

    Raises:
        ContractViolation: a WL key of either graph is missing from ``vocabulary``.
    """
    kind = KernelKind(kernel_kind)
    if kind is KernelKind.SP:
        cp = shortest_path_counts(g_p)
        cq = shortest_path_counts(g_q)
        shared = min(len(cp), len(cq))
        return int(cp[1:shared] @ cq[1:shared])

    grow = vocabulary is None
    vocabulary = WlVocabulary() if vocabulary is None else vocabulary
    counts_p = _wl_counts(g_p, i_max, vocabulary, grow=grow)
    counts_q = _wl_counts(g_q, i_max, vocabulary, grow=grow)
    return sum(n * counts_q[key] for key, n in counts_p.items())


def embedding_row(K: KernelMatrix, p: int) -> np.ndarray:
    """Embedding of graph ``p``: its kernel values against every dataset graph."""
    if not 0 <= p < K.size:
        raise ValueError(f"graph index {p} outside [0, {K.size})")
    return K.values[p].copy()


def write_gram_matrix(K: KernelMatrix, path: Path | str) -> None:
    """Write ``N`` then ``N`` whitespace-separated rows (precomputed-kernel input)."""
    fmt = "%d" if np.issubdtype(K.values.dtype, np.integer) else "%.17g"
    np.savetxt(path, K.values, fmt=fmt, header=str(K.size), comments="")


def read_gram_matrix(path: Path | str) -> KernelMatrix:
    path = Path(path)
    with open(path, "r", encoding="utf-8") as f:
        first = f.readline().strip()
    try:
        n = int(first)
    except ValueError:
        raise DatasetFormatError(path, f"expected matrix size on the first line, got {first!r}", 1) from None
    values = np.loadtxt(path, dtype=np.float64, skiprows=1, ndmin=2).reshape(n, n)
    return KernelMatrix(values)
