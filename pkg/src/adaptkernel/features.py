"""Substructure invariants: WL subtree labels, shortest-path lengths, feature matrices."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Hashable, Optional

import networkx as nx
import numpy as np

from .exceptions import ContractViolation, DatasetFormatError
from .graphs import Graph, GraphDataset

logger = logging.getLogger(__name__)

UNREACHABLE = np.inf


class KernelKind(str, Enum):
    WL = "wl"
    SP = "sp"


@dataclass
class WlVocabulary:
    """Per-iteration dictionaries compressing WL keys to consecutive integers.

    Iteration 0 keys are the raw vertex labels; later keys are
    ``(previous label, sorted neighbour labels)``. Labels are handed out in
    first-seen order and are shared by every graph of the dataset.
    """

    maps: list[dict[Hashable, int]] = field(default_factory=list)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(m) for m in self.maps)

    @property
    def num_iterations(self) -> int:
        return len(self.maps) - 1

    def compress(self, iteration: int, key: Hashable, *, grow: bool = True) -> int:
        while len(self.maps) <= iteration:
            if not grow:
                raise ContractViolation(f"vocabulary has no iteration {iteration}")
            self.maps.append({})
        table = self.maps[iteration]
        label = table.get(key)
        if label is None:
            if not grow:
                raise ContractViolation(
                    f"WL key {key!r} at iteration {iteration} is not in the vocabulary"
                )
            label = len(table)
            table[key] = label
        return label


def relabel_graph(
    g: Graph, i_max: int, vocabulary: WlVocabulary, *, grow: bool
) -> list[np.ndarray]:
    current = np.array(
        [vocabulary.compress(0, label, grow=grow) for label in g.vertex_labels], dtype=np.int64
    )
    history = [current]
    for iteration in range(1, i_max + 1):
        previous = history[-1]
        current = np.array(
            [
                vocabulary.compress(
                    iteration,
                    (int(previous[u]), tuple(sorted(int(previous[v]) for v in neighbours))),
                    grow=grow,
                )
                for u, neighbours in enumerate(g.adjacency)
            ],
            dtype=np.int64,
        )
        history.append(current)
    return history


def wl_relabel_dataset(
    d: GraphDataset, i_max: int
) -> tuple[list[list[np.ndarray]], WlVocabulary]:
    """Run ``i_max`` WL refinements over the whole dataset.

    Returns ``labels[graph][iteration]`` (iteration 0 included) and the vocabulary.
    The dataset is processed graph by graph, iteration by iteration, so that
    labels are identical for identical inputs.
    """
    if i_max < 0:
        raise ValueError(f"i_max must be >= 0, got {i_max}")
    vocabulary = WlVocabulary(maps=[{} for _ in range(i_max + 1)])
    # each iteration has its own table, so graph-major traversal keeps
    # first-seen order equal to graph order within every iteration
    per_graph = [relabel_graph(g, i_max, vocabulary, grow=True) for g in d.graphs]
    logger.debug("WL vocabulary sizes per iteration: %s", vocabulary.sizes)
    return per_graph, vocabulary


@dataclass(frozen=True)
class FeatureMatrix:
    """Dataset-level substructure count matrix, one row per graph."""

    values: np.ndarray
    feature_ids: tuple[str, ...]
    kernel_kind: KernelKind
    wl_iterations: Optional[int] = None

    def __post_init__(self) -> None:
        if self.values.ndim != 2:
            raise ValueError(f"feature matrix must be 2-D, got shape {self.values.shape}")
        if not np.issubdtype(self.values.dtype, np.integer):
            raise ValueError(f"feature counts must be integers, got {self.values.dtype}")
        if self.values.size and self.values.min() < 0:
            raise ValueError("feature counts must be nonnegative")
        if len(self.feature_ids) != self.values.shape[1]:
            raise ValueError(
                f"{len(self.feature_ids)} feature ids for {self.values.shape[1]} columns"
            )

    @property
    def num_graphs(self) -> int:
        return self.values.shape[0]

    @property
    def num_features(self) -> int:
        return self.values.shape[1]

    def as_float(self) -> np.ndarray:
        return self.values.astype(np.float64)


def wl_feature_matrix(d: GraphDataset, i_max: int) -> FeatureMatrix:
    """Count every compressed WL label of iterations ``0..i_max`` per graph."""
    labels, vocabulary = wl_relabel_dataset(d, i_max)
    sizes = vocabulary.sizes
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    values = np.zeros((len(d), int(offsets[-1])), dtype=np.int64)
    for r, history in enumerate(labels):
        for iteration, compressed in enumerate(history):
            block = np.bincount(compressed, minlength=sizes[iteration])
            values[r, offsets[iteration] : offsets[iteration + 1]] = block
    feature_ids = tuple(
        f"wl:{iteration}:{label}"
        for iteration, size in enumerate(sizes)
        for label in range(size)
    )
    return FeatureMatrix(values, feature_ids, KernelKind.WL, wl_iterations=i_max)


def floyd_shortest_paths(g: Graph) -> np.ndarray:
    """All-pairs unweighted shortest-path lengths; unreachable pairs are ``inf``."""
    if g.num_vertices == 0:
        return np.zeros((0, 0))
    return np.asarray(
        nx.floyd_warshall_numpy(g.to_networkx(), nodelist=range(g.num_vertices)),
        dtype=np.float64,
    )


def shortest_path_counts(g: Graph) -> np.ndarray:
    """``counts[j]`` = number of unordered vertex pairs at distance ``j`` (``counts[0]`` is 0)."""
    distances = floyd_shortest_paths(g)
    upper = distances[np.triu_indices(g.num_vertices, k=1)]
    finite = upper[np.isfinite(upper)].astype(np.int64)
    return np.bincount(finite, minlength=1)


def sp_feature_matrix(d: GraphDataset) -> FeatureMatrix:
    """Histogram of shortest-path lengths ``1..|S|`` per graph, ``|S|`` over the dataset."""
    per_graph = [shortest_path_counts(g) for g in d.graphs]
    longest = max((len(c) - 1 for c in per_graph), default=0)
    values = np.zeros((len(d), longest), dtype=np.int64)
    for r, counts in enumerate(per_graph):
        values[r, : len(counts) - 1] = counts[1:]
    feature_ids = tuple(f"sp:{length}" for length in range(1, longest + 1))
    return FeatureMatrix(values, feature_ids, KernelKind.SP)


def build_feature_matrix(
    d: GraphDataset, kernel_kind: KernelKind | str, wl_iterations: int = 1
) -> FeatureMatrix:
    kind = KernelKind(kernel_kind)
    if kind is KernelKind.WL:
        return wl_feature_matrix(d, wl_iterations)
    return sp_feature_matrix(d)


def write_feature_matrix(fm: FeatureMatrix, path: Path | str) -> None:
    """Write ``N L kind [i_max]``, the feature ids, then one whitespace-separated row per graph."""
    header = f"{fm.num_graphs} {fm.num_features} {fm.kernel_kind.value}"
    if fm.wl_iterations is not None:
        header += f" {fm.wl_iterations}"
    header += "\n" + " ".join(fm.feature_ids)
    np.savetxt(path, fm.values, fmt="%d", header=header, comments="")


def read_feature_matrix(path: Path | str) -> FeatureMatrix:
    path = Path(path)
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().split()
        feature_ids = tuple(f.readline().split())
    if len(header) not in (3, 4):
        raise DatasetFormatError(path, "expected header 'N L kind [i_max]'", 1)
    try:
        n, num_features = int(header[0]), int(header[1])
        kind = KernelKind(header[2])
        i_max = int(header[3]) if len(header) == 4 else None
    except ValueError as exc:
        raise DatasetFormatError(path, f"bad header: {exc}", 1) from None
    if len(feature_ids) != num_features:
        raise DatasetFormatError(
            path, f"{len(feature_ids)} feature ids for {num_features} columns", 2
        )
    values = np.loadtxt(path, dtype=np.int64, skiprows=2, ndmin=2).reshape(n, num_features)
    return FeatureMatrix(values, feature_ids, kind, wl_iterations=i_max)
