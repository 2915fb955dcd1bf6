"""Graph and dataset representation, TUDataset ingestion and initial labels."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence

import networkx as nx
import numpy as np

from .exceptions import DatasetFormatError, DatasetLoadError

logger = logging.getLogger(__name__)

Edge = tuple[int, int]


def _canonical_edge(u: int, v: int) -> Edge:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class Graph:
    """An undirected, unweighted graph with integer vertex labels.

    Edges are stored once as ``(u, v)`` with ``u < v``.
    """

    num_vertices: int
    edges: frozenset[Edge]
    vertex_labels: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.num_vertices < 0:
            raise ValueError(f"num_vertices must be >= 0, got {self.num_vertices}")
        if len(self.vertex_labels) != self.num_vertices:
            raise ValueError(
                f"expected {self.num_vertices} vertex labels, got {len(self.vertex_labels)}"
            )
        if any(label < 0 for label in self.vertex_labels):
            raise ValueError("vertex labels must be nonnegative integers")
        for u, v in self.edges:
            if not (0 <= u < self.num_vertices and 0 <= v < self.num_vertices):
                raise ValueError(f"edge ({u}, {v}) is outside [0, {self.num_vertices})")
            if u == v:
                raise ValueError(f"self-loop on vertex {u}")
            if u > v:
                raise ValueError(f"edge ({u}, {v}) is not canonical (expected u < v)")

    @classmethod
    def from_edges(
        cls,
        num_vertices: int,
        edges: Iterable[Edge],
        vertex_labels: Optional[Sequence[int]] = None,
    ) -> Graph:
        """Build a graph from any edge list, deduplicating ``(u, v)``/``(v, u)``.

        When ``vertex_labels`` is omitted every vertex is labelled by its degree.
        """
        canonical = frozenset(_canonical_edge(u, v) for u, v in edges)
        if vertex_labels is None:
            degrees = [0] * num_vertices
            for u, v in canonical:
                if 0 <= u < num_vertices and 0 <= v < num_vertices:
                    degrees[u] += 1
                    degrees[v] += 1
            vertex_labels = degrees
        return cls(num_vertices, canonical, tuple(int(label) for label in vertex_labels))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        """Sorted neighbour lists, one per vertex."""
        neighbours: list[list[int]] = [[] for _ in range(self.num_vertices)]
        for u, v in self.edges:
            neighbours[u].append(v)
            neighbours[v].append(u)
        return tuple(tuple(sorted(n)) for n in neighbours)

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(
            (u, {"label": label}) for u, label in enumerate(self.vertex_labels)
        )
        graph.add_edges_from(sorted(self.edges))
        return graph

    def relabeled(self, vertex_labels: Sequence[int]) -> Graph:
        return Graph(self.num_vertices, self.edges, tuple(int(x) for x in vertex_labels))


def degree_labels(g: Graph) -> list[int]:
    """Label every vertex with its degree."""
    return [len(neighbours) for neighbours in g.adjacency]


@dataclass(frozen=True)
class GraphDataset:
    """An ordered collection of graphs with dense 0-based class labels."""

    graphs: tuple[Graph, ...]
    class_labels: tuple[int, ...]
    num_classes: int
    name: str = "dataset"

    def __post_init__(self) -> None:
        if len(self.graphs) != len(self.class_labels):
            raise ValueError(
                f"{len(self.graphs)} graphs but {len(self.class_labels)} class labels"
            )
        seen = set(self.class_labels)
        if any(not 0 <= c < self.num_classes for c in seen):
            raise ValueError(f"class labels must lie in [0, {self.num_classes})")
        if len(seen) != self.num_classes:
            missing = sorted(set(range(self.num_classes)) - seen)
            raise ValueError(f"classes {missing} have no graphs")

    @classmethod
    def from_graphs(
        cls, graphs: Sequence[Graph], class_labels: Sequence[int], name: str = "dataset"
    ) -> GraphDataset:
        """Build a dataset, remapping arbitrary class labels to 0.. in first-seen order."""
        mapping: dict[int, int] = {}
        dense = tuple(mapping.setdefault(int(c), len(mapping)) for c in class_labels)
        return cls(tuple(graphs), dense, len(mapping), name)

    def __len__(self) -> int:
        return len(self.graphs)

    @property
    def labels(self) -> np.ndarray:
        return np.asarray(self.class_labels, dtype=np.int64)

    def with_degree_labels(self) -> GraphDataset:
        graphs = tuple(g.relabeled(degree_labels(g)) for g in self.graphs)
        return GraphDataset(graphs, self.class_labels, self.num_classes, self.name)

    def subset(self, indices: Sequence[int]) -> GraphDataset:
        return GraphDataset.from_graphs(
            [self.graphs[i] for i in indices],
            [self.class_labels[i] for i in indices],
            self.name,
        )


@dataclass(frozen=True)
class DatasetSummary:
    name: str
    num_graphs: int
    num_classes: int
    max_vertices: int
    mean_vertices: float
    mean_edges: float
    class_counts: tuple[int, ...] = field(default_factory=tuple)


def dataset_summary(d: GraphDataset) -> DatasetSummary:
    """Graph/class counts plus max and mean vertex counts (means to 2 decimals)."""
    if len(d) == 0:
        raise ValueError("cannot summarise an empty dataset")
    vertices = np.array([g.num_vertices for g in d.graphs])
    edges = np.array([g.num_edges for g in d.graphs])
    counts = Counter(d.class_labels)
    return DatasetSummary(
        name=d.name,
        num_graphs=len(d),
        num_classes=d.num_classes,
        max_vertices=int(vertices.max()),
        mean_vertices=round(float(vertices.mean()), 2),
        mean_edges=round(float(edges.mean()), 2),
        class_counts=tuple(counts[c] for c in range(d.num_classes)),
    )


def _read_int_rows(path: Path, width: int) -> Iterator[tuple[int, list[int]]]:
    """Yield ``(line_number, values)`` for every non-blank line of a TUDataset file."""
    with open(path, "rb") as f:
        for lineno, raw in enumerate(f, 1):
            try:
                line = raw.decode("utf-8").strip()
            except UnicodeDecodeError as exc:
                raise DatasetFormatError(path, f"invalid UTF-8: {exc.reason}", lineno) from None
            if not line:
                continue
            try:
                values = [int(token) for token in line.split(",")]
            except ValueError:
                raise DatasetFormatError(
                    path, f"expected comma-separated integers, got {line!r}", lineno
                ) from None
            if len(values) < width:
                raise DatasetFormatError(
                    path, f"expected {width} values per line, got {len(values)}", lineno
                )
            yield lineno, values[:width]


def load_tudataset(
    directory: Path | str, name: str, *, degree_labels: bool = False
) -> GraphDataset:
    """Load a dataset stored in the TUDataset plain-text format.

    Args:
        directory: Folder holding the ``<name>_*.txt`` files.
        name: Dataset prefix, e.g. ``MUTAG``.
        degree_labels: Ignore ``<name>_node_labels.txt`` and label vertices by degree.

    Raises:
        DatasetLoadError: A mandatory file is missing.
        DatasetFormatError: File contents are inconsistent; carries the line number.
    """
    directory = Path(directory)
    paths = {
        kind: directory / f"{name}_{kind}.txt"
        for kind in ("A", "graph_indicator", "graph_labels", "node_labels")
    }
    for kind in ("A", "graph_indicator", "graph_labels"):
        if not paths[kind].is_file():
            raise DatasetLoadError(paths[kind])

    raw_classes = [values[0] for _, values in _read_int_rows(paths["graph_labels"], 1)]
    num_graphs = len(raw_classes)

    # global vertex (0-based) -> (graph index, local index)
    owner: list[tuple[int, int]] = []
    sizes = [0] * num_graphs
    for lineno, (gid,) in _read_int_rows(paths["graph_indicator"], 1):
        if not 1 <= gid <= num_graphs:
            raise DatasetFormatError(
                paths["graph_indicator"],
                f"graph id {gid} outside [1, {num_graphs}] declared by graph labels",
                lineno,
            )
        owner.append((gid - 1, sizes[gid - 1]))
        sizes[gid - 1] += 1
    num_vertices = len(owner)

    edge_sets: list[set[Edge]] = [set() for _ in range(num_graphs)]
    self_loops = 0
    for lineno, (i, j) in _read_int_rows(paths["A"], 2):
        for endpoint in (i, j):
            if not 1 <= endpoint <= num_vertices:
                raise DatasetFormatError(
                    paths["A"], f"vertex {endpoint} outside [1, {num_vertices}]", lineno
                )
        (gi, u), (gj, v) = owner[i - 1], owner[j - 1]
        if gi != gj:
            raise DatasetFormatError(
                paths["A"],
                f"edge ({i}, {j}) joins graph {gi + 1} and graph {gj + 1}",
                lineno,
            )
        if u == v:
            self_loops += 1
            continue
        edge_sets[gi].add(_canonical_edge(u, v))
    if self_loops:
        logger.warning("%s: dropped %d self-loop(s)", paths["A"], self_loops)

    node_labels: Optional[list[int]] = None
    if paths["node_labels"].is_file() and not degree_labels:
        node_labels = []
        for lineno, (label,) in _read_int_rows(paths["node_labels"], 1):
            if label < 0:
                raise DatasetFormatError(
                    paths["node_labels"], f"negative vertex label {label}", lineno
                )
            node_labels.append(label)
        if len(node_labels) != num_vertices:
            raise DatasetFormatError(
                paths["node_labels"],
                f"vertex count mismatch: {len(node_labels)} labels "
                f"for {num_vertices} vertices in {paths['graph_indicator'].name}",
            )

    per_graph_labels: list[list[int]] = [[] for _ in range(num_graphs)]
    if node_labels is not None:
        for (gid, _), label in zip(owner, node_labels):
            per_graph_labels[gid].append(label)

    graphs = [
        Graph.from_edges(
            sizes[gid],
            edge_sets[gid],
            per_graph_labels[gid] if node_labels is not None else None,
        )
        for gid in range(num_graphs)
    ]
    dataset = GraphDataset.from_graphs(graphs, raw_classes, name)
    logger.info(
        "Loaded %s: %d graphs, %d classes, %s vertex labels",
        name,
        len(dataset),
        dataset.num_classes,
        "file" if node_labels is not None else "degree",
    )
    return dataset


def write_tudataset(dataset: GraphDataset, directory: Path | str) -> None:
    """Write ``dataset`` in TUDataset format (1-based, both edge directions listed)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    name = dataset.name

    a_lines: list[str] = []
    indicator_lines: list[str] = []
    label_lines: list[str] = []
    offset = 0
    for gid, g in enumerate(dataset.graphs, 1):
        for u, v in sorted(g.edges):
            a_lines.append(f"{u + offset + 1}, {v + offset + 1}")
            a_lines.append(f"{v + offset + 1}, {u + offset + 1}")
        indicator_lines.extend([str(gid)] * g.num_vertices)
        label_lines.extend(str(label) for label in g.vertex_labels)
        offset += g.num_vertices

    files = {
        "A": a_lines,
        "graph_indicator": indicator_lines,
        "graph_labels": [str(c) for c in dataset.class_labels],
        "node_labels": label_lines,
    }
    for kind, lines in files.items():
        content = "\n".join(lines) + ("\n" if lines else "")
        (directory / f"{name}_{kind}.txt").write_text(content)
