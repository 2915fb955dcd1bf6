"""Shared graph fixtures."""

import os
from pathlib import Path

import networkx as nx
import pytest

from adaptkernel.config import DATA_ROOT_ENV
from adaptkernel.graphs import Graph, GraphDataset


def _from_networkx(graph: nx.Graph) -> Graph:
    return Graph.from_edges(graph.number_of_nodes(), graph.edges())


@pytest.fixture
def k3() -> Graph:
    return Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def p3() -> Graph:
    return Graph.from_edges(3, [(0, 1), (1, 2)])


@pytest.fixture
def single_vertex() -> Graph:
    return Graph.from_edges(1, [])


@pytest.fixture
def triangle_dataset() -> GraphDataset:
    """Twenty tiny graphs; class 1 graphs contain a triangle, class 0 graphs are paths."""
    graphs = []
    labels = []
    for i in range(10):
        graphs.append(_from_networkx(nx.cycle_graph(3)))
        labels.append(1)
        graphs.append(_from_networkx(nx.path_graph(3)))
        labels.append(0)
    return GraphDataset.from_graphs(graphs, labels, name="TRIANGLES")


@pytest.fixture
def random_graphs() -> list[Graph]:
    """Seeded Erdos-Renyi graphs with at most 10 vertices, some disconnected."""
    graphs = []
    for seed in range(50):
        n = 1 + seed % 10
        graphs.append(_from_networkx(nx.gnp_random_graph(n, 0.35, seed=seed)))
    return graphs


def write_text_files(directory: Path, name: str, files: dict[str, str]) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    for kind, content in files.items():
        (directory / f"{name}_{kind}.txt").write_text(content)
    return directory


@pytest.fixture
def dataset_files(tmp_path):
    """Factory writing ``{kind: content}`` as ``<name>_<kind>.txt`` under ``tmp_path/name``."""

    def write(name: str, files: dict[str, str]) -> Path:
        return write_text_files(tmp_path / name, name, files)

    return write


@pytest.fixture
def tiny_tudataset(tmp_path) -> Path:
    """Hand-written two-graph TUDataset: a triangle (vertices 1-3) and a path (4-6)."""
    return write_text_files(
        tmp_path / "TINY",
        "TINY",
        {
            "A": "1, 2\n2, 1\n2, 3\n3, 2\n1, 3\n3, 1\n4, 5\n5, 4\n5, 6\n6, 5\n",
            "graph_indicator": "1\n1\n1\n2\n2\n2\n",
            "graph_labels": "1\n-1\n",
        },
    )


@pytest.fixture
def mutag_dir() -> Path:
    root = Path(os.environ.get(DATA_ROOT_ENV, "datasets"))
    if not (root / "MUTAG" / "MUTAG_A.txt").is_file():
        pytest.skip(f"MUTAG not found under {root}")
    return root / "MUTAG"
