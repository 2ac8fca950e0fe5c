import math

import networkx as nx
import numpy as np
import pytest

from ising_simreg.exceptions import ConfigurationError
from ising_simreg.exceptions import DimensionMismatchError
from ising_simreg.graph import build_graph
from ising_simreg.graph import component_graph
from ising_simreg.graph import resolve_threshold
from ising_simreg.graph import write_graph
from ising_simreg.model import InteractionMatrix
from tests.fakes import ring_similarity

LABELS = ["a", "b", "c", "d"]


@pytest.fixture
def theta():
    values = np.array(
        [
            [-1.0, 0.4, 0.1, 0.0],
            [0.4, -0.5, 0.3, 0.2],
            [0.1, 0.3, 0.2, -0.2],
            [0.0, 0.2, -0.2, 0.1],
        ]
    )
    return InteractionMatrix(values)


def test_median_threshold_is_strict(theta):
    """
    GIVEN off-diagonal values 0.4, 0.1, 0.0, 0.3, 0.2, -0.2 (median 0.15)
    WHEN the graph is built with the median policy
    THEN only pairs strictly above the median become edges
    """
    graph = build_graph(theta, LABELS)

    assert graph.graph["threshold_policy"] == "median"
    assert graph.graph["threshold"] == pytest.approx(0.15)
    assert sorted(tuple(sorted(e)) for e in graph.edges) == [("a", "b"), ("b", "c"), ("b", "d")]
    assert graph.edges["a", "b"]["weight"] == pytest.approx(0.4)
    assert graph.nodes["a"]["main_effect"] == -1.0


def test_threshold_policies(theta):
    assert resolve_threshold(theta, "none") == ("none", -math.inf)
    assert resolve_threshold(theta, 0.25) == ("value", 0.25)
    assert build_graph(theta, LABELS, "none").number_of_edges() == 6
    assert build_graph(theta, LABELS, 0.3).number_of_edges() == 1
    with pytest.raises(ConfigurationError):
        resolve_threshold(theta, "mean")


def test_node_attributes_and_crossing_edges(theta):
    attributes = {"sector": ["x", "x", "y", "y"], "size": [1, 2, 3, 4]}

    graph = build_graph(theta, LABELS, "none", attributes, color_by="sector", mark_crossing=["sector"])

    assert graph.nodes["c"]["category"] == "y"
    assert graph.nodes["d"]["size"] == 4
    assert graph.edges["a", "b"]["crossing"] is False
    assert graph.edges["b", "c"]["crossing"] is True


def test_attribute_validation(theta):
    with pytest.raises(DimensionMismatchError):
        build_graph(theta, LABELS, node_attributes={"sector": ["x"]})
    with pytest.raises(ConfigurationError):
        build_graph(theta, LABELS, color_by="missing")
    with pytest.raises(DimensionMismatchError):
        build_graph(theta, ["a", "b"])


def test_top_nodes_keeps_strongest_pairs(theta):
    graph = build_graph(theta, LABELS, "none", top_nodes=3)
    # strongest pairs: (a, b) 0.4 then (b, c) 0.3
    assert set(graph.nodes) == {"a", "b", "c"}


def test_component_graph():
    sim = ring_similarity(4, 1, "ring")

    graph = component_graph(-0.5, sim, LABELS)

    assert graph.number_of_edges() == 4
    assert graph.edges["a", "b"]["weight"] == -0.5
    assert graph.graph["similarity"] == "ring"
    assert component_graph(0.0, sim, LABELS).number_of_edges() == 0


@pytest.mark.parametrize("fmt, reader", [("graphml", nx.read_graphml), ("gexf", nx.read_gexf)])
def test_write_graph_round_trip(tmp_path, theta, fmt, reader):
    """
    GIVEN a graph with an infinite threshold (policy none)
    WHEN it is written in an interchange format
    THEN the file reads back with the same edges and a textual threshold
    """
    graph = build_graph(theta, LABELS, "none")

    path = write_graph(graph, tmp_path / f"theta.{fmt}", fmt)
    restored = reader(path)

    assert restored.number_of_edges() == graph.number_of_edges()
    assert graph.graph["threshold"] == -math.inf
    with pytest.raises(ConfigurationError):
        write_graph(graph, tmp_path / "theta.dot", "dot")
