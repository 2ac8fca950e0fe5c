"""
Network views of a fitted interaction matrix.

Edge thresholding is presentation-only: it decides which theta_jj' are
drawn, never what is estimated. The policy and the value used are stamped
into the graph attributes so they travel with the exported file.
"""

import logging
import math
from collections.abc import Mapping
from collections.abc import Sequence
from pathlib import Path
from typing import Any
from typing import Literal

import networkx as nx
import numpy as np

from ising_simreg.exceptions import ConfigurationError
from ising_simreg.exceptions import DimensionMismatchError
from ising_simreg.model import InteractionMatrix
from ising_simreg.model import SimilarityMatrix

logger = logging.getLogger("ising_simreg.graph")

ThresholdPolicy = Literal["median", "none"] | float


def resolve_threshold(theta: InteractionMatrix, threshold: ThresholdPolicy) -> tuple[str, float]:
    """("median", median of off-diagonal theta), ("none", -inf) or ("value", x)."""
    if threshold == "median":
        upper = theta.upper_triangle()
        return "median", float(np.median(upper)) if upper.size else math.inf
    if threshold == "none":
        return "none", -math.inf
    try:
        return "value", float(threshold)
    except (TypeError, ValueError) as e:
        raise ConfigurationError(f"Threshold must be 'median', 'none' or a number, got {threshold!r}") from e


def _top_nodes(theta: InteractionMatrix, m: int) -> list[int]:
    rows, cols = np.triu_indices(theta.dim, k=1)
    order = np.argsort(-theta.values[rows, cols], kind="stable")
    chosen: list[int] = []
    for e in order:
        for node in (int(rows[e]), int(cols[e])):
            if node not in chosen and len(chosen) < m:
                chosen.append(node)
        if len(chosen) >= m:
            break
    return chosen


def build_graph(
    theta: InteractionMatrix,
    labels: Sequence[str] | None = None,
    threshold: ThresholdPolicy = "median",
    node_attributes: Mapping[str, Sequence[Any]] | None = None,
    color_by: str | None = None,
    mark_crossing: Sequence[str] = (),
    top_nodes: int | None = None,
) -> nx.Graph:
    """
    Undirected graph with one node per response and an edge (j, j') of
    weight theta_jj' whenever theta_jj' is strictly above the threshold.

    ``color_by`` names the node attribute copied into ``category``.
    ``mark_crossing`` sets edge attribute ``crossing`` when the endpoints
    differ in every listed attribute. ``top_nodes`` keeps only the nodes of
    the strongest pairs, added pair by pair until that many are collected.
    """
    p = theta.dim
    labels = list(labels) if labels is not None else [f"y{j + 1}" for j in range(p)]
    if len(labels) != p:
        raise DimensionMismatchError(f"{len(labels)} labels for a {p}-node graph")
    node_attributes = dict(node_attributes or {})
    for name, values in node_attributes.items():
        if len(values) != p:
            raise DimensionMismatchError(f"Node attribute '{name}' has {len(values)} values, expected {p}")
    for name in [color_by, *mark_crossing]:
        if name is not None and name not in node_attributes:
            raise ConfigurationError(f"Unknown node attribute '{name}'")

    policy, cut = resolve_threshold(theta, threshold)
    nodes = _top_nodes(theta, top_nodes) if top_nodes is not None else list(range(p))

    graph = nx.Graph(threshold_policy=policy, threshold=cut)
    for j in nodes:
        attributes = {name: _plain(values[j]) for name, values in node_attributes.items()}
        if color_by is not None:
            attributes["category"] = str(node_attributes[color_by][j])
        graph.add_node(labels[j], label=labels[j], main_effect=float(theta.values[j, j]), **attributes)
    for a_pos, a in enumerate(nodes):
        for b in nodes[a_pos + 1 :]:
            weight = float(theta.values[a, b])
            if not weight > cut:
                continue
            edge: dict[str, Any] = {"weight": weight}
            if mark_crossing:
                edge["crossing"] = all(
                    node_attributes[name][a] != node_attributes[name][b] for name in mark_crossing
                )
            graph.add_edge(labels[a], labels[b], **edge)
    logger.info(
        "Graph with %d nodes and %d edges (threshold %s=%.4g)",
        graph.number_of_nodes(),
        graph.number_of_edges(),
        policy,
        cut,
    )
    return graph


def _plain(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, (str, int, float, bool)):
        return value
    return str(value)


def component_graph(
    alpha_k: float, sim: SimilarityMatrix, labels: Sequence[str] | None = None
) -> nx.Graph:
    """The contribution alpha_k W_k of a single similarity, nonzero entries only."""
    p = sim.dim
    labels = list(labels) if labels is not None else [f"y{j + 1}" for j in range(p)]
    graph = nx.Graph(similarity=sim.label, alpha=float(alpha_k))
    graph.add_nodes_from((label, {"label": label}) for label in labels)
    rows, cols = np.nonzero(np.triu(sim.values, k=1))
    for a, b in zip(rows.tolist(), cols.tolist(), strict=True):
        weight = float(alpha_k * sim.values[a, b])
        if weight != 0.0:
            graph.add_edge(labels[a], labels[b], weight=weight)
    return graph


def write_graph(graph: nx.Graph, path: Path, fmt: Literal["graphml", "gexf"] = "graphml") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # GraphML and GEXF have no infinity; the policy attribute says what was meant
    graph = graph.copy()
    for key, value in list(graph.graph.items()):
        if isinstance(value, float) and not math.isfinite(value):
            graph.graph[key] = str(value)
    if fmt == "graphml":
        nx.write_graphml(graph, path)
    elif fmt == "gexf":
        nx.write_gexf(graph, path)
    else:
        raise ConfigurationError(f"Unknown graph format {fmt!r}")
    logger.info("Wrote %s graph to %s", fmt, path)
    return path
