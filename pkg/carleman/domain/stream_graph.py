"""
Grafo dirigido Λ induzido pelo campo de corrente: sinais de (H·ν_{i→j}) nas
interfaces, detecção de laços, nós terminais e atribuição construtiva de raios.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field as dc_field
from enum import Enum
from typing import Iterable

import networkx as nx
import numpy as np

from .errors import ConditionBViolation, InvalidArgument, InvalidState, NoAssignmentExists
from .field import VectorField, sup_norm
from .geometry import Interface, Partition

logger = logging.getLogger(__name__)

__all__ = [
    "DEFAULT_TOL_SIGN_FACTOR",
    "DEFAULT_MAX_DEPTH",
    "SignKind",
    "EdgeSign",
    "StreamGraph",
    "RadiusAssignment",
    "classify_interface_sign",
    "build_graph",
    "graph_from_edges",
    "has_closed_loop",
    "find_loop",
    "terminus_nodes",
    "remove_node",
    "assign_radii",
    "check_radii",
    "reverse_graph_consistent",
]

DEFAULT_TOL_SIGN_FACTOR = 1e-8
DEFAULT_MAX_DEPTH = 50
MIN_INTERFACE_SAMPLES = 16


class SignKind(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    ZERO = "zero"
    INDEFINITE = "indefinite"


@dataclass(frozen=True)
class EdgeSign:
    kind: SignKind
    min: float
    max: float
    witness: tuple[tuple[float, float], tuple[float, float]] | None = None


@dataclass
class StreamGraph:
    """Λ: nós O_i (ids de subdomínio) e arestas Γ_ij com as interfaces que as induzem."""

    digraph: nx.DiGraph
    signs: dict[int, EdgeSign] = dc_field(default_factory=dict)
    tol_sign: float = 0.0

    @property
    def nodes(self) -> list[int]:
        return sorted(self.digraph.nodes)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return sorted(self.digraph.edges)

    def interfaces_of(self, tail: int, head: int) -> list[int]:
        return list(self.digraph.edges[tail, head].get("interfaces", []))

    def outgoing(self, node: int) -> set[int]:
        """J₊(O_i)."""
        return set(self.digraph.successors(node))

    def incoming(self, node: int) -> set[int]:
        """J₋(O_i)."""
        return set(self.digraph.predecessors(node))


@dataclass(frozen=True)
class RadiusAssignment:
    radii: dict[int, float]
    margin: float
    R: float
    H_norm: float
    delta: float
    base: float
    depth: int = 0
    depth_capped: bool = False

    @property
    def r_star(self) -> float:
        return max(self.radii.values()) if self.radii else self.base


# ---------------------------------------------------------------------
# Classificação e construção
# ---------------------------------------------------------------------


def classify_interface_sign(
    field: VectorField, interface: Interface, density: float, tol_sign: float
) -> EdgeSign:
    samples = interface.samples(density)
    if len(samples) < MIN_INTERFACE_SAMPLES:
        raise InvalidArgument(
            f"Interface {interface.id} com {len(samples)} amostras (mínimo {MIN_INTERFACE_SAMPLES})"
        )
    flux = np.einsum("ij,ij->i", field(samples.points), samples.normals)
    lo, hi = float(flux.min()), float(flux.max())
    if lo > tol_sign:
        return EdgeSign(SignKind.POSITIVE, lo, hi)
    if hi < -tol_sign:
        return EdgeSign(SignKind.NEGATIVE, lo, hi)
    if max(abs(lo), abs(hi)) <= tol_sign:
        return EdgeSign(SignKind.ZERO, lo, hi)

    pos = flux > tol_sign
    neg = flux < -tol_sign
    witness = None
    for k in range(flux.size - 1):
        if (pos[k] and neg[k + 1]) or (neg[k] and pos[k + 1]):
            witness = (tuple(samples.points[k]), tuple(samples.points[k + 1]))
            break
    if witness is None:
        witness = (tuple(samples.points[int(np.argmin(flux))]), tuple(samples.points[int(np.argmax(flux))]))
    return EdgeSign(SignKind.INDEFINITE, lo, hi, witness)


def build_graph(
    partition: Partition,
    field: VectorField,
    density: float,
    tol_sign: float | None = None,
    *,
    tol_sign_factor: float = DEFAULT_TOL_SIGN_FACTOR,
) -> StreamGraph:
    if tol_sign is None:
        tol_sign = tol_sign_factor * sup_norm(field, partition.domain, density)

    digraph = nx.DiGraph()
    digraph.add_nodes_from(partition.ids)
    signs: dict[int, EdgeSign] = {}
    for iface in partition.interfaces:
        sign = classify_interface_sign(field, iface, density, tol_sign)
        signs[iface.id] = sign
        if sign.kind is SignKind.INDEFINITE:
            raise ConditionBViolation(
                f"Interface {iface.id} (Ω{iface.i}|Ω{iface.j}) muda de sinal: "
                f"min={sign.min:.3e} max={sign.max:.3e}",
                interface=iface.id,
                witness=sign.witness,
            )
        if iface.area <= 0 or sign.kind is SignKind.ZERO:
            continue
        tail, head = (iface.i, iface.j) if sign.kind is SignKind.POSITIVE else (iface.j, iface.i)
        if digraph.has_edge(tail, head):
            digraph.edges[tail, head]["interfaces"].append(iface.id)
        else:
            digraph.add_edge(tail, head, interfaces=[iface.id])

    logger.info(
        "Grafo de corrente: %d nós, %d arestas (tol_sign=%.3e)",
        digraph.number_of_nodes(),
        digraph.number_of_edges(),
        tol_sign,
    )
    return StreamGraph(digraph, signs, tol_sign)


def graph_from_edges(nodes: Iterable[int], edges: Iterable[tuple[int, int]]) -> StreamGraph:
    digraph = nx.DiGraph()
    digraph.add_nodes_from(nodes)
    for tail, head in edges:
        digraph.add_edge(tail, head, interfaces=[])
    return StreamGraph(digraph)


# ---------------------------------------------------------------------
# Análise do grafo
# ---------------------------------------------------------------------


def has_closed_loop(graph: StreamGraph) -> bool:
    return not nx.is_directed_acyclic_graph(graph.digraph)


def find_loop(graph: StreamGraph) -> list[int]:
    """Nós de um ciclo dirigido (vazio se não houver), começando pelo menor id."""
    try:
        cycle_edges = nx.find_cycle(graph.digraph, orientation="original")
    except nx.NetworkXNoCycle:
        return []
    nodes = [edge[0] for edge in cycle_edges]
    k = nodes.index(min(nodes))
    return nodes[k:] + nodes[:k]


def terminus_nodes(graph: StreamGraph) -> set[int]:
    g = graph.digraph
    return {n for n in g.nodes if g.out_degree(n) == 0 and g.in_degree(n) > 0}


def remove_node(graph: StreamGraph, node: int) -> StreamGraph:
    digraph = graph.digraph.copy()
    digraph.remove_node(node)
    return StreamGraph(digraph, dict(graph.signs), graph.tol_sign)


def assign_radii(
    graph: StreamGraph,
    R: float,
    H_norm: float,
    delta: float,
    margin: float = 0.1,
    *,
    max_depth: int = DEFAULT_MAX_DEPTH,
) -> RadiusAssignment:
    """
    Percorre os nós em ordem topológica (montante antes de jusante) e escolhe
    r_i = max(r_base, max_j sqrt(4 r_j² + 6R²) + margin) sobre as arestas j → i.
    """
    if delta <= 0:
        raise InvalidArgument("δ deve ser positivo")
    if margin <= 0:
        raise InvalidArgument("margin deve ser positiva")
    if has_closed_loop(graph):
        cycle = find_loop(graph)
        raise NoAssignmentExists(
            "Grafo com laço fechado: " + " -> ".join(f"O{n}" for n in [*cycle, cycle[0]]),
            cycle=cycle,
        )

    g = graph.digraph
    base = max(R * H_norm / delta + 1.0, R) + margin
    depth = nx.dag_longest_path_length(g) if g.number_of_edges() else 0
    capped = depth > max_depth
    if capped:
        logger.warning(
            "Caminho dirigido de profundidade %d excede o limite %d; raios crescem como 2^depth",
            depth,
            max_depth,
        )

    radii: dict[int, float] = {}
    for node in nx.topological_sort(g):
        r = base
        for upstream in g.predecessors(node):
            r = max(r, math.sqrt(4.0 * radii[upstream] ** 2 + 6.0 * R**2) + margin)
        if not math.isfinite(r):
            raise InvalidState(f"Raio não finito no nó {node}")
        radii[node] = r
    return RadiusAssignment(dict(sorted(radii.items())), margin, R, H_norm, delta, base, depth, capped)


def check_radii(
    assignment: RadiusAssignment, graph: StreamGraph
) -> tuple[bool, list[tuple[str, int | None, int, float, float]]]:
    """Reavalia r_i² > 4r_j² + 6R² (aresta j → i) e min r_i > max(R‖H‖/δ + 1, R)."""
    violations: list[tuple[str, int | None, int, float, float]] = []
    R = assignment.R
    r = assignment.radii
    floor = max(R * assignment.H_norm / assignment.delta + 1.0, R)
    for node in graph.nodes:
        if node not in r:
            violations.append(("missing", None, node, math.nan, floor))
        elif not r[node] > floor:
            violations.append(("base", None, node, r[node], floor))
    for tail, head in graph.edges:
        if tail not in r or head not in r:
            continue
        lhs = r[head] ** 2
        rhs = 4.0 * r[tail] ** 2 + 6.0 * R**2
        if not lhs > rhs:
            violations.append(("edge", tail, head, lhs, rhs))
    return not violations, violations


def reverse_graph_consistent(
    partition: Partition, field: VectorField, density: float, tol_sign: float | None = None
) -> bool:
    """Trocar H por −H deve inverter todas as arestas de Λ."""
    forward = build_graph(partition, field, density, tol_sign)
    backward = build_graph(partition, field.negated(), density, forward.tol_sign)
    return set(backward.edges) == {(h, t) for t, h in forward.edges}
