"""
Directed Communication Topology

Agents are numbered 1..N. An edge (from, to) means agent `to` receives the
state of agent `from`, so `from` belongs to the in-neighbor set N_to used by
the control law. Only binary adjacency weights are supported.
"""

import logging
from collections import deque
from dataclasses import dataclass
from typing import FrozenSet, Iterable, List, Sequence, Tuple

import numpy as np

from errors import GraphStructureError
from numlin import numerical_rank

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]


@dataclass(frozen=True)
class DirectedGraph:
    """Agent count plus the set of information-flow edges (from, to)"""
    agent_count: int
    edges: FrozenSet[Edge]

    def __post_init__(self):
        if self.agent_count < 1:
            raise GraphStructureError(f"agent_count must be >= 1, got {self.agent_count}")
        for source, target in self.edges:
            if not (1 <= source <= self.agent_count and 1 <= target <= self.agent_count):
                raise GraphStructureError(
                    f"edge ({source}, {target}) references an agent outside [1, {self.agent_count}]")
            if source == target:
                raise GraphStructureError(f"self-loop ({source}, {target}) is not allowed")

    def sorted_edges(self) -> List[Edge]:
        """Edges in a deterministic (to, from) order"""
        return sorted(self.edges, key=lambda edge: (edge[1], edge[0]))


@dataclass(frozen=True)
class SpanningTreeResult:
    """Verdict of the spanning-tree search plus every valid root"""
    exists: bool
    roots: FrozenSet[int]

    def __bool__(self) -> bool:
        return self.exists


@dataclass(frozen=True)
class ConsensusWeights:
    """Left fixed vector xi of the averaging matrix, nonnegative, summing to 1"""
    xi: np.ndarray
    iterations: int
    residual: float


def from_edges(agent_count: int, edges: Iterable[Sequence[int]]) -> DirectedGraph:
    """
    Build a graph from (from, to) pairs, rejecting duplicates.

    Args:
        agent_count: Number of agents N
        edges: Iterable of 1-based (from, to) pairs

    Returns:
        Validated DirectedGraph
    """
    seen = set()
    for edge in edges:
        if len(edge) != 2:
            raise GraphStructureError(f"edge {edge!r} must have exactly two endpoints")
        pair = (int(edge[0]), int(edge[1]))
        if pair in seen:
            raise GraphStructureError(f"duplicate edge {pair}")
        seen.add(pair)
    return DirectedGraph(int(agent_count), frozenset(seen))


def directed_ring(agent_count: int) -> DirectedGraph:
    """Ring 1->2->...->N->1; each agent listens to its predecessor"""
    if agent_count == 1:
        return DirectedGraph(1, frozenset())
    return from_edges(agent_count, [(i, i % agent_count + 1) for i in range(1, agent_count + 1)])


def star(agent_count: int, root: int = 1) -> DirectedGraph:
    """Root broadcasts to every other agent"""
    return from_edges(agent_count, [(root, i) for i in range(1, agent_count + 1) if i != root])


def complete(agent_count: int) -> DirectedGraph:
    """Every agent listens to every other agent"""
    return from_edges(agent_count, [(j, i) for i in range(1, agent_count + 1)
                                    for j in range(1, agent_count + 1) if i != j])


def _check_index(G: DirectedGraph, i: int) -> None:
    if not 1 <= i <= G.agent_count:
        raise IndexError(f"agent index {i} outside [1, {G.agent_count}]")


def in_neighbors(G: DirectedGraph, i: int) -> FrozenSet[int]:
    """N_i: agents whose state agent i uses in its control law"""
    _check_index(G, i)
    return frozenset(source for source, target in G.edges if target == i)


def neighbor_lists(G: DirectedGraph) -> List[List[int]]:
    """Sorted in-neighbor lists for agents 1..N (index 0 is agent 1)"""
    lists: List[List[int]] = [[] for _ in range(G.agent_count)]
    for source, target in G.edges:
        lists[target - 1].append(source)
    return [sorted(entries) for entries in lists]


def laplacian(G: DirectedGraph) -> np.ndarray:
    """L with l_ii = |N_i| and l_ij = -1 for j in N_i"""
    N = G.agent_count
    L = np.zeros((N, N))
    for source, target in G.edges:
        L[target - 1, source - 1] = -1.0
        L[target - 1, target - 1] += 1.0
    return L


def laplacian_rank(G: DirectedGraph) -> int:
    """Numerical rank of L (N - 1 exactly when a spanning tree exists)"""
    return numerical_rank(laplacian(G))


def _reachable_from(root: int, successors: List[List[int]]) -> int:
    visited = {root}
    queue = deque([root])
    while queue:
        node = queue.popleft()
        for nxt in successors[node - 1]:
            if nxt not in visited:
                visited.add(nxt)
                queue.append(nxt)
    return len(visited)


def has_spanning_tree(G: DirectedGraph) -> SpanningTreeResult:
    """
    Search for roots whose state propagates to every agent.

    Runs one breadth-first traversal per candidate root along the
    information-flow direction, O(N (N + |E|)).
    """
    successors: List[List[int]] = [[] for _ in range(G.agent_count)]
    for source, target in G.sorted_edges():
        successors[source - 1].append(target)

    roots = frozenset(r for r in range(1, G.agent_count + 1)
                      if _reachable_from(r, successors) == G.agent_count)
    return SpanningTreeResult(exists=bool(roots), roots=roots)


def averaging_matrix(G: DirectedGraph) -> np.ndarray:
    """
    Row-stochastic I - N L.

    Row i carries 1/(|N_i|+1) on agent i and on each in-neighbor; it is
    assembled directly rather than by subtracting from the identity.
    """
    N = G.agent_count
    P = np.zeros((N, N))
    for i, sources in enumerate(neighbor_lists(G)):
        weight = 1.0 / (len(sources) + 1)
        P[i, i] = weight
        for j in sources:
            P[i, j - 1] = weight
    return P


def consensus_weights(G: DirectedGraph, tol: float = 1e-12,
                      max_iterations: int = 10000) -> ConsensusWeights:
    """
    Left fixed vector xi of I - N L by power iteration on its transpose.

    Raises:
        GraphStructureError: the graph has no directed spanning tree
    """
    if not has_spanning_tree(G):
        raise GraphStructureError(
            "consensus weights need a directed spanning tree (Assumption 1)")

    PT = averaging_matrix(G).T
    N = G.agent_count
    xi = np.full(N, 1.0 / N)
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        nxt = PT @ xi
        nxt /= nxt.sum()
        change = float(np.max(np.abs(nxt - xi)))
        xi = nxt
        if change <= tol:
            break
    else:
        logger.warning("power iteration stopped at %d iterations without reaching %.1e",
                       max_iterations, tol)

    residual = float(np.linalg.norm(PT @ xi - xi))
    logger.debug("consensus weights converged in %d iterations (residual %.2e)", iterations, residual)
    xi.setflags(write=False)
    return ConsensusWeights(xi=xi, iterations=iterations, residual=residual)


def off_consensus_radius(G: DirectedGraph) -> float:
    """
    Spectral radius of I - N L off the consensus eigenvector.

    Computed as the spectral radius of (I - N L) - 1 xi^T, which keeps every
    eigenvalue of I - N L except the simple eigenvalue 1 (sent to 0).
    """
    weights = consensus_weights(G)
    P = averaging_matrix(G)
    deflated = P - np.outer(np.ones(G.agent_count), weights.xi)
    return float(np.max(np.abs(np.linalg.eigvals(deflated))))
