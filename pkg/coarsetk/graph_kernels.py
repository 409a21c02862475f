"""
Exact n-colorability of conflict graphs.

Splitting a point set into n parts of bounded diameter is an n-coloring of
the graph whose edges join points that are too far apart. Components are
colored independently; two colors are decided by bipartiteness and three or
more by DSATUR backtracking under a node budget.
"""

import logging
from typing import Dict, Hashable, Optional

import networkx as nx

from coarsetk.config import DEFAULT_COLORING_BUDGET
from coarsetk.errors import BudgetExceeded

logger = logging.getLogger(__name__)

Coloring = Dict[Hashable, int]

# recursion depth of the backtracking search equals the component size
MAX_SEARCH_DEPTH = 800


class _NodeCounter:
    def __init__(self, budget: int):
        self.budget = budget
        self.used = 0

    def tick(self):
        self.used += 1
        if self.used > self.budget:
            raise BudgetExceeded(f"coloring search exceeded the budget of {self.budget} nodes")


def _dsatur_backtrack(graph: nx.Graph, n: int, counter: _NodeCounter) -> Optional[Coloring]:
    adjacency = {v: set(graph.neighbors(v)) for v in graph.nodes()}
    colors: Coloring = {}
    # neighbor colors seen by each uncolored vertex
    seen: Dict[Hashable, Dict[int, int]] = {v: {} for v in graph.nodes()}

    def pick():
        best, best_key = None, None
        for v in adjacency:
            if v in colors:
                continue
            key = (len(seen[v]), len(adjacency[v]), -hash_order[v])
            if best_key is None or key > best_key:
                best, best_key = v, key
        return best

    hash_order = {v: i for i, v in enumerate(sorted(graph.nodes()))}

    def assign(v, color, sign):
        for u in adjacency[v]:
            tally = seen[u]
            tally[color] = tally.get(color, 0) + sign
            if tally[color] == 0:
                del tally[color]

    def search(used: int) -> bool:
        counter.tick()
        v = pick()
        if v is None:
            return True
        # a fresh color beyond ``used`` is interchangeable with any other fresh one
        for color in range(min(used + 1, n)):
            if color in seen[v]:
                continue
            colors[v] = color
            assign(v, color, 1)
            if search(max(used, color + 1)):
                return True
            assign(v, color, -1)
            del colors[v]
        return False

    return dict(colors) if search(0) else None


def n_coloring(graph: nx.Graph, n: int, budget: Optional[int] = None) -> Optional[Coloring]:
    """
    Find a proper coloring with at most ``n`` colors.

    Args:
        graph: conflict graph
        n: number of colors
        budget: search nodes allowed for the backtracking solver

    Returns:
        Mapping node -> color in ``range(n)``, or None if no such coloring exists

    Raises:
        BudgetExceeded: if the exact search for n >= 3 runs out of nodes
    """
    if n < 1:
        raise ValueError(f"number of colors must be positive, got {n}")
    if graph.number_of_nodes() == 0:
        return {}
    if graph.number_of_edges() == 0:
        return {v: 0 for v in graph.nodes()}
    if n == 1:
        return None
    if n == 2:
        if not nx.is_bipartite(graph):
            return None
        return {v: int(c) for v, c in nx.bipartite.color(graph).items()}
    if graph.number_of_nodes() <= n:
        return {v: i for i, v in enumerate(sorted(graph.nodes()))}

    counter = _NodeCounter(budget if budget is not None else DEFAULT_COLORING_BUDGET)
    coloring: Coloring = {}
    for component in sorted(nx.connected_components(graph), key=min):
        sub = graph.subgraph(component)
        greedy = nx.greedy_color(sub, strategy="saturation_largest_first")
        if max(greedy.values()) < n:
            coloring.update(greedy)
            continue
        if len(component) > MAX_SEARCH_DEPTH:
            raise BudgetExceeded(f"component of {len(component)} nodes is too deep for exact coloring")
        found = _dsatur_backtrack(sub, n, counter)
        if found is None:
            logger.debug(f"component of {len(component)} nodes is not {n}-colorable")
            return None
        coloring.update(found)
    return coloring


def is_n_colorable(graph: nx.Graph, n: int, budget: Optional[int] = None) -> bool:
    return n_coloring(graph, n, budget) is not None
