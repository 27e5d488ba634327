"""Open-cell percolation on cut-set graphs.

A cell of the delta cut-set is open when its resistance length (the edge
weight, length times approximant) is at most epsilon0 * delta.  Open cells
that share a vertex are adjacent; clusters are explored by a deterministic
frontier iteration whose step count doubles as the cluster size, and the
largest cluster per realization is the quantity the tail bounds control.

epsilon0_search calibrates the opening threshold: the largest grid value
for which the conditional probability of a small weighted subtree, given a
small weight, stays under a target p on a whole grid of scales.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

import numpy as np

from .addr import Address
from .bulk import resistance_batch
from .dendrite import DendriteGraph
from .errors import (
    ConditionError,
    NotFoundError,
    UnsupportedLawError,
    ValidationError,
)
from .laws import (
    ScalingLaw,
    check_small_weight_decay,
    default_eps_grid,
    default_x_grid,
)
from . import streams

# the cluster tail argument needs the branching-process bound p < 27/256
EPSILON0_P_MAX = 27.0 / 256.0


@dataclass(frozen=True)
class OpenMarking:
    """Which cut-set cells are open at a given threshold."""

    delta: float
    epsilon0: float
    open_set: FrozenSet[Address]


@dataclass(frozen=True)
class ClusterReport:
    """Cluster decomposition of one marking.

    clusters holds (starting address, size) per exploration, in the
    lexicographic scan order; tau_histogram counts explorations by their
    step count, which equals the cluster size.
    """

    clusters: Tuple[Tuple[Address, int], ...]
    largest: int
    tau_histogram: Dict[int, int]


def _require_cutset(graph: DendriteGraph):
    if graph.cutset is None:
        raise ValidationError("graph does not carry a cut-set; build it from one")
    return graph.cutset


def mark_open(graph: DendriteGraph, epsilon0: float) -> OpenMarking:
    """Mark cells whose weight is at most epsilon0 times the cut-set scale.

    The weight is the same length-times-approximant the graph carries, so a
    marking is a deterministic function of (seed, delta, epsilon0).
    """
    cutset = _require_cutset(graph)
    if epsilon0 < 0:
        raise ValidationError("epsilon0 must be nonnegative")
    thr = epsilon0 * cutset.delta
    open_set = frozenset(a for a, e in graph.edges.items() if e.weight <= thr)
    return OpenMarking(delta=cutset.delta, epsilon0=float(epsilon0), open_set=open_set)


def open_adjacency(
    graph: DendriteGraph, marking: OpenMarking
) -> Dict[Address, List[Address]]:
    """Adjacency over open cells: two open cells sharing a vertex.

    Every cell has at most 4 neighbors here: its two ends each join at most
    two other cells.
    """
    by_vertex: Dict[int, List[Address]] = {}
    for a in marking.open_set:
        e = graph.edges.get(a)
        if e is None:
            raise NotFoundError(f"marked cell {a!r} not in graph")
        by_vertex.setdefault(e.end_local0, []).append(a)
        by_vertex.setdefault(e.end_local1, []).append(a)
    adj: Dict[Address, Set[Address]] = {a: set() for a in marking.open_set}
    for cells in by_vertex.values():
        for i in range(len(cells)):
            for j in range(i + 1, len(cells)):
                adj[cells[i]].add(cells[j])
                adj[cells[j]].add(cells[i])
    return {a: sorted(nbrs) for a, nbrs in adj.items()}


def explore_cluster(
    graph: DendriteGraph,
    marking: OpenMarking,
    i: Address,
    adjacency: Optional[Dict[Address, List[Address]]] = None,
    debug: bool = False,
) -> Tuple[Set[Address], int]:
    """The frontier iteration from cell i: (cluster, step count tau).

    Maintains the live frontier and the done set; each step removes the
    lexicographically smallest frontier cell and adds its unseen open
    neighbors.  tau is the first step at which the frontier empties, and
    equals the cluster size.  A closed start terminates after one step with
    the singleton cluster.
    """
    if i not in graph.edges:
        raise NotFoundError(f"cell {i!r} not in the cut-set")
    if adjacency is None:
        adjacency = open_adjacency(graph, marking)
    frontier = [i]
    in_frontier = {i}
    done: Set[Address] = set()
    n = 0
    while frontier:
        j = heapq.heappop(frontier)
        in_frontier.discard(j)
        done.add(j)
        n += 1
        if j in marking.open_set:
            for k in adjacency[j]:
                if k not in done and k not in in_frontier:
                    heapq.heappush(frontier, k)
                    in_frontier.add(k)
        if debug:
            assert len(done) == n, "done-set size must equal the step count"
    return done, n


def largest_cluster(graph: DendriteGraph, marking: OpenMarking) -> ClusterReport:
    """Decompose the whole marking into clusters, scanning lexicographically.

    Open cells are explored once each; closed cells are singleton clusters.
    """
    _require_cutset(graph)
    adjacency = open_adjacency(graph, marking)
    visited: Set[Address] = set()
    clusters: List[Tuple[Address, int]] = []
    hist: Dict[int, int] = {}
    for a in sorted(graph.edges):
        if a in visited:
            continue
        if a in marking.open_set:
            comp, tau = explore_cluster(graph, marking, a, adjacency=adjacency)
            visited |= comp
        else:
            comp, tau = {a}, 1
            visited.add(a)
        clusters.append((a, len(comp)))
        hist[tau] = hist.get(tau, 0) + 1
    largest = max(size for _, size in clusters) if clusters else 0
    return ClusterReport(
        clusters=tuple(clusters), largest=largest, tau_histogram=hist
    )


def epsilon0_search(
    law: ScalingLaw,
    p: float,
    x_grid: Optional[Sequence[float]] = None,
    mc_samples: int = 4000,
    r_depth: int = 10,
    eps_grid: Optional[Sequence[float]] = None,
    seed: int = 0,
) -> float:
    """Largest grid threshold keeping small weighted subtrees rare.

    Searches for the largest epsilon0 on the grid such that, for every x in
    x_grid, the Monte Carlo estimate of P(w R <= epsilon0 x | w <= x) stays
    at or below p.  w is a conditional draw of one weight coordinate and R
    an independent depth-r_depth subtree sum, matching the scalar
    resistance approximant exactly.
    """
    if not 0 < p < EPSILON0_P_MAX:
        raise ValidationError(
            f"p must lie in (0, {EPSILON0_P_MAX:.8f}); got {p:g}"
        )
    if not law.independent_coordinates:
        raise UnsupportedLawError(
            "epsilon0 calibration needs independent weight coordinates"
        )
    ok, _ = check_small_weight_decay(law, p)
    if not ok:
        raise ConditionError(
            "law fails the small-weight decay condition at this p; "
            "no opening threshold can work"
        )
    if mc_samples < 100:
        raise ValidationError("mc_samples must be at least 100")
    x_grid = default_x_grid() if x_grid is None else np.asarray(x_grid, float)
    eps_grid = default_eps_grid(p) if eps_grid is None else np.asarray(eps_grid, float)
    eps_grid = np.sort(eps_grid)[::-1]
    root = streams.root_key(seed, namespace="epsilon0-search")
    idx = np.arange(mc_samples)
    r_keys = streams.sequence_key(root, "subtree", idx)
    r_vals = resistance_batch(law, r_keys, r_depth)
    n_pass = np.zeros(eps_grid.size, dtype=np.int64)
    worst = (None, 0.0)
    for k, x in enumerate(x_grid):
        cx = law.marginal_cdf(float(x))
        if cx <= 0:
            raise ValidationError(f"grid point x={x:g} has zero mass below it")
        u = streams.to_unit(streams.sequence_key(root, f"weight:{k}", idx))
        w = law.marginal_ppf(u * cx)
        prod = np.sort(w * r_vals)
        # P(w R <= eps x) for the whole eps grid in one searchsorted pass
        freq = np.searchsorted(prod, eps_grid * float(x), side="right") / mc_samples
        ok_eps = freq <= p
        n_pass += ok_eps
        bad = ~ok_eps
        if bad.any():
            j = int(np.argmax(bad))  # largest failing eps for this x
            if worst[0] is None or freq[j] > worst[1]:
                worst = (float(x), float(freq[j]))
    passing = n_pass == x_grid.size
    if not passing.any():
        raise ConditionError(
            "no grid threshold kept the conditional frequency at or below "
            f"p={p:g}; worst grid point x={worst[0]:g} reached {worst[1]:.4f}"
        )
    return float(eps_grid[np.argmax(passing)])


def open_cell_mask(
    arrays, weights: np.ndarray, epsilon0: float
) -> np.ndarray:
    """Boolean open marking over cut-set arrays (weight <= epsilon0 * delta).

    weights must be the same length-times-approximant the object graph
    would carry, so the two marking paths agree cell for cell.
    """
    if epsilon0 < 0:
        raise ValidationError("epsilon0 must be nonnegative")
    return weights <= epsilon0 * arrays.delta


def cluster_sizes_arrays(
    u: np.ndarray, v: np.ndarray, open_mask: np.ndarray
) -> np.ndarray:
    """Sizes of the open-cell clusters, on flat arrays.

    Two open cells are adjacent when they share a vertex; within each
    vertex the incident open cells are chained, which preserves components.
    Closed cells are not reported (each would be a singleton).
    """
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    ids = np.nonzero(open_mask)[0]
    m = ids.size
    if m == 0:
        return np.zeros(0, dtype=np.int64)
    compact = np.empty(m, dtype=np.int64)
    compact[:] = np.arange(m)
    ends = np.concatenate([u[ids], v[ids]])
    cells = np.concatenate([compact, compact])
    order = np.argsort(ends, kind="stable")
    ends = ends[order]
    cells = cells[order]
    same = ends[1:] == ends[:-1]
    a = cells[:-1][same]
    b = cells[1:][same]
    if a.size == 0:
        return np.ones(m, dtype=np.int64)
    g = coo_matrix(
        (np.ones(a.size, dtype=np.int8), (a, b)), shape=(m, m)
    )
    n_comp, labels = connected_components(g, directed=False)
    return np.bincount(labels, minlength=n_comp).astype(np.int64)


def neighborhood_count(
    graph: DendriteGraph,
    marking: OpenMarking,
    x: int,
    epsilon: float,
) -> int:
    """Cells within tree distance epsilon * delta of the cells containing x.

    The containing cells of a vertex are its incident edges; distance from
    a cell to that set is the smallest weighted path distance between their
    vertex sets, so the containing cells themselves sit at distance zero,
    as do cells touching any of their endpoints.  The count uses a strict
    cutoff.
    """
    cutset = _require_cutset(graph)
    if x not in graph.vertices:
        raise NotFoundError(f"vertex {x} not in graph")
    if epsilon <= 0:
        raise ValidationError("epsilon must be positive")
    if marking.delta != cutset.delta:
        raise ValidationError("marking and graph disagree on the cut-set scale")
    cutoff = epsilon * cutset.delta
    adj = graph.adjacency()
    sources = set()
    for e in graph.edges.values():
        if x in (e.end_local0, e.end_local1):
            sources.add(e.end_local0)
            sources.add(e.end_local1)
    dist: Dict[int, float] = {s: 0.0 for s in sources}
    heap = [(0.0, s) for s in sources]
    heapq.heapify(heap)
    while heap:
        d, vid = heapq.heappop(heap)
        if d > dist.get(vid, math.inf):
            continue
        if d >= cutoff:
            continue
        for other, w, _ in adj[vid]:
            nd = d + w
            if nd < cutoff and nd < dist.get(other, math.inf):
                dist[other] = nd
                heapq.heappush(heap, (nd, other))
    count = 0
    for e in graph.edges.values():
        d = min(
            dist.get(e.end_local0, math.inf), dist.get(e.end_local1, math.inf)
        )
        if d < cutoff:
            count += 1
    return count
