"""Dendrite graphs by edge replacement, their metric, and planar embedding.

Refining an edge replaces it with a star of three: a branch point in the
middle, the two halves of the old cell, and a spur to a fresh tip.  Vertex
identity is purely combinatorial (the replacement rule says which ends are
shared); coordinates exist only for rendering and are recomputed on demand
from each vertex's creation anchor.

Edge weights are length times a resistance approximant.  Refinement hands the
children an approximant one level shallower than the parent's, which makes
the split weight-exact: the parent weight equals the sum of the two inline
children, so distances between pre-existing vertices never move.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from .addr import ROOT, Address, CutSet, format_address, parse_address
from .bulk import ROLE_NAMES, expand_cutset, resistance_batch
from .cascade import CascadeHandle, DEFAULT_NODE_BUDGET
from .errors import BudgetError, NotFoundError, ValidationError
from .resist import resistance

# graphs use one global approximant depth for every edge so the splitting
# identity weight(i) = weight(i1) + weight(i2) holds exactly by the recursion
GRAPH_R_DEPTH_DEFAULT = 15

LOCAL_V0 = "v0"
LOCAL_V1 = "v1"
LOCAL_MID = "mid"
LOCAL_TIP = "tip"

_ROLE_FOR_KIND = {
    LOCAL_V0: "boundary0",
    LOCAL_V1: "boundary1",
    LOCAL_MID: "branch_point",
    LOCAL_TIP: "branch_tip",
}


@dataclass(frozen=True)
class VertexInfo:
    """A graph vertex: role plus the creation anchor used by the embedding.

    anchor_address is the address of the edge whose refinement created the
    vertex (the root edge for the two boundary vertices); anchor_kind names
    the local point of the unit cell it is the image of.
    """

    id: int
    role: str
    anchor_address: Address
    anchor_kind: str


@dataclass
class DendriteEdge:
    """One cell of the current approximation, spanning two vertices."""

    address: Address
    end_local0: int
    end_local1: int
    length: float
    r_value: float
    r_depth: int

    @property
    def weight(self) -> float:
        return self.length * self.r_value


class DendriteGraph:
    """Tree of cells indexed by address; single-writer, then read-shared."""

    def __init__(self, r_depth: int):
        self.vertices: Dict[int, VertexInfo] = {}
        self.edges: Dict[Address, DendriteEdge] = {}
        self.cutset: Optional[CutSet] = None
        self.r_depth = int(r_depth)
        self._next_vertex = 0

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def new_vertex(self, role: str, anchor_address: Address, anchor_kind: str) -> int:
        vid = self._next_vertex
        self._next_vertex += 1
        self.vertices[vid] = VertexInfo(vid, role, anchor_address, anchor_kind)
        return vid

    def boundary_ids(self) -> Tuple[int, int]:
        b0 = b1 = None
        for v in self.vertices.values():
            if v.role == "boundary0":
                b0 = v.id
            elif v.role == "boundary1":
                b1 = v.id
        if b0 is None or b1 is None:
            raise ValidationError("graph lacks its boundary pair")
        return b0, b1

    def adjacency(self) -> Dict[int, List[Tuple[int, float, Address]]]:
        adj: Dict[int, List[Tuple[int, float, Address]]] = {
            vid: [] for vid in self.vertices
        }
        for e in self.edges.values():
            adj[e.end_local0].append((e.end_local1, e.weight, e.address))
            adj[e.end_local1].append((e.end_local0, e.weight, e.address))
        return adj

    def degree(self, vid: int) -> int:
        if vid not in self.vertices:
            raise NotFoundError(f"vertex {vid} not in graph")
        d = 0
        for e in self.edges.values():
            d += (e.end_local0 == vid) + (e.end_local1 == vid)
        return d


def base_graph(handle: CascadeHandle, r_depth: int = GRAPH_R_DEPTH_DEFAULT) -> DendriteGraph:
    """The level-0 graph: the boundary pair joined by the root cell."""
    g = DendriteGraph(r_depth)
    v0 = g.new_vertex("boundary0", ROOT, LOCAL_V0)
    v1 = g.new_vertex("boundary1", ROOT, LOCAL_V1)
    g.edges[ROOT] = DendriteEdge(
        address=ROOT,
        end_local0=v0,
        end_local1=v1,
        length=1.0,
        r_value=resistance(handle, ROOT, r_depth).value,
        r_depth=r_depth,
    )
    return g


def _refine(
    graph: DendriteGraph,
    e: DendriteEdge,
    handle: CascadeHandle,
    child_depth: int,
) -> None:
    w = handle.sibling_triple(e.address)
    m = graph.new_vertex("branch_point", e.address, LOCAL_MID)
    b = graph.new_vertex("branch_tip", e.address, LOCAL_TIP)
    # the first map reverses the cell, so the branch point is the image of
    # the local-0 corner in all three children
    other_end = (e.end_local0, e.end_local1, b)
    del graph.edges[e.address]
    for k in range(3):
        child = e.address.child(k + 1)
        graph.edges[child] = DendriteEdge(
            address=child,
            end_local0=m,
            end_local1=other_end[k],
            length=e.length * float(w[k]),
            r_value=resistance(handle, child, child_depth).value,
            r_depth=child_depth,
        )


def refine_edge(
    graph: DendriteGraph, e: DendriteEdge, handle: CascadeHandle
) -> DendriteGraph:
    """Replace one cell by its three children, preserving all distances.

    Children carry approximants one level shallower than the parent, so the
    parent weight splits exactly across the two inline children (when the
    parent depth is already 0 the children stay at 0 and the exactness
    degrades to the quality of the depth-0 approximant).
    """
    found = graph.edges.get(e.address)
    if found is not e:
        raise NotFoundError(f"edge {format_address(e.address)} not in graph")
    _refine(graph, e, handle, max(e.r_depth - 1, 0))
    return graph


def build_level(
    handle: CascadeHandle,
    n: int,
    r_depth: int = GRAPH_R_DEPTH_DEFAULT,
    budget: int = DEFAULT_NODE_BUDGET,
) -> DendriteGraph:
    """The generation-n graph: every cell address has length n.

    All edges carry approximants at the same depth r_depth, so level graphs
    are directly comparable across n.
    """
    if n < 0:
        raise ValidationError("level must be nonnegative")
    if 3**n > budget:
        raise BudgetError(
            f"level {n} holds {3**n} edges, over the budget of {budget}",
            requested=3**n,
            budget=budget,
        )
    g = base_graph(handle, r_depth)
    for _ in range(n):
        for addr in sorted(g.edges):
            _refine(g, g.edges[addr], handle, r_depth)
    return g


def build_cutset_graph(
    handle: CascadeHandle,
    delta: float,
    r_depth: int = GRAPH_R_DEPTH_DEFAULT,
    max_edges: int = 10_000_000,
) -> DendriteGraph:
    """The graph whose cells are the delta cut-set of the cascade.

    Construction runs on the flat-array engine and is then materialized into
    the object graph, so it agrees cell for cell with what iterated
    refinement would produce, at object sizes the array path can exceed.
    """
    arrays = expand_cutset(handle, delta, max_edges=max_edges, keep_records=True)
    addresses = arrays.addresses()
    anchors = arrays.anchor_addresses()
    r_values = resistance_batch(handle.law, arrays.keys, r_depth)
    g = DendriteGraph(r_depth)
    kinds = {0: LOCAL_V0, 1: LOCAL_V1}
    for vid in range(arrays.n_vertices):
        role = ROLE_NAMES[arrays.roles[vid]]
        if vid in kinds:
            g.vertices[vid] = VertexInfo(vid, role, ROOT, kinds[vid])
        else:
            kind = LOCAL_MID if role == "branch_point" else LOCAL_TIP
            g.vertices[vid] = VertexInfo(vid, role, anchors[vid], kind)
    g._next_vertex = arrays.n_vertices
    for r, addr in enumerate(addresses):
        g.edges[addr] = DendriteEdge(
            address=addr,
            end_local0=int(arrays.u[r]),
            end_local1=int(arrays.v[r]),
            length=float(arrays.lengths[r]),
            r_value=float(r_values[r]),
            r_depth=r_depth,
        )
    g.cutset = CutSet(
        delta=float(delta),
        members=tuple(addresses),
        parent_lengths={
            a: float(pl) for a, pl in zip(addresses, arrays.parent_lengths)
        },
    )
    return g


# ---------------------------------------------------------------------------
# metric queries


def _distances_from(
    graph: DendriteGraph, src: int, adj=None
) -> Tuple[Dict[int, float], Dict[int, int]]:
    """Weighted distances and predecessor map from src (trees need no heap)."""
    if src not in graph.vertices:
        raise NotFoundError(f"vertex {src} not in graph")
    adj = graph.adjacency() if adj is None else adj
    dist = {src: 0.0}
    pred = {src: src}
    queue = deque([src])
    while queue:
        x = queue.popleft()
        for y, w, _ in adj[x]:
            if y not in dist:
                dist[y] = dist[x] + w
                pred[y] = x
                queue.append(y)
    return dist, pred


def path_resistance(graph: DendriteGraph, x: int, y: int) -> float:
    """Series-law distance: the weight sum along the unique tree path."""
    if y not in graph.vertices:
        raise NotFoundError(f"vertex {y} not in graph")
    dist, _ = _distances_from(graph, x)
    if y not in dist:
        raise NotFoundError(f"vertex {y} unreachable from {x}")
    return dist[y]


def graph_diameter(graph: DendriteGraph) -> Tuple[float, Tuple[int, int]]:
    """Exact weighted diameter by double sweep (valid on trees)."""
    if not graph.vertices:
        raise ValidationError("graph is empty")
    adj = graph.adjacency()
    start = next(iter(graph.vertices))
    dist, _ = _distances_from(graph, start, adj)
    a = max(dist, key=lambda v: dist[v])
    dist_a, _ = _distances_from(graph, a, adj)
    b = max(dist_a, key=lambda v: dist_a[v])
    return dist_a[b], (a, b)


# ---------------------------------------------------------------------------
# planar embedding and serialization


def _local_point(kind: str, c: float) -> np.ndarray:
    return {
        LOCAL_V0: np.array([0.0, 0.0]),
        LOCAL_V1: np.array([1.0, 0.0]),
        LOCAL_MID: np.array([0.5, 0.0]),
        LOCAL_TIP: np.array([0.5, c]),
    }[kind]


def _map_matrices(c: float):
    return (
        (np.array([[-0.5, 0.0], [0.0, 0.5]]), np.array([0.5, 0.0])),
        (np.array([[0.5, 0.0], [0.0, -0.5]]), np.array([0.5, 0.0])),
        (np.array([[0.0, c], [c, 0.0]]), np.array([0.5, 0.0])),
    )


def embed(graph: DendriteGraph, c: float = 0.25) -> Dict[int, Tuple[float, float]]:
    """Rendering coordinates for every vertex.

    Composes the three contractions along each vertex's anchor address and
    applies the local point.  Purely cosmetic: vertex identity never depends
    on these coordinates, and the metric is independent of c.
    """
    if not 0 < c < 0.5:
        raise ValidationError("c must lie in (0, 1/2)")
    maps = _map_matrices(c)
    coords: Dict[int, Tuple[float, float]] = {}
    cache: Dict[Tuple[int, ...], Tuple[np.ndarray, np.ndarray]] = {
        (): (np.eye(2), np.zeros(2))
    }

    def transform_for(symbols: Tuple[int, ...]):
        if symbols in cache:
            return cache[symbols]
        a_par, t_par = transform_for(symbols[:-1])
        a_s, t_s = maps[symbols[-1] - 1]
        pair = (a_par @ a_s, a_par @ t_s + t_par)
        cache[symbols] = pair
        return pair

    for v in graph.vertices.values():
        a, t = transform_for(v.anchor_address.symbols)
        p = a @ _local_point(v.anchor_kind, c) + t
        coords[v.id] = (float(p[0]), float(p[1]))
    return coords


GRAPH_FORMAT = "dendrite-graph/1"


def graph_to_json(graph: DendriteGraph) -> str:
    obj = {
        "format": GRAPH_FORMAT,
        "r_depth": graph.r_depth,
        "vertices": [
            {
                "id": v.id,
                "role": v.role,
                "anchor": format_address(v.anchor_address),
                "kind": v.anchor_kind,
            }
            for v in sorted(graph.vertices.values(), key=lambda v: v.id)
        ],
        "edges": [
            {
                "address": format_address(e.address),
                "u": e.end_local0,
                "v": e.end_local1,
                "length": e.length,
                "r_value": e.r_value,
                "r_depth": e.r_depth,
            }
            for e in sorted(graph.edges.values(), key=lambda e: e.address)
        ],
    }
    if graph.cutset is not None:
        obj["cutset"] = {
            "delta": graph.cutset.delta,
            "parent_lengths": {
                format_address(a): pl
                for a, pl in sorted(graph.cutset.parent_lengths.items())
            },
        }
    return json.dumps(obj, indent=1)


def graph_from_json(text: str) -> DendriteGraph:
    obj = json.loads(text)
    if obj.get("format") != GRAPH_FORMAT:
        raise ValidationError(f"unknown graph format {obj.get('format')!r}")
    g = DendriteGraph(obj["r_depth"])
    for v in obj["vertices"]:
        g.vertices[v["id"]] = VertexInfo(
            v["id"], v["role"], parse_address(v["anchor"]), v["kind"]
        )
    g._next_vertex = 1 + max((v["id"] for v in obj["vertices"]), default=-1)
    for e in obj["edges"]:
        addr = parse_address(e["address"])
        g.edges[addr] = DendriteEdge(
            address=addr,
            end_local0=e["u"],
            end_local1=e["v"],
            length=e["length"],
            r_value=e["r_value"],
            r_depth=e["r_depth"],
        )
    cs = obj.get("cutset")
    if cs is not None:
        parent_lengths = {
            parse_address(a): pl for a, pl in cs["parent_lengths"].items()
        }
        g.cutset = CutSet(
            delta=cs["delta"],
            members=tuple(sorted(parent_lengths)),
            parent_lengths=parent_lengths,
        )
    return g
