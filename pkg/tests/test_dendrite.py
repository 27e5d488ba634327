"""Edge-replacement graphs: structure, metric, serialization."""

import numpy as np
import pytest

from cascade_dendrite.addr import ROOT, parse_address
from cascade_dendrite.cascade import CascadeHandle
from cascade_dendrite.dendrite import (
    GRAPH_R_DEPTH_DEFAULT,
    base_graph,
    build_cutset_graph,
    build_level,
    embed,
    graph_diameter,
    graph_from_json,
    graph_to_json,
    path_resistance,
    refine_edge,
)
from cascade_dendrite.errors import NotFoundError
from cascade_dendrite.laws import Deterministic, UniformIID


@pytest.fixture
def det_handle(det_law):
    return CascadeHandle(0, det_law)


def test_base_graph_shape(handle):
    g = base_graph(handle)
    assert g.n_vertices == 2 and g.n_edges == 1
    assert ROOT in g.edges
    b0, b1 = g.boundary_ids()
    assert {g.edges[ROOT].end_local0, g.edges[ROOT].end_local1} == {b0, b1}


def test_refine_once_structure(handle):
    g = base_graph(handle)
    root_edge = g.edges[ROOT]
    b0, b1 = g.boundary_ids()
    refine_edge(g, root_edge, handle)
    assert g.n_vertices == 4 and g.n_edges == 3
    e1 = g.edges[parse_address("1")]
    e2 = g.edges[parse_address("2")]
    e3 = g.edges[parse_address("3")]
    # the mid vertex is shared; the first child flips orientation
    m = e1.end_local0
    assert e2.end_local0 == m and e3.end_local0 == m
    assert e1.end_local1 == b0
    assert e2.end_local1 == b1
    tip = e3.end_local1
    assert g.vertices[m].role == "branch_point"
    assert g.vertices[tip].role == "branch_tip"


def test_refine_all_twice_counts(handle):
    g = base_graph(handle)
    for _ in range(2):
        for e in list(g.edges.values()):
            refine_edge(g, e, handle)
    assert g.n_edges == 9 and g.n_vertices == 10


def test_split_weight_identity(uniform_law):
    # refining never moves distances between existing vertices: the parent
    # weight equals the sum of the two inline children exactly
    for seed in range(20):
        h = CascadeHandle(seed, uniform_law)
        g = base_graph(h)
        parent = g.edges[ROOT]
        pw = parent.weight
        refine_edge(g, parent, h)
        child_sum = g.edges[parse_address("1")].weight + g.edges[parse_address("2")].weight
        assert abs(pw - child_sum) <= 1e-12 * max(1.0, pw)


def test_refine_missing_edge_raises(handle):
    g = base_graph(handle)
    e = g.edges[ROOT]
    refine_edge(g, e, handle)
    with pytest.raises(NotFoundError):
        refine_edge(g, e, handle)


def test_build_level_counts(handle):
    for n in (0, 1, 3):
        g = build_level(handle, n)
        assert g.n_edges == 3**n
        assert g.n_vertices == 3**n + 1
        assert all(len(a) == n for a in g.edges)


def test_boundaries_stay_leaves(handle):
    for n in range(5):
        g = build_level(handle, n)
        b0, b1 = g.boundary_ids()
        assert g.degree(b0) == 1 and g.degree(b1) == 1


def test_vertex_degree_at_most_three(handle):
    g = build_level(handle, 4)
    assert max(g.degree(v) for v in g.vertices) <= 3


def test_build_level_matches_iterated_refinement(handle):
    # same combinatorics and lengths; weights differ because refinement
    # hands children a shallower approximant while build_level starts each
    # edge at the full global depth
    g1 = build_level(handle, 2)
    g2 = base_graph(handle)
    for _ in range(2):
        for e in list(g2.edges.values()):
            refine_edge(g2, e, handle)
    assert set(g1.edges) == set(g2.edges)
    for a in g1.edges:
        assert g1.edges[a].length == g2.edges[a].length
    assert all(e.r_depth == g1.r_depth for e in g1.edges.values())
    assert all(e.r_depth == g2.r_depth - 2 for e in g2.edges.values())


def test_cutset_graph_deterministic_examples(det_handle):
    g = build_cutset_graph(det_handle, 0.3)
    assert sorted(len(a) for a in g.edges) == [2] * 9
    # the stopping rule takes cells at or below delta
    g2 = build_cutset_graph(det_handle, 0.5)
    assert sorted(len(a) for a in g2.edges) == [1, 1, 1]
    assert g.cutset is not None and g.cutset.is_valid(3)


def test_cutset_graph_matches_bulk_route(handle):
    from cascade_dendrite.bulk import expand_cutset

    g = build_cutset_graph(handle, 0.05)
    arrays = expand_cutset(handle, 0.05)
    assert g.n_edges == len(arrays)
    assert set(g.edges) == set(arrays.addresses())


def test_path_resistance_metric(det_handle):
    for n in (1, 2, 4):
        g = build_level(det_handle, n)
        b0, b1 = g.boundary_ids()
        assert path_resistance(g, b0, b1) == 1.0
        assert path_resistance(g, b0, b0) == 0.0


def test_path_resistance_level_one_tip(det_handle):
    g = build_level(det_handle, 1)
    b0, _ = g.boundary_ids()
    tip = next(v.id for v in g.vertices.values() if v.role == "branch_tip")
    assert path_resistance(g, b0, tip) == 1.0


def test_path_resistance_additive_along_path(handle):
    # unique tree paths make the metric additive over intermediate vertices
    g = build_level(handle, 3)
    b0, b1 = g.boundary_ids()
    mids = [v.id for v in g.vertices.values() if v.role == "branch_point"]
    m = mids[len(mids) // 2]
    d_direct = path_resistance(g, b0, b1)
    via = path_resistance(g, b0, m) + path_resistance(g, m, b1)
    # additivity holds exactly when m lies on the b0-b1 path, otherwise
    # the detour doubles the branch segment, so via >= direct
    assert via >= d_direct - 1e-12


def test_path_resistance_missing_vertex(handle):
    g = build_level(handle, 1)
    with pytest.raises(NotFoundError):
        path_resistance(g, 0, 999)


def test_diameter_double_sweep_exact(handle):
    # brute force over all vertex pairs must agree with the double sweep
    g = build_level(handle, 3)
    ids = list(g.vertices)
    best = 0.0
    for i, x in enumerate(ids):
        for y in ids[i + 1 :]:
            best = max(best, path_resistance(g, x, y))
    value, (p, q) = graph_diameter(g)
    assert abs(value - best) < 1e-12
    assert abs(path_resistance(g, p, q) - value) < 1e-12


def test_json_roundtrip(handle):
    g = build_cutset_graph(handle, 0.2)
    text = graph_to_json(g)
    back = graph_from_json(text)
    assert back.n_vertices == g.n_vertices
    assert set(back.edges) == set(g.edges)
    for a, e in g.edges.items():
        assert back.edges[a].weight == e.weight
        assert back.edges[a].end_local0 == e.end_local0
        assert back.edges[a].end_local1 == e.end_local1
    assert graph_to_json(back) == text


def test_default_r_depth_applied(handle):
    g = build_level(handle, 1)
    assert g.r_depth == GRAPH_R_DEPTH_DEFAULT
    assert all(e.r_depth == GRAPH_R_DEPTH_DEFAULT for e in g.edges.values())


def test_embedding_covers_all_vertices(handle):
    g = build_level(handle, 3)
    pos = embed(g)
    assert set(pos) == set(g.vertices)
    xy = np.array(list(pos.values()))
    assert np.all(np.isfinite(xy))
    # boundary pair spans the unit segment
    b0, b1 = g.boundary_ids()
    assert pos[b0] == (0.0, 0.0)
    assert pos[b1] == (1.0, 0.0)
