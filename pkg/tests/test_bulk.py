"""Array-route cut-set expansion against the scalar definitions."""

import numpy as np
import pytest

from cascade_dendrite.addr import ROOT, is_cut_set, truncate
from cascade_dendrite.bulk import cutset_count_multi, expand_cutset
from cascade_dendrite.cascade import CascadeHandle
from cascade_dendrite.errors import BudgetError
from cascade_dendrite.laws import Deterministic, UniformIID


def test_stopping_rule(handle):
    # members are the first cells at or below delta: l(i) <= delta < l(parent)
    arrays = expand_cutset(handle, 0.05)
    assert np.all(arrays.lengths <= 0.05)
    assert np.all(arrays.parent_lengths > 0.05)


def test_members_form_cut_set(handle):
    arrays = expand_cutset(handle, 0.1)
    addrs = arrays.addresses()
    assert len(addrs) == len(arrays)
    assert is_cut_set(addrs, 3)


def test_addresses_match_keys_and_lengths(handle):
    arrays = expand_cutset(handle, 0.07)
    addrs = arrays.addresses()
    for r in range(0, len(addrs), max(1, len(addrs) // 23)):
        a = addrs[r]
        assert int(arrays.keys[r]) == int(handle.node_key(a))
        assert arrays.lengths[r] == handle.path_product(a)
        assert arrays.parent_lengths[r] == (
            1.0 if len(a) == 1 else handle.path_product(truncate(a, len(a) - 1))
        )
        assert arrays.level[r] == len(a)


def test_deterministic_halves_give_full_level():
    h = CascadeHandle(0, Deterministic(0.5, 0.5, 0.5))
    arrays = expand_cutset(h, 0.25)
    assert len(arrays) == 9
    assert np.all(arrays.lengths == 0.25)
    assert np.all(arrays.level == 2)


def test_vertex_ids_well_formed(handle):
    arrays = expand_cutset(handle, 0.05)
    assert arrays.u.shape == arrays.v.shape == arrays.keys.shape
    assert np.all(arrays.u >= 0) and np.all(arrays.v >= 0)
    assert np.all(arrays.u < arrays.n_vertices)
    assert np.all(arrays.v < arrays.n_vertices)
    assert np.all(arrays.u != arrays.v)
    # cells plus the boundary pair account for every vertex: the cell tree
    # is connected, so vertices = edges + 1
    used = np.unique(np.concatenate([arrays.u, arrays.v]))
    assert used.size == arrays.n_vertices
    assert arrays.n_vertices == len(arrays) + 1


def test_cells_connect_the_boundary(handle):
    # walking u/v as an undirected graph reaches vertex 1 from vertex 0
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    arrays = expand_cutset(handle, 0.02)
    n = arrays.n_vertices
    ones = np.ones(len(arrays))
    adj = coo_matrix((ones, (arrays.u, arrays.v)), shape=(n, n))
    n_comp, labels = connected_components(adj, directed=False)
    assert n_comp == 1


def test_expansion_deterministic(uniform_law):
    a1 = expand_cutset(CascadeHandle(4, uniform_law), 0.03)
    a2 = expand_cutset(CascadeHandle(4, uniform_law), 0.03)
    assert np.array_equal(a1.keys, a2.keys)
    assert np.array_equal(a1.lengths, a2.lengths)
    assert np.array_equal(a1.u, a2.u) and np.array_equal(a1.v, a2.v)


def test_budget_enforced(handle):
    with pytest.raises(BudgetError):
        expand_cutset(handle, 1e-6, max_edges=10_000)


def test_count_multi_matches_direct_expansion(uniform_law):
    seeds = [1, 2, 3, 4, 5]
    deltas = [np.exp(-1), np.exp(-2), np.exp(-3)]
    counts = cutset_count_multi(uniform_law, seeds, deltas)
    assert counts.shape == (len(seeds), len(deltas))
    for si, seed in enumerate(seeds):
        h = CascadeHandle(seed, uniform_law)
        for di, d in enumerate(deltas):
            assert counts[si, di] == len(expand_cutset(h, d, keep_records=False))


def test_count_multi_chunking_invariant(uniform_law):
    seeds = list(range(1, 9))
    deltas = [0.1, 0.05]
    a = cutset_count_multi(uniform_law, seeds, deltas)
    b = cutset_count_multi(uniform_law, seeds, deltas, seed_chunk=3)
    assert np.array_equal(a, b)


def test_keep_records_false_blocks_addresses(handle):
    arrays = expand_cutset(handle, 0.1, keep_records=False)
    from cascade_dendrite.errors import ValidationError

    with pytest.raises(ValidationError):
        arrays.addresses()


def test_anchor_addresses_locate_vertices(handle):
    arrays = expand_cutset(handle, 0.1)
    anchors = arrays.anchor_addresses()
    assert len(anchors) == arrays.n_vertices
    # boundary pair anchors at the root edge
    assert anchors[0] == ROOT and anchors[1] == ROOT
