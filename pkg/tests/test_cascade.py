"""Cascade handle: path products, level arrays, martingale normalization.

The bulk expansion and the per-address scalar route must agree bit for bit;
several drivers rely on swapping one for the other without changing any
realization.
"""

import numpy as np
import pytest

from cascade_dendrite.addr import (
    ROOT,
    Address,
    level_address,
    level_index,
    parse_address,
)
from cascade_dendrite.cascade import (
    CascadeHandle,
    addresses_for_level,
    martingale,
    martingale_limit_approx,
)
from cascade_dendrite.errors import BudgetError
from cascade_dendrite.laws import Deterministic, UniformIID, mean_sum_theta, solve_alpha


def test_root_path_product_is_one(handle):
    assert handle.path_product(ROOT) == 1.0


def test_root_has_no_incoming_edge(handle):
    from cascade_dendrite.errors import ValidationError

    with pytest.raises(ValidationError):
        handle.weight(ROOT)


def test_edge_weight_is_sibling_entry(handle):
    # weight(i.s) is the s-th entry of the sibling triple drawn at i
    for text in ("-", "1", "2.3", "1.1.3.2"):
        a = parse_address(text)
        triple = handle.sibling_triple(a)
        for s in (1, 2, 3):
            assert handle.weight(a.child(s)) == triple[s - 1]


def test_path_product_is_product_of_edge_weights(handle):
    for text in ("2", "1.3", "3.2.1.2.3"):
        a = parse_address(text)
        prod = 1.0
        for n in range(1, len(a) + 1):
            from cascade_dendrite.addr import truncate

            prod *= handle.weight(truncate(a, n))
        assert abs(handle.path_product(a) - prod) < 1e-15


def test_sibling_triple_deterministic_and_independent_of_order(uniform_law):
    h1 = CascadeHandle(42, uniform_law)
    h2 = CascadeHandle(42, uniform_law)
    a = parse_address("2.1.3")
    b = parse_address("1")
    # query order differs between the two handles
    ta1, tb1 = h1.sibling_triple(a), h1.sibling_triple(b)
    tb2, ta2 = h2.sibling_triple(b), h2.sibling_triple(a)
    assert np.array_equal(ta1, ta2)
    assert np.array_equal(tb1, tb2)


def test_distinct_seeds_distinct_realizations(uniform_law):
    a = parse_address("1.2")
    w = {CascadeHandle(s, uniform_law).weight(a) for s in range(8)}
    assert len(w) == 8


def test_level_arrays_match_scalar_route(handle):
    n = 4
    keys, lengths = handle.level_arrays(n)
    assert keys.shape == lengths.shape == (3**n,)
    addrs = list(addresses_for_level(n))
    assert len(addrs) == 3**n
    for idx in (0, 1, 17, 40, 80):
        a = addrs[idx]
        assert int(keys[idx]) == int(handle.node_key(a))
        assert lengths[idx] == handle.path_product(a)


def test_addresses_for_level_is_lex_ordered():
    addrs = list(addresses_for_level(3))
    assert addrs == sorted(addrs)
    assert addrs[0] == parse_address("1.1.1")
    assert addrs[-1] == parse_address("3.3.3")
    assert addrs == [level_address(i, 3) for i in range(27)]


def test_expand_level_one_step(handle):
    keys, lengths = handle.level_arrays(2)
    k3, l3 = handle.expand_level(keys, lengths)
    ref_k, ref_l = handle.level_arrays(3)
    assert np.array_equal(k3, ref_k)
    assert np.array_equal(l3, ref_l)


def test_subtree_arrays_by_key_matches_address_route(handle):
    a = parse_address("2.3")
    k1, l1 = handle.subtree_arrays(a, 3)
    k2, l2 = handle.subtree_arrays_by_key(handle.node_key(a), 3)
    assert np.array_equal(k1, k2)
    # both routes report products relative to the subtree root
    assert np.array_equal(l1, l2)


def test_subtree_block_embeds_in_full_level(handle):
    # scaling the relative products by the cell length recovers the lex
    # block of the full level, up to multiplication-order roundoff
    a = parse_address("2.3")
    depth = 2
    _, rel = handle.subtree_arrays(a, depth)
    _, full = handle.level_arrays(len(a) + depth)
    width = 3**depth
    block = full[level_index(a) * width : (level_index(a) + 1) * width]
    assert np.allclose(block, handle.path_product(a) * rel, rtol=1e-12, atol=0)


def test_level_budget_enforced(handle):
    with pytest.raises(BudgetError):
        handle.level_arrays(9, budget=3**8)


def test_martingale_depth_zero_is_one(handle):
    m = martingale(handle, 2.0, 0)
    assert m.value == 1.0


def test_martingale_is_normalized_power_sum(handle, uniform_law):
    # M_n(t) = sum of length^t over level n, divided by (E sum w^t)^n
    theta = 1.7
    n = 5
    _, lengths = handle.level_arrays(n)
    norm = mean_sum_theta(uniform_law, theta)[0] ** n
    ref = float(np.sum(lengths**theta) / norm)
    m = martingale(handle, theta, n)
    assert m.theta == theta and m.depth == n
    assert abs(m.value - ref) < 1e-14


def test_martingale_mean_one_at_alpha(uniform_law):
    # sanity over a handful of seeds; the acceptance run does this properly
    alpha = solve_alpha(uniform_law)
    vals = [martingale(CascadeHandle(s, uniform_law), alpha, 6).value for s in range(40)]
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / np.sqrt(len(vals)))
    assert abs(mean - 1.0) < 4 * se


def test_martingale_deterministic_law_is_exactly_one(det_law):
    h = CascadeHandle(0, det_law)
    alpha = solve_alpha(det_law)
    for n in (1, 3, 5):
        assert abs(martingale(h, alpha, n).value - 1.0) < 1e-12


def test_martingale_limit_approx_refines_subtree(handle, uniform_law):
    # the residual approximant at the root with depth k equals M_k
    alpha = solve_alpha(uniform_law)
    direct = martingale(handle, alpha, 4).value
    approx = martingale_limit_approx(handle, alpha, ROOT, 4)
    assert abs(direct - approx) < 1e-14


def test_node_key_matches_stream_chain(handle):
    from cascade_dendrite import streams

    a = parse_address("3.1.2")
    assert int(handle.node_key(a)) == int(
        streams.key_for(streams.root_key(0), (3, 1, 2))
    )
