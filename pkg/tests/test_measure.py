"""Self-similar masses, ball sandwiches, dimension estimators."""

import math

import numpy as np
import pytest

from cascade_dendrite.addr import ROOT, level_address, parse_address
from cascade_dendrite.bulk import expand_cutset
from cascade_dendrite.cascade import CascadeHandle
from cascade_dendrite.dendrite import build_cutset_graph
from cascade_dendrite.errors import ValidationError
from cascade_dendrite.laws import Deterministic, UniformIID, solve_alpha
from cascade_dendrite.measure import (
    ball_mass_sandwich,
    cell_masses,
    cover_sum_exponent,
    cutset_masses,
    local_dimension,
    mass_convergence,
    sample_point,
    subtree_diameters,
)

LOG3_OVER_LOG2 = 1.584962500721156


def test_unit_total_mass(handle):
    fam = [level_address(i, 2) for i in range(9)]
    ma = cell_masses(handle, fam, leaf_level=6)
    assert ma.total == 1.0
    assert abs(sum(ma.masses.values()) - 1.0) <= 1e-12


def test_additivity_parent_vs_children(handle):
    # mass of a cell equals the sum over its three children, measured
    # within one leaf-level assignment
    fine = [level_address(i, 3) for i in range(27)]
    coarse = [level_address(i, 2) for i in range(9)]
    m_fine = cell_masses(handle, fine, leaf_level=6).masses
    m_coarse = cell_masses(handle, coarse, leaf_level=6).masses
    for a in coarse:
        kids = sum(m_fine[a.child(s)] for s in (1, 2, 3))
        assert abs(m_coarse[a] - kids) <= 1e-12


def test_mixed_depth_family_is_accepted(handle):
    level = [level_address(i, 2) for i in range(9)]
    fam = level[:4] + [level[4].child(s) for s in (1, 2, 3)] + level[5:]
    ma = cell_masses(handle, fam, leaf_level=6)
    assert abs(sum(ma.masses.values()) - 1.0) <= 1e-12


def test_partial_family_mass_below_one(handle):
    # prefix-free but incomplete: the missing cell's share is absent
    fam = [level_address(i, 2) for i in range(8)]
    ma = cell_masses(handle, fam, leaf_level=5)
    assert sum(ma.masses.values()) < 1.0


def test_overlapping_family_rejected(handle):
    with pytest.raises(ValidationError):
        cell_masses(
            handle, [parse_address("1"), parse_address("1.2")], leaf_level=5
        )


def test_deterministic_masses_are_uniform(det_law):
    # equal thirds at the similarity exponent, exactly
    h = CascadeHandle(0, det_law)
    fam = [level_address(i, 2) for i in range(9)]
    ma = cell_masses(h, fam, leaf_level=6, alpha=LOG3_OVER_LOG2)
    for v in ma.masses.values():
        assert abs(v - 1.0 / 9.0) < 1e-12


def test_cutset_masses_two_routes_agree(handle):
    arrays = expand_cutset(handle, 0.1)
    graph = build_cutset_graph(handle, 0.1)
    m_arr = cutset_masses(arrays, alpha=2.0)
    m_gr = cutset_masses(graph, alpha=2.0)
    assert abs(m_arr.total - 1.0) <= 1e-12
    assert set(m_arr.masses) == set(m_gr.masses)
    for a, v in m_arr.masses.items():
        assert abs(v - m_gr.masses[a]) <= 1e-15


def test_mass_convergence_shrinks(handle):
    fam = [level_address(i, 2) for i in range(9)]
    steps = mass_convergence(handle, fam, levels=[3, 5, 7, 9])
    assert [L for L, _ in steps] == [5, 7, 9]
    changes = [c for _, c in steps]
    assert changes[-1] < changes[0]


def test_sample_point_properties(handle):
    a = sample_point(handle, depth=6, index=0)
    assert len(a) == 6
    assert a == sample_point(handle, depth=6, index=0)
    others = {sample_point(handle, depth=6, index=j) for j in range(8)}
    assert len(others) > 1
    # deeper samples extend shallower ones at the same index
    b = sample_point(handle, depth=4, index=3)
    c = sample_point(handle, depth=6, index=3)
    assert b.is_prefix_of(c)


def test_sample_point_first_symbol_frequencies(uniform_law):
    # the depth-1 marginal follows the level-1 masses of each realization;
    # averaging over seeds smooths both to roughly uniform thirds
    counts = np.zeros(3)
    n_seeds, n_idx = 30, 10
    for seed in range(n_seeds):
        h = CascadeHandle(seed, uniform_law)
        for j in range(n_idx):
            counts[sample_point(h, depth=3, index=j).symbols[0] - 1] += 1
    freqs = counts / counts.sum()
    assert np.all(np.abs(freqs - 1.0 / 3.0) < 0.12)


def test_sandwich_brackets_and_monotone(handle):
    graph = build_cutset_graph(handle, 0.05)
    masses = cutset_masses(graph, alpha=2.0)
    x = graph.boundary_ids()[0]
    prev_hi = 0.0
    for r in (0.01, 0.05, 0.2, 1.0):
        lo, hi = ball_mass_sandwich(graph, masses, x, r)
        assert 0.0 <= lo <= hi <= 1.0 + 1e-12
        assert hi >= prev_hi - 1e-15
        prev_hi = hi
    # a ball wider than the whole tree swallows all mass
    lo_all, hi_all = ball_mass_sandwich(graph, masses, x, 100.0)
    assert abs(hi_all - 1.0) <= 1e-12
    assert abs(lo_all - 1.0) <= 1e-12


def test_subtree_diameters_shapes(handle):
    lengths, diams = subtree_diameters(handle, 3, 4)
    assert lengths.shape == diams.shape == (27,)
    _, full = handle.level_arrays(3)
    assert np.array_equal(lengths, full)
    # normalized diameters exceed the boundary crossing of the unit cell
    assert np.all(diams > 0.0)


def test_cover_exponent_deterministic_oracle(det_law):
    # closed form: 3 (1/2)^t = 1 at t = log 3 / log 2, independent of depth
    h = CascadeHandle(0, det_law)
    grid = np.linspace(0.7, 2.5, 19)
    est = cover_sum_exponent(h, grid, n_max=6, subtree_depth=4)
    assert abs(est.slope - LOG3_OVER_LOG2) < 1e-9
    assert est.method == "cover"


def test_cover_exponent_validates_grid(handle):
    with pytest.raises(ValidationError):
        cover_sum_exponent(handle, [2.0], n_max=6)
    with pytest.raises(ValidationError):
        cover_sum_exponent(handle, [1.0, 2.0], n_max=2)


def test_local_dimension_trace_contract(det_law):
    h = CascadeHandle(1, det_law)
    radii = [0.9, 0.3, 0.03, 0.009]
    trace = []
    est = local_dimension(
        h,
        radii=radii,
        n_points=3,
        r_depth=3,
        max_edges=4_000_000,
        trace=trace,
    )
    assert est.method == "local"
    assert math.isfinite(est.slope) and est.stderr >= 0.0
    assert len(est.points) == 3
    assert len(trace) > 0
    for point, r, lo, hi in trace:
        assert r in radii
        assert 0.0 <= lo <= hi <= 1.0 + 1e-9


def test_local_dimension_deterministic_ballpark(det_law):
    # the full-tolerance control run lives in the acceptance suite; this
    # only guards the estimator against gross regressions
    h = CascadeHandle(1, det_law)
    radii = list(0.5 * np.geomspace(0.01, 1.0, 8))
    est = local_dimension(h, radii=radii, n_points=6, r_depth=4, max_edges=5_000_000)
    assert abs(est.slope - LOG3_OVER_LOG2) < 0.25
