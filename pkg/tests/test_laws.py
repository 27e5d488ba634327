"""Scaling laws and the similarity-exponent solver.

The three reference roots below are independent closed forms, not values
read back from the solver:

* iid Uniform(0,1): E w^t = 1/(t+1), so 3/(t+1) = 1 at t = 2.
* Deterministic(1/2,1/2,1/2): 3 (1/2)^t = 1 at t = log 3 / log 2.
* sqrt-Dirichlet(1/2,1/2,1/2): the squares are Dirichlet coordinates and
  sum to 1 identically, so the root is exactly 2.
"""

import math

import numpy as np
import pytest

from cascade_dendrite.errors import ConditionError, UnsupportedLawError, ValidationError
from cascade_dendrite.laws import (
    BetaIID,
    BoundedPairPlusOne,
    Deterministic,
    DiscreteIID,
    SqrtDirichlet,
    UniformIID,
    check_atom_mass_subcritical,
    check_pair_mean_one,
    law_from_spec,
    mean_sum_theta,
    small_weight_decay_from_cdf,
    solve_alpha,
)

LOG3_OVER_LOG2 = 1.584962500721156


def test_alpha_uniform_iid():
    assert abs(solve_alpha(UniformIID()) - 2.0) < 1e-9


def test_alpha_deterministic_halves():
    assert abs(solve_alpha(Deterministic(0.5, 0.5, 0.5)) - LOG3_OVER_LOG2) < 1e-9


def test_alpha_sqrt_dirichlet():
    assert abs(solve_alpha(SqrtDirichlet()) - 2.0) < 1e-9


def test_alpha_beta_iid_against_closed_form():
    # E w^t for Beta(a,b) is B(a+t,b)/B(a,b); root solved here by bisection
    # on the closed form, independently of solve_alpha's internals.
    from scipy.special import betaln

    a, b = 2.0, 3.0

    def f(t):
        return 3.0 * math.exp(betaln(a + t, b) - betaln(a, b)) - 1.0

    lo, hi = 0.5, 10.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    assert abs(solve_alpha(BetaIID(a, b)) - 0.5 * (lo + hi)) < 1e-9


def test_mean_sum_closed_points():
    val1, err1 = mean_sum_theta(UniformIID(), 1.0)
    assert abs(val1 - 1.5) < 1e-12 and err1 == 0.0
    val2, _ = mean_sum_theta(SqrtDirichlet(), 2.0)
    assert abs(val2 - 1.0) < 1e-12
    val3, _ = mean_sum_theta(Deterministic(0.5, 0.5, 0.5), 1.0)
    assert abs(val3 - 1.5) < 1e-12


def test_mean_sum_monte_carlo_agrees_with_closed_form():
    law = UniformIID()
    exact, _ = mean_sum_theta(law, 1.7)
    est, se = mean_sum_theta(law, 1.7, mc_samples=200000, seed=5)
    assert se > 0.0
    assert abs(est - exact) < 4.0 * se


def test_mean_sum_strictly_decreasing():
    law = UniformIID()
    grid = np.linspace(0.1, 4.0, 17)
    vals = [mean_sum_theta(law, t)[0] for t in grid]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_mean_sum_at_alpha_is_one():
    for law in (UniformIID(), Deterministic(0.5, 0.5, 0.5), SqrtDirichlet(),
                BetaIID(2.0, 3.0), BoundedPairPlusOne(0.2, 0.8)):
        alpha = solve_alpha(law)
        assert abs(mean_sum_theta(law, alpha)[0] - 1.0) < 1e-9


def test_solver_rejects_degenerate_law():
    # all mass at coordinates equal to 1 never crosses one
    with pytest.raises(ConditionError):
        solve_alpha(Deterministic(1.0, 1.0, 1.0))


def test_triples_land_in_range():
    # coordinate axis comes first, matching the stream layout
    for law in (UniformIID(), SqrtDirichlet(), BoundedPairPlusOne(0.2, 0.8),
                DiscreteIID([(1.0, 0.2), (0.5, 0.8)])):
        u = np.random.default_rng(0).random((3, 500))
        w = law.triples_from_uniforms(u)
        assert w.shape == (3, 500)
        assert np.all(w >= 0.0) and np.all(w <= 1.0)


def test_bounded_pair_plus_one_support():
    law = BoundedPairPlusOne(0.2, 0.8)
    u = np.random.default_rng(1).random((3, 2000))
    w = law.triples_from_uniforms(u)
    # the first pair sums to one exactly; everything is bounded off zero
    assert np.all(w[0] + w[1] == 1.0)
    assert np.all(w >= 0.2) and np.all(w <= 0.8)
    assert check_pair_mean_one(law)


def test_discrete_iid_atoms_only():
    law = DiscreteIID([(1.0, 0.2), (0.5, 0.8)])
    u = np.random.default_rng(2).random((3, 2000))
    w = law.triples_from_uniforms(u)
    assert set(np.unique(w)) <= {0.5, 1.0}
    frac_one = float(np.mean(w == 1.0))
    assert abs(frac_one - 0.2) < 0.03


def test_pair_mean_one_checker():
    assert check_pair_mean_one(UniformIID())
    assert check_pair_mean_one(Deterministic(0.5, 0.5, 0.5))
    assert check_pair_mean_one(SqrtDirichlet())
    assert not check_pair_mean_one(UniformIID(0.0, 0.8))
    assert not check_pair_mean_one(Deterministic(0.3, 0.3, 0.3))


def test_atom_mass_checker():
    assert check_atom_mass_subcritical(UniformIID())
    assert check_atom_mass_subcritical(DiscreteIID([(1.0, 0.2), (0.5, 0.8)]))
    # three atoms at one with probability 1/2 each: mean offspring 3/2 > 1
    assert not check_atom_mass_subcritical(DiscreteIID([(1.0, 0.5), (0.5, 0.5)]))


def test_spec_roundtrip():
    laws = [
        UniformIID(),
        UniformIID(0.1, 0.9),
        Deterministic(0.5, 0.4, 0.3),
        SqrtDirichlet(0.5, 0.5, 0.5),
        BetaIID(2.0, 3.0),
        BoundedPairPlusOne(0.2, 0.8),
        DiscreteIID([(1.0, 0.2), (0.5, 0.8)]),
    ]
    for law in laws:
        back = law_from_spec(law.to_spec())
        assert back == law
        assert back.to_spec() == law.to_spec()


def test_spec_rejects_unknown_family():
    with pytest.raises((UnsupportedLawError, ValidationError)):
        law_from_spec({"family": "no-such-family"})


def test_small_weight_decay_reference_functions():
    # the linear tail satisfies the decay condition at p = 0.05; the slowly
    # varying logarithmic tail must be rejected
    ok_lin, _ = small_weight_decay_from_cdf(lambda x: x, 0.05)
    assert ok_lin
    ok_log, _ = small_weight_decay_from_cdf(lambda x: 1.0 / (1.0 - np.log(x)), 0.05)
    assert not ok_log
