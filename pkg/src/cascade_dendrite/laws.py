"""Scaling-weight laws for the multiplicative cascade.

A law describes the joint distribution of one sibling triple of contraction
weights (w1, w2, w3).  Each family exposes:

* an exact transform from three uniform(0,1) draws to a weight triple, used
  by the keyed streams so that every node's triple is a pure function of its
  address;
* exact closed forms for the coordinate moments E w_k^theta, from which the
  mean sum F(theta) = E(w1^theta + w2^theta + w3^theta) is assembled;
* structural metadata: coordinate independence, unit-interval support,
  atoms sitting exactly at 1 (these drive the embedded branching process),
  and whether w1 + w2 = 1 holds almost surely (which forces the boundary
  resistance to be identically 1).

The similarity exponent alpha is the unique positive root of F(theta) = 1;
it exists whenever the support lies in (0, 1], weights are positive, and the
mass at 1 sums below 1 across the three coordinates.
"""

from __future__ import annotations

import math
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import special as sp

from .errors import ConditionError, NoRootError, UnsupportedLawError, ValidationError


class ScalingLaw:
    """Base class; concrete families fill in the metadata and math."""

    family: str = ""
    n_coords: int = 3
    independent_coordinates: bool = False
    identical_marginals: bool = False
    support_in_unit: bool = True
    resistance_trivial: bool = False  # w1 + w2 == 1 almost surely

    # -- sampling ---------------------------------------------------------
    def triples_from_uniforms(self, u: np.ndarray) -> np.ndarray:
        """Map uniforms of shape (3, ...) to weights of the same shape."""
        raise NotImplementedError

    def unit_mask_from_uniforms(self, u: np.ndarray) -> np.ndarray:
        """Boolean mask of coordinates whose weight is the atom at 1.

        Detection is structural (which atom was selected), not a float
        comparison on computed products; continuous families return all
        False because their mass at 1 is zero.
        """
        return np.zeros(np.shape(u), dtype=bool)

    # -- exact moments ----------------------------------------------------
    def coordinate_moment(self, k: int, theta: float) -> float:
        """E w_k^theta (k is 0-based), exact."""
        raise NotImplementedError

    def sum_moment(self, theta: float) -> float:
        """F(theta) = sum_k E w_k^theta, exact closed form."""
        return float(sum(self.coordinate_moment(k, theta) for k in range(3)))

    def coordinate_mean(self, k: int) -> float:
        return self.coordinate_moment(k, 1.0)

    def mean_first_two(self) -> float:
        """E(w1 + w2), exact; laws with the pair identity override."""
        return self.coordinate_mean(0) + self.coordinate_mean(1)

    def prob_one_sum(self) -> float:
        """sum_k P(w_k = 1)."""
        return 0.0

    def prob_zero(self) -> float:
        """max_k P(w_k = 0); every supported family keeps this at 0."""
        return 0.0

    # -- marginals (independent-coordinate families) -----------------------
    def marginal_cdf(self, x: np.ndarray, k: int = 0) -> np.ndarray:
        raise UnsupportedLawError(
            f"{self.family}: no closed-form marginal distribution function"
        )

    def marginal_ppf(self, q: np.ndarray, k: int = 0) -> np.ndarray:
        raise UnsupportedLawError(
            f"{self.family}: no closed-form marginal quantile function"
        )

    # -- description -------------------------------------------------------
    def params(self) -> Dict[str, object]:
        raise NotImplementedError

    def to_spec(self) -> Dict[str, object]:
        out: Dict[str, object] = {"family": self.family}
        out.update(self.params())
        return out

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}={v}" for k, v in self.params().items())
        return f"{type(self).__name__}({inner})"

    def __eq__(self, other) -> bool:
        return isinstance(other, ScalingLaw) and self.to_spec() == other.to_spec()

    def __hash__(self):
        return hash(repr(sorted(self.to_spec().items())))


class Deterministic(ScalingLaw):
    """Fixed weights (r1, r2, r3); the classical self-similar case."""

    family = "deterministic"
    independent_coordinates = False  # degenerate: conditional checks refuse it

    def __init__(self, r1: float, r2: float, r3: float):
        for r in (r1, r2, r3):
            if not 0 < r:
                raise ValidationError("deterministic weights must be positive")
        self.r = (float(r1), float(r2), float(r3))
        self.support_in_unit = max(self.r) <= 1.0
        self.resistance_trivial = self.r[0] + self.r[1] == 1.0

    def triples_from_uniforms(self, u):
        u = np.asarray(u, dtype=np.float64)
        out = np.empty_like(u)
        for k in range(3):
            out[k] = self.r[k]
        return out

    def unit_mask_from_uniforms(self, u):
        u = np.asarray(u)
        mask = np.zeros(u.shape, dtype=bool)
        for k in range(3):
            mask[k] = self.r[k] == 1.0
        return mask

    def coordinate_moment(self, k, theta):
        return self.r[k] ** theta

    def prob_one_sum(self):
        return float(sum(1.0 for r in self.r if r == 1.0))

    def marginal_cdf(self, x, k: int = 0):
        return (np.asarray(x, dtype=np.float64) >= self.r[k]).astype(np.float64)

    def params(self):
        return {"r1": self.r[0], "r2": self.r[1], "r3": self.r[2]}


class UniformIID(ScalingLaw):
    """Three independent uniform(lo, hi) weights."""

    family = "uniform_iid"
    independent_coordinates = True
    identical_marginals = True

    def __init__(self, lo: float = 0.0, hi: float = 1.0):
        if not (0.0 <= lo < hi):
            raise ValidationError("need 0 <= lo < hi")
        self.lo, self.hi = float(lo), float(hi)
        self.support_in_unit = self.hi <= 1.0

    def triples_from_uniforms(self, u):
        u = np.asarray(u, dtype=np.float64)
        return self.lo + (self.hi - self.lo) * u

    def coordinate_moment(self, k, theta):
        # integral of x^theta over (lo, hi), normalized
        lo, hi, t = self.lo, self.hi, theta
        if t == 0:
            return 1.0
        return (hi ** (t + 1) - lo ** (t + 1)) / ((hi - lo) * (t + 1))

    def marginal_cdf(self, x, k: int = 0):
        x = np.asarray(x, dtype=np.float64)
        return np.clip((x - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def marginal_ppf(self, q, k: int = 0):
        return self.lo + (self.hi - self.lo) * np.asarray(q, dtype=np.float64)

    def params(self):
        return {"lo": self.lo, "hi": self.hi}


class SqrtDirichlet(ScalingLaw):
    """Componentwise square root of a Dirichlet(a1, a2, a3) triple.

    The squared weights sum to 1, so the coordinates are dependent.  With
    parameters (1/2, 1/2, 1/2) the mean sum is 3/(1+theta) and the pair
    condition E(w1 + w2) = 1 holds, the continuum-tree calibration.
    """

    family = "sqrt_dirichlet"
    independent_coordinates = False

    def __init__(self, a1: float = 0.5, a2: float = 0.5, a3: float = 0.5):
        for a in (a1, a2, a3):
            if not a > 0:
                raise ValidationError("dirichlet parameters must be positive")
        self.a = (float(a1), float(a2), float(a3))
        self.a0 = float(sum(self.a))

    def triples_from_uniforms(self, u):
        u = np.asarray(u, dtype=np.float64)
        g = np.empty_like(u)
        for k in range(3):
            g[k] = sp.gammaincinv(self.a[k], u[k])
        total = g[0] + g[1] + g[2]
        return np.sqrt(g / total)

    def coordinate_moment(self, k, theta):
        # w_k^2 is Beta(a_k, a0 - a_k), so E w_k^theta is a Beta moment at theta/2
        a, rest = self.a[k], self.a0 - self.a[k]
        return math.exp(sp.betaln(a + theta / 2.0, rest) - sp.betaln(a, rest))

    def marginal_cdf(self, x, k: int = 0):
        x = np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0)
        return sp.betainc(self.a[k], self.a0 - self.a[k], x * x)

    def marginal_ppf(self, q, k: int = 0):
        q = np.asarray(q, dtype=np.float64)
        return np.sqrt(sp.betaincinv(self.a[k], self.a0 - self.a[k], q))

    def params(self):
        return {"a1": self.a[0], "a2": self.a[1], "a3": self.a[2]}


class BetaIID(ScalingLaw):
    """Three independent Beta(a, b) weights."""

    family = "beta_iid"
    independent_coordinates = True
    identical_marginals = True

    def __init__(self, a: float, b: float):
        if not (a > 0 and b > 0):
            raise ValidationError("beta parameters must be positive")
        self.a, self.b = float(a), float(b)

    def triples_from_uniforms(self, u):
        return sp.betaincinv(self.a, self.b, np.asarray(u, dtype=np.float64))

    def coordinate_moment(self, k, theta):
        return math.exp(sp.betaln(self.a + theta, self.b) - sp.betaln(self.a, self.b))

    def marginal_cdf(self, x, k: int = 0):
        x = np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0)
        return sp.betainc(self.a, self.b, x)

    def marginal_ppf(self, q, k: int = 0):
        return sp.betaincinv(self.a, self.b, np.asarray(q, dtype=np.float64))

    def params(self):
        return {"a": self.a, "b": self.b}


class DiscreteIID(ScalingLaw):
    """Three independent draws from a finite atom list [(value, prob), ...]."""

    family = "discrete_iid"
    independent_coordinates = True
    identical_marginals = True

    def __init__(self, atoms: Sequence[Tuple[float, float]]):
        if not atoms:
            raise ValidationError("need at least one atom")
        values = np.asarray([a[0] for a in atoms], dtype=np.float64)
        probs = np.asarray([a[1] for a in atoms], dtype=np.float64)
        if np.any(values <= 0):
            raise ValidationError("atom values must be positive")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
            raise ValidationError("atom probabilities must be >= 0 and sum to 1")
        self.values = values
        self.probs = probs / probs.sum()
        self.cum = np.cumsum(self.probs)
        self.cum[-1] = 1.0
        self.is_unit_atom = values == 1.0
        self.support_in_unit = bool(values.max() <= 1.0)

    def indices_from_uniforms(self, u):
        return np.searchsorted(self.cum, np.asarray(u, dtype=np.float64), side="left")

    def triples_from_uniforms(self, u):
        return self.values[self.indices_from_uniforms(u)]

    def unit_mask_from_uniforms(self, u):
        return self.is_unit_atom[self.indices_from_uniforms(u)]

    def coordinate_moment(self, k, theta):
        return float(np.sum(self.probs * self.values**theta))

    def prob_one_sum(self):
        return 3.0 * float(self.probs[self.is_unit_atom].sum())

    def marginal_cdf(self, x, k: int = 0):
        x = np.asarray(x, dtype=np.float64)
        idx = np.searchsorted(np.sort(self.values), x, side="right")
        order = np.argsort(self.values)
        cum_sorted = np.concatenate([[0.0], np.cumsum(self.probs[order])])
        return cum_sorted[idx]

    def marginal_ppf(self, q, k: int = 0):
        return self.values[
            np.searchsorted(self.cum, np.asarray(q, dtype=np.float64), side="left")
        ]

    def params(self):
        return {"atoms": [[float(v), float(p)] for v, p in zip(self.values, self.probs)]}


class BoundedPairPlusOne(ScalingLaw):
    """w1 uniform(lo, hi), w2 = 1 - w1 exactly, w3 an independent uniform(lo, hi).

    With lo + hi = 1 every coordinate is uniform(lo, hi) and bounded away
    from zero, the regime where cell neighborhoods admit a deterministic
    bound.  The pair identity makes the boundary resistance identically 1.
    """

    family = "bounded_pair_plus_one"
    independent_coordinates = False
    resistance_trivial = True

    def __init__(self, lo: float = 0.2, hi: float = 0.8):
        if not (0.0 < lo < hi < 1.0):
            raise ValidationError("need 0 < lo < hi < 1")
        self.lo, self.hi = float(lo), float(hi)

    def triples_from_uniforms(self, u):
        u = np.asarray(u, dtype=np.float64)
        out = np.empty_like(u)
        out[0] = self.lo + (self.hi - self.lo) * u[0]
        out[1] = 1.0 - out[0]
        out[2] = self.lo + (self.hi - self.lo) * u[2]
        return out

    def coordinate_moment(self, k, theta):
        lo, hi, t = self.lo, self.hi, theta
        if t == 0:
            return 1.0
        if k == 1:  # 1 - uniform(lo, hi) is uniform(1-hi, 1-lo)
            lo, hi = 1.0 - hi, 1.0 - lo
        return (hi ** (t + 1) - lo ** (t + 1)) / ((hi - lo) * (t + 1))

    def mean_first_two(self):
        return 1.0  # w1 + w2 = 1 identically

    def marginal_cdf(self, x, k: int = 0):
        lo, hi = (1.0 - self.hi, 1.0 - self.lo) if k == 1 else (self.lo, self.hi)
        x = np.asarray(x, dtype=np.float64)
        return np.clip((x - lo) / (hi - lo), 0.0, 1.0)

    def params(self):
        return {"lo": self.lo, "hi": self.hi}


_FAMILIES = {
    cls.family: cls
    for cls in (
        Deterministic,
        UniformIID,
        SqrtDirichlet,
        BetaIID,
        DiscreteIID,
        BoundedPairPlusOne,
    )
}


def law_from_spec(spec: Dict[str, object]) -> ScalingLaw:
    """Build a law from JSON: {"family": ..., "params": {...}}.

    Parameters may also sit flat next to "family"; both shapes round-trip
    through to_spec.
    """
    if not isinstance(spec, dict) or "family" not in spec:
        raise ValidationError("law: missing 'family'")
    family = spec["family"]
    if family not in _FAMILIES:
        raise ValidationError(
            f"law.family: unknown {family!r}, expected one of {sorted(_FAMILIES)}"
        )
    kwargs = {k: v for k, v in spec.items() if k != "family"}
    nested = kwargs.pop("params", None)
    if nested is not None:
        if not isinstance(nested, dict):
            raise ValidationError("law.params: expected an object")
        kwargs.update(nested)
    if family == "discrete_iid" and "atoms" in kwargs:
        kwargs["atoms"] = [tuple(a) for a in kwargs["atoms"]]
    try:
        return _FAMILIES[family](**kwargs)
    except TypeError as exc:
        raise ValidationError(f"law.params: {exc}") from exc


# ---------------------------------------------------------------------------
# mean sum of powers and the similarity exponent


def mean_sum_theta(
    law: ScalingLaw,
    theta: float,
    mc_samples: Optional[int] = None,
    seed: int = 0,
) -> Tuple[float, float]:
    """F(theta) with its standard error (0 for the closed forms).

    Every built-in family has an exact closed form; passing mc_samples forces
    the Monte Carlo estimator instead (used to cross-check the closed forms).
    """
    if theta <= 0:
        raise ValidationError("theta must be positive")
    if mc_samples is None:
        return law.sum_moment(theta), 0.0
    if mc_samples < 2:
        raise ValidationError("mc_samples must be at least 2")
    rng = np.random.default_rng(seed)
    u = rng.random((3, int(mc_samples)))
    w = law.triples_from_uniforms(u)
    sums = np.sum(w**theta, axis=0)
    return float(sums.mean()), float(sums.std(ddof=1) / math.sqrt(sums.size))


def solve_alpha(law: ScalingLaw, tol: float = 1e-10, max_doublings: int = 20) -> float:
    """The unique positive root of F(theta) = 1, by bracketing and bisection.

    On laws supported in (0, 1] with positive weights F is strictly
    decreasing, starts at 3, and tends to the total mass at 1, so the root
    exists precisely when that mass is below 1.  Support reaching beyond 1
    is tolerated; the bracket search then finds the first crossing if any.
    The result satisfies |F(alpha) - 1| <= tol.
    """
    if law.prob_zero() > 0:
        raise ConditionError("weights must be positive")
    if law.support_in_unit and law.prob_one_sum() >= 1.0:
        raise ConditionError(
            f"total mass at 1 is {law.prob_one_sum():g} >= 1; no positive root"
        )
    lo, hi = 0.0, 1.0
    for _ in range(max_doublings + 1):
        if law.sum_moment(hi) < 1.0:
            break
        hi *= 2.0
    else:
        raise NoRootError(
            f"F stayed >= 1 up to theta = {hi:g} (doubling cap reached)"
        )
    root = 0.5 * (lo + hi)
    for _ in range(200):
        root = 0.5 * (lo + hi)
        if hi - lo <= tol and abs(law.sum_moment(root) - 1.0) <= tol:
            break
        if law.sum_moment(root) >= 1.0:
            lo = root
        else:
            hi = root
    return root


# ---------------------------------------------------------------------------
# structural conditions


def check_pair_mean_one(law: ScalingLaw, tol: float = 1e-12) -> bool:
    """Does E(w1 + w2) = 1 hold (the resistance-martingale calibration)?"""
    return abs(law.mean_first_two() - 1.0) <= tol


def check_atom_mass_subcritical(law: ScalingLaw) -> bool:
    """Is the total mass at 1 strictly below 1 (finite-height regime)?"""
    return law.prob_one_sum() < 1.0


def default_x_grid() -> np.ndarray:
    return 2.0 ** -np.arange(0, 21, dtype=np.float64)


def default_eps_grid(p: float) -> np.ndarray:
    return p * 2.0 ** -np.arange(0, 41, dtype=np.float64)


def small_weight_decay_from_cdf(
    phi,
    p: float,
    x_grid: Optional[np.ndarray] = None,
    eps_grid: Optional[np.ndarray] = None,
) -> Tuple[bool, float]:
    """Largest grid eps with phi(eps*x) <= p*phi(x) across the x grid.

    phi is a distribution function on (0, 1].  Returns (False, nan) when no
    grid value passes, which is how heavy log-type tails are rejected.
    """
    if not 0 < p < 1:
        raise ValidationError("p must lie in (0, 1)")
    x = default_x_grid() if x_grid is None else np.asarray(x_grid, dtype=np.float64)
    eps_values = default_eps_grid(p) if eps_grid is None else np.asarray(eps_grid)
    px = p * np.asarray(phi(x), dtype=np.float64)
    for eps in eps_values:
        if np.all(np.asarray(phi(eps * x), dtype=np.float64) <= px + 1e-15):
            return True, float(eps)
    return False, float("nan")


def check_small_weight_decay(
    law: ScalingLaw,
    p: float,
    x_grid: Optional[np.ndarray] = None,
    eps_grid: Optional[np.ndarray] = None,
    mc_samples: Optional[int] = None,
    seed: int = 0,
) -> Tuple[bool, float]:
    """Conditional small-weight check P(w <= eps*x | w <= x) <= p for all x.

    Uses the closed-form marginal distribution function; pass mc_samples to
    force the empirical route (x cells with no conditioning mass are skipped
    there, since nothing can be concluded from them).  Requires independent
    coordinates; degenerate or coupled triples are refused.
    """
    if not law.independent_coordinates:
        raise UnsupportedLawError(
            f"{law.family}: conditional small-weight check needs independent coordinates"
        )
    if not 0 < p < 1:
        raise ValidationError("p must lie in (0, 1)")
    coords = [0] if law.identical_marginals else [0, 1, 2]
    if mc_samples is None:
        best: Tuple[bool, float] = (True, float("inf"))
        for k in coords:
            ok, eps = small_weight_decay_from_cdf(
                lambda t, k=k: law.marginal_cdf(t, k), p, x_grid, eps_grid
            )
            if not ok:
                return False, float("nan")
            best = (True, min(best[1], eps))
        return best

    rng = np.random.default_rng(seed)
    x = default_x_grid() if x_grid is None else np.asarray(x_grid, dtype=np.float64)
    eps_values = default_eps_grid(p) if eps_grid is None else np.asarray(eps_grid)
    found = float("inf")
    for k in coords:
        w = law.triples_from_uniforms(rng.random((3, int(mc_samples))))[k]
        passed = float("nan")
        for eps in eps_values:
            ok = True
            for xv in x:
                below = w <= xv
                m = int(below.sum())
                if m < 50:
                    continue  # no conditioning mass to test against
                frac = float(np.count_nonzero(w[below] <= eps * xv)) / m
                if frac > p:
                    ok = False
                    break
            if ok:
                passed = eps
                break
        if math.isnan(passed):
            return False, float("nan")
        found = min(found, passed)
    return True, float(found)
