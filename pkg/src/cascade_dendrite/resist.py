"""Resistance perturbations, tree height, and the embedded branching process.

The resistance perturbation at a node is the limit of the sums of relative
path products over its binary (symbols 1 and 2) descendants.  Only finite
truncations are computable; every consumer receives the approximant together
with its depth and last increment, never a pretend-exact value.

Tree height sums l(prefix) * X(prefix) along infinite words and takes the
supremum; the per-address perturbations X live in a disjoint key namespace so
they are independent of the weights at or above their level by construction.
The branching process counts addresses whose prefix weights all sit exactly
at the atom 1, detected structurally rather than by float comparison.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .addr import Address, ROOT
from .cascade import DEFAULT_NODE_BUDGET, CascadeHandle
from .errors import BudgetError, ValidationError
from . import streams

RESISTANCE_DEPTH_DEFAULT = 20
RESISTANCE_BUDGET = 2**20

_X_LANE = "perturbation"


@dataclass(frozen=True)
class ResistanceApprox:
    """Finite-depth truncation of a resistance perturbation."""

    address: Address
    depth: int
    value: float
    last_increment: float


@dataclass(frozen=True)
class HeightSample:
    """Partial height of one realization up to a fixed generation."""

    depth: int
    value: float
    perturbation_law: str


# ---------------------------------------------------------------------------
# perturbation laws for the height functional


class PerturbationLaw:
    """I.i.d. nonnegative per-address factors X, keyed off the node key."""

    def describe(self) -> str:
        raise NotImplementedError

    def from_uniforms(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def draw(self, keys) -> np.ndarray:
        return self.from_uniforms(streams.uniform(keys, _X_LANE))


class ConstantPerturbation(PerturbationLaw):
    def __init__(self, value: float = 1.0):
        if value < 0:
            raise ValidationError("perturbation must be nonnegative")
        self.value = float(value)

    def describe(self):
        return f"constant({self.value:g})"

    def from_uniforms(self, u):
        return np.full_like(np.asarray(u, dtype=np.float64), self.value)


class UniformPerturbation(PerturbationLaw):
    def __init__(self, lo: float, hi: float):
        if not 0 <= lo < hi:
            raise ValidationError("need 0 <= lo < hi")
        self.lo, self.hi = float(lo), float(hi)

    def describe(self):
        return f"uniform({self.lo:g},{self.hi:g})"

    def from_uniforms(self, u):
        return self.lo + (self.hi - self.lo) * np.asarray(u, dtype=np.float64)


class ExponentialPerturbation(PerturbationLaw):
    def __init__(self, rate: float = 1.0):
        if rate <= 0:
            raise ValidationError("rate must be positive")
        self.rate = float(rate)

    def describe(self):
        return f"exponential({self.rate:g})"

    def from_uniforms(self, u):
        return -np.log1p(-np.asarray(u, dtype=np.float64)) / self.rate


# ---------------------------------------------------------------------------
# resistance approximants


def _binary_expand(handle: CascadeHandle, keys: np.ndarray, rels: np.ndarray):
    """Children 1 and 2 of each node, with relative products; address order.

    The triple is still drawn jointly (coordinate 3 participates in coupled
    laws) even though only the first two coordinates survive.
    """
    m = keys.shape[0]
    u = np.empty((3, m), dtype=np.float64)
    kept = []
    for k in range(3):
        ck = streams.child_key(keys, k + 1)
        u[k] = streams.to_unit(ck)
        if k < 2:
            kept.append(ck)
    w = handle.law.triples_from_uniforms(u)
    child_keys = np.empty(2 * m, dtype=np.uint64)
    child_rels = np.empty(2 * m, dtype=np.float64)
    for k in range(2):
        child_keys[k::2] = kept[k]
        child_rels[k::2] = rels * w[k]
    return child_keys, child_rels


def resistance(
    handle: CascadeHandle,
    i: Address = ROOT,
    depth: int = RESISTANCE_DEPTH_DEFAULT,
    budget: int = RESISTANCE_BUDGET,
) -> ResistanceApprox:
    """Sum of relative products over the binary descendants at a given depth."""
    if depth < 0:
        raise ValidationError("depth must be nonnegative")
    if 2**depth > budget:
        raise BudgetError(
            f"binary generation {depth} holds {2**depth} nodes, over the budget of {budget}",
            requested=2**depth,
            budget=budget,
        )
    keys = np.array([handle.node_key(i)], dtype=np.uint64)
    rels = np.ones(1, dtype=np.float64)
    prev = float("nan")
    value = 1.0
    for _ in range(depth):
        prev = value
        keys, rels = _binary_expand(handle, keys, rels)
        value = float(np.sum(rels))
    return ResistanceApprox(
        address=i, depth=depth, value=value, last_increment=abs(value - prev)
    )


def resistance_recursion_check(
    handle: CascadeHandle,
    i: Address = ROOT,
    depth: int = 5,
    tol: float = 1e-12,
) -> bool:
    """Does the one-step split reproduce the depth-k approximant at i?"""
    if depth < 1:
        raise ValidationError("depth must be at least 1")
    whole = resistance(handle, i, depth).value
    w = handle.sibling_triple(i)
    parts = (
        w[0] * resistance(handle, i.child(1), depth - 1).value
        + w[1] * resistance(handle, i.child(2), depth - 1).value
    )
    return abs(whole - parts) <= tol * max(1.0, abs(whole))


# ---------------------------------------------------------------------------
# height


def height_walk(
    handle: CascadeHandle,
    n: int,
    x_law: Optional[PerturbationLaw] = None,
    budget: int = DEFAULT_NODE_BUDGET,
) -> Tuple[np.ndarray, np.ndarray]:
    """Exhaustive height scan down to generation n.

    Returns (heights, level_maxima): heights[m] is the maximum over
    generation m of the running sum of l(prefix) * X(prefix), and
    level_maxima[m] is the maximum of l * X over generation m alone.  The
    running sums majorize nothing by accident: heights[m] <= sum of
    level_maxima[:m+1] holds termwise.
    """
    if n < 0:
        raise ValidationError("depth must be nonnegative")
    if 3**n > budget:
        raise BudgetError(
            f"generation {n} holds {3**n} nodes, over the budget of {budget}",
            requested=3**n,
            budget=budget,
        )
    x_law = x_law if x_law is not None else ConstantPerturbation()
    keys = np.array([handle.node_key(ROOT)], dtype=np.uint64)
    lengths = np.ones(1, dtype=np.float64)
    term = lengths * x_law.draw(keys)
    running = term.copy()
    heights = np.empty(n + 1, dtype=np.float64)
    level_maxima = np.empty(n + 1, dtype=np.float64)
    heights[0] = running[0]
    level_maxima[0] = term[0]
    for m in range(1, n + 1):
        keys, lengths = handle.expand_level(keys, lengths)
        term = lengths * x_law.draw(keys)
        running = np.repeat(running, 3) + term
        heights[m] = float(running.max())
        level_maxima[m] = float(term.max())
    return heights, level_maxima


def partial_height(
    handle: CascadeHandle,
    n: int,
    x_law: Optional[PerturbationLaw] = None,
    budget: int = DEFAULT_NODE_BUDGET,
) -> HeightSample:
    """Maximum over generation n of the running perturbed-length sums."""
    x_law = x_law if x_law is not None else ConstantPerturbation()
    heights, _ = height_walk(handle, n, x_law, budget)
    return HeightSample(depth=n, value=float(heights[n]), perturbation_law=x_law.describe())


# ---------------------------------------------------------------------------
# embedded branching process of atoms at 1


def gw_trajectory(
    handle: CascadeHandle, n: int, budget: int = DEFAULT_NODE_BUDGET
) -> np.ndarray:
    """Counts Z_0..Z_n of addresses whose prefix weights all sit at the atom 1.

    Subtrees are pruned as soon as a prefix weight leaves the atom, so the
    work is proportional to the surviving population, not 3^n.
    """
    if n < 0:
        raise ValidationError("depth must be nonnegative")
    counts = np.zeros(n + 1, dtype=np.int64)
    counts[0] = 1
    keys = np.array([handle.node_key(ROOT)], dtype=np.uint64)
    for m in range(1, n + 1):
        if keys.size == 0:
            break
        if 3 * keys.size > budget:
            raise BudgetError(
                f"surviving population would exceed the budget of {budget}",
                requested=3 * keys.size,
                budget=budget,
            )
        u = np.empty((3, keys.size), dtype=np.float64)
        children = []
        for k in range(3):
            ck = streams.child_key(keys, k + 1)
            children.append(ck)
            u[k] = streams.to_unit(ck)
        mask = handle.law.unit_mask_from_uniforms(u)
        keys = np.concatenate([children[k][mask[k]] for k in range(3)])
        counts[m] = keys.size
    return counts


def gw_population(handle: CascadeHandle, n: int, budget: int = DEFAULT_NODE_BUDGET) -> int:
    """Population at generation n of the embedded atom-at-1 process."""
    return int(gw_trajectory(handle, n, budget)[n])
