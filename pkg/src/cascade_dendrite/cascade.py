"""Lazy multiplicative cascade over the ternary address tree.

A cascade attaches one weight triple to every parent address; the weight of
the edge into node i1, i2, i3 is the corresponding coordinate.  Everything is
a pure function of (seed, law, address) through the keyed streams, so the
handle stores no tree: queries at arbitrary addresses, in any order, from any
process, agree.

Two access paths share one sampling rule.  The scalar path answers questions
about a single address.  The level path materializes whole generations in
lexicographic order as flat arrays, which is what the martingale sums and the
downstream graph builders consume.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Tuple

import numpy as np

from .addr import Address, ROOT
from .errors import BudgetError, ValidationError
from .laws import ScalingLaw
from . import streams

DEFAULT_NODE_BUDGET = 3**15


@dataclass(frozen=True)
class MartingaleValue:
    """One evaluation of the normalized level sum at a given depth."""

    theta: float
    depth: int
    value: float


class CascadeHandle:
    """Immutable sampler for one cascade realization (seed + law)."""

    __slots__ = ("seed", "law", "n_coords", "_root")

    def __init__(self, seed: int, law: ScalingLaw, n_coords: int = 3):
        if n_coords != 3:
            raise ValidationError("only ternary cascades are supported")
        self.seed = int(seed)
        self.law = law
        self.n_coords = n_coords
        self._root = streams.root_key(self.seed)

    def __repr__(self):
        return f"CascadeHandle(seed={self.seed}, law={self.law!r})"

    # -- scalar path ------------------------------------------------------
    def node_key(self, i: Address) -> np.uint64:
        return streams.key_for(self._root, i.symbols)

    def sibling_triple(self, parent: Address) -> np.ndarray:
        """The weight triple below a parent, shape (3,).

        Drawn jointly so that coupled families (normalized triples, exact
        pair complements) keep their within-triple dependence.
        """
        u = streams.sibling_uniforms(self.node_key(parent), self.n_coords)
        return self.law.triples_from_uniforms(u)

    def sibling_unit_mask(self, parent: Address) -> np.ndarray:
        """Which children below a parent took the atom exactly at 1."""
        u = streams.sibling_uniforms(self.node_key(parent), self.n_coords)
        return self.law.unit_mask_from_uniforms(u)

    def weight(self, i: Address) -> float:
        """Weight on the edge into a non-root node."""
        if i.length == 0:
            raise ValidationError("the root has no incoming edge")
        return float(self.sibling_triple(i.parent())[i.symbols[-1] - 1])

    def path_product(self, i: Address) -> float:
        """Product of edge weights along the path from the root; 1 at the root."""
        value = 1.0
        key = self._root
        for s in i.symbols:
            u = streams.sibling_uniforms(key, self.n_coords)
            value *= float(self.law.triples_from_uniforms(u)[s - 1])
            key = streams.child_key(key, s)
        return value

    # -- level path -------------------------------------------------------
    def expand_level(self, keys: np.ndarray, lengths: np.ndarray):
        """One generation step: per-symbol children, interleaved lexicographically."""
        m = keys.shape[0]
        child_keys = np.empty(3 * m, dtype=np.uint64)
        u = np.empty((3, m), dtype=np.float64)
        for k in range(3):
            ck = streams.child_key(keys, k + 1)
            child_keys[k::3] = ck
            u[k] = streams.to_unit(ck)
        w = self.law.triples_from_uniforms(u)
        child_lengths = np.empty(3 * m, dtype=np.float64)
        for k in range(3):
            child_lengths[k::3] = lengths * w[k]
        return child_keys, child_lengths

    def level_iter(
        self, n: int, budget: int = DEFAULT_NODE_BUDGET
    ) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
        """Yield (keys, path products) for generations 0..n in address order."""
        if n < 0:
            raise ValidationError("depth must be nonnegative")
        if 3**n > budget:
            raise BudgetError(
                f"generation {n} holds {3**n} nodes, over the budget of {budget}",
                requested=3**n,
                budget=budget,
            )
        keys = np.array([self._root], dtype=np.uint64)
        lengths = np.ones(1, dtype=np.float64)
        yield keys, lengths
        for _ in range(n):
            keys, lengths = self.expand_level(keys, lengths)
            yield keys, lengths

    def level_arrays(
        self, n: int, budget: int = DEFAULT_NODE_BUDGET
    ) -> Tuple[np.ndarray, np.ndarray]:
        """(keys, path products) over the full generation n, address order."""
        for keys, lengths in self.level_iter(n, budget):
            pass
        return keys, lengths

    def subtree_arrays(
        self, i: Address, k: int, budget: int = DEFAULT_NODE_BUDGET
    ) -> Tuple[np.ndarray, np.ndarray]:
        """(keys, relative products l(ij)/l(i)) over Σ_k below node i."""
        return self.subtree_arrays_by_key(self.node_key(i), k, budget)

    def subtree_arrays_by_key(
        self, key: np.uint64, k: int, budget: int = DEFAULT_NODE_BUDGET
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Same as subtree_arrays, rooted at an already-resolved node key."""
        if k < 0:
            raise ValidationError("depth must be nonnegative")
        if 3**k > budget:
            raise BudgetError(
                f"subtree generation {k} holds {3**k} nodes, over the budget of {budget}",
                requested=3**k,
                budget=budget,
            )
        keys = np.array([key], dtype=np.uint64)
        lengths = np.ones(1, dtype=np.float64)
        for _ in range(k):
            keys, lengths = self.expand_level(keys, lengths)
        return keys, lengths


def martingale(
    handle: CascadeHandle,
    theta: float,
    n: int,
    budget: int = DEFAULT_NODE_BUDGET,
) -> MartingaleValue:
    """Normalized level sum: sum of l(i)^theta over generation n, over F(theta)^n.

    Exact finite sum; its mean over seeds is 1 at every depth.
    """
    if theta <= 0:
        raise ValidationError("theta must be positive")
    _, lengths = handle.level_arrays(n, budget)
    f = handle.law.sum_moment(theta)
    value = float(np.sum(lengths**theta)) / f**n
    return MartingaleValue(theta=theta, depth=n, value=value)


def martingale_limit_approx(
    handle: CascadeHandle,
    theta: float,
    i: Address,
    residual_depth: int,
    budget: int = DEFAULT_NODE_BUDGET,
) -> float:
    """Depth-limited stand-in for the subtree martingale limit at node i.

    Equals the normalized sum of (l(ij)/l(i))^theta over the generation
    residual_depth of the subtree.  Regrouping these against the generation-n
    products reproduces the full sum at depth n + residual_depth, which the
    tests pin down as an identity.
    """
    if theta <= 0:
        raise ValidationError("theta must be positive")
    _, rel = handle.subtree_arrays(i, residual_depth, budget)
    f = handle.law.sum_moment(theta)
    return float(np.sum(rel**theta)) / f**residual_depth


def addresses_for_level(n: int) -> Iterator[Address]:
    """All generation-n addresses in lexicographic order."""
    if n == 0:
        yield ROOT
        return
    idx = np.zeros(n, dtype=np.int64)
    while True:
        yield Address(tuple(int(s) + 1 for s in idx))
        j = n - 1
        while j >= 0 and idx[j] == 2:
            idx[j] = 0
            j -= 1
        if j < 0:
            return
        idx[j] += 1
