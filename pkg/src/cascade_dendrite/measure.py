"""Self-similar mass on the tree boundary and the dimension estimators.

The natural mass of a cell is the limit of normalized level sums of path
products raised to the critical exponent.  Everything here works with a
finite-depth surrogate of that limit: cell masses are range sums of leaf
products at a common lookahead level, and cut-set masses take the lookahead
at zero, where the mass of a cell is just its length to the critical power.

Two estimators read off dimensions.  local_dimension fits the growth of
ball masses around sampled points against the radius, with balls taken in
the resistance metric of a cut-set graph matched to each radius.
cover_sum_exponent fits the growth rate of diameter-sum partition functions
across levels and locates the exponent where that rate changes sign.
"""

from __future__ import annotations

import heapq
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .addr import ROOT, Address, CutSet, level_address, level_index
from .bulk import CutsetArrays, expand_cutset, resistance_batch
from .cascade import DEFAULT_NODE_BUDGET, CascadeHandle
from .dendrite import DendriteGraph, _distances_from
from .errors import (
    InsufficientDataError,
    NoRootError,
    NotFoundError,
    ValidationError,
)
from .laws import solve_alpha
from .stats import fit_line
from . import streams

DIAMETER_CAP_DEFAULT = 4.0
LOOKAHEAD_DEFAULT = 8


@dataclass(frozen=True)
class MeasureAssignment:
    """Masses for a prefix-free family of cells.

    leaf_level is the common lookahead level the masses were read from, or
    None when they were assigned directly from lengths.  total is the sum of
    the masses; it equals 1 up to rounding when the family is a cut-set.
    """

    leaf_level: Optional[int]
    masses: Dict[Address, float]
    total: float


@dataclass(frozen=True)
class DimensionEstimate:
    method: str
    slope: float
    stderr: float
    radii_or_levels: Tuple[float, ...]
    points: Tuple[Address, ...]


def _validate_prefix_free(family: Sequence[Address]) -> List[Address]:
    members = sorted(family)
    if not members:
        raise ValidationError("family is empty")
    for a, b in zip(members, members[1:]):
        if a.symbols == b.symbols:
            raise ValidationError(f"family repeats {a!r}")
        if a.is_prefix_of(b):
            # extensions of a cell sort as a contiguous block right after it,
            # so one adjacent check per pair covers all pairs
            raise ValidationError(f"{a!r} is a prefix of {b!r}")
    return members


def cell_masses(
    handle: CascadeHandle,
    family: Union[Sequence[Address], CutSet],
    leaf_level: int,
    alpha: Optional[float] = None,
    budget: int = DEFAULT_NODE_BUDGET,
) -> MeasureAssignment:
    """Masses of a prefix-free family read at a common leaf level.

    The mass of cell i is the sum of l(j)^alpha over the level-leaf_level
    descendants j of i, normalized by the sum over the whole level.  For a
    cut-set family the masses add to 1 exactly (up to rounding); deeper leaf
    levels approach the limit mass of each cell.
    """
    members = _validate_prefix_free(
        family.members if isinstance(family, CutSet) else family
    )
    deepest = max(m.length for m in members)
    if leaf_level < deepest:
        raise ValidationError(
            f"leaf level {leaf_level} is above the deepest member ({deepest})"
        )
    if alpha is None:
        alpha = solve_alpha(handle.law)
    _, lengths = handle.level_arrays(leaf_level, budget=budget)
    leafpow = lengths**alpha
    cum = np.zeros(leafpow.size + 1, dtype=np.float64)
    np.cumsum(leafpow, out=cum[1:])
    total_all = float(cum[-1])
    masses: Dict[Address, float] = {}
    for m in members:
        start = level_index(m) * 3 ** (leaf_level - m.length)
        stop = start + 3 ** (leaf_level - m.length)
        masses[m] = float(cum[stop] - cum[start]) / total_all
    return MeasureAssignment(
        leaf_level=int(leaf_level), masses=masses, total=float(sum(masses.values()))
    )


def cutset_masses(
    source: Union[DendriteGraph, CutsetArrays], alpha: float
) -> MeasureAssignment:
    """Masses proportional to length^alpha over a cut-set, normalized to 1.

    This is the zero-lookahead surrogate of the limit mass: each cell's
    correction factor (the limit of its normalized subtree sums) is replaced
    by its mean 1.  Unbiased cell by cell, and cheap enough for cut-sets far
    beyond the object-graph scale.
    """
    if isinstance(source, DendriteGraph):
        if source.cutset is None:
            raise ValidationError("graph does not carry a cut-set")
        members = source.cutset.members
        lengths = np.array(
            [source.edges[m].length for m in members], dtype=np.float64
        )
    else:
        members = source.addresses()
        lengths = source.lengths
    w = lengths**alpha
    w /= w.sum()
    masses = {m: float(x) for m, x in zip(members, w)}
    return MeasureAssignment(
        leaf_level=None, masses=masses, total=float(sum(masses.values()))
    )


def mass_convergence(
    handle: CascadeHandle,
    family: Union[Sequence[Address], CutSet],
    levels: Sequence[int],
    alpha: Optional[float] = None,
    budget: int = DEFAULT_NODE_BUDGET,
) -> List[Tuple[int, float]]:
    """Largest mass change between successive leaf levels, per level."""
    levels = sorted(set(int(L) for L in levels))
    if len(levels) < 2:
        raise ValidationError("need at least two leaf levels")
    if alpha is None:
        alpha = solve_alpha(handle.law)
    prev = None
    out = []
    for L in levels:
        cur = cell_masses(handle, family, L, alpha=alpha, budget=budget).masses
        if prev is not None:
            out.append((L, max(abs(cur[m] - prev[m]) for m in cur)))
        prev = cur
    return out


# -- point sampling ---------------------------------------------------------


def _ray(
    handle: CascadeHandle,
    depth: int,
    alpha: float,
    index: int,
    lookahead: int,
    budget: int,
) -> Tuple[Tuple[int, ...], np.ndarray]:
    """A boundary ray to the given depth: (symbols, node keys per level).

    Stages of `lookahead` levels are drawn in sequence; within a stage the
    landing cell is chosen with probability proportional to its relative
    path product to the power alpha.  Stage uniforms come from a counter
    stream keyed by the ray index, so rays are reproducible and independent
    of evaluation order.
    """
    if depth < 0:
        raise ValidationError("depth must be nonnegative")
    if lookahead < 1:
        raise ValidationError("lookahead must be positive")
    root = handle.node_key(ROOT)
    purpose = f"sample-point:{index}"
    symbols: List[int] = []
    keys = [root]
    key = root
    stage = 0
    while len(symbols) < depth:
        _, rels = handle.subtree_arrays_by_key(key, lookahead, budget=budget)
        p = rels**alpha
        cum = np.cumsum(p)
        u = streams.to_unit(streams.sequence_key(root, purpose, stage))
        j = int(np.searchsorted(cum, u * cum[-1], side="right"))
        j = min(j, cum.size - 1)
        for s in level_address(j, lookahead).symbols:
            key = streams.child_key(np.uint64(key), s)
            symbols.append(s)
            keys.append(key)
        stage += 1
    return tuple(symbols[:depth]), np.array(keys[: depth + 1], dtype=np.uint64)


def sample_point(
    handle: CascadeHandle,
    depth: int,
    alpha: Optional[float] = None,
    index: int = 0,
    lookahead: int = LOOKAHEAD_DEFAULT,
    budget: int = DEFAULT_NODE_BUDGET,
) -> Address:
    """Address prefix of a point drawn from the lookahead mass.

    Distinct indices give independent points of the same realization.  The
    depth-k prefix is distributed like the level-k marginal of the masses
    read at the smallest multiple of `lookahead` covering the depth.
    """
    if alpha is None:
        alpha = solve_alpha(handle.law)
    symbols, _ = _ray(handle, depth, alpha, index, lookahead, budget)
    return Address(symbols)


# -- ball masses on the object graph ----------------------------------------


def ball_mass_sandwich(
    graph: DendriteGraph,
    masses: MeasureAssignment,
    x: int,
    r: float,
    diameter_cap: float = DIAMETER_CAP_DEFAULT,
) -> Tuple[float, float]:
    """Bracket the mass of the ball B(x, r) by sums over whole cells.

    A cell counts toward the upper bound when its nearer end lies strictly
    inside the ball, and toward the lower bound when its farther end plus
    diameter_cap times its length still fits inside.  The cap bounds the
    normalized diameter of the limit set hanging off a cell; cells whose
    subtree is wider than the cap can make the lower sum overshoot, so the
    cap is a modeling input, not a proof.  lower <= upper always holds.
    """
    if x not in graph.vertices:
        raise NotFoundError(f"vertex {x} not in graph")
    if r < 0:
        raise ValidationError("radius must be nonnegative")
    if diameter_cap <= 0:
        raise ValidationError("diameter cap must be positive")
    dist, _ = _distances_from(graph, x)
    lower = upper = 0.0
    for addr, mass in masses.masses.items():
        e = graph.edges.get(addr)
        if e is None:
            raise NotFoundError(f"cell {addr!r} not in graph")
        du = dist.get(e.end_local0, math.inf)
        dv = dist.get(e.end_local1, math.inf)
        near, far = (du, dv) if du <= dv else (dv, du)
        if near < r:
            upper += mass
        if far + e.length * diameter_cap <= r:
            lower += mass
    return lower, upper


# -- array-path ball machinery ----------------------------------------------


class _ArrayGraph:
    """CSR adjacency over a cut-set arrays object, for truncated searches."""

    __slots__ = ("indptr", "nbr_v", "nbr_w", "nbr_e", "u", "v", "lengths", "masses")

    def __init__(self, arrays: CutsetArrays, weights: np.ndarray, alpha: float):
        u = arrays.u.astype(np.int32)
        v = arrays.v.astype(np.int32)
        n = arrays.n_vertices
        e = np.arange(u.size, dtype=np.int32)
        ends = np.concatenate([u, v])
        other = np.concatenate([v, u])
        order = np.argsort(ends, kind="stable")
        self.indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(ends, minlength=n), out=self.indptr[1:])
        self.nbr_v = other[order]
        self.nbr_w = np.concatenate([weights, weights])[order]
        self.nbr_e = np.concatenate([e, e])[order]
        self.u = u
        self.v = v
        self.lengths = arrays.lengths
        m = arrays.lengths**alpha
        m /= m.sum()
        self.masses = m


def _ball_distances(ag: _ArrayGraph, src: int, cutoff: float) -> Dict[int, float]:
    """Distances from src out to cutoff (Dijkstra, stopped at the ball)."""
    dist = {src: 0.0}
    heap = [(0.0, src)]
    indptr, nbr_v, nbr_w = ag.indptr, ag.nbr_v, ag.nbr_w
    while heap:
        d, x = heapq.heappop(heap)
        if d > cutoff:
            break
        if d > dist.get(x, math.inf):
            continue
        for p in range(indptr[x], indptr[x + 1]):
            y = int(nbr_v[p])
            nd = d + nbr_w[p]
            if nd <= cutoff and nd < dist.get(y, math.inf):
                dist[y] = nd
                heapq.heappush(heap, (nd, y))
    return dist


def _ball_sandwich_arrays(
    ag: _ArrayGraph, x: int, r: float, diameter_cap: float
) -> Tuple[float, float]:
    """Same cell-counting rule as ball_mass_sandwich, on the CSR arrays."""
    dist = _ball_distances(ag, x, r)
    eids = set()
    indptr, nbr_e = ag.indptr, ag.nbr_e
    for vid in dist:
        for p in range(indptr[vid], indptr[vid + 1]):
            eids.add(int(nbr_e[p]))
    lower = upper = 0.0
    for eid in eids:
        du = dist.get(int(ag.u[eid]), math.inf)
        dv = dist.get(int(ag.v[eid]), math.inf)
        near, far = (du, dv) if du <= dv else (dv, du)
        if near < r:
            upper += ag.masses[eid]
        if far + ag.lengths[eid] * diameter_cap <= r:
            lower += ag.masses[eid]
    return lower, upper


def _locate_members(
    arrays: CutsetArrays,
    ray_keys: np.ndarray,
    sort_cache: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> Optional[Tuple[int, int]]:
    """Row and level of the cut-set member lying on a ray, by key match.

    The member's node key must equal the ray's key at the member's own
    level; searching the sorted member keys for every ray level finds the
    unique intersection without reconstructing any addresses.  Pass the
    result of _member_sort to reuse one sort across many rays.
    """
    keys = arrays.keys
    if keys.size == 0:
        return None
    order, sk = _member_sort(arrays) if sort_cache is None else sort_cache
    max_lv = int(arrays.level.max())
    if max_lv >= ray_keys.size:
        raise ValidationError(
            f"cut-set reaches level {max_lv}, beyond the sampled ray depth "
            f"{ray_keys.size - 1}; raise ray_depth"
        )
    pos = np.searchsorted(sk, ray_keys)
    ok = pos < sk.size
    hits = np.nonzero(ok & (sk[np.minimum(pos, sk.size - 1)] == ray_keys))[0]
    for lv in hits:
        row = int(order[pos[lv]])
        if int(arrays.level[row]) == int(lv):
            return row, int(lv)
    return None


def _member_sort(arrays: CutsetArrays) -> Tuple[np.ndarray, np.ndarray]:
    """(argsort, sorted keys) of the cut-set members, for repeated lookups."""
    order = np.argsort(arrays.keys)
    return order, arrays.keys[order]


def local_dimension(
    handle: CascadeHandle,
    radii: Sequence[float],
    n_points: int,
    delta_rule: Optional[Callable[[float], float]] = None,
    r_depth: int = 5,
    diameter_cap: float = DIAMETER_CAP_DEFAULT,
    alpha: Optional[float] = None,
    max_edges: int = 30_000_000,
    ray_depth: int = 96,
    lookahead: int = LOOKAHEAD_DEFAULT,
    index_base: int = 0,
    budget: int = DEFAULT_NODE_BUDGET,
    trace: Optional[list] = None,
) -> DimensionEstimate:
    """Fit log ball mass against log radius at sampled points.

    For each radius the realization is expanded to a cut-set at scale
    delta_rule(r) (default r / 20), edges weighted by length times a
    depth-r_depth resistance approximant, and the ball mass around each
    sampled point bracketed by the cell sandwich; the fit uses the bracket
    midpoints.  The slope is the mean over points, the stderr its scatter.

    Radii must span at least two decades.  A point-radius pair whose upper
    bound is zero is dropped; points left with fewer than three radii are
    dropped entirely, and both cases are reported as warnings.

    When trace is a list, every evaluated (point index, radius, lower,
    upper) row is appended to it, including dropped pairs.
    """
    radii = sorted(float(r) for r in radii)
    if len(radii) < 3:
        raise ValidationError("need at least three radii")
    if radii[0] <= 0:
        raise ValidationError("radii must be positive")
    if radii[-1] / radii[0] < 100.0 * (1.0 - 1e-12):
        raise ValidationError(
            f"radii span {radii[-1] / radii[0]:.3g} < 100; use at least two decades"
        )
    if n_points < 1:
        raise ValidationError("need at least one point")
    if alpha is None:
        alpha = solve_alpha(handle.law)
    rays = [
        _ray(handle, ray_depth, alpha, index_base + j, lookahead, budget)
        for j in range(n_points)
    ]
    law = handle.law
    mids = np.full((n_points, len(radii)), np.nan, dtype=np.float64)
    n_dropped = 0
    deltas = []
    for r in radii:
        delta = r / 20.0 if delta_rule is None else float(delta_rule(r))
        if not 0 < delta < r:
            raise ValidationError(f"delta rule gave {delta:g} for radius {r:g}")
        deltas.append(delta)
    # a flat floor in the delta rule makes the smallest radii share a scale;
    # group them so each distinct delta is expanded once
    ri = len(radii) - 1
    while ri >= 0:
        lo = ri
        while lo > 0 and deltas[lo - 1] == deltas[ri]:
            lo -= 1
        delta = deltas[ri]
        arrays = expand_cutset(handle, delta, max_edges=max_edges, keep_records=False)
        if law.resistance_trivial:
            weights = arrays.lengths
        else:
            weights = arrays.lengths * resistance_batch(law, arrays.keys, r_depth)
        ag = _ArrayGraph(arrays, weights, alpha)
        sort_cache = _member_sort(arrays)
        for j, (_, rk) in enumerate(rays):
            found = _locate_members(arrays, rk, sort_cache)
            if found is None:
                raise ValidationError(
                    f"ray {index_base + j} missed the cut-set at delta={delta:g}"
                )
            row, _ = found
            for rj in range(lo, ri + 1):
                r = radii[rj]
                lower, upper = _ball_sandwich_arrays(
                    ag, int(arrays.u[row]), r, diameter_cap
                )
                if trace is not None:
                    trace.append((index_base + j, r, lower, upper))
                if upper <= 0.0:
                    n_dropped += 1
                    continue
                mids[j, rj] = 0.5 * (lower + upper)
        del arrays, ag, weights
        ri = lo - 1
    if n_dropped:
        warnings.warn(
            f"{n_dropped} point-radius pairs had empty upper bounds and were dropped",
            stacklevel=2,
        )
    log_r = np.log(radii)
    slopes = []
    points = []
    n_short = 0
    for j in range(n_points):
        keep = np.isfinite(mids[j])
        if keep.sum() < 3:
            n_short += 1
            continue
        fit = fit_line(log_r[keep], np.log(mids[j][keep]))
        slopes.append(fit.slope)
        points.append(Address(rays[j][0][: min(12, ray_depth)]))
    if n_short:
        warnings.warn(
            f"{n_short} points kept fewer than three radii and were dropped",
            stacklevel=2,
        )
    if not slopes:
        raise InsufficientDataError("no point kept enough radii to fit", usable=0)
    slopes = np.asarray(slopes)
    stderr = float(slopes.std(ddof=1) / math.sqrt(slopes.size)) if slopes.size > 1 else 0.0
    return DimensionEstimate(
        method="local",
        slope=float(slopes.mean()),
        stderr=stderr,
        radii_or_levels=tuple(radii),
        points=tuple(points),
    )


# -- cover sums --------------------------------------------------------------


def subtree_diameters(
    handle: CascadeHandle,
    n: int,
    subtree_depth: int,
    budget: int = DEFAULT_NODE_BUDGET,
) -> Tuple[np.ndarray, np.ndarray]:
    """Lengths and normalized diameters of every level-n cell.

    The diameter of a cell is that of its depth-subtree_depth refinement
    with unit leaf resistance, computed by folding the exact end-to-end,
    eccentricity and diameter recursion up from the truncation level.  This
    matches the weighted diameter of the corresponding object graph.
    """
    if n < 0 or subtree_depth < 0:
        raise ValidationError("levels must be nonnegative")
    if 3 ** (n + subtree_depth) > budget:
        raise ValidationError(
            f"level {n}+{subtree_depth} needs {3 ** (n + subtree_depth)} nodes, "
            f"over the budget of {budget}"
        )
    per_level = [None] * (n + subtree_depth + 1)
    keys = np.array([handle.node_key(ROOT)], dtype=np.uint64)
    lengths = np.ones(1, dtype=np.float64)
    per_level[0] = lengths
    for lv in range(1, n + subtree_depth + 1):
        keys, lengths = handle.expand_level(keys, lengths)
        per_level[lv] = lengths
    size = 3 ** (n + subtree_depth)
    r = np.ones(size)
    a = np.ones(size)
    b = np.ones(size)
    diam = np.ones(size)
    for lv in range(n + subtree_depth, n, -1):
        w = [per_level[lv][k::3] / per_level[lv - 1] for k in range(3)]
        r1, r2 = r[0::3], r[1::3]
        a1, a2, a3 = a[0::3], a[1::3], a[2::3]
        b1, b2 = b[0::3], b[1::3]
        d1, d2, d3 = diam[0::3], diam[1::3], diam[2::3]
        # child 1 spans (branch point, local-0 end), child 2 (branch point,
        # local-1 end), child 3 (branch point, tip); child 1's orientation is
        # flipped, so the parent's local-0 eccentricity enters through b1
        rp = w[0] * r1 + w[1] * r2
        ap = np.maximum(
            w[0] * b1, w[0] * r1 + np.maximum(w[1] * a2, w[2] * a3)
        )
        bp = np.maximum(
            w[1] * b2, w[1] * r2 + np.maximum(w[0] * a1, w[2] * a3)
        )
        dp = np.maximum.reduce(
            [
                w[0] * d1,
                w[1] * d2,
                w[2] * d3,
                w[0] * a1 + w[1] * a2,
                w[0] * a1 + w[2] * a3,
                w[1] * a2 + w[2] * a3,
            ]
        )
        r, a, b, diam = rp, ap, bp, dp
    return per_level[n], diam


def cover_sum_exponent(
    handle: CascadeHandle,
    theta_grid: Sequence[float],
    n_max: int,
    subtree_depth: int = 5,
    budget: int = DEFAULT_NODE_BUDGET,
) -> DimensionEstimate:
    """Exponent where the diameter-sum growth rate changes sign.

    For each exponent theta the level sums S_n = sum over level-n cells of
    (length * normalized diameter)^theta are fitted log-linearly in n; the
    fitted growth rate decreases in theta, and the estimate interpolates the
    exponent where it crosses zero.
    """
    thetas = np.asarray(sorted(float(t) for t in theta_grid), dtype=np.float64)
    if thetas.size < 2:
        raise ValidationError("need at least two exponents")
    if thetas[0] <= 0:
        raise ValidationError("exponents must be positive")
    if n_max < 3:
        raise ValidationError("need at least levels 1..3 for a growth fit")
    log_s = np.empty((thetas.size, n_max), dtype=np.float64)
    for n in range(1, n_max + 1):
        lengths, diam = subtree_diameters(handle, n, subtree_depth, budget=budget)
        log_cells = np.log(lengths * diam)
        # S_n(theta) via a stable log-sum-exp over cells
        ex = np.outer(thetas, log_cells)
        top = ex.max(axis=1, keepdims=True)
        log_s[:, n - 1] = top[:, 0] + np.log(np.exp(ex - top).sum(axis=1))
    levels = np.arange(1, n_max + 1, dtype=np.float64)
    rates = np.empty(thetas.size)
    errs = np.empty(thetas.size)
    for t in range(thetas.size):
        fit = fit_line(levels, log_s[t])
        rates[t] = fit.slope
        errs[t] = fit.stderr
    for t in range(thetas.size - 1):
        if rates[t + 1] > rates[t] + 2.0 * (errs[t] + errs[t + 1]):
            warnings.warn(
                "growth rate is not decreasing across the exponent grid "
                f"(at theta={thetas[t]:g}); fit quality is suspect",
                stacklevel=2,
            )
            break
    cross = None
    for t in range(thetas.size - 1):
        if rates[t] >= 0.0 > rates[t + 1]:
            cross = t
            break
    if cross is None:
        raise NoRootError(
            "growth rate does not change sign on the exponent grid "
            f"[{thetas[0]:g}, {thetas[-1]:g}]"
        )
    g0, g1 = rates[cross], rates[cross + 1]
    t0, t1 = thetas[cross], thetas[cross + 1]
    theta_star = t0 + (t1 - t0) * g0 / (g0 - g1)
    se = (t1 - t0) * math.hypot(errs[cross], errs[cross + 1]) / abs(g0 - g1)
    return DimensionEstimate(
        method="cover",
        slope=float(theta_star),
        stderr=float(se),
        radii_or_levels=tuple(float(n) for n in range(1, n_max + 1)),
        points=(),
    )
