"""Flat-array engines for cut-set expansion and batched resistance.

The object graph in the dendrite module is comfortable up to a few hundred
thousand edges.  The statistical experiments go far beyond that, so the
expansion of the address tree down to a length cut-set is also implemented
directly on numpy arrays: one row per live edge, keys and lengths advanced
level by level with the same keyed streams the scalar path uses, which keeps
the two representations bit-identical.

Per-level parent pointers are optionally recorded so that the addresses of
surviving rows can be reconstructed afterwards; the counting paths skip them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .addr import Address
from .errors import BudgetError, ValidationError
from .laws import ScalingLaw, UniformIID
from . import streams

MAX_EDGES_DEFAULT = 10_000_000


@dataclass
class LevelRecord:
    """Creation record of one generation: parent row and symbol per edge."""

    parent_row: np.ndarray  # int64, row into the previous generation's record
    symbol: np.ndarray  # uint8, 1..3


ROLE_BOUNDARY0 = 0
ROLE_BOUNDARY1 = 1
ROLE_BRANCH_POINT = 2
ROLE_BRANCH_TIP = 3

ROLE_NAMES = ("boundary0", "boundary1", "branch_point", "branch_tip")


@dataclass
class CutsetArrays:
    """Cut-set members of one realization, in a deterministic creation order.

    Vertex ids: 0 and 1 are the two boundary vertices; each refinement of an
    edge appended one branch point and one branch tip (roles[id] says which).
    For member row r, (level[r], row[r]) locates the edge in the level
    records, from which its address can be reconstructed; anchors locate the
    edge whose refinement created each non-boundary vertex, which is what the
    planar embedding needs.
    """

    delta: float
    seed: int
    keys: np.ndarray  # uint64 node key of the member address
    lengths: np.ndarray  # float64 l(i)
    parent_lengths: np.ndarray  # float64 l of the parent address
    u: np.ndarray  # int64 vertex id at the cell's local-0 end
    v: np.ndarray  # int64 vertex id at the cell's local-1 end
    level: np.ndarray  # int64 |i|
    row: np.ndarray  # int64 row in the level record
    n_vertices: int
    roles: Optional[np.ndarray] = None  # uint8 per vertex id
    records: Optional[List[LevelRecord]] = None
    anchor_level: Optional[np.ndarray] = None  # per vertex id
    anchor_row: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return int(self.keys.size)

    def addresses(self) -> List[Address]:
        if self.records is None:
            raise ValidationError("expansion was run without address records")
        return materialize_addresses(self.records, self.level, self.row)

    def anchor_addresses(self) -> List[Address]:
        """Address of the refined edge behind each vertex (root edge for the
        boundary pair)."""
        if self.records is None or self.anchor_level is None:
            raise ValidationError("expansion was run without address records")
        return materialize_addresses(self.records, self.anchor_level, self.anchor_row)


def materialize_addresses(
    records: Sequence[LevelRecord], level: np.ndarray, row: np.ndarray
) -> List[Address]:
    """Backtrack (level, row) locators through the creation records."""
    n = int(level.size)
    max_level = int(level.max()) if n else 0
    symbols = np.zeros((n, max_level), dtype=np.uint8)
    cur_row = row.astype(np.int64).copy()
    cur_level = level.astype(np.int64).copy()
    for lv in range(max_level, 0, -1):
        at = cur_level == lv
        rows = cur_row[at]
        rec = records[lv]
        symbols[at, lv - 1] = rec.symbol[rows]
        cur_row[at] = rec.parent_row[rows]
        cur_level[at] = lv - 1
    out = []
    for r in range(n):
        k = int(level[r])
        out.append(Address(tuple(int(s) for s in symbols[r, :k])))
    return out


def _triple_from_keys(law: ScalingLaw, parent_keys: np.ndarray):
    """Child keys and the jointly drawn weight triple for each parent."""
    m = parent_keys.shape[0]
    child_keys = []
    u = np.empty((3, m), dtype=np.float64)
    for k in range(3):
        ck = streams.child_key(parent_keys, k + 1)
        child_keys.append(ck)
        u[k] = streams.to_unit(ck)
    return child_keys, law.triples_from_uniforms(u)


def expand_cutset(
    handle,
    delta: float,
    max_edges: int = MAX_EDGES_DEFAULT,
    keep_records: bool = True,
) -> CutsetArrays:
    """Expand the root edge until every live cell is shorter than delta.

    A cell freezes when its length first drops to delta or below; the frozen
    rows form the length cut-set, and their parents (all longer than delta)
    witness the defining sandwich.  Termination is almost sure when weights
    cannot stick at 1, but no deterministic bound exists, so the expansion
    carries a hard edge cap and reports the survivor count when it trips.
    """
    if not 0 < delta < 1:
        raise ValidationError("delta must lie in (0, 1)")
    law = handle.law
    keys = np.array([handle.node_key(Address(()))], dtype=np.uint64)
    lengths = np.ones(1, dtype=np.float64)
    u_id = np.array([0], dtype=np.int64)
    v_id = np.array([1], dtype=np.int64)
    rows = np.array([0], dtype=np.int64)
    n_vertices = 2
    records: Optional[List[LevelRecord]] = None
    anchors_lv = [np.zeros(2, dtype=np.int64)]
    anchors_row = [np.zeros(2, dtype=np.int64)]
    role_parts = [np.array([ROLE_BOUNDARY0, ROLE_BOUNDARY1], dtype=np.uint8)]
    if keep_records:
        records = [
            LevelRecord(
                parent_row=np.zeros(1, dtype=np.int64),
                symbol=np.zeros(1, dtype=np.uint8),
            )
        ]
    else:
        # roles and anchors only matter for graph materialization
        anchors_lv = anchors_row = role_parts = None
    frozen: List[dict] = []
    total_edges = 1
    lv = 0
    while keys.size:
        m = keys.shape[0]
        if total_edges + 3 * m > max_edges:
            raise BudgetError(
                f"cut-set expansion exceeded {max_edges} edges at generation {lv}"
                f" with {m} live cells longer than delta={delta:g}",
                requested=total_edges + 3 * m,
                budget=max_edges,
            )
        total_edges += 3 * m
        child_keys, w = _triple_from_keys(law, keys)
        mids = n_vertices + np.arange(m, dtype=np.int64)
        tips = n_vertices + m + np.arange(m, dtype=np.int64)
        n_vertices += 2 * m
        if keep_records:
            role_parts.append(
                np.concatenate(
                    [
                        np.full(m, ROLE_BRANCH_POINT, dtype=np.uint8),
                        np.full(m, ROLE_BRANCH_TIP, dtype=np.uint8),
                    ]
                )
            )
            # both new vertices of a refinement anchor at the refined edge
            anchors_lv.append(np.full(2 * m, lv, dtype=np.int64))
            anchors_row.append(np.concatenate([rows, rows]))
        lv += 1
        # orientation: child 1 flips (local-0 end at the branch point), child
        # 2 keeps the parent's far end, child 3 reaches the fresh tip
        ends0 = (mids, mids, mids)
        ends1 = (u_id, v_id, tips)
        next_parts = []
        rec_parent = np.empty(3 * m, dtype=np.int64)
        rec_symbol = np.empty(3 * m, dtype=np.uint8)
        for k in range(3):
            cl = lengths * w[k]
            rec_parent[k::3] = rows
            rec_symbol[k::3] = k + 1
            crow = 3 * np.arange(m, dtype=np.int64) + k
            done = cl <= delta
            if np.any(done):
                frozen.append(
                    dict(
                        keys=child_keys[k][done],
                        lengths=cl[done],
                        parent_lengths=lengths[done],
                        u=ends0[k][done],
                        v=ends1[k][done],
                        level=np.full(int(done.sum()), lv, dtype=np.int64),
                        row=crow[done],
                    )
                )
            live = ~done
            if np.any(live):
                next_parts.append(
                    dict(
                        keys=child_keys[k][live],
                        lengths=cl[live],
                        u=ends0[k][live],
                        v=ends1[k][live],
                        row=crow[live],
                    )
                )
        if keep_records:
            records.append(LevelRecord(parent_row=rec_parent, symbol=rec_symbol))
        if next_parts:
            keys = np.concatenate([p["keys"] for p in next_parts])
            lengths = np.concatenate([p["lengths"] for p in next_parts])
            u_id = np.concatenate([p["u"] for p in next_parts])
            v_id = np.concatenate([p["v"] for p in next_parts])
            rows = np.concatenate([p["row"] for p in next_parts])
        else:
            keys = np.empty(0, dtype=np.uint64)
    if frozen:
        out = {
            name: np.concatenate([f[name] for f in frozen])
            for name in ("keys", "lengths", "parent_lengths", "u", "v", "level", "row")
        }
    else:
        out = {
            name: np.empty(0, dtype=np.uint64 if name == "keys" else np.float64)
            for name in ("keys", "lengths", "parent_lengths", "u", "v", "level", "row")
        }
    # canonical deterministic order: by generation, then by record row
    order = np.lexsort((out["row"], out["level"]))
    return CutsetArrays(
        delta=float(delta),
        seed=handle.seed,
        keys=out["keys"][order],
        lengths=out["lengths"][order],
        parent_lengths=out["parent_lengths"][order],
        u=out["u"][order].astype(np.int64),
        v=out["v"][order].astype(np.int64),
        level=out["level"][order].astype(np.int64),
        row=out["row"][order].astype(np.int64),
        n_vertices=n_vertices,
        roles=np.concatenate(role_parts) if keep_records else None,
        records=records,
        anchor_level=np.concatenate(anchors_lv) if keep_records else None,
        anchor_row=np.concatenate(anchors_row) if keep_records else None,
    )


def resistance_batch(
    law: ScalingLaw,
    keys: np.ndarray,
    depth: int,
    chunk_rows: int = 1 << 22,
) -> np.ndarray:
    """Depth-d binary-descendant sums below each key, vectorized.

    Matches the scalar resistance approximant bit for bit: the subtree of
    each key is expanded in the same order, and the per-edge sum is taken
    over a contiguous block.
    """
    if depth < 0:
        raise ValidationError("depth must be nonnegative")
    keys = np.asarray(keys, dtype=np.uint64)
    n = keys.size
    out = np.empty(n, dtype=np.float64)
    if n == 0:
        return out
    block = max(1, chunk_rows >> depth)
    for start in range(0, n, block):
        cur = keys[start : start + block]
        m0 = cur.size
        rels = np.ones(m0, dtype=np.float64)
        for _ in range(depth):
            m = cur.shape[0]
            u = np.empty((3, m), dtype=np.float64)
            kept = []
            for k in range(3):
                ck = streams.child_key(cur, k + 1)
                u[k] = streams.to_unit(ck)
                if k < 2:
                    kept.append(ck)
            w = law.triples_from_uniforms(u)
            nxt = np.empty(2 * m, dtype=np.uint64)
            nrel = np.empty(2 * m, dtype=np.float64)
            for k in range(2):
                nxt[k::2] = kept[k]
                nrel[k::2] = rels * w[k]
            cur, rels = nxt, nrel
        out[start : start + block] = rels.reshape(m0, 1 << depth).sum(axis=1)
    return out


def cutset_count_multi(
    law: ScalingLaw,
    seeds: Sequence[int],
    deltas: Sequence[float],
    max_rows: int = 60_000_000,
    seed_chunk: int = 25,
) -> np.ndarray:
    """|Σ_δ| for every (seed, delta) pair in one sweep per seed chunk.

    A cell with length l and parent length L belongs to the delta cut-set
    exactly when l <= delta < L, so a single expansion down to min(deltas)
    yields the member counts of every requested delta.  Seeds are processed
    in chunks with a per-row seed index; the hot loop is allocation-light.
    """
    deltas = np.asarray(sorted(deltas, reverse=True), dtype=np.float64)
    if deltas.size == 0 or np.any(deltas <= 0) or np.any(deltas >= 1):
        raise ValidationError("deltas must lie in (0, 1)")
    seeds = list(seeds)
    dmin = float(deltas.min())
    counts = np.zeros((len(seeds), deltas.size), dtype=np.int64)
    fast_uniform = isinstance(law, UniformIID)
    for cstart in range(0, len(seeds), seed_chunk):
        chunk = seeds[cstart : cstart + seed_chunk]
        keys = np.array([streams.root_key(s) for s in chunk], dtype=np.uint64)
        lengths = np.ones(len(chunk), dtype=np.float64)
        sid = np.arange(cstart, cstart + len(chunk), dtype=np.int64)
        while keys.size:
            m = keys.shape[0]
            if 3 * m > max_rows:
                raise BudgetError(
                    f"cut-set frontier of {3 * m} rows exceeds the row cap",
                    requested=3 * m,
                    budget=max_rows,
                )
            if fast_uniform:
                ck = np.empty(3 * m, dtype=np.uint64)
                for k in range(3):
                    ck[k * m : (k + 1) * m] = streams.child_key(keys, k + 1)
                cl = streams.to_unit(ck)
                if law.lo != 0.0 or law.hi != 1.0:
                    cl *= law.hi - law.lo
                    cl += law.lo
            else:
                child_keys, w = _triple_from_keys(law, keys)
                ck = np.concatenate(child_keys)
                cl = np.concatenate([w[0], w[1], w[2]])
            pl = np.tile(lengths, 3)
            cl *= pl
            csid = np.tile(sid, 3)
            # bin each row into the deltas it serves: cl <= delta < pl; only
            # deltas inside [min cl, max pl) can have hits at this level
            lo, hi = float(cl.min()), float(pl.max())
            for j, d in enumerate(deltas):
                if d < lo or d >= hi:
                    continue
                hit = (cl <= d) & (pl > d)
                if np.any(hit):
                    counts[:, j] += np.bincount(
                        csid[hit], minlength=counts.shape[0]
                    )
            live = cl > dmin
            keys = ck[live]
            lengths = cl[live]
            sid = csid[live]
    return counts
