"""Deterministic keyed random streams for address-indexed sampling.

Every random quantity in the simulator is a pure function of (master seed,
address, purpose).  Each tree node carries a 64-bit key; the key of a child is
an avalanche mix of the parent key and the child's symbol.  The uniform driving
a node's own weight is the unit-interval image of the node's key itself, so a
sibling triple costs exactly three mixes, and auxiliary draws attached to a
node (resistance perturbations and the like) rehash the key with a purpose
lane.

The same elementwise uint64 functions serve scalar handle queries and bulk
level expansions, which keeps the two paths bit-identical.
"""

from __future__ import annotations

import hashlib
from functools import lru_cache

import numpy as np

_M1 = np.uint64(0xFF51AFD7ED558CCD)
_M2 = np.uint64(0xC4CEB9FE1A85EC53)
_S33 = np.uint64(33)
_S11 = np.uint64(11)
_HALF = np.float64(0.5)
_INV53 = np.float64(2.0**-53)


def fmix64(x):
    """Finalizing avalanche mix (a bijection on uint64).

    Accepts a uint64 scalar or array; returns a new array of the same shape.
    """
    with np.errstate(over="ignore"):
        x = np.array(x, dtype=np.uint64, copy=True)
        x ^= x >> _S33
        x *= _M1
        x ^= x >> _S33
        x *= _M2
        x ^= x >> _S33
    return x


@lru_cache(maxsize=None)
def lane(tag: str) -> np.uint64:
    """A stable 64-bit lane constant for a purpose tag."""
    digest = hashlib.blake2b(tag.encode(), digest_size=8).digest()
    return np.uint64(int.from_bytes(digest, "little"))


def root_key(seed: int, namespace: str = "cascade") -> np.uint64:
    """Key of the root node for a master seed.

    The root derivation goes through a cryptographic hash so unrelated seeds
    and namespaces land in unrelated integer lanes; per-node derivation below
    the root uses the cheap mix only.
    """
    digest = hashlib.blake2b(
        f"{namespace}|{seed}".encode(), digest_size=8
    ).digest()
    return np.uint64(int.from_bytes(digest, "little"))


def child_key(keys, symbol: int):
    """Keys of the children with a fixed symbol (vectorized over parents)."""
    return fmix64(np.asarray(keys, dtype=np.uint64) ^ lane(f"child:{symbol}"))


def key_for(root: np.uint64, symbols) -> np.uint64:
    """Fold an address (iterable of symbols) into its node key."""
    k = np.uint64(root)
    for s in symbols:
        k = child_key(k, int(s))
    return np.uint64(k)


def to_unit(keys) -> np.ndarray:
    """Map uint64 words to float64 in the open interval (0, 1)."""
    u = (np.asarray(keys, dtype=np.uint64) >> _S11).astype(np.float64)
    u += _HALF
    u *= _INV53
    return u


def uniform(keys, purpose: str) -> np.ndarray:
    """One uniform(0,1) draw per key for a named purpose."""
    return to_unit(fmix64(np.asarray(keys, dtype=np.uint64) ^ lane(purpose)))


def sibling_uniforms(parent_keys, n_coords: int = 3) -> np.ndarray:
    """Uniform draws for the joint sibling tuple below each parent.

    Coordinate k is the unit image of the symbol-(k+1) child key, so deriving
    a child's key already yields its weight uniform.  Returns an array of
    shape (n_coords,) + shape(parent_keys).
    """
    parent_keys = np.asarray(parent_keys, dtype=np.uint64)
    out = np.empty((n_coords,) + parent_keys.shape, dtype=np.float64)
    for k in range(n_coords):
        out[k] = to_unit(child_key(parent_keys, k + 1))
    return out


def fmix_into(x: np.ndarray, scratch: np.ndarray) -> np.ndarray:
    """In-place fmix64 of a uint64 array, with a caller-owned shift buffer.

    Used by the bulk level expansions to avoid per-level allocations; agrees
    elementwise with fmix64.
    """
    with np.errstate(over="ignore"):
        np.right_shift(x, _S33, out=scratch)
        x ^= scratch
        x *= _M1
        np.right_shift(x, _S33, out=scratch)
        x ^= scratch
        x *= _M2
        np.right_shift(x, _S33, out=scratch)
        x ^= scratch
    return x


def to_unit_into(keys: np.ndarray, scratch: np.ndarray, out: np.ndarray) -> np.ndarray:
    """In-place variant of to_unit writing into a float64 buffer."""
    np.right_shift(keys, _S11, out=scratch)
    np.copyto(out, scratch, casting="unsafe")
    out += _HALF
    out *= _INV53
    return out


def sequence_key(root: np.uint64, purpose: str, index) -> np.ndarray:
    """Keys for an indexed family of draws (counters, replica ids)."""
    idx = np.asarray(index, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return fmix64((np.uint64(root) ^ lane(purpose)) + idx * _M2)


def counter_uniforms(root: np.uint64, purpose: str, n: int) -> np.ndarray:
    """n uniforms in a named counter stream under a root key."""
    return to_unit(sequence_key(root, purpose, np.arange(n)))
