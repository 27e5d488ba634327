"""Finite words over the alphabet {1, .., N}.

Addresses index the cells of the recursive construction: the empty word is
the whole set, and appending a symbol descends into one of the N scaled
copies.  Serialization is dot-separated digits ("1.3.2"); the empty word
serializes as "-".
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, Tuple

Symbol = int


def _check_symbols(symbols: Tuple[int, ...]) -> None:
    for s in symbols:
        if not isinstance(s, int) or isinstance(s, bool) or s < 1:
            raise ValueError(f"symbols must be integers >= 1, got {s!r}")


@dataclass(frozen=True, order=True)
class Address:
    """An immutable word of symbols; lexicographic (shortlex-free) order."""

    symbols: Tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(self.symbols))
        _check_symbols(self.symbols)

    @property
    def length(self) -> int:
        return len(self.symbols)

    def __len__(self) -> int:
        return len(self.symbols)

    def __iter__(self):
        return iter(self.symbols)

    def child(self, symbol: int) -> "Address":
        return Address(self.symbols + (symbol,))

    def parent(self) -> "Address":
        if not self.symbols:
            raise ValueError("the empty address has no parent")
        return Address(self.symbols[:-1])

    def is_prefix_of(self, other: "Address") -> bool:
        return self.symbols == other.symbols[: len(self.symbols)]

    def __str__(self) -> str:
        return format_address(self)

    def __repr__(self) -> str:
        return f"Address({format_address(self)!r})"


ROOT = Address(())


def concat(a: Address, b: Address) -> Address:
    """a followed by b."""
    return Address(a.symbols + b.symbols)


def truncate(a: Address, n: int) -> Address:
    """The length-n prefix of a; n must not exceed len(a)."""
    if n < 0 or n > len(a):
        raise ValueError(f"cannot truncate length-{len(a)} address to {n}")
    return Address(a.symbols[:n])


def format_address(a: Address) -> str:
    if not a.symbols:
        return "-"
    return ".".join(str(s) for s in a.symbols)


def parse_address(text: str) -> Address:
    text = text.strip()
    if text in ("", "-"):
        return ROOT
    try:
        symbols = tuple(int(part) for part in text.split("."))
    except ValueError as exc:
        raise ValueError(f"bad address text {text!r}") from exc
    return Address(symbols)


def is_cut_set(members: Iterable[Address], n_symbols: int) -> bool:
    """True iff every infinite ray has exactly one prefix among members.

    For a finite family this is equivalent to checking all words at the
    maximal member length, which is what the recursive partition below does:
    the family must either be exactly {empty word} or split into n_symbols
    non-empty groups by first symbol, each group a cut set after stripping.
    """
    words = [a.symbols for a in members]
    if len(set(words)) != len(words):
        return False
    return _partition_check(words, n_symbols)


def _partition_check(words, n_symbols: int) -> bool:
    if not words:
        return False
    if any(len(w) == 0 for w in words):
        return len(words) == 1
    groups: Dict[int, list] = {}
    for w in words:
        if w[0] > n_symbols:
            return False
        groups.setdefault(w[0], []).append(w[1:])
    if len(groups) != n_symbols:
        return False
    return all(_partition_check(g, n_symbols) for g in groups.values())


@dataclass
class CutSet:
    """A stopping family: the first cells whose path product drops to delta.

    parent_lengths maps each member to the path product of its parent, the
    quantity the stopping rule compared against delta.
    """

    delta: float
    members: Tuple[Address, ...]
    parent_lengths: Dict[Address, float] = field(default_factory=dict)

    def __post_init__(self):
        if not 0 < self.delta:
            raise ValueError("delta must be positive")
        self.members = tuple(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def is_valid(self, n_symbols: int) -> bool:
        return is_cut_set(self.members, n_symbols)


def level_index(a: Address, n_symbols: int = 3) -> int:
    """Rank of the address within its own level, lexicographically."""
    idx = 0
    for s in a.symbols:
        if s > n_symbols:
            raise ValueError(f"symbol {s} exceeds alphabet size {n_symbols}")
        idx = idx * n_symbols + (s - 1)
    return idx


def level_address(index: int, depth: int, n_symbols: int = 3) -> Address:
    """Inverse of level_index at a fixed depth."""
    if not 0 <= index < n_symbols**depth:
        raise ValueError("index out of range for this depth")
    symbols = []
    for _ in range(depth):
        index, rem = divmod(index, n_symbols)
        symbols.append(rem + 1)
    return Address(tuple(reversed(symbols)))
