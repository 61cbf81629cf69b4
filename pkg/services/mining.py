import logging
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Sequence, Tuple

import numpy as np

from rules import bitset
from rules.errors import ConfigError, InputError
from rules.schema import BinarizationMode, BinarizationPolicy

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Transaction:
    """Important dimensions of one sample."""

    items: FrozenSet[int]

    @classmethod
    def of(cls, *items: int) -> "Transaction":
        return cls(frozenset(int(i) for i in items))


@dataclass(frozen=True)
class Itemset:
    items: Tuple[int, ...]
    support: int
    # transactions containing the itemset, as a bitset over the mined list
    tids: int = 0

    def __post_init__(self):
        if not self.items:
            raise ValueError("Itemsets must be nonempty")
        if self.support < 1:
            raise ValueError(f"Itemset {self.items} has support {self.support} < 1")
        object.__setattr__(self, "items", tuple(sorted(int(i) for i in self.items)))


def binarize(attr_row: Sequence[float], policy: BinarizationPolicy) -> Transaction:
    """Select the important dimensions of one attribution row."""
    row = np.asarray(attr_row, dtype=float).ravel()
    if not np.all(np.isfinite(row)):
        raise InputError("Attribution row contains non-finite values")
    d = row.shape[0]
    if policy.mode == BinarizationMode.TOP_K:
        if policy.k > d:
            raise ConfigError(f"top_k k={policy.k} exceeds the number of features d={d}")
        # stable sort on -|score| keeps the lowest index first among ties
        order = np.argsort(-np.abs(row), kind="stable")
        return Transaction(frozenset(int(j) for j in order[: policy.k]))
    if policy.mode == BinarizationMode.ABS_THRESHOLD:
        return Transaction(frozenset(int(j) for j in np.flatnonzero(np.abs(row) >= policy.tau)))
    return Transaction(frozenset(int(j) for j in np.flatnonzero(row > 0)))


def binarize_matrix(scores: np.ndarray, policy: BinarizationPolicy) -> List[Transaction]:
    if policy.mode == BinarizationMode.TOP_K and policy.k > scores.shape[1]:
        raise ConfigError(f"top_k k={policy.k} exceeds the number of features d={scores.shape[1]}")
    return [binarize(row, policy) for row in scores]


def _vertical_layout(transactions: Sequence[Transaction]) -> Dict[int, int]:
    tidsets: Dict[int, int] = {}
    for tid, transaction in enumerate(transactions):
        for item in transaction.items:
            tidsets[item] = tidsets.get(item, 0) | (1 << tid)
    return tidsets


def mine_closed_frequent(transactions: Sequence[Transaction], min_support: int) -> List[Itemset]:
    """Mine all closed itemsets with support >= ``min_support``.

    Empty transactions are dropped before mining. Enumeration follows LCM's
    prefix-preserving closure extension over vertical tidsets, so every closed
    itemset is generated exactly once. ``Itemset.tids`` refers to positions in
    the nonempty transactions, in their original order.

    Output is sorted by descending support, then ascending item tuple.
    """
    if min_support < 1:
        raise ConfigError(f"min_support must be >= 1, got {min_support}")
    kept = [t for t in transactions if t.items]
    if not kept:
        raise InputError("No nonempty transactions to mine")
    dropped = len(transactions) - len(kept)
    if dropped:
        logger.debug("Dropped %d empty transactions before mining", dropped)

    tidsets = _vertical_layout(kept)
    items = sorted(i for i, tids in tidsets.items() if bitset.count(tids) >= min_support)

    def closure(tids: int) -> Tuple[int, ...]:
        return tuple(i for i in items if tidsets[i] & tids == tids)

    found: List[Itemset] = []
    all_tids = bitset.full_bits(len(kept))
    root = closure(all_tids)
    if root and len(kept) >= min_support:
        found.append(Itemset(root, len(kept), all_tids))

    # explicit stack instead of recursion: (closed itemset, its tids, core item)
    stack: List[Tuple[Tuple[int, ...], int, int]] = [(root, all_tids, -1)]
    while stack:
        closed, tids, core = stack.pop()
        members = set(closed)
        for item in items:
            if item <= core or item in members:
                continue
            new_tids = tids & tidsets[item]
            support = bitset.count(new_tids)
            if support < min_support:
                continue
            extended = closure(new_tids)
            # prefix-preserving check: nothing below the new core item may be added
            if any(j < item and j not in members for j in extended):
                continue
            found.append(Itemset(extended, support, new_tids))
            stack.append((extended, new_tids, item))

    found.sort(key=lambda s: (-s.support, s.items))
    logger.debug("Mined %d closed itemsets from %d transactions (min_support=%d)", len(found), len(kept), min_support)
    return found
