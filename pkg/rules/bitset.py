"""
Sample sets packed into Python integers.

Bit ``i`` of a bitset is set when sample ``i`` belongs to the set. Python ints
are arbitrary precision, so ``&``, ``|`` and ``int.bit_count`` give us
intersection, union and cardinality without any size bookkeeping.
"""

from typing import Iterable, List

import numpy as np


def mask_to_bits(mask: np.ndarray) -> int:
    """Convert a boolean mask into a bitset."""
    mask = np.asarray(mask, dtype=bool)
    if mask.size == 0:
        return 0
    packed = np.packbits(mask, bitorder="little")
    return int.from_bytes(packed.tobytes(), "little")


def nums_to_bits(nums: Iterable[int]) -> int:
    bits = 0
    for num in nums:
        bits |= 1 << int(num)
    return bits


def bits_to_nums(bits: int) -> List[int]:
    """Convert a bitset into the ascending list of its members."""
    nums: List[int] = []
    while bits:
        low = bits & -bits
        nums.append(low.bit_length() - 1)
        bits ^= low
    return nums


def bits_to_mask(bits: int, size: int) -> np.ndarray:
    mask = np.zeros(size, dtype=bool)
    members = bits_to_nums(bits)
    if members and members[-1] >= size:
        raise ValueError(f"Bitset has member {members[-1]} outside a universe of size {size}")
    mask[members] = True
    return mask


def full_bits(size: int) -> int:
    return (1 << size) - 1


def count(bits: int) -> int:
    return bits.bit_count()
