"""
Bitmask helpers over player subsets.

A subset S of N = {0, ..., n-1} is the integer whose bit i is set iff i is in S.
Game tables are indexed by that integer directly.
"""

import numpy as np


def popcounts(n):
    """Cardinality |S| for every S in 0 .. 2^n - 1, as an int64 array."""
    counts = np.zeros(1 << n, dtype=np.int64)
    for i in range(n):
        half = 1 << i
        counts[half:2 * half] = counts[:half] + 1
    return counts


def popcount(bits):
    return bin(bits).count('1')


def iter_subsets(bits):
    """Yield every subset of `bits`, largest first (descending-mask trick)."""
    sub = bits
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & bits


def indices_of(bits):
    out = []
    i = 0
    while bits:
        if bits & 1:
            out.append(i)
        bits >>= 1
        i += 1
    return tuple(out)


def bits_of(indices):
    bits = 0
    for i in indices:
        bits |= 1 << int(i)
    return bits


def membership_matrix(bits_array, n):
    """Rows of booleans: out[r, i] is True iff player i is in bits_array[r]."""
    bits_array = np.asarray(bits_array, dtype=np.int64)
    shifts = np.arange(n, dtype=np.int64)
    return ((bits_array[:, None] >> shifts[None, :]) & 1).astype(bool)


def bits_from_row(row):
    """Python int for one boolean membership row (works for any n)."""
    return bits_of(np.flatnonzero(row))

