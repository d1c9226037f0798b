# player_set.py
from dataclasses import dataclass

import numpy as np

from harsanyi.errors import ContractError
from harsanyi.utils.bitmask import bits_of, indices_of, iter_subsets, popcount


@dataclass(frozen=True)
class PlayerSet:
    """
    A coalition S of the players N = {0, ..., n-1}, stored as a bitmask.

    `bits` is an arbitrary-precision int so grid games with more than 64
    locations can still name their subsets; enumeration over all subsets is
    capped elsewhere.
    """

    bits: int
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ContractError(f"Player count must be at least 1, got {self.n}")
        if self.bits < 0 or self.bits >= (1 << self.n):
            raise ContractError(f"Bitmask {self.bits} is out of range for n={self.n}")

    @classmethod
    def empty(cls, n):
        return cls(0, n)

    @classmethod
    def full(cls, n):
        return cls((1 << n) - 1, n)

    @classmethod
    def of(cls, n, indices):
        indices = list(indices)
        for i in indices:
            if not 0 <= int(i) < n:
                raise ContractError(f"Player {i} is not in 0..{n - 1}")
        return cls(bits_of(indices), n)

    @classmethod
    def from_mask(cls, mask):
        mask = np.asarray(mask, dtype=bool)
        return cls(bits_of(np.flatnonzero(mask)), int(mask.shape[0]))

    @classmethod
    def parse(cls, n, text):
        """Parse '{0,3,5}', '0,3,5', 'all' or '' (empty set)."""
        text = text.strip()
        if text.lower() in ('all', 'n', '*'):
            return cls.full(n)
        text = text.strip('{}').strip()
        if not text:
            return cls.empty(n)
        return cls.of(n, (int(part) for part in text.split(',')))

    @property
    def cardinality(self):
        return popcount(self.bits)

    def __len__(self):
        return self.cardinality

    def __contains__(self, player):
        return bool((self.bits >> int(player)) & 1)

    def __iter__(self):
        return iter(self.indices())

    def indices(self):
        return indices_of(self.bits)

    def _check_same_n(self, other):
        if other.n != self.n:
            raise ContractError(f"Player sets over different N (n={self.n} vs n={other.n})")

    def union(self, other):
        self._check_same_n(other)
        return PlayerSet(self.bits | other.bits, self.n)

    def intersection(self, other):
        self._check_same_n(other)
        return PlayerSet(self.bits & other.bits, self.n)

    def difference(self, other):
        self._check_same_n(other)
        return PlayerSet(self.bits & ~other.bits, self.n)

    def complement(self):
        return PlayerSet(((1 << self.n) - 1) & ~self.bits, self.n)

    def issubset(self, other):
        self._check_same_n(other)
        return self.bits & ~other.bits == 0

    __or__ = union
    __and__ = intersection
    __sub__ = difference
    __le__ = issubset

    def with_player(self, player):
        return PlayerSet(self.bits | (1 << int(player)), self.n)

    def without_player(self, player):
        return PlayerSet(self.bits & ~(1 << int(player)), self.n)

    def subsets(self):
        """Every subset of this set, largest first."""
        for sub in iter_subsets(self.bits):
            yield PlayerSet(sub, self.n)

    def to_mask(self):
        mask = np.zeros(self.n, dtype=bool)
        mask[list(self.indices())] = True
        return mask

    def __str__(self):
        return '{' + ','.join(str(i) for i in self.indices()) + '}'
