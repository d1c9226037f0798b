# game.py
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Optional, Tuple

import numpy as np

from harsanyi.config import get_config
from harsanyi.errors import CapacityError, ContractError, NumericError
from harsanyi.models.player_set import PlayerSet


class GameKind(str, Enum):
    REWARD = 'reward'
    INTERACTION = 'interaction'


class Provenance(str, Enum):
    BRUTEFORCE = 'bruteforce'
    HARSANYI_EXACT = 'harsanyi_exact'
    ESTIMATOR = 'estimator'


def check_capacity(n):
    cap = get_config().MAX_ORACLE_PLAYERS
    if n > cap:
        raise CapacityError(f"n={n} exceeds the enumeration cap of {cap} players")
    if n < 1:
        raise ContractError(f"Player count must be at least 1, got {n}")


@dataclass(frozen=True)
class GameTable:
    """
    Dense table over all 2^n coalitions, indexed by PlayerSet.bits.

    kind=reward holds V(S) = v(x_S) - v(x_empty); kind=interaction holds the
    Harsanyi dividends I(S). Both have a zero entry at the empty set.
    """

    n: int
    values: np.ndarray
    kind: GameKind

    def __post_init__(self):
        check_capacity(self.n)
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.shape != (1 << self.n,):
            raise ContractError(f"Game table for n={self.n} needs {1 << self.n} values, got shape {values.shape}")
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            where = PlayerSet(int(bad[0]), self.n)
            raise NumericError(f"Non-finite game value at S={where}", where=where)
        if values[0] != 0.0:
            label = 'V' if self.kind == GameKind.REWARD else 'I'
            raise ContractError(f"{label}(empty set) must be exactly 0, got {values[0]!r}")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'kind', GameKind(self.kind))

    def __getitem__(self, subset):
        bits = subset.bits if isinstance(subset, PlayerSet) else int(subset)
        return float(self.values[bits])

    @property
    def grand_value(self):
        return float(self.values[-1])

    def require(self, kind):
        if self.kind != kind:
            raise ContractError(f"Expected a {kind.value} table, got {self.kind.value}")
        return self

    def scaled(self, factor):
        return GameTable(self.n, self.values * factor, self.kind)

    def __add__(self, other):
        if other.n != self.n or other.kind != self.kind:
            raise ContractError("Can only add tables of the same size and kind")
        return GameTable(self.n, self.values + other.values, self.kind)


@dataclass(frozen=True)
class AttributionVector:
    """Shapley values for one sample, with where they came from and what they cost."""

    phi: np.ndarray
    provenance: Provenance
    inference_count: int
    players: Optional[Tuple[int, ...]] = field(default=None)

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=np.float64)
        if phi.ndim != 1:
            raise ContractError(f"Attribution must be a vector, got shape {phi.shape}")
        if not np.all(np.isfinite(phi)):
            raise NumericError("Non-finite attribution entry", where=int(np.flatnonzero(~np.isfinite(phi))[0]))
        if self.inference_count < 0:
            raise ContractError("inference_count must be nonnegative")
        if self.players is not None and len(self.players) != phi.shape[0]:
            raise ContractError("players must list one index per attribution entry")
        phi.setflags(write=False)
        object.__setattr__(self, 'phi', phi)
        object.__setattr__(self, 'provenance', Provenance(self.provenance))

    def __len__(self):
        return int(self.phi.shape[0])

    @property
    def total(self):
        return float(np.sum(self.phi))

    def player_indices(self):
        return self.players if self.players is not None else tuple(range(len(self)))


class SpectrumEntry(NamedTuple):
    players: PlayerSet
    strength: float
    interaction: float
