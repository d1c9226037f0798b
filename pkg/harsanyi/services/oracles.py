"""
Value oracles: the evaluation contract S -> V(S) for a fixed sample.

Every oracle guarantees V(empty) = 0 exactly and deterministic answers.
`values` evaluates many coalitions at once; model-backed oracles batch it
into chunked forward passes.
"""

from abc import ABC, abstractmethod

import numpy as np

from harsanyi.config import get_config
from harsanyi.errors import ContractError
from harsanyi.models.player_set import PlayerSet
from harsanyi.utils.bitmask import membership_matrix


class ValueOracle(ABC):
    """Maps a coalition (bitmask over n players) to a real reward."""

    n: int

    @abstractmethod
    def value(self, bits):
        """V(S) for a single coalition."""

    def values(self, bits_array):
        bits_array = np.asarray(bits_array, dtype=np.int64)
        return np.array([self.value(int(b)) for b in bits_array], dtype=np.float64)

    def __call__(self, subset):
        bits = subset.bits if isinstance(subset, PlayerSet) else int(subset)
        return self.value(bits)


class FunctionOracle(ValueOracle):
    """Wraps a plain callable PlayerSet -> float."""

    def __init__(self, fn, n):
        self.fn = fn
        self.n = n

    def value(self, bits):
        if bits == 0:
            return 0.0
        return float(self.fn(PlayerSet(bits, self.n)))


class TableOracle(ValueOracle):
    """Lookup into a precomputed reward table."""

    def __init__(self, table):
        self.table = table
        self.n = table.n

    def value(self, bits):
        return float(self.table.values[bits])

    def values(self, bits_array):
        return self.table.values[np.asarray(bits_array, dtype=np.int64)].copy()


class CountingOracle(ValueOracle):
    """Counts every coalition evaluated through it, one inference each."""

    def __init__(self, inner):
        self.inner = inner
        self.n = inner.n
        self.count = 0

    def value(self, bits):
        self.count += 1
        return self.inner.value(bits)

    def values(self, bits_array):
        bits_array = np.asarray(bits_array, dtype=np.int64)
        self.count += int(bits_array.shape[0])
        return self.inner.values(bits_array)


class ModelOracle(ValueOracle):
    """
    V(S) = v(x_S) - v(x_empty) for one sample and one output class.

    With `players` given the game is restricted to that subset: players
    outside it keep their original values in every coalition, and the
    reference point is the sample with exactly the restricted players masked.
    """

    def __init__(self, model, sample, class_index, mode, players=None):
        model.check_class_index(class_index)
        self.model = model
        self.sample = sample
        self.class_index = int(class_index)
        self.mode = mode
        self.players = None if players is None else tuple(int(p) for p in players)
        self.n = model.n_players if self.players is None else len(self.players)
        if self.n < 1:
            raise ContractError("A restricted game needs at least one player")
        self.baseline_value = float(self._outputs(np.zeros(1, dtype=np.int64))[0])

    def _player_masks(self, bits_array):
        local = membership_matrix(bits_array, self.n)
        if self.players is None:
            return local
        masks = np.ones((bits_array.shape[0], self.model.n_players), dtype=bool)
        masks[:, list(self.players)] = local
        return masks

    def _outputs(self, bits_array):
        chunk = get_config().FORWARD_BATCH
        out = np.empty(bits_array.shape[0], dtype=np.float64)
        for start in range(0, bits_array.shape[0], chunk):
            masks = self._player_masks(bits_array[start:start + chunk])
            logits = self.model.output_batch(self.sample, masks, self.mode)
            out[start:start + chunk] = logits[:, self.class_index]
        return out

    def value(self, bits):
        return float(self.values(np.array([bits], dtype=np.int64))[0])

    def values(self, bits_array):
        bits_array = np.asarray(bits_array, dtype=np.int64)
        rewards = self._outputs(bits_array) - self.baseline_value
        rewards[bits_array == 0] = 0.0
        return rewards
