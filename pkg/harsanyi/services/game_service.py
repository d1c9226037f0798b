"""
Game Service Layer

Cooperative-game primitives used as ground truth by everything else:
- Brute-force Shapley values over all 2^n coalitions
- Harsanyi (Moebius) transform and its inverse (zeta transform)
- Shapley values from Harsanyi dividends
- Interaction spectra
"""

import logging
import math
import time

import numpy as np

from harsanyi.errors import ContractError, NumericError
from harsanyi.models.game import (
    AttributionVector, GameKind, GameTable, Provenance, SpectrumEntry, check_capacity
)
from harsanyi.models.player_set import PlayerSet
from harsanyi.utils.bitmask import popcounts

logger = logging.getLogger(__name__)


def _split_on_player(array, player):
    """View the table as (S without i, S with i) pairs along axis 1."""
    return array.reshape(-1, 2, 1 << player)


class GameService:
    """Service class for cooperative-game computations"""

    @staticmethod
    def evaluate_game(oracle, n):
        """
        Tabulate V(S) for every coalition.

        Raises:
            CapacityError: n above the enumeration cap
            NumericError: a non-finite value, naming the coalition
            ContractError: V(empty) is not exactly 0
        """
        check_capacity(n)
        if oracle.n != n:
            raise ContractError(f"Oracle has {oracle.n} players, expected {n}")
        values = np.asarray(oracle.values(np.arange(1 << n, dtype=np.int64)), dtype=np.float64)
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            where = PlayerSet(int(bad[0]), n)
            raise NumericError(f"Oracle returned a non-finite value at S={where}", where=where)
        return GameTable(n, values, GameKind.REWARD)

    @staticmethod
    def shapley_weights(n):
        """|S|!(n-|S|-1)!/n! for |S| = 0 .. n-1."""
        return np.array([1.0 / (n * math.comb(n - 1, s)) for s in range(n)], dtype=np.float64)

    @staticmethod
    def shapley_from_table(game):
        """Weighted marginal contributions summed over a tabulated reward game, in a fixed order."""
        game.require(GameKind.REWARD)
        n = game.n
        weights = GameService.shapley_weights(n)
        sizes = popcounts(n)
        phi = np.empty(n, dtype=np.float64)
        for i in range(n):
            pairs = _split_on_player(game.values, i)
            sizes_without = _split_on_player(sizes, i)[:, 0, :]
            marginal = pairs[:, 1, :] - pairs[:, 0, :]
            phi[i] = np.sum(weights[sizes_without] * marginal)
        return phi

    @staticmethod
    def brute_force_shapley(oracle, n):
        """
        Exact Shapley values by enumerating all 2^n coalitions.

        Args:
            oracle: ValueOracle with V(empty) = 0
            n: player count (at most 24)

        Returns:
            AttributionVector: provenance bruteforce, inference_count 2^n
        """
        started = time.perf_counter()
        game = GameService.evaluate_game(oracle, n)
        phi = GameService.shapley_from_table(game)
        logger.info(f"Brute-force Shapley over n={n} ({1 << n} coalitions) in {time.perf_counter() - started:.3f}s")
        return AttributionVector(phi, Provenance.BRUTEFORCE, 1 << n)

    @staticmethod
    def harsanyi_transform(game):
        """
        I(S) = sum over L subset of S of (-1)^(|S|-|L|) V(L), via the in-place
        fast Moebius transform (n passes over the table).
        """
        game.require(GameKind.REWARD)
        table = game.values.copy()
        for i in range(game.n):
            pairs = _split_on_player(table, i)
            pairs[:, 1, :] -= pairs[:, 0, :]
        return GameTable(game.n, table, GameKind.INTERACTION)

    @staticmethod
    def inverse_harsanyi(interactions):
        """V(S) = sum over L subset of S of I(L) (fast zeta transform)."""
        interactions.require(GameKind.INTERACTION)
        table = interactions.values.copy()
        for i in range(interactions.n):
            pairs = _split_on_player(table, i)
            pairs[:, 1, :] += pairs[:, 0, :]
        return GameTable(interactions.n, table, GameKind.REWARD)

    @staticmethod
    def shapley_from_interactions(interactions):
        """phi(i) = sum over S containing i of I(S) / |S|."""
        interactions.require(GameKind.INTERACTION)
        n = interactions.n
        sizes = popcounts(n)
        shares = np.zeros_like(interactions.values)
        nonempty = sizes > 0
        shares[nonempty] = interactions.values[nonempty] / sizes[nonempty]
        phi = np.empty(n, dtype=np.float64)
        for i in range(n):
            phi[i] = np.sum(_split_on_player(shares, i)[:, 1, :])
        return AttributionVector(phi, Provenance.HARSANYI_EXACT, 0)

    @staticmethod
    def interaction_spectrum(game):
        """
        All 2^n coalitions sorted by interaction strength |I(S)|, strongest
        first; ties keep ascending bitmask order.
        """
        interactions = GameService.harsanyi_transform(game)
        values = interactions.values
        bits = np.arange(values.shape[0], dtype=np.int64)
        order = np.lexsort((bits, -np.abs(values)))
        n = game.n
        return [SpectrumEntry(PlayerSet(int(b), n), float(abs(values[b])), float(values[b])) for b in order]

    @staticmethod
    def normalized_strengths(spectrum):
        """Strengths divided by the largest one (all zeros for a null game)."""
        strengths = np.array([entry.strength for entry in spectrum], dtype=np.float64)
        top = strengths.max() if strengths.size else 0.0
        if top == 0.0:
            return np.zeros_like(strengths)
        return strengths / top

    @staticmethod
    def count_salient(spectrum, threshold):
        return sum(1 for entry in spectrum if entry.strength > threshold)

    @staticmethod
    def spike_deviation(interactions, at_bits, height):
        """
        Largest deviation of an interaction table from a single spike of
        `height` at coalition `at_bits` (zero everywhere else).
        """
        interactions.require(GameKind.INTERACTION)
        expected = np.zeros_like(interactions.values)
        if at_bits != 0:
            expected[at_bits] = height
        return float(np.max(np.abs(interactions.values - expected)))
