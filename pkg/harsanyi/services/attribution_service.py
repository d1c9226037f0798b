"""
Attribution Service Layer

Exact Shapley values read off the Harsanyi units of a trained model, plus
the checks that tie them to the game-theoretic ground truth:
- Single-pass exact Shapley (whole player set or a restricted subset)
- The reward game a model induces on one sample
- Per-unit interaction spikes and the output decomposition over units
- Soft/hard activation gaps as gamma grows

Works for both topologies: the MLP groups units one by one, the CNN groups
the channels of each location together.
"""

import logging
import time

import numpy as np

from harsanyi.config import get_config
from harsanyi.errors import CapacityError, ContractError
from harsanyi.models.game import AttributionVector, GameKind, GameTable, Provenance, check_capacity
from harsanyi.models.harsanyi_mlp import AndMode
from harsanyi.services.game_service import GameService
from harsanyi.services.oracles import ModelOracle
from harsanyi.utils.bitmask import membership_matrix

logger = logging.getLogger(__name__)

# Unit-level enumeration costs 2^n forwards per unit
UNIT_CHECK_MAX_PLAYERS = 12


def _field_bits(membership):
    weights = np.left_shift(np.int64(1), np.arange(membership.shape[1], dtype=np.int64))
    return membership.astype(np.int64) @ weights


class AttributionService:
    """Service class for model-derived attributions and structural checks"""

    @staticmethod
    def resolve_mode(model, mode):
        return model.config.and_mode if mode is None else AndMode.parse(mode)

    @staticmethod
    def resolve_class_index(model, sample, class_spec='auto', label=None, mode=None):
        """
        Pick the output dimension to explain.

        'auto' means the ground-truth label when one is known, otherwise the
        predicted class.
        """
        if class_spec is None or str(class_spec) == 'auto':
            if label is not None:
                class_index = int(label)
            else:
                class_index = int(np.argmax(model.model_output(sample, None, AttributionService.resolve_mode(model, mode))))
        else:
            class_index = int(class_spec)
        model.check_class_index(class_index)
        return class_index

    @staticmethod
    def exact_shapley(model, sample, class_index, mode=None):
        """
        phi(i) = sum over units with i in R of w * z / |R|, from one forward pass.

        Units with an empty receptive field are skipped.

        Returns:
            AttributionVector: provenance harsanyi_exact, inference_count 1
        """
        mode = AttributionService.resolve_mode(model, mode)
        membership, contributions = model.attribution_terms(sample, class_index, mode)
        sizes = membership.sum(axis=1)
        active = sizes > 0
        shares = contributions[active] / sizes[active]
        phi = membership[active].T.astype(np.float64) @ shares
        logger.debug(f"Exact Shapley from {int(active.sum())} unit groups over n={model.n_players}")
        return AttributionVector(phi, Provenance.HARSANYI_EXACT, 1)

    @staticmethod
    def exact_shapley_grid(model, sample, class_index, mode=None):
        """Exact Shapley values over the H*W locations of a conv model's z^(0)."""
        if model.topology != 'conv':
            raise ContractError(f"Grid attributions need a conv model, got {model.topology}")
        return AttributionService.exact_shapley(model, sample, class_index, mode)

    @staticmethod
    def restricted_shapley(model, sample, selected, class_index, mode=None):
        """
        Shapley values over a player subset, every other player held at its
        original value: each unit's credit is split over R intersected with the subset.

        Raises:
            ContractError: empty subset
        """
        if selected.cardinality == 0:
            raise ContractError("Restricted Shapley needs a nonempty player subset")
        if selected.n != model.n_players:
            raise ContractError(f"Subset is over n={selected.n}, model has {model.n_players} players")
        mode = AttributionService.resolve_mode(model, mode)
        membership, contributions = model.attribution_terms(sample, class_index, mode)
        restricted = membership & selected.to_mask()[None, :]
        sizes = restricted.sum(axis=1)
        active = sizes > 0
        phi = restricted[active].T.astype(np.float64) @ (contributions[active] / sizes[active])
        players = selected.indices()
        return AttributionVector(phi[list(players)], Provenance.HARSANYI_EXACT, 1, players=players)

    @staticmethod
    def model_game(model, sample, class_index, mode=None, players=None):
        """
        Reward table V(S) = v(x_S) - v(x_empty) of one sample, or of the game
        restricted to `players` (a PlayerSet) when given.
        """
        mode = AttributionService.resolve_mode(model, mode)
        indices = None if players is None else players.indices()
        n = model.n_players if indices is None else len(indices)
        check_capacity(n)
        started = time.perf_counter()
        oracle = ModelOracle(model, sample, class_index, mode, players=indices)
        game = GameService.evaluate_game(oracle, n)
        logger.info(f"Model game over n={n} ({1 << n} masked forwards) in {time.perf_counter() - started:.3f}s")
        return game

    @staticmethod
    def brute_force_model_shapley(model, sample, class_index, mode=None, players=None):
        """Shapley values by enumeration of the model-induced (optionally restricted) game."""
        game = AttributionService.model_game(model, sample, class_index, mode, players)
        phi = GameService.shapley_from_table(game)
        restricted = None if players is None else players.indices()
        return AttributionVector(phi, Provenance.BRUTEFORCE, 1 << game.n, players=restricted)

    @staticmethod
    def unit_game(model, sample, unit, mode=None):
        """S -> z_u(x_S) for one unit over all 2^n masks."""
        n = model.n_players
        if n > UNIT_CHECK_MAX_PLAYERS:
            raise CapacityError(f"Unit checks enumerate 2^n masks; n={n} exceeds {UNIT_CHECK_MAX_PLAYERS}")
        mode = AttributionService.resolve_mode(model, mode)
        chunk = get_config().FORWARD_BATCH
        bits = np.arange(1 << n, dtype=np.int64)
        values = np.empty(bits.shape[0], dtype=np.float64)
        for start in range(0, bits.shape[0], chunk):
            masks = membership_matrix(bits[start:start + chunk], n)
            values[start:start + chunk] = model.unit_values_batch(sample, masks, mode, unit)
        return GameTable(n, values, GameKind.REWARD)

    @staticmethod
    def unit_harsanyi_check(model, sample, unit, mode=None):
        """
        Moebius transform of S -> z_u(x_S). For a Harsanyi unit it is a single
        spike of height z_u(x) at R_u.

        Raises:
            CapacityError: more than 12 players
        """
        return GameService.harsanyi_transform(AttributionService.unit_game(model, sample, unit, mode))

    @staticmethod
    def interactions_from_units(model, sample, class_index, mode=None):
        """
        Interaction table assembled from the units: I(S) is the sum of
        w * z over the unit groups whose receptive field is exactly S.
        """
        n = model.n_players
        check_capacity(n)
        mode = AttributionService.resolve_mode(model, mode)
        membership, contributions = model.attribution_terms(sample, class_index, mode)
        table = np.zeros(1 << n, dtype=np.float64)
        bits = _field_bits(membership)
        live = contributions != 0.0
        np.add.at(table, bits[live], contributions[live])
        return GameTable(n, table, GameKind.INTERACTION)

    @staticmethod
    def soft_hard_gap(model, sample, gammas):
        """
        Largest |z_soft - z_hard| over all units, one value per gamma.

        Returns:
            list of (gamma, gap) pairs in the order given
        """
        hard = model.forward_units(sample, None, AndMode.HARD)
        gaps = []
        for gamma in gammas:
            soft = model.with_gamma(gamma).forward_units(sample, None, AndMode.SOFT)
            gap = max(float(np.max(np.abs(s - h))) for s, h in zip(soft.z, hard.z))
            gaps.append((float(gamma), gap))
            logger.debug(f"gamma={gamma}: soft/hard gap {gap:.3e}")
        return gaps
