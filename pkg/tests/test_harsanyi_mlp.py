import numpy as np
import pytest

from harsanyi.errors import CapacityError, ContractError
from harsanyi.models.experiment import InitScheme
from harsanyi.models.game import GameKind, GameTable, Provenance
from harsanyi.models.harsanyi_mlp import (
    AndMode, ChildSelector, ChildrenScope, HarsanyiBlock, HarsanyiMLP, ModelConfig, OutputHead, Sample,
    geometric_mean,
)
from harsanyi.models.player_set import PlayerSet
from harsanyi.services.attribution_service import AttributionService
from harsanyi.services.game_service import GameService
from harsanyi.services.training_service import TrainingService
from harsanyi.utils.bitmask import membership_matrix
from tests.conftest import mixed_sample, random_mlp, random_sample, single_unit_net

MODES = [AndMode.HARD, AndMode.SOFT]


def two_block_net(mode=AndMode.HARD):
    """Block 0: u0 over inputs {0,1}, u1 over {1,2}, u2 over nothing. Block 1: one unit over u0 and u1."""
    config = ModelConfig(n_inputs=4, block_sizes=(3, 1), class_count=1, and_mode=mode, gamma=1.0)
    first = HarsanyiBlock(
        weights=[[1.0, 1.0, 0.0, 0.0], [0.0, 1.0, 1.0, 0.0], [1.0, 1.0, 1.0, 1.0]],
        tau=[[1.0, 1.0, -1.0, -1.0], [-1.0, 1.0, 1.0, -1.0], [-1.0, -1.0, -1.0, -1.0]],
    )
    second = HarsanyiBlock(weights=[[1.0, 1.0, 1.0]], tau=[[0.5, 0.5, -0.5]])
    return HarsanyiMLP(config, [first, second], OutputHead([[1.0, 1.0, 1.0, 1.0]]))


# ---- forward ---------------------------------------------------------------

def test_single_unit_hard(unit_net, unit_sample):
    units = unit_net.forward_units(unit_sample)
    assert units.unit(0, 0) == 5.0
    assert unit_net.model_output(unit_sample)[0] == 5.0


@pytest.mark.parametrize('mode', MODES)
def test_masking_a_child_zeroes_the_unit(unit_sample, mode):
    net = single_unit_net(mode=mode)
    assert net.forward_units(unit_sample, PlayerSet.of(2, [0]), mode).unit(0, 0) == 0.0
    assert net.model_output(unit_sample, PlayerSet.of(2, [1]), mode)[0] == 0.0


def test_single_unit_soft(unit_sample):
    net = single_unit_net(mode=AndMode.SOFT, gamma=1.0)
    assert net.forward_units(unit_sample).unit(0, 0) == pytest.approx(4.89710, abs=1e-5)


@pytest.mark.parametrize('mode', MODES)
def test_empty_mask_gives_zero_logits(mode):
    net = random_mlp(seed=3, mode=mode, class_count=3)
    logits = net.model_output(random_sample(8, 3), PlayerSet.empty(8), mode)
    assert np.all(logits == 0.0)


def test_head_is_linear_in_units():
    net = random_mlp(seed=4)
    sample = random_sample(8, 4)
    units = net.forward_units(sample).flat()
    np.testing.assert_allclose(net.model_output(sample), net.head.weights @ units, rtol=1e-12)


def test_negative_pre_activation_is_clipped():
    config = ModelConfig(n_inputs=2, block_sizes=(1,), class_count=1, and_mode=AndMode.HARD)
    net = HarsanyiMLP(config, [HarsanyiBlock([[-1.0, -1.0]], [[1.0, 1.0]])], OutputHead([[1.0]]))
    assert net.forward_units(Sample([2.0, 3.0])).unit(0, 0) == 0.0


def test_baseline_shifts_the_input():
    net = single_unit_net()
    sample = Sample([2.0, 3.0], baseline=[1.0, 1.0])
    assert net.forward_units(sample).unit(0, 0) == 3.0
    assert net.forward_units(Sample([1.0, 3.0], baseline=[1.0, 0.0])).unit(0, 0) == 0.0


def test_shape_contracts():
    with pytest.raises(ContractError):
        Sample([1.0, 2.0], baseline=[0.0])
    with pytest.raises(ContractError):
        single_unit_net().forward_units(Sample([1.0, 2.0, 3.0]))
    with pytest.raises(ContractError):
        HarsanyiMLP(ModelConfig(n_inputs=2, block_sizes=(2,), class_count=1),
                    [HarsanyiBlock([[1.0, 1.0]], [[1.0, 1.0]])], OutputHead([[1.0]]))
    with pytest.raises(ContractError):
        single_unit_net().check_class_index(1)


# ---- selectors and the AND -------------------------------------------------

def test_zero_tau_rejects():
    selector = ChildSelector(np.array([0.0, 1.0, -2.0, 1e-12]))
    assert selector.children().tolist() == [1, 3]


def test_unit_without_children_is_zero():
    net = two_block_net()
    assert net.forward_units(Sample([1.0, 1.0, 1.0, 1.0])).unit(0, 2) == 0.0


def test_log_space_geometric_mean_survives_underflow():
    factors = np.full((1, 1, 20), 1e-20)
    gate = geometric_mean(factors, np.array([20]))
    assert gate[0, 0] == pytest.approx(1e-20, rel=1e-9)


def test_log_space_geometric_mean_keeps_exact_zero():
    factors = np.full((1, 1, 20), 0.5)
    factors[0, 0, 7] = 0.0
    assert geometric_mean(factors, np.array([20]))[0, 0] == 0.0


def test_geometric_mean_agrees_across_paths():
    rng = np.random.default_rng(0)
    factors = rng.uniform(0.3, 1.0, size=(4, 1, 17))
    direct = np.prod(factors, axis=-1) ** (1.0 / 17)
    np.testing.assert_allclose(geometric_mean(factors, np.array([17])), direct, rtol=1e-12)


def test_soft_and_converges_to_hard(unit_sample):
    gaps = AttributionService.soft_hard_gap(single_unit_net(), unit_sample, [1.0, 10.0, 100.0, 1000.0])
    values = [gap for _, gap in gaps]
    assert values == sorted(values, reverse=True)
    assert values[0] == pytest.approx(5.0 - 4.89710, abs=1e-5)
    assert values[-1] == pytest.approx(0.0, abs=1e-12)


# ---- receptive fields ------------------------------------------------------

def test_receptive_field_is_union_of_children():
    fields = two_block_net().receptive_fields()
    assert fields.field(0, 0) == PlayerSet.of(4, [0, 1])
    assert fields.field(0, 1) == PlayerSet.of(4, [1, 2])
    assert fields.field(0, 2).cardinality == 0
    assert fields.field(1, 0) == PlayerSet.of(4, [0, 1, 2])
    assert fields.distinct_fields() == {0b0011, 0b0110, 0b0111}


def test_receptive_fields_with_all_previous_blocks():
    net = random_mlp(n=6, block_sizes=(4, 4), seed=2, scope=ChildrenScope.ALL_PREVIOUS_BLOCKS)
    fields = net.receptive_fields()
    first = fields.membership[0]
    selected = net.blocks[1].mask
    for u in range(4):
        expected = np.any(first[selected[u]], axis=0) if selected[u].any() else np.zeros(6, dtype=bool)
        assert np.array_equal(fields.membership[1][u], expected)


def test_grouped_players_mask_whole_groups():
    config = ModelConfig(n_inputs=4, block_sizes=(1,), class_count=1, and_mode=AndMode.HARD,
                         player_groups=((0,), (1, 2, 3)))
    net = HarsanyiMLP(config, [HarsanyiBlock([[1.0, 0.0, 1.0, 0.0]], [[1.0, -1.0, 1.0, -1.0]])],
                      OutputHead([[1.0]]))
    assert net.n_players == 2
    masked = net.masked_inputs(Sample([1.0, 0.0, 1.0, 0.0]), [[True, False]])
    assert masked.tolist() == [[1.0, 0.0, 0.0, 0.0]]
    assert net.receptive_fields().field(0, 0) == PlayerSet.of(2, [0, 1])


def test_player_groups_must_partition_columns():
    with pytest.raises(ContractError):
        ModelConfig(n_inputs=3, block_sizes=(1,), class_count=1, player_groups=((0,), (0, 1, 2)))


# ---- unit-level structure --------------------------------------------------

def test_unit_check_is_a_single_spike(unit_net, unit_sample):
    interactions = AttributionService.unit_harsanyi_check(unit_net, unit_sample, (0, 0))
    assert GameService.spike_deviation(interactions, 0b11, 5.0) == 0.0


def test_unit_check_capacity():
    with pytest.raises(CapacityError):
        AttributionService.unit_game(random_mlp(n=13, block_sizes=(4,)), random_sample(13, 0), (0, 0))


def test_inputs_outside_the_field_are_never_read():
    rng = np.random.default_rng(11)
    for trial in range(100):
        net = random_mlp(seed=trial % 10, mode=AndMode.HARD)
        sample = mixed_sample(8, trial)
        fields = net.receptive_fields()
        block, unit = net.unit_ids()[int(rng.integers(len(net.unit_ids())))]
        outside = ~fields.membership[block][unit]
        perturbed = sample.x.copy()
        perturbed[outside] = rng.normal(size=int(outside.sum())) * 10.0
        before = net.forward_units(sample).unit(block, unit)
        after = net.forward_units(Sample(perturbed)).unit(block, unit)
        assert before == after


@pytest.mark.slow
@pytest.mark.parametrize('mode', MODES)
def test_every_unit_is_a_single_interaction(mode):
    n = 8
    masks = membership_matrix(np.arange(1 << n, dtype=np.int64), n)
    for seed in range(50):
        net = random_mlp(n=n, seed=seed, mode=mode)
        sample = mixed_sample(n, seed)
        full = net.forward_units(sample)
        batch = net.units_batch(sample, masks, mode)
        fields = net.receptive_fields()
        for block, unit in net.unit_ids():
            game = GameTable(n, batch.z[block][:, unit], GameKind.REWARD)
            interactions = GameService.harsanyi_transform(game)
            at = fields.field(block, unit).bits
            height = full.unit(block, unit) if at else 0.0
            assert GameService.spike_deviation(interactions, at, height) <= 1e-9 * (1.0 + abs(height))


@pytest.mark.parametrize('mode', MODES)
def test_masking_inside_the_field_zeroes_the_unit(mode):
    net = random_mlp(seed=6, mode=mode)
    sample = mixed_sample(8, 6)
    fields = net.receptive_fields()
    for block, unit, field in fields.entries():
        for player in field.indices():
            mask = PlayerSet.full(8).without_player(player)
            assert net.forward_units(sample, mask, mode).unit(block, unit) == 0.0


@pytest.mark.parametrize('mode', MODES)
def test_unit_decomposition_matches_output_game(mode):
    net = random_mlp(seed=8, mode=mode)
    sample = mixed_sample(8, 8)
    from_units = AttributionService.interactions_from_units(net, sample, 1, mode)
    from_game = GameService.harsanyi_transform(AttributionService.model_game(net, sample, 1, mode))
    scale = 1.0 + np.max(np.abs(from_game.values))
    assert np.max(np.abs(from_units.values - from_game.values)) <= 1e-9 * scale


@pytest.mark.parametrize('seed', range(3))
def test_spectrum_is_bounded_by_distinct_fields(seed):
    net = random_mlp(seed=20 + seed)
    sample = random_sample(8, 20 + seed)
    spectrum = GameService.interaction_spectrum(AttributionService.model_game(net, sample, 0))
    scale = 1.0 + spectrum[0].strength
    assert GameService.count_salient(spectrum, 1e-9 * scale) <= len(net.receptive_fields().distinct_fields())


# ---- exact Shapley ---------------------------------------------------------

def test_exact_shapley_single_unit(unit_net, unit_sample):
    phi = AttributionService.exact_shapley(unit_net, unit_sample, 0)
    np.testing.assert_allclose(phi.phi, [2.5, 2.5])
    assert phi.provenance == Provenance.HARSANYI_EXACT
    assert phi.inference_count == 1


def test_restricted_shapley_single_unit(unit_net, unit_sample):
    phi = AttributionService.restricted_shapley(unit_net, unit_sample, PlayerSet.of(2, [0]), 0)
    assert phi.players == (0,)
    np.testing.assert_allclose(phi.phi, [5.0])


def test_restricted_to_everyone_is_unrestricted():
    net = random_mlp(seed=5)
    sample = random_sample(8, 5)
    full = AttributionService.exact_shapley(net, sample, 0)
    restricted = AttributionService.restricted_shapley(net, sample, PlayerSet.full(8), 0)
    np.testing.assert_allclose(restricted.phi, full.phi, rtol=1e-12, atol=1e-12)


def test_restricted_needs_players(unit_net, unit_sample):
    with pytest.raises(ContractError):
        AttributionService.restricted_shapley(unit_net, unit_sample, PlayerSet.empty(2), 0)


@pytest.mark.parametrize('mode', MODES)
@pytest.mark.parametrize('seed', range(5))
def test_exact_shapley_matches_brute_force(mode, seed):
    net = random_mlp(seed=seed, mode=mode)
    sample = mixed_sample(8, 100 + seed)
    for class_index in range(2):
        exact = AttributionService.exact_shapley(net, sample, class_index, mode)
        brute = AttributionService.brute_force_model_shapley(net, sample, class_index, mode)
        scale = 1.0 + np.max(np.abs(brute.phi))
        assert np.max(np.abs(exact.phi - brute.phi)) <= 1e-9 * scale
        assert exact.total == pytest.approx(net.model_output(sample, None, mode)[class_index], abs=1e-9 * scale)


@pytest.mark.parametrize('mode', MODES)
def test_restricted_shapley_matches_restricted_brute_force(mode):
    net = random_mlp(n=10, seed=9, mode=mode)
    sample = random_sample(10, 9)
    selected = PlayerSet.of(10, [1, 4, 5, 8])
    exact = AttributionService.restricted_shapley(net, sample, selected, 0, mode)
    brute = AttributionService.brute_force_model_shapley(net, sample, 0, mode, players=selected)
    assert brute.players == exact.players == (1, 4, 5, 8)
    np.testing.assert_allclose(exact.phi, brute.phi, rtol=1e-9, atol=1e-9)


def test_grouped_players_exactness():
    config = ModelConfig(n_inputs=5, block_sizes=(4, 3), class_count=2, gamma=10.0,
                         player_groups=((0,), (1, 2, 3), (4,)))
    net = TrainingService.init_params(config, 1, InitScheme(kind='mlp_fixed_fanin', fanin=3))
    sample = Sample([0.7, 0.0, 1.0, 0.0, -1.2])
    exact = AttributionService.exact_shapley(net, sample, 0)
    brute = AttributionService.brute_force_model_shapley(net, sample, 0)
    assert len(exact) == 3
    np.testing.assert_allclose(exact.phi, brute.phi, rtol=1e-9, atol=1e-9)


def test_class_resolution(unit_net, unit_sample):
    assert AttributionService.resolve_class_index(unit_net, unit_sample, 'auto') == 0
    assert AttributionService.resolve_class_index(unit_net, unit_sample, 'auto', label=0) == 0
    with pytest.raises(ContractError):
        AttributionService.resolve_class_index(unit_net, unit_sample, '3')
