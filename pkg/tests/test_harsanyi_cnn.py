from pathlib import Path

import numpy as np
import pytest

from harsanyi.errors import ChannelCoherenceError, ContractError
from harsanyi.models.experiment import InitScheme
from harsanyi.models.harsanyi_cnn import (
    CnnConfig, ConvHarsanyiBlock, GridSample, HarsanyiCNN, StemLayer, inside_mask,
)
from harsanyi.models.harsanyi_mlp import AndMode, HarsanyiBlock, HarsanyiMLP, ModelConfig, OutputHead, Sample
from harsanyi.models.player_set import PlayerSet
from harsanyi.services.attribution_service import AttributionService
from harsanyi.services.training_service import TrainingService
from harsanyi.utils.bitmask import membership_matrix
from tests.conftest import random_cnn, random_image, random_mlp, random_sample

MODES = [AndMode.HARD, AndMode.SOFT]
FIXTURES = Path(__file__).parent / 'fixtures'


def identity_stem_cnn(height, width, kernel=3, block_count=1, channels=2, tau=1.0, seed=0, mode=AndMode.HARD):
    """CNN whose stem is a 1x1 identity, so z^(0) = ReLU(image)."""
    config = CnnConfig(image_height=height, image_width=width, class_count=2, stem_kernel=1, stem_channels=1,
                       block_count=block_count, channels=channels, kernel=kernel, and_mode=mode)
    rng = np.random.default_rng(seed)
    stem = StemLayer(np.ones((1, 1, 1, 1)), np.zeros(1))
    blocks = [
        ConvHarsanyiBlock(rng.normal(size=(channels, config.block_input_channels(l), kernel, kernel)),
                          np.full((height, width, kernel, kernel), tau))
        for l in range(block_count)
    ]
    head = OutputHead(rng.normal(size=(2, config.total_units)))
    return HarsanyiCNN(config, stem, blocks, head)


def plain_conv(image, weights):
    """Same-padded, stride-1 convolution written out with loops."""
    channels_in, height, width = image.shape
    kernel = weights.shape[-1]
    r = kernel // 2
    padded = np.pad(image, [(0, 0), (r, r), (r, r)])
    out = np.zeros((weights.shape[0], height, width))
    for o in range(weights.shape[0]):
        for h in range(height):
            for w in range(width):
                out[o, h, w] = np.sum(weights[o] * padded[:, h:h + kernel, w:w + kernel])
    return out


# ---- stem and blocks -------------------------------------------------------

def test_zero_image_gives_zero_features():
    model = random_cnn(seed=1)
    z0 = model.stem_forward(GridSample(np.zeros((4, 4))))
    assert z0.layer == 0
    assert np.all(z0.values == 0.0)


def test_identity_stem_is_relu():
    image = np.random.default_rng(2).normal(size=(1, 5, 5))
    model = identity_stem_cnn(5, 5)
    np.testing.assert_array_equal(model.stem_forward(GridSample(image)).values, np.maximum(image, 0.0))


def test_stem_max_pool():
    config = CnnConfig(image_height=4, image_width=4, class_count=1, stem_kernel=1, stem_channels=1, pool=2,
                       block_count=1, channels=1, kernel=1)
    model = HarsanyiCNN(config, StemLayer(np.ones((1, 1, 1, 1)), np.zeros(1)),
                        [ConvHarsanyiBlock(np.ones((1, 1, 1, 1)), np.ones((2, 2, 1, 1)))],
                        OutputHead(np.ones((1, 4))))
    image = np.arange(16, dtype=np.float64).reshape(4, 4)
    assert model.stem_forward(GridSample(image)).values[0].tolist() == [[5.0, 7.0], [13.0, 15.0]]
    assert model.n_players == 4


def test_stem_matches_recorded_tensor():
    config = CnnConfig(image_height=8, image_width=8, class_count=2, stem_kernel=3, stem_channels=2, pool=2,
                       block_count=1, channels=2, kernel=3)
    seeded = TrainingService.init_params(config, 8, InitScheme(kind='cnn_gaussian'))
    stem = np.loadtxt(FIXTURES / 'stem_weights.csv', delimiter=',')
    model = HarsanyiCNN(config, StemLayer(stem[:, :9].reshape(2, 1, 3, 3), stem[:, 9]), seeded.blocks, seeded.head)
    image = np.loadtxt(FIXTURES / 'stem_image.csv', delimiter=',')
    expected = np.loadtxt(FIXTURES / 'stem_expected.csv', delimiter=',').reshape(2, 4, 4)
    z0 = model.stem_forward(GridSample(image))
    assert z0.values.shape == (2, 4, 4)
    assert np.array_equal(z0.values, expected)


def test_hard_block_on_positive_input_is_plain_conv():
    model = identity_stem_cnn(5, 6, channels=3, seed=3)
    image = np.random.default_rng(3).uniform(0.1, 1.0, size=(1, 5, 6))
    z = model.forward_units(GridSample(image), None, AndMode.HARD).z[0]
    np.testing.assert_allclose(z, np.maximum(plain_conv(image, model.blocks[0].weights), 0.0), rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize('mode', MODES)
def test_zero_location_zeroes_its_neighbours(mode):
    model = identity_stem_cnn(5, 5, channels=2, seed=4, mode=mode)
    image = np.random.default_rng(4).uniform(0.1, 1.0, size=(1, 5, 5))
    image[0, 2, 2] = 0.0
    z = model.forward_units(GridSample(image), None, mode).z[0]
    assert np.all(z[:, 1:4, 1:4] == 0.0)


def test_conv_block_forward_masks_locations():
    model = random_cnn(seed=5)
    sample = GridSample(random_image(4, 4, 5))
    mask = PlayerSet.of(16, [0, 5, 6, 9, 10, 15])
    by_block = model.conv_block_forward(0, model.stem_forward(sample), mask)
    by_units = model.forward_units(sample, mask).z[0]
    assert by_block.layer == 1
    np.testing.assert_array_equal(by_block.values, by_units)


def test_gate_states_shape():
    model = random_cnn(seed=6, block_count=3)
    masks = membership_matrix(np.array([0, 5, 65535]), 16)
    gates = model.gate_states(GridSample(random_image(4, 4, 6)), masks, AndMode.SOFT)
    assert gates.shape == (3, 3, 4, 4)
    assert np.all(gates[0] == 0.0)


def test_one_by_one_kernel_is_an_mlp_with_diagonal_selectors():
    height, width = 3, 3
    n = height * width
    cnn = identity_stem_cnn(height, width, kernel=1, channels=1, seed=7, mode=AndMode.SOFT)
    scale = cnn.blocks[0].weights[0, 0, 0, 0]
    config = ModelConfig(n_inputs=n, block_sizes=(n,), class_count=2, gamma=cnn.config.gamma, and_mode=AndMode.SOFT)
    tau = np.where(np.eye(n, dtype=bool), 1.0, -1.0)
    mlp = HarsanyiMLP(config, [HarsanyiBlock(np.eye(n) * scale, tau)], OutputHead(cnn.head.weights))
    image = np.random.default_rng(7).uniform(0.1, 1.0, size=(1, height, width))
    masks = membership_matrix(np.arange(0, 1 << n, 37), n)
    from_cnn = cnn.output_batch(GridSample(image), masks, AndMode.SOFT)
    from_mlp = mlp.output_batch(Sample(image.reshape(-1)), masks, AndMode.SOFT)
    np.testing.assert_allclose(from_cnn, from_mlp, rtol=1e-12, atol=1e-15)


def test_selectors_never_reach_outside_the_grid():
    block = ConvHarsanyiBlock(np.ones((1, 1, 3, 3)), np.ones((4, 4, 3, 3)))
    assert block.mask[0, 0].tolist() == [[False, False, False], [False, True, True], [False, True, True]]
    assert np.array_equal(block.mask, inside_mask(4, 4, 3))


def test_config_contracts():
    with pytest.raises(ContractError):
        CnnConfig(image_height=4, image_width=4, class_count=2, kernel=2)
    with pytest.raises(ContractError):
        CnnConfig(image_height=5, image_width=4, class_count=2, pool=2)
    with pytest.raises(ContractError):
        random_cnn().stem_forward(GridSample(np.zeros((5, 5))))


# ---- receptive fields ------------------------------------------------------

def test_one_block_fields_are_clipped_neighbourhoods():
    model = identity_stem_cnn(4, 5, kernel=3)
    fields = model.grid_receptive_fields()
    assert fields.field(0, 0) == PlayerSet.of(20, [0, 1, 5, 6])
    centre = 1 * 5 + 2
    assert fields.field(0, centre) == PlayerSet.of(20, [1, 2, 3, 6, 7, 8, 11, 12, 13])


def test_two_block_fields_grow():
    model = identity_stem_cnn(6, 6, kernel=3, block_count=2)
    fields = model.grid_receptive_fields()
    centre = 2 * 6 + 2
    assert fields.field(1, centre).cardinality == 25
    assert fields.field(1, 0).cardinality == 9


def test_unselected_location_drops_out_of_the_field():
    model = identity_stem_cnn(3, 3, kernel=3)
    model.blocks[0].tau[1, 1, 0, 0] = -1.0
    assert 0 not in model.grid_receptive_fields().field(0, 4)


@pytest.mark.parametrize('seed', range(20))
def test_channels_of_a_location_share_one_field(seed):
    model = random_cnn(height=6, width=6, seed=seed, channels=4, block_count=3)
    fields = model.grid_receptive_fields()
    sample = GridSample(random_image(6, 6, seed))
    rng = np.random.default_rng(seed)
    masks = rng.random(size=(5, 36)) < 0.8
    for mode in MODES:
        units = model.units_batch(sample, masks, mode)
        for l, z in enumerate(units.z):
            covered = ~np.any(fields.membership[l][None, :, :] & ~masks[:, None, :], axis=-1)
            dead = ~covered.reshape(-1, 6, 6)
            assert np.all(z.transpose(1, 0, 2, 3)[:, dead] == 0.0)


def test_disagreeing_channels_are_reported(monkeypatch):
    model = identity_stem_cnn(3, 3, channels=2)
    block = model.blocks[0]
    selectors = np.array(np.broadcast_to(block.mask, (2,) + block.mask.shape))
    selectors[1, 1, 1, 0, 0] = False
    monkeypatch.setattr(block, 'channel_selectors', lambda: selectors)
    with pytest.raises(ChannelCoherenceError):
        model.grid_receptive_fields()


# ---- exact Shapley on the grid ---------------------------------------------

def test_grid_attributions_need_a_conv_model():
    with pytest.raises(ContractError):
        AttributionService.exact_shapley_grid(random_mlp(), random_sample(8, 0), 0)


def test_grid_attributions_sum_to_the_logit():
    model = random_cnn(seed=8)
    sample = GridSample(random_image(4, 4, 8))
    phi = AttributionService.exact_shapley_grid(model, sample, 1)
    assert len(phi) == 16
    assert phi.total == pytest.approx(model.model_output(sample)[1], abs=1e-9)


@pytest.mark.parametrize('mode', MODES)
def test_single_live_location_takes_all_credit(mode):
    model = identity_stem_cnn(4, 4, channels=2, block_count=2, seed=11, mode=mode)
    image = np.zeros((1, 4, 4))
    image[0, 1, 2] = 0.8
    sample = GridSample(image)
    live = 1 * 4 + 2
    phi = AttributionService.exact_shapley_grid(model, sample, 0, mode)
    assert np.all(np.delete(phi.phi, live) == 0.0)
    assert phi.phi[live] == pytest.approx(model.model_output(sample, None, mode)[0], abs=1e-12)


@pytest.mark.slow
@pytest.mark.parametrize('mode', MODES)
def test_exact_grid_shapley_matches_brute_force(mode):
    model = random_cnn(height=4, width=4, seed=9, channels=2, block_count=2, mode=mode)
    sample = GridSample(random_image(4, 4, 9))
    exact = AttributionService.exact_shapley(model, sample, 0, mode)
    brute = AttributionService.brute_force_model_shapley(model, sample, 0, mode)
    scale = 1.0 + np.max(np.abs(brute.phi))
    assert np.max(np.abs(exact.phi - brute.phi)) <= 1e-9 * scale


@pytest.mark.slow
def test_restricted_grid_shapley_on_a_large_image():
    model = random_cnn(height=16, width=16, seed=10, channels=2, block_count=2, stem_channels=2)
    sample = GridSample(random_image(16, 16, 10))
    selected = PlayerSet.of(256, [r * 16 + c for r in range(6, 9) for c in range(6, 10)])
    exact = AttributionService.restricted_shapley(model, sample, selected, 0)
    brute = AttributionService.brute_force_model_shapley(model, sample, 0, players=selected)
    assert len(exact) == 12
    np.testing.assert_allclose(exact.phi, brute.phi, rtol=1e-9, atol=1e-9)
