"""
Shared fixtures: the testing runtime, small hand-built nets, seeded random
nets and games, and a literal-recursion Harsanyi oracle.
"""

import itertools

import numpy as np
import pytest

from harsanyi import create_runtime
from harsanyi.models.game import GameKind, GameTable
from harsanyi.models.harsanyi_cnn import CnnConfig
from harsanyi.models.harsanyi_mlp import (
    AndMode, ChildrenScope, HarsanyiBlock, HarsanyiMLP, ModelConfig, OutputHead, Sample,
)
from harsanyi.models.experiment import InitScheme, TrainConfig
from harsanyi.services.synthetic_service import SyntheticService
from harsanyi.services.training_service import TrainingService


@pytest.fixture(autouse=True, scope='session')
def runtime():
    return create_runtime('testing')


def single_unit_net(mode=AndMode.HARD, gamma=1.0):
    """One block, one unit with children {0, 1}, A = [1, 1], head weight 1."""
    config = ModelConfig(n_inputs=2, block_sizes=(1,), class_count=1, gamma=gamma, and_mode=mode)
    block = HarsanyiBlock(weights=[[1.0, 1.0]], tau=[[1.0, 1.0]])
    return HarsanyiMLP(config, [block], OutputHead([[1.0]]))


@pytest.fixture
def unit_net():
    return single_unit_net()


@pytest.fixture
def unit_sample():
    return Sample(np.array([2.0, 3.0]))


def random_mlp(n=8, block_sizes=(6, 6, 6), seed=0, fanin=3, class_count=2, mode=AndMode.SOFT,
               scope=ChildrenScope.PREVIOUS_BLOCK_ONLY, gamma=100.0):
    """Untrained Harsanyi-MLP with positive-leaning head so units matter."""
    config = ModelConfig(n_inputs=n, block_sizes=block_sizes, class_count=class_count,
                         gamma=gamma, and_mode=mode, children_scope=scope)
    return TrainingService.init_params(config, seed, InitScheme(kind='mlp_fixed_fanin', fanin=fanin))


def random_sample(n, seed):
    return Sample(np.random.default_rng(seed).uniform(0.2, 1.5, size=n))


def mixed_sample(n, seed):
    """Inputs of both signs, bounded away from zero."""
    rng = np.random.default_rng(seed)
    return Sample(rng.choice([-1.0, 1.0], size=n) * rng.uniform(0.2, 1.5, size=n))


def wide_mlp(dataset, seed=0, epochs=3):
    """Three blocks of 100 units at beta=10, gamma=100, briefly trained on `dataset`."""
    config = ModelConfig(n_inputs=dataset.features.shape[1], block_sizes=(100, 100, 100),
                         class_count=dataset.class_count, beta=10.0, gamma=100.0)
    model = TrainingService.init_params(config, seed, InitScheme(fanin=10))
    return TrainingService.train(model, dataset, TrainConfig(learning_rate=1e-3, epochs=epochs, seed=seed)).model


def random_cnn(height=4, width=4, seed=0, channels=3, block_count=2, kernel=3, mode=AndMode.SOFT,
               stem_channels=2, pool=1, tau_sd=0.01):
    config = CnnConfig(image_height=height, image_width=width, class_count=2, stem_channels=stem_channels,
                       pool=pool, block_count=block_count, channels=channels, kernel=kernel, and_mode=mode)
    return TrainingService.init_params(config, seed, InitScheme(kind='cnn_gaussian', tau_sd=tau_sd))


def random_image(height, width, seed, channels=1):
    return np.random.default_rng(seed).uniform(0.0, 1.0, size=(channels, height, width))


def harsanyi_by_recursion(game):
    """I(S) = V(S) - sum over proper subsets L of S of I(L), literally."""
    n = game.n
    dividends = np.zeros(1 << n)
    for size in range(1, n + 1):
        for members in itertools.combinations(range(n), size):
            bits = sum(1 << i for i in members)
            total = 0.0
            sub = (bits - 1) & bits
            while True:
                total += dividends[sub]
                if sub == 0:
                    break
                sub = (sub - 1) & bits
            dividends[bits] = game.values[bits] - total
    return GameTable(n, dividends, GameKind.INTERACTION)


def additive_game(coefficients):
    n = len(coefficients)
    bits = np.arange(1 << n)
    values = sum(c * ((bits >> i) & 1) for i, c in enumerate(coefficients))
    return GameTable(n, np.asarray(values, dtype=np.float64), GameKind.REWARD)


@pytest.fixture
def toy_game():
    return SyntheticService.toy_game()


@pytest.fixture
def symmetric_five_game():
    return GameTable(2, np.array([0.0, 0.0, 0.0, 5.0]), GameKind.REWARD)
