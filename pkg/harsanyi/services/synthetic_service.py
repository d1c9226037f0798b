"""
Synthetic Service Layer

Seeded synthetic data and games for smoke runs, tests and experiments.
All draws come from the DATA substream of the given seed.
"""

import logging

import numpy as np
import pandas as pd

from harsanyi.errors import ContractError
from harsanyi.models.dataset import ImageDataset
from harsanyi.models.game import GameKind, GameTable
from harsanyi.services.game_service import GameService
from harsanyi.utils.bitmask import bits_of, popcounts
from harsanyi.utils.rng import DATA, substream

logger = logging.getLogger(__name__)

GAME_KINDS = ('dense', 'additive', 'low_order')

# players a, o, e, m of the four-interaction example
TOY_PLAYERS = ('a', 'o', 'e', 'm')


class SyntheticService:
    """Service class for synthetic datasets and games"""

    @staticmethod
    def separable_frame(n_features, samples, seed):
        """Gaussian features labelled by the sign of a random linear score."""
        rng = substream(seed, DATA)
        x = rng.normal(size=(samples, n_features))
        w = rng.normal(size=n_features)
        labels = (x @ w > 0.0).astype(np.int64)
        frame = pd.DataFrame(x, columns=[f"x{i}" for i in range(n_features)])
        frame['label'] = labels
        return frame

    @staticmethod
    def and_frame(n_features, samples, seed, terms=2, order=2):
        """
        Features labelled 1 when any of `terms` random conjunctions of
        `order` threshold tests (x_i > 0) holds.
        """
        if order > n_features:
            raise ContractError(f"Conjunction order {order} exceeds {n_features} features")
        rng = substream(seed, DATA)
        x = rng.normal(size=(samples, n_features))
        fired = np.zeros(samples, dtype=bool)
        for _ in range(terms):
            members = rng.choice(n_features, size=order, replace=False)
            fired |= np.all(x[:, members] > 0.0, axis=1)
        frame = pd.DataFrame(x, columns=[f"x{i}" for i in range(n_features)])
        frame['label'] = fired.astype(np.int64)
        return frame

    @staticmethod
    def random_game(n, seed, kind='dense', order=2):
        """
        Reward table with random Harsanyi dividends: on every nonempty
        coalition (dense), on singletons only (additive), or on coalitions of
        at most `order` players (low_order).
        """
        if kind not in GAME_KINDS:
            raise ContractError(f"Unknown game kind '{kind}'")
        rng = substream(seed, DATA, n)
        dividends = rng.normal(size=1 << n)
        sizes = popcounts(n)
        limit = {'dense': n, 'additive': 1, 'low_order': order}[kind]
        dividends[(sizes == 0) | (sizes > limit)] = 0.0
        return GameService.inverse_harsanyi(GameTable(n, dividends, GameKind.INTERACTION))

    @staticmethod
    def toy_interactions():
        """I({a,o})=2, I({a,e})=4, I({a,o,m})=3, I({o,m})=1, all else 0."""
        a, o, e, m = range(4)
        table = np.zeros(16)
        table[bits_of([a, o])] = 2.0
        table[bits_of([a, e])] = 4.0
        table[bits_of([a, o, m])] = 3.0
        table[bits_of([o, m])] = 1.0
        return GameTable(4, table, GameKind.INTERACTION)

    @staticmethod
    def toy_game():
        return GameService.inverse_harsanyi(SyntheticService.toy_interactions())

    @staticmethod
    def random_images(count, height, width, seed, channels=1):
        """
        Nonnegative noise images labelled by whether the left half is
        brighter than the right half.
        """
        rng = substream(seed, DATA)
        images = rng.uniform(0.0, 1.0, size=(count, channels, height, width))
        half = width // 2
        left = images[..., :half].mean(axis=(1, 2, 3))
        right = images[..., half:].mean(axis=(1, 2, 3))
        labels = (left > right).astype(np.int64)
        return ImageDataset(images, labels, ('0', '1'))

    @staticmethod
    def images_frame(dataset, label_column='label'):
        """One row per image, pixels flattened row-major, label last."""
        flat = dataset.images.reshape(len(dataset), -1)
        frame = pd.DataFrame(flat, columns=[f"p{i}" for i in range(flat.shape[1])])
        frame[label_column] = dataset.labels
        return frame
