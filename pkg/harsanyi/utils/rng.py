"""
PRNG stream layout.

Every randomized step draws from its own numpy SeedSequence child keyed by
(master seed, stream id, *extra keys), so adding draws to one step never
shifts the numbers another step sees.

    stream 0  DATA       synthetic data generation, train/validation split
    stream 1  INIT       parameter initialization
    stream 2  SHUFFLE    minibatch order; extra key = epoch
    stream 3  ESTIMATOR  baseline estimators; extra keys = (estimator id, trial, sample)
    stream 4  PROBE      sample / player-subset selection in experiments and checks
"""

import numpy as np

DATA = 0
INIT = 1
SHUFFLE = 2
ESTIMATOR = 3
PROBE = 4

ESTIMATOR_IDS = {
    'sampling': 0,
    'antithetical': 1,
    'kernelshap': 2,
    'kernelshap-ps': 3,
}


def substream(seed, stream, *keys):
    """Independent Generator for one (seed, stream, keys) triple."""
    spawn_key = (int(stream),) + tuple(int(k) for k in keys)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=spawn_key))
