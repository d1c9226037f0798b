"""
harsanyi: HarsanyiNet models with exact single-pass Shapley attributions,
game-theoretic oracles and sampling baselines.
"""

import logging
import os
from dataclasses import dataclass

__version__ = '1.0.0'


@dataclass(frozen=True)
class Runtime:
    """Resolved environment: the active config class plus the package logger"""
    env_name: str
    config: type
    logger: logging.Logger


def create_runtime(config_name=None):
    """
    Runtime Factory Pattern
    Selects the configuration class and configures logging
    """
    from harsanyi.config import set_config
    from harsanyi.utils.logger import setup_logger

    if config_name is None:
        config_name = os.environ.get('HARSANYI_ENV', 'development')

    cfg = set_config(config_name)
    runtime = Runtime(env_name=config_name, config=cfg, logger=logging.getLogger('harsanyi'))
    setup_logger(runtime)

    runtime.logger.debug(f"Forward batch size: {cfg.FORWARD_BATCH}")
    runtime.logger.debug(f"Oracle player cap: {cfg.MAX_ORACLE_PLAYERS}")
    return runtime
