# harsanyi/repositories/__init__.py
"""
Repository layer: everything that reads or writes files.
"""

from .game_repository import GameRepository
from .model_repository import ModelRepository, SavedModel
from .dataset_repository import DatasetRepository
from .results_repository import ResultsRepository

__all__ = ['GameRepository', 'ModelRepository', 'SavedModel', 'DatasetRepository', 'ResultsRepository']
