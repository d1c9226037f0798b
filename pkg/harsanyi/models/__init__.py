# harsanyi/models/__init__.py
"""
Models package initialization
Centralizes the domain types: coalitions, games, networks, datasets and run specs
"""

from .player_set import PlayerSet
from .game import AttributionVector, GameKind, GameTable, Provenance, SpectrumEntry
from .harsanyi_mlp import AndMode, ChildrenScope, HarsanyiMLP, ModelConfig, Sample
from .harsanyi_cnn import CnnConfig, GridSample, HarsanyiCNN
from .dataset import Dataset, DatasetConfig, ImageDataset, NormalizationRecord
from .experiment import Budget, EstimateRecord, ExperimentSpec, InitScheme, MetricsRow, TrainConfig

__all__ = [
    'PlayerSet',
    'AttributionVector', 'GameKind', 'GameTable', 'Provenance', 'SpectrumEntry',
    'AndMode', 'ChildrenScope', 'HarsanyiMLP', 'ModelConfig', 'Sample',
    'CnnConfig', 'GridSample', 'HarsanyiCNN',
    'Dataset', 'DatasetConfig', 'ImageDataset', 'NormalizationRecord',
    'Budget', 'EstimateRecord', 'ExperimentSpec', 'InitScheme', 'MetricsRow', 'TrainConfig',
]
