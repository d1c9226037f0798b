# harsanyi/services/__init__.py
from .oracles import CountingOracle, FunctionOracle, ModelOracle, TableOracle, ValueOracle
from .game_service import GameService
from .attribution_service import AttributionService
from .estimator_service import EstimatorService
from .training_service import TrainingService
from .synthetic_service import SyntheticService
from .experiment_service import ExperimentService

__all__ = [
    'ValueOracle',
    'FunctionOracle',
    'TableOracle',
    'CountingOracle',
    'ModelOracle',
    'GameService',
    'AttributionService',
    'EstimatorService',
    'TrainingService',
    'SyntheticService',
    'ExperimentService',
]
