# experiment.py
from dataclasses import dataclass, field
from typing import Optional, Tuple

from harsanyi.errors import ContractError
from harsanyi.models.game import AttributionVector

ESTIMATOR_NAMES = ('sampling', 'antithetical', 'kernelshap', 'kernelshap-ps')
INIT_SCHEMES = ('mlp_fixed_fanin', 'cnn_gaussian')
OPTIMIZERS = ('adam', 'sgd')


@dataclass(frozen=True)
class InitScheme:
    """mlp_fixed_fanin: k selected children per unit; cnn_gaussian: tau ~ N(0, sd^2)."""

    kind: str = 'mlp_fixed_fanin'
    fanin: int = 10
    tau_sd: float = 0.01

    def __post_init__(self):
        if self.kind not in INIT_SCHEMES:
            raise ContractError(f"Unknown init scheme '{self.kind}'")
        if self.fanin < 1 or not self.tau_sd > 0:
            raise ContractError("fanin must be positive and tau_sd must be positive")


@dataclass(frozen=True)
class TrainConfig:
    """
    Optimization settings. beta/gamma of None keep the values stored in the
    model config; the seed determines the whole run.
    """

    learning_rate: float = 1e-3
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0
    optimizer: str = 'adam'
    init: InitScheme = field(default_factory=InitScheme)
    validation_fraction: float = 0.2
    beta: Optional[float] = None
    gamma: Optional[float] = None

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise ContractError(f"Unknown optimizer '{self.optimizer}'")
        if self.epochs < 0 or self.batch_size < 1 or not self.learning_rate > 0:
            raise ContractError("epochs, batch_size and learning_rate must be positive")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ContractError("validation_fraction must be in [0, 1)")
        for name in ('beta', 'gamma'):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ContractError(f"{name} must be positive")

    def header(self):
        """Ordered key/value pairs echoed at the top of the metrics log."""
        return {
            'optimizer': self.optimizer,
            'adam_moments': '0.9,0.999' if self.optimizer == 'adam' else '',
            'learning_rate': repr(self.learning_rate),
            'epochs': self.epochs,
            'batch_size': self.batch_size,
            'seed': self.seed,
            'init': self.init.kind,
            'fanin': self.init.fanin,
            'tau_sd': repr(self.init.tau_sd),
            'validation_fraction': repr(self.validation_fraction),
            'beta': '' if self.beta is None else repr(self.beta),
            'gamma': '' if self.gamma is None else repr(self.gamma),
        }


@dataclass(frozen=True)
class MetricsRow:
    epoch: int
    loss: float
    train_acc: float
    val_acc: float


@dataclass(frozen=True)
class Budget:
    """
    Inference cap for one estimator run. stream_keys select the PRNG substream
    (for example trial and sample index) under the master seed.
    """

    max_inferences: int
    seed: int = 0
    stream_keys: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.max_inferences < 1:
            raise ContractError("A budget must allow at least one inference")


@dataclass(frozen=True)
class EstimateRecord:
    attribution: AttributionVector
    budget_used: int
    estimator: str


@dataclass(frozen=True)
class ExperimentSpec:
    """
    One convergence experiment. Budgets come from `budgets` directly, or from
    `budget_multipliers` times (n + 1) when `budgets` is empty.
    """

    model_path: str
    dataset_path: str
    output_path: str
    label_column: Optional[str] = None
    summary_path: Optional[str] = None
    estimators: Tuple[str, ...] = ESTIMATOR_NAMES
    budgets: Tuple[int, ...] = ()
    budget_multipliers: Tuple[int, ...] = (4, 16, 64, 256)
    trials: int = 50
    sample_count: int = 50
    seed: int = 0
    mode: Optional[str] = None
    class_index: str = 'auto'

    def __post_init__(self):
        unknown = [e for e in self.estimators if e not in ESTIMATOR_NAMES]
        if unknown:
            raise ContractError(f"Unknown estimators {unknown}")
        if self.trials < 1 or self.sample_count < 1:
            raise ContractError("trials and sample_count must be positive")

    def budget_grid(self, n):
        if self.budgets:
            return tuple(sorted(set(int(b) for b in self.budgets)))
        return tuple(sorted(set(int(k) * (n + 1) for k in self.budget_multipliers)))
