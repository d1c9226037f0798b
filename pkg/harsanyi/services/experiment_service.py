"""
Experiment Service Layer

Orchestrates the convergence comparison: for each probed sample the full
model game is tabulated once, every estimator then runs against that table
through a counting oracle, and errors are measured against the brute-force
Shapley values. The single-pass exact method is reported at budget 1.
"""

import logging
import time
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, List

import numpy as np

from harsanyi.errors import CapacityError, ContractError
from harsanyi.models.experiment import Budget
from harsanyi.repositories.dataset_repository import DatasetRepository
from harsanyi.repositories.model_repository import ModelRepository
from harsanyi.repositories.results_repository import ResultsRepository
from harsanyi.services.attribution_service import AttributionService
from harsanyi.services.estimator_service import EstimatorService
from harsanyi.services.game_service import GameService
from harsanyi.services.oracles import CountingOracle, TableOracle
from harsanyi.utils.rng import PROBE, substream

logger = logging.getLogger(__name__)

# Convergence runs tabulate 2^n masks per sample
CONVERGENCE_MAX_PLAYERS = 16

EXACT_METHOD = 'harsanyinet'


@dataclass
class ConvergenceResult:
    rows: List[tuple]
    summary: Dict


class ExperimentService:
    """Service class for experiment orchestration"""

    @staticmethod
    def load_inputs(model_path, dataset_path, label_column=None):
        """
        Load a model and the dataset it explains, preprocessed the way the
        model was trained.

        Returns:
            (SavedModel, Dataset or ImageDataset)
        """
        saved = ModelRepository.load_model(model_path)
        model = saved.model
        if model.topology == 'conv':
            cfg = model.config
            shape = (cfg.input_channels, cfg.image_height, cfg.image_width)
            dataset = DatasetRepository.load_csv_images(dataset_path, label_column or 'label', shape, saved.label_classes)
        elif saved.normalization is not None:
            dataset = DatasetRepository.load_with_record(dataset_path, saved.normalization)
        elif label_column is not None:
            dataset = DatasetRepository.load_csv_dataset(dataset_path, label_column)
        else:
            raise ContractError("Model has no stored normalization; a label column is required")
        return saved, dataset

    @staticmethod
    def probe_indices(count, total, seed):
        """Sorted sample indices drawn from the PROBE substream."""
        if count >= total:
            return np.arange(total)
        return np.sort(substream(seed, PROBE).choice(total, size=count, replace=False))

    @staticmethod
    def run_convergence_experiment(spec):
        """
        Error-versus-inference-budget data for every estimator `spec` lists.

        Writes `estimator,budget,trial,rmse` rows (RMSE averaged over the probed
        samples) and, when spec.summary_path is set, a JSON summary.

        Raises:
            CapacityError: more than 16 players
        """
        started = time.perf_counter()
        saved, dataset = ExperimentService.load_inputs(spec.model_path, spec.dataset_path, spec.label_column)
        model = saved.model
        n = model.n_players
        if n > CONVERGENCE_MAX_PLAYERS:
            raise CapacityError(f"Convergence experiments need n <= {CONVERGENCE_MAX_PLAYERS}, model has {n}")
        budgets = spec.budget_grid(n)
        indices = ExperimentService.probe_indices(spec.sample_count, len(dataset), spec.seed)
        logger.info(f"Convergence experiment: n={n}, {len(indices)} samples, budgets {list(budgets)}, "
                    f"{spec.trials} trials, estimators {list(spec.estimators)}")

        runnable = []
        for name in spec.estimators:
            for budget in budgets:
                if budget < EstimatorService.minimum_budget(name, n):
                    logger.warning(f"Skipping {name} at budget {budget}: below its minimum for n={n}")
                else:
                    runnable.append((name, budget))

        totals = defaultdict(float)
        exact_total = 0.0
        for position, index in enumerate(indices):
            sample = dataset.sample(int(index))
            class_index = AttributionService.resolve_class_index(model, sample, spec.class_index,
                                                                 dataset.label(int(index)), spec.mode)
            game = AttributionService.model_game(model, sample, class_index, spec.mode)
            truth = GameService.shapley_from_table(game)
            exact = AttributionService.exact_shapley(model, sample, class_index, spec.mode)
            exact_total += EstimatorService.rmse(exact, truth)
            for name, budget in runnable:
                for trial in range(spec.trials):
                    oracle = CountingOracle(TableOracle(game))
                    record = EstimatorService.run(name, oracle, n, Budget(budget, spec.seed, (trial, position)))
                    if record.budget_used != oracle.count or record.budget_used > budget:
                        raise ContractError(f"{name} reported {record.budget_used} inferences, "
                                            f"oracle counted {oracle.count} (budget {budget})")
                    totals[(name, budget, trial)] += EstimatorService.rmse(record.attribution, truth)
            logger.debug(f"sample {int(index)} done ({position + 1}/{len(indices)})")

        count = len(indices)
        rows = [(name, budget, trial, totals[(name, budget, trial)] / count)
                for name, budget in runnable for trial in range(spec.trials)]
        rows.append((EXACT_METHOD, 1, 0, exact_total / count))
        summary = ExperimentService.summarize(rows, n, count, spec)

        ResultsRepository.write_table(ResultsRepository.convergence_frame(rows), spec.output_path)
        if spec.summary_path:
            ResultsRepository.write_summary(summary, spec.summary_path)
        logger.info(f"Convergence experiment finished in {time.perf_counter() - started:.2f}s")
        return ConvergenceResult(rows, summary)

    @staticmethod
    def summarize(rows, n, sample_count, spec):
        grouped = defaultdict(list)
        for name, budget, _, rmse in rows:
            grouped[(name, budget)].append(rmse)
        estimators = defaultdict(dict)
        for (name, budget), values in grouped.items():
            if name == EXACT_METHOD:
                continue
            estimators[name][str(budget)] = {
                'mean_rmse': float(np.mean(values)),
                'std_rmse': float(np.std(values)),
            }
        return {
            'n': n,
            'samples': sample_count,
            'trials': spec.trials,
            'seed': spec.seed,
            'budgets': [int(b) for b in spec.budget_grid(n)],
            'estimators': dict(estimators),
            EXACT_METHOD: {'budget': 1, 'rmse': grouped[(EXACT_METHOD, 1)][0]},
        }
