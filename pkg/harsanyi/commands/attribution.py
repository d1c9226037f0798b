"""
Attribution commands: exact Shapley values, the brute-force oracle, the
sampling estimators and the exact-versus-oracle evaluation.
"""

import click
import numpy as np
import pandas as pd

from harsanyi.commands.common import (
    check_class_spec, class_option, data_option, emit, label_option, load_inputs, mode_option,
    model_option, out_option, parse_samples, resolve_seed, samples_option, seed_option,
)
from harsanyi.middleware import logged_command
from harsanyi.models.experiment import ESTIMATOR_NAMES, Budget
from harsanyi.models.player_set import PlayerSet
from harsanyi.repositories.results_repository import ResultsRepository
from harsanyi.services.attribution_service import AttributionService
from harsanyi.services.estimator_service import EstimatorService
from harsanyi.services.oracles import CountingOracle, ModelOracle

restrict_option = click.option('--restrict', default=None,
                               help='Explain only these players (comma separated); the rest keep their values.')


def _targets(model_path, data_path, label_column, samples, class_spec, mode):
    """Loaded model and dataset plus (index, sample, class) for every requested sample."""
    saved, dataset = load_inputs(model_path, data_path, label_column)
    model = saved.model
    targets = []
    for index in parse_samples(samples, len(dataset)):
        sample = dataset.sample(index)
        class_index = AttributionService.resolve_class_index(model, sample, class_spec, dataset.label(index), mode)
        targets.append((index, sample, class_index))
    return model, targets


def _header(command, model, model_path, data_path, mode, class_spec, seed, **extra):
    header = {
        'command': command,
        'model': model_path,
        'data': data_path,
        'topology': model.topology,
        'n_players': model.n_players,
        'mode': AttributionService.resolve_mode(model, mode).value,
        'class': class_spec,
        'seed': seed,
    }
    header.update({k: v for k, v in extra.items() if v is not None})
    return header


@click.command('explain')
@model_option()
@data_option()
@label_option
@samples_option
@class_option
@mode_option
@restrict_option
@seed_option
@out_option
@logged_command
def explain(model_path, data_path, label_column, samples, class_spec, mode, restrict, seed, out_path):
    """Exact Shapley values from one forward pass per sample."""
    check_class_spec(class_spec)
    model, targets = _targets(model_path, data_path, label_column, samples, class_spec, mode)
    selected = None if restrict is None else PlayerSet.parse(model.n_players, restrict)
    rows = []
    for index, sample, class_index in targets:
        if selected is None:
            attribution = AttributionService.exact_shapley(model, sample, class_index, mode)
        else:
            attribution = AttributionService.restricted_shapley(model, sample, selected, class_index, mode)
        rows.append((index, attribution))
    header = _header('explain', model, model_path, data_path, mode, class_spec, resolve_seed(seed),
                     restrict=None if selected is None else str(selected), inferences=len(rows))
    emit(ResultsRepository.write_table(ResultsRepository.attributions_frame(rows), None, header), out_path, header)


@click.command('oracle')
@model_option()
@data_option()
@label_option
@samples_option
@class_option
@mode_option
@restrict_option
@seed_option
@out_option
@logged_command
def oracle(model_path, data_path, label_column, samples, class_spec, mode, restrict, seed, out_path):
    """Brute-force Shapley values over all 2^n masked inputs."""
    check_class_spec(class_spec)
    model, targets = _targets(model_path, data_path, label_column, samples, class_spec, mode)
    selected = None if restrict is None else PlayerSet.parse(model.n_players, restrict)
    rows, inferences = [], 0
    for index, sample, class_index in targets:
        attribution = AttributionService.brute_force_model_shapley(model, sample, class_index, mode, selected)
        inferences += attribution.inference_count
        rows.append((index, attribution))
    header = _header('oracle', model, model_path, data_path, mode, class_spec, resolve_seed(seed),
                     restrict=None if selected is None else str(selected), inferences=inferences)
    emit(ResultsRepository.write_table(ResultsRepository.attributions_frame(rows), None, header), out_path, header)


@click.command('estimate')
@model_option()
@data_option()
@label_option
@samples_option
@class_option
@mode_option
@click.option('--estimator', type=click.Choice(ESTIMATOR_NAMES), required=True)
@click.option('--budget', type=click.IntRange(min=1), required=True, help='Model inferences per sample.')
@click.option('--trial', type=click.IntRange(min=0), default=0, show_default=True,
              help='Trial index; selects the random substream together with the seed.')
@seed_option
@out_option
@logged_command
def estimate(model_path, data_path, label_column, samples, class_spec, mode, estimator, budget, trial, seed, out_path):
    """Sampling-based Shapley estimate under an inference budget."""
    check_class_spec(class_spec)
    seed = resolve_seed(seed)
    model, targets = _targets(model_path, data_path, label_column, samples, class_spec, mode)
    resolved = AttributionService.resolve_mode(model, mode)
    rows, used = [], 0
    for index, sample, class_index in targets:
        counter = CountingOracle(ModelOracle(model, sample, class_index, resolved))
        record = EstimatorService.run(estimator, counter, model.n_players, Budget(budget, seed, (trial, index)))
        used += counter.count
        rows.append((index, record.attribution))
    header = _header('estimate', model, model_path, data_path, mode, class_spec, seed,
                     estimator=estimator, budget=budget, trial=trial, inferences=used)
    emit(ResultsRepository.write_table(ResultsRepository.attributions_frame(rows), None, header), out_path, header)


@click.command('evaluate')
@model_option()
@data_option()
@label_option
@click.option('--samples', default='all', show_default=True, help="Sample indices, comma separated, or 'all'.")
@class_option
@mode_option
@seed_option
@out_option
@logged_command
def evaluate(model_path, data_path, label_column, samples, class_spec, mode, seed, out_path):
    """RMSE between exact and brute-force Shapley values per sample."""
    check_class_spec(class_spec)
    model, targets = _targets(model_path, data_path, label_column, samples, class_spec, mode)
    records = []
    for index, sample, class_index in targets:
        exact = AttributionService.exact_shapley(model, sample, class_index, mode)
        truth = AttributionService.brute_force_model_shapley(model, sample, class_index, mode)
        records.append((index, class_index, EstimatorService.rmse(exact, truth)))
    frame = pd.DataFrame(records, columns=['sample_index', 'class_index', 'rmse'])
    errors = frame['rmse'].to_numpy()
    header = _header('evaluate', model, model_path, data_path, mode, class_spec, resolve_seed(seed),
                     samples=len(records), mean_rmse=repr(float(np.mean(errors))),
                     max_rmse=repr(float(np.max(errors))))
    emit(ResultsRepository.write_table(frame, None, header), out_path, header)
