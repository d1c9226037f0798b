"""
Experiment commands: the convergence comparison and synthetic data.
"""

import json

import click

from harsanyi.commands.common import emit, resolve_seed, seed_option
from harsanyi.errors import ConfigError
from harsanyi.middleware import logged_command
from harsanyi.repositories.game_repository import GameRepository
from harsanyi.repositories.results_repository import ResultsRepository, header_lines
from harsanyi.schemas import load_or_raise
from harsanyi.schemas.experiment_schemas import ExperimentSpecSchema
from harsanyi.services.experiment_service import ExperimentService
from harsanyi.services.synthetic_service import GAME_KINDS, SyntheticService


@click.command('converge')
@click.option('--spec', 'spec_path', required=True, type=click.Path(exists=True, dir_okay=False),
              help='JSON experiment description.')
@seed_option
@logged_command
def converge(spec_path, seed):
    """Estimator error against inference budget, with the exact method at budget 1."""
    try:
        with open(spec_path, 'r', encoding='utf-8') as f:
            raw = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{spec_path} is not valid JSON: {e}")
    if seed is not None:
        raw['seed'] = seed
    spec = load_or_raise(ExperimentSpecSchema(), raw, 'experiment spec')
    result = ExperimentService.run_convergence_experiment(spec)
    header = {
        'command': 'converge',
        'spec': spec_path,
        'seed': spec.seed,
        'estimators': ','.join(spec.estimators),
        'trials': spec.trials,
        'samples': result.summary['samples'],
        'rows': len(result.rows),
        'out': spec.output_path,
    }
    click.echo(header_lines(header), nl=False)


@click.command('synth')
@click.option('--kind', type=click.Choice(['separable', 'and', 'images', 'game']), default='separable',
              show_default=True)
@click.option('--features', 'n_features', type=click.IntRange(min=1), default=12, show_default=True,
              help='Feature count (tabular) or player count (game).')
@click.option('--rows', 'samples', type=click.IntRange(min=1), default=500, show_default=True)
@click.option('--terms', type=click.IntRange(min=1), default=2, show_default=True,
              help='Conjunctions behind the label (and).')
@click.option('--order', type=click.IntRange(min=1), default=2, show_default=True,
              help='Players per conjunction (and) or maximum coalition size (low_order game).')
@click.option('--height', type=click.IntRange(min=1), default=4, show_default=True)
@click.option('--width', type=click.IntRange(min=2), default=4, show_default=True)
@click.option('--game-kind', type=click.Choice(GAME_KINDS), default='dense', show_default=True)
@seed_option
@click.option('--out', 'out_path', required=True, type=click.Path(dir_okay=False))
@logged_command
def synth(kind, n_features, samples, terms, order, height, width, game_kind, seed, out_path):
    """Write a seeded synthetic dataset (CSV) or reward game."""
    seed = resolve_seed(seed)
    header = {'command': 'synth', 'kind': kind, 'seed': seed}
    if kind == 'game':
        GameRepository.save_game(SyntheticService.random_game(n_features, seed, game_kind, order), out_path)
        header.update({'n_players': n_features, 'game_kind': game_kind, 'out': out_path})
        click.echo(header_lines(header), nl=False)
        return
    if kind == 'separable':
        frame = SyntheticService.separable_frame(n_features, samples, seed)
    elif kind == 'and':
        frame = SyntheticService.and_frame(n_features, samples, seed, terms, order)
    else:
        frame = SyntheticService.images_frame(SyntheticService.random_images(samples, height, width, seed))
    header.update({'rows': len(frame), 'columns': frame.shape[1] - 1})
    emit(ResultsRepository.write_table(frame), out_path, header)
