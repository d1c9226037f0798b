"""
Structure commands: the interaction spectrum of a game and the receptive
fields of a model's units.
"""

import click
import pandas as pd

from harsanyi.commands.common import (
    check_class_spec, class_option, emit, label_option, load_inputs, mode_option, out_option, parse_samples,
    resolve_seed, seed_option,
)
from harsanyi.middleware import logged_command
from harsanyi.models.game import GameKind
from harsanyi.repositories.game_repository import GameRepository
from harsanyi.repositories.model_repository import ModelRepository
from harsanyi.repositories.results_repository import ResultsRepository
from harsanyi.services.attribution_service import AttributionService
from harsanyi.services.game_service import GameService


@click.command('spectrum')
@click.option('--game', 'game_path', default=None, type=click.Path(exists=True, dir_okay=False),
              help='Reward table file; replaces --model/--data.')
@click.option('--model', 'model_path', default=None, type=click.Path(exists=True, dir_okay=False))
@click.option('--data', 'data_path', default=None, type=click.Path(exists=True, dir_okay=False))
@label_option
@click.option('--sample', 'sample_index', default='0', show_default=True)
@class_option
@mode_option
@click.option('--threshold', type=float, default=0.0, show_default=True,
              help='Print coalitions whose |I(S)| is above this.')
@click.option('--all', 'show_all', is_flag=True, help='Print every coalition, zeros included.')
@click.option('--save-game', 'save_game_path', default=None, type=click.Path(dir_okay=False),
              help='Also write the model-induced reward table here.')
@seed_option
@out_option
@logged_command
def spectrum(game_path, model_path, data_path, label_column, sample_index, class_spec, mode, threshold,
             show_all, save_game_path, seed, out_path):
    """Harsanyi interactions sorted by strength, strongest first."""
    header = {'command': 'spectrum', 'seed': resolve_seed(seed)}
    if game_path is not None:
        game = GameRepository.load_game(game_path)
        if game.kind == GameKind.INTERACTION:
            game = GameService.inverse_harsanyi(game)
        header['game'] = game_path
    elif model_path is not None and data_path is not None:
        check_class_spec(class_spec)
        saved, dataset = load_inputs(model_path, data_path, label_column)
        model = saved.model
        index = parse_samples(sample_index, len(dataset))[0]
        sample = dataset.sample(index)
        class_index = AttributionService.resolve_class_index(model, sample, class_spec, dataset.label(index), mode)
        game = AttributionService.model_game(model, sample, class_index, mode)
        header.update({'model': model_path, 'data': data_path, 'sample': index, 'class_index': class_index,
                       'mode': AttributionService.resolve_mode(model, mode).value})
        if save_game_path is not None:
            GameRepository.save_game(game, save_game_path)
    else:
        raise click.UsageError('Give --game, or both --model and --data')

    entries = GameService.interaction_spectrum(game)
    shown = entries if show_all else [e for e in entries if e.strength > threshold]
    header.update({'n_players': game.n, 'threshold': repr(threshold), 'all': show_all,
                   'salient': GameService.count_salient(entries, threshold)})
    frame = pd.DataFrame([(str(e.players), e.strength, e.interaction) for e in shown],
                         columns=['players', 'strength', 'interaction'])
    emit(ResultsRepository.write_table(frame, None, header), out_path, header)


@click.command('fields')
@click.option('--model', 'model_path', required=True, type=click.Path(exists=True, dir_okay=False))
@out_option
@logged_command
def fields(model_path, out_path):
    """Receptive field of every unit (every location for conv models)."""
    model = ModelRepository.load_model(model_path).model
    receptive = model.receptive_fields()
    frame = pd.DataFrame([(block, unit, players.cardinality, str(players))
                          for block, unit, players in receptive.entries()],
                         columns=['block', 'unit', 'size', 'players'])
    header = {'command': 'fields', 'model': model_path, 'topology': model.topology,
              'n_players': model.n_players, 'distinct_fields': len(receptive.distinct_fields())}
    emit(ResultsRepository.write_table(frame, None, header), out_path, header)
