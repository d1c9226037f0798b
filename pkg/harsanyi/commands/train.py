# harsanyi/commands/train.py
import click

from harsanyi.commands.common import emit, resolve_seed, seed_option
from harsanyi.middleware import logged_command
from harsanyi.models.harsanyi_mlp import AndMode, ChildrenScope
from harsanyi.repositories.dataset_repository import DatasetRepository
from harsanyi.repositories.model_repository import ModelRepository
from harsanyi.repositories.results_repository import ResultsRepository
from harsanyi.schemas import load_or_raise
from harsanyi.schemas.experiment_schemas import DatasetConfigSchema
from harsanyi.schemas.model_schemas import CnnConfigSchema, ModelConfigSchema
from harsanyi.schemas.train_schemas import TrainConfigSchema
from harsanyi.services.training_service import TrainingService


def _block_sizes(text):
    try:
        return [int(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise click.BadParameter(f"'{text}' is not a comma-separated list of unit counts", param_hint="'--blocks'")


@click.command('train')
@click.option('--data', 'data_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--label-col', 'label_column', default='label', show_default=True)
@click.option('--out', 'out_path', required=True, type=click.Path(dir_okay=False), help='Model file to write.')
@click.option('--topology', type=click.Choice(['mlp', 'conv']), default='mlp', show_default=True)
@click.option('--blocks', default='100,100,100', show_default=True, help='Units per block (MLP).')
@click.option('--scope', type=click.Choice([s.value for s in ChildrenScope]),
              default=ChildrenScope.PREVIOUS_BLOCK_ONLY.value, show_default=True)
@click.option('--categorical', multiple=True, help='Categorical column; repeat for several.')
@click.option('--beta', type=float, default=None, help='STE scale (default 10 MLP, 1000 CNN).')
@click.option('--gamma', type=float, default=None, help='Soft-AND sharpness (default 100 MLP, 1 CNN).')
@click.option('--mode', type=click.Choice(['hard', 'soft']), default='soft', show_default=True,
              help='AND activation stored as the model default for inference.')
@click.option('--epochs', type=int, default=50, show_default=True)
@click.option('--lr', 'learning_rate', type=float, default=1e-3, show_default=True)
@click.option('--batch-size', type=int, default=32, show_default=True)
@click.option('--optimizer', type=click.Choice(['adam', 'sgd']), default='adam', show_default=True)
@click.option('--fanin', type=int, default=10, show_default=True, help='Children selected per unit at init (MLP).')
@click.option('--tau-sd', type=float, default=0.01, show_default=True, help='Selector init spread (CNN).')
@click.option('--val-fraction', 'validation_fraction', type=float, default=0.2, show_default=True)
@click.option('--metrics', 'metrics_path', default=None, type=click.Path(dir_okay=False),
              help='Write per-epoch metrics CSV here (default: stdout).')
@click.option('--height', type=int, default=None, help='Image height (conv).')
@click.option('--width', type=int, default=None, help='Image width (conv).')
@click.option('--channels-in', 'input_channels', type=int, default=1, show_default=True)
@click.option('--stem-channels', type=int, default=8, show_default=True)
@click.option('--pool', type=int, default=1, show_default=True)
@click.option('--conv-blocks', 'block_count', type=int, default=2, show_default=True)
@click.option('--conv-channels', 'channels', type=int, default=8, show_default=True)
@click.option('--kernel', type=int, default=3, show_default=True)
@seed_option
@logged_command
def train(data_path, label_column, out_path, topology, blocks, scope, categorical, beta, gamma, mode,
          epochs, learning_rate, batch_size, optimizer, fanin, tau_sd, validation_fraction, metrics_path,
          height, width, input_channels, stem_channels, pool, block_count, channels, kernel, seed):
    """Fit a HarsanyiNet on a labelled CSV and save it."""
    seed = resolve_seed(seed)
    train_config = load_or_raise(TrainConfigSchema(), {
        'learning_rate': learning_rate,
        'epochs': epochs,
        'batch_size': batch_size,
        'seed': seed,
        'optimizer': optimizer,
        'init': {'kind': 'cnn_gaussian' if topology == 'conv' else 'mlp_fixed_fanin',
                 'fanin': fanin, 'tau_sd': tau_sd},
        'validation_fraction': validation_fraction,
    }, 'training configuration')
    and_mode = AndMode.parse(mode).value
    hyper = {k: v for k, v in (('beta', beta), ('gamma', gamma)) if v is not None}

    normalization = None
    if topology == 'conv':
        if height is None or width is None:
            raise click.UsageError('--height and --width are required for --topology conv')
        dataset = DatasetRepository.load_csv_images(data_path, label_column, (input_channels, height, width))
        model_config = load_or_raise(CnnConfigSchema(), {
            'image_height': height, 'image_width': width, 'class_count': dataset.class_count,
            'input_channels': input_channels, 'stem_channels': stem_channels, 'pool': pool,
            'block_count': block_count, 'channels': channels, 'kernel': kernel, 'and_mode': and_mode, **hyper,
        }, 'model configuration')
        label_classes = dataset.label_classes
    else:
        dataset_config = load_or_raise(DatasetConfigSchema(), {
            'label_column': label_column, 'categorical': list(categorical),
            'validation_fraction': validation_fraction,
        }, 'dataset configuration')
        dataset = DatasetRepository.load_csv_dataset(data_path, label_column, dataset_config)
        normalization = dataset.record
        groups = [list(g) for g in normalization.player_groups] if normalization.has_categorical else None
        model_config = load_or_raise(ModelConfigSchema(), {
            'n_inputs': dataset.features.shape[1], 'block_sizes': _block_sizes(blocks),
            'class_count': dataset.class_count, 'children_scope': scope, 'and_mode': and_mode,
            'player_groups': groups, **hyper,
        }, 'model configuration')
        label_classes = normalization.label_classes

    model = TrainingService.init_params(model_config, seed, train_config.init)
    result = TrainingService.train(model, dataset, train_config)
    ModelRepository.save_model(result.model, out_path, normalization, label_classes)

    header = {'command': 'train', 'topology': topology, 'n_players': model.n_players,
              'beta': repr(result.model.config.beta), 'gamma': repr(result.model.config.gamma),
              **train_config.header(), 'model': out_path}
    text = ResultsRepository.write_table(ResultsRepository.metrics_frame(result.metrics), None, header)
    emit(text, metrics_path, header)
