"""
Shared options and helpers for the CLI commands.
"""

import click

from harsanyi.config import get_config
from harsanyi.errors import ContractError
from harsanyi.repositories.results_repository import header_lines
from harsanyi.services.experiment_service import ExperimentService

MODES = click.Choice(['hard', 'soft'])


def model_option(required=True):
    return click.option('--model', 'model_path', required=required, type=click.Path(exists=True, dir_okay=False),
                        help='Model file written by `train`.')


def data_option(required=True):
    return click.option('--data', 'data_path', required=required, type=click.Path(exists=True, dir_okay=False),
                        help='CSV dataset.')


label_option = click.option('--label-col', 'label_column', default=None,
                            help='Label column (defaults to the one stored with the model).')
seed_option = click.option('--seed', type=click.IntRange(min=0), default=None,
                           help='Master seed (defaults to HARSANYI_DEFAULT_SEED).')
mode_option = click.option('--mode', type=MODES, default=None,
                           help='AND activation used for inference (defaults to the trained mode).')
class_option = click.option('--class', 'class_spec', default='auto', show_default=True,
                            help="Output class to explain: 'auto' or an index.")
samples_option = click.option('--samples', default='0', show_default=True,
                              help="Sample indices, comma separated, or 'all'.")
out_option = click.option('--out', 'out_path', default=None, type=click.Path(dir_okay=False),
                          help='Write the CSV here instead of stdout.')


def resolve_seed(seed):
    return get_config().DEFAULT_SEED if seed is None else seed


def parse_samples(text, total):
    """'all' or comma-separated indices, in the order given."""
    text = text.strip()
    if text.lower() == 'all':
        return list(range(total))
    try:
        indices = [int(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise ContractError(f"Cannot parse sample list '{text}'")
    bad = [i for i in indices if not 0 <= i < total]
    if bad or not indices:
        raise ContractError(f"Sample indices must be in 0..{total - 1}, got '{text}'")
    return indices


def check_class_spec(class_spec):
    if class_spec != 'auto' and not class_spec.isdigit():
        raise click.BadParameter("must be 'auto' or a class index", param_hint="'--class'")
    return class_spec


def load_inputs(model_path, data_path, label_column):
    return ExperimentService.load_inputs(model_path, data_path, label_column)


def emit(text, out_path=None, header=None):
    """
    Print a result table, or write it to out_path and echo only the header.
    Header lines precede the table in both cases.
    """
    if out_path is None:
        click.echo(text, nl=False)
        return
    with open(out_path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(text)
    click.echo(header_lines(header), nl=False)
    click.echo(f"# wrote={out_path}")
