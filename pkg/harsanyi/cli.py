"""
Command-line entry point.

    harsanyi [--env development|production|testing] <command> [options]

Result tables go to stdout (or --out) preceded by `# key=value` lines that
echo the resolved configuration; logs go to stderr. Exit status is 0 on
success, 1 with a one-line `error:` diagnostic for package errors and 2 for
usage errors.
"""

import sys

import click

from harsanyi import create_runtime
from harsanyi.commands import register_commands
from harsanyi.config import config
from harsanyi.errors import HarsanyiError


@click.group()
@click.option('--env', 'env_name', type=click.Choice([name for name in config if name != 'default']),
              default=None, help='Configuration class (default: HARSANYI_ENV or development).')
@click.pass_context
def cli(ctx, env_name):
    """HarsanyiNet training, exact Shapley attributions and baselines."""
    ctx.obj = create_runtime(env_name)


register_commands(cli)


def main(argv=None):
    """Run the CLI and return its exit status instead of exiting."""
    try:
        status = cli.main(args=argv, prog_name='harsanyi', standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.Abort:
        click.echo('Aborted!', err=True)
        return 1
    except HarsanyiError as e:
        click.echo(f"error: {e}", err=True)
        return 1
    return status if isinstance(status, int) else 0


if __name__ == '__main__':
    sys.exit(main())
