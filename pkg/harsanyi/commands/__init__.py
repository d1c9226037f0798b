"""
CLI command modules, one per concern.
"""

from .attribution import estimate, evaluate, explain, oracle
from .experiment import converge, synth
from .structure import fields, spectrum
from .train import train

COMMANDS = (train, explain, oracle, estimate, evaluate, spectrum, fields, converge, synth)


def register_commands(group):
    for command in COMMANDS:
        group.add_command(command)
    return group
