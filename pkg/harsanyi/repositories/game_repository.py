"""
Game Repository

Plain-text game tables:

    game v1 n=<n> kind=<reward|interaction>
    <bits> <value with 17 significant digits>     (2^n lines, ascending bits)
"""

import logging

import numpy as np

from harsanyi.errors import ContractError, VersionError
from harsanyi.models.game import GameKind, GameTable, check_capacity

logger = logging.getLogger(__name__)


class GameRepository:
    """Repository for game table files"""

    @staticmethod
    def encode(table):
        lines = [f"game v1 n={table.n} kind={table.kind.value}"]
        lines.extend(f"{bits} {value:.17g}" for bits, value in enumerate(table.values.tolist()))
        return '\n'.join(lines) + '\n'

    @staticmethod
    def decode(text):
        """
        Raises:
            VersionError: header is not a `game v1` header
            ContractError: malformed or incomplete body
            CapacityError: n above the enumeration cap
        """
        lines = [line for line in text.splitlines() if line.strip()]
        if not lines:
            raise ContractError("Empty game file")
        header = lines[0].split()
        if len(header) != 4 or header[0] != 'game' or header[1] != 'v1':
            raise VersionError(f"Unsupported game file header: {lines[0]!r}")
        try:
            fields = dict(part.split('=', 1) for part in header[2:])
            n = int(fields['n'])
            kind = GameKind(fields['kind'])
        except (KeyError, ValueError):
            raise ContractError(f"Malformed game file header: {lines[0]!r}")
        check_capacity(n)
        if len(lines) - 1 != 1 << n:
            raise ContractError(f"Game file for n={n} needs {1 << n} rows, found {len(lines) - 1}")
        values = np.empty(1 << n, dtype=np.float64)
        for row, line in enumerate(lines[1:]):
            try:
                bits_text, value_text = line.split()
                bits, value = int(bits_text), float(value_text)
            except ValueError:
                raise ContractError(f"Malformed game file row {row}")
            if bits != row:
                raise ContractError(f"Game file rows must be in ascending bit order (row {row})")
            values[row] = value
        return GameTable(n, values, kind)

    @staticmethod
    def save_game(table, path):
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            f.write(GameRepository.encode(table))
        logger.info(f"Saved {table.kind.value} table over n={table.n} to {path}")

    @staticmethod
    def load_game(path):
        with open(path, 'r', encoding='utf-8') as f:
            return GameRepository.decode(f.read())
