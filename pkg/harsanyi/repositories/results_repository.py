"""
Results Repository

Writes result tables as CSV (17 significant digits for reals) optionally
preceded by `# key=value` header lines, and experiment summaries as JSON.
Passing path=None returns the text instead of writing a file.
"""

import json
import logging

import pandas as pd

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'


def header_lines(header):
    return ''.join(f"# {key}={value}\n" for key, value in (header or {}).items())


class ResultsRepository:
    """Repository for result files"""

    @staticmethod
    def write_table(frame, path=None, header=None):
        text = header_lines(header) + frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
        if path is None:
            return text
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            f.write(text)
        logger.info(f"Wrote {len(frame)} rows to {path}")
        return text

    @staticmethod
    def attributions_frame(rows):
        """rows: iterable of (sample_index, AttributionVector)."""
        records = []
        for sample_index, attribution in rows:
            for player, phi in zip(attribution.player_indices(), attribution.phi.tolist()):
                records.append((int(sample_index), int(player), phi))
        return pd.DataFrame(records, columns=['sample_index', 'player', 'phi'])

    @staticmethod
    def metrics_frame(metrics):
        return pd.DataFrame([(m.epoch, m.loss, m.train_acc, m.val_acc) for m in metrics],
                            columns=['epoch', 'loss', 'train_acc', 'val_acc'])

    @staticmethod
    def convergence_frame(rows):
        return pd.DataFrame(rows, columns=['estimator', 'budget', 'trial', 'rmse'])

    @staticmethod
    def write_summary(summary, path):
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            f.write(json.dumps(summary, sort_keys=True, indent=2) + '\n')
        logger.info(f"Wrote experiment summary to {path}")
