"""
Dataset Repository

Loads tabular CSV files and image grids into encoded datasets.
Tabular files are UTF-8 CSV with a header row; rows with missing values are
rejected and counted.
"""

import logging
import os

import numpy as np
import pandas as pd
from PIL import Image

from harsanyi.errors import ContractError, SchemaError
from harsanyi.models.dataset import Dataset, DatasetConfig, ImageDataset, NormalizationRecord

logger = logging.getLogger(__name__)


def _read_frame(path):
    try:
        frame = pd.read_csv(path, encoding='utf-8')
    except (pd.errors.EmptyDataError, pd.errors.ParserError, UnicodeDecodeError) as e:
        raise SchemaError(f"Cannot read {path} as a CSV table: {e}")
    before = len(frame)
    frame = frame.dropna().reset_index(drop=True)
    rejected = before - len(frame)
    if rejected:
        logger.warning(f"Rejected {rejected} rows with missing values from {path}")
    return frame, rejected


class DatasetRepository:
    """Repository for dataset files"""

    @staticmethod
    def load_csv_dataset(path, label_column, config=None):
        """
        Read and normalize a labelled table.

        Numeric columns are z-scored; columns listed in config.categorical are
        one-hot encoded and each becomes a single player.

        Args:
            path: CSV file
            label_column: name of the label column
            config: optional DatasetConfig

        Returns:
            Dataset

        Raises:
            SchemaError: missing label column or an unregistered non-numeric column
        """
        config = config or DatasetConfig(label_column=label_column)
        frame, rejected = _read_frame(path)
        record = NormalizationRecord.fit(frame, label_column, config.categorical)
        dataset = Dataset(record.encode_features(frame), record.encode_labels(frame), record, rejected)
        logger.info(f"Loaded {len(dataset)} samples with {dataset.n_players} players "
                    f"({dataset.features.shape[1]} columns) from {path}")
        return dataset

    @staticmethod
    def load_with_record(path, record):
        """Preprocess a new CSV with a record saved at training time (labels optional)."""
        frame, rejected = _read_frame(path)
        return Dataset(record.encode_features(frame), record.encode_labels(frame), record, rejected)

    @staticmethod
    def load_image_grid(path):
        """
        One grid of reals from a headerless CSV or a PGM/PNG-style image file.

        Returns:
            (height x width) float array
        """
        extension = os.path.splitext(path)[1].lower()
        if extension in ('.csv', '.txt'):
            grid = pd.read_csv(path, header=None, encoding='utf-8').to_numpy(dtype=np.float64)
        else:
            with Image.open(path) as image:
                grid = np.asarray(image.convert('F'), dtype=np.float64)
        if grid.ndim != 2 or not np.all(np.isfinite(grid)):
            raise SchemaError(f"{path} does not hold a finite 2-D grid")
        return grid

    @staticmethod
    def load_csv_images(path, label_column, shape, label_classes=None):
        """
        Labelled images stored one per row, pixels flattened in row-major order.

        Args:
            shape: (height, width) or (channels, height, width)
            label_classes: known classes to encode against (default: learned, sorted)
        """
        frame, rejected = _read_frame(path)
        shape = tuple(int(s) for s in shape)
        if len(shape) == 2:
            shape = (1,) + shape
        labels, classes = None, tuple(label_classes or ())
        if label_column is not None and label_column in frame.columns:
            values = frame[label_column].astype(str)
            if not classes:
                classes = tuple(str(c) for c in pd.factorize(values, sort=True)[1])
            lookup = {c: i for i, c in enumerate(classes)}
            unknown = sorted(set(values) - set(lookup))
            if unknown:
                raise SchemaError(f"Unknown labels {unknown}")
            labels = values.map(lookup).to_numpy(dtype=np.int64)
            frame = frame.drop(columns=[label_column])
        pixels = frame.to_numpy(dtype=np.float64)
        if pixels.shape[1] != int(np.prod(shape)):
            raise ContractError(f"Rows hold {pixels.shape[1]} pixels, shape {shape} needs {int(np.prod(shape))}")
        logger.info(f"Loaded {pixels.shape[0]} images of shape {shape} from {path}")
        return ImageDataset(pixels.reshape((-1,) + shape), labels, classes)
