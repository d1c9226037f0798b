# dataset.py
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd

from harsanyi.errors import SchemaError
from harsanyi.models.harsanyi_cnn import GridSample
from harsanyi.models.harsanyi_mlp import Sample

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DatasetConfig:
    """How to read a tabular CSV: which column is the label, which are categorical."""

    label_column: str
    categorical: Tuple[str, ...] = ()
    validation_fraction: float = 0.2


@dataclass(frozen=True)
class NormalizationRecord:
    """
    Everything needed to preprocess new rows exactly like the training rows.

    feature_names lists the players in file order. Numeric features map to one
    z-scored column each; categorical features map to one 0/1 column per level,
    and those columns form one player group.
    """

    feature_names: Tuple[str, ...]
    label_column: str
    numeric: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    categorical: Dict[str, Tuple[str, ...]] = field(default_factory=dict)
    label_classes: Tuple[str, ...] = ()

    @classmethod
    def fit(cls, frame, label_column, categorical=()):
        """
        Learn means, standard deviations and category levels from a frame.

        Raises:
            SchemaError: label column missing, or a non-numeric column that is
                not registered as categorical
        """
        if label_column not in frame.columns:
            raise SchemaError(f"Label column '{label_column}' not found in {list(frame.columns)}")
        numeric, levels = {}, {}
        names = [c for c in frame.columns if c != label_column]
        for name in names:
            column = frame[name]
            if name in categorical:
                levels[name] = tuple(sorted(str(v) for v in column.astype(str).unique()))
            elif pd.api.types.is_numeric_dtype(column):
                values = column.to_numpy(dtype=np.float64)
                mean = float(values.mean())
                sd = float(values.std())
                if sd == 0.0:
                    logger.warning(f"Column '{name}' is constant; it will be encoded as all zeros")
                numeric[name] = (mean, sd)
            else:
                raise SchemaError(f"Column '{name}' is not numeric and is not registered as categorical")
        unknown = set(categorical) - set(names)
        if unknown:
            raise SchemaError(f"Categorical columns not in file: {sorted(unknown)}")
        classes = tuple(str(c) for c in pd.factorize(frame[label_column].astype(str), sort=True)[1])
        return cls(tuple(str(n) for n in names), str(label_column), numeric, levels, classes)

    @property
    def columns(self):
        out = []
        for name in self.feature_names:
            if name in self.categorical:
                out.extend(f"{name}={level}" for level in self.categorical[name])
            else:
                out.append(name)
        return tuple(out)

    @property
    def player_groups(self):
        groups, start = [], 0
        for name in self.feature_names:
            width = len(self.categorical[name]) if name in self.categorical else 1
            groups.append(tuple(range(start, start + width)))
            start += width
        return tuple(groups)

    @property
    def has_categorical(self):
        return bool(self.categorical)

    def encode_features(self, frame):
        """(rows x columns) float matrix: z-scores and one-hot indicators."""
        missing = [name for name in self.feature_names if name not in frame.columns]
        if missing:
            raise SchemaError(f"Columns missing from input: {missing}")
        blocks = []
        for name in self.feature_names:
            if name in self.categorical:
                values = frame[name].astype(str).to_numpy()
                levels = np.array(self.categorical[name], dtype=object)
                blocks.append((values[:, None] == levels[None, :]).astype(np.float64))
            else:
                mean, sd = self.numeric[name]
                try:
                    values = frame[name].to_numpy(dtype=np.float64)
                except (TypeError, ValueError):
                    raise SchemaError(f"Column '{name}' is not numeric")
                blocks.append(((values - mean) / sd if sd > 0 else np.zeros_like(values))[:, None])
        return np.concatenate(blocks, axis=1) if blocks else np.zeros((len(frame), 0))

    def encode_labels(self, frame):
        if self.label_column not in frame.columns:
            return None
        lookup = {c: i for i, c in enumerate(self.label_classes)}
        values = frame[self.label_column].astype(str)
        unknown = sorted(set(values) - set(lookup))
        if unknown:
            raise SchemaError(f"Unknown labels {unknown}; known classes are {list(self.label_classes)}")
        return values.map(lookup).to_numpy(dtype=np.int64)

    def restore(self, features):
        """Raw feature values back from encoded rows (categoricals by argmax level)."""
        features = np.atleast_2d(features)
        columns = {}
        for name, group in zip(self.feature_names, self.player_groups):
            block = features[:, list(group)]
            if name in self.categorical:
                levels = np.array(self.categorical[name], dtype=object)
                columns[name] = levels[np.argmax(block, axis=1)]
            else:
                mean, sd = self.numeric[name]
                columns[name] = block[:, 0] * sd + mean
        return pd.DataFrame(columns, columns=list(self.feature_names))


@dataclass
class Dataset:
    """Encoded tabular data. features: (samples x columns); labels: class indices."""

    features: np.ndarray
    labels: Optional[np.ndarray]
    record: NormalizationRecord
    rejected_rows: int = 0

    @property
    def inputs(self):
        return self.features

    @property
    def feature_names(self):
        return self.record.feature_names

    @property
    def n_players(self):
        return len(self.record.feature_names)

    @property
    def class_count(self):
        return len(self.record.label_classes)

    def __len__(self):
        return int(self.features.shape[0])

    def subset(self, indices):
        labels = None if self.labels is None else self.labels[indices]
        return Dataset(self.features[indices], labels, self.record)

    def sample(self, index):
        return Sample(self.features[index])

    def label(self, index):
        return None if self.labels is None else int(self.labels[index])


@dataclass
class ImageDataset:
    """images: (samples x channels x height x width); labels: class indices."""

    images: np.ndarray
    labels: Optional[np.ndarray]
    label_classes: Tuple[str, ...] = ()

    @property
    def inputs(self):
        return self.images

    @property
    def class_count(self):
        return len(self.label_classes)

    def __len__(self):
        return int(self.images.shape[0])

    def subset(self, indices):
        labels = None if self.labels is None else self.labels[indices]
        return ImageDataset(self.images[indices], labels, self.label_classes)

    def sample(self, index):
        return GridSample(self.images[index])

    def label(self, index):
        return None if self.labels is None else int(self.labels[index])
