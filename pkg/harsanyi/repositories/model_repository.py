"""
Model Repository

Reads and writes `harsanyinet v1` model files:

    harsanyinet v1
    topology=mlp|conv
    sha256=<hex digest of the body line>
    <body: one line of JSON>

The body holds the config, every parameter array, the AND mode used at
inference, and for tabular models the normalization record. Reals are written
with shortest round-trip decimals, so a load reproduces outputs bit for bit
and save -> load -> save is byte-identical.
"""

import hashlib
import json
import logging

import numpy as np

from harsanyi.errors import ChecksumError, ModelFileError, TopologyError, VersionError
from harsanyi.models.harsanyi_cnn import ConvHarsanyiBlock, HarsanyiCNN, StemLayer
from harsanyi.models.harsanyi_mlp import HarsanyiBlock, HarsanyiMLP, OutputHead
from harsanyi.schemas import load_or_raise
from harsanyi.schemas.model_schemas import CnnConfigSchema, ModelConfigSchema, NormalizationRecordSchema

logger = logging.getLogger(__name__)

MAGIC = 'harsanyinet'
VERSION = 'v1'
TOPOLOGIES = ('mlp', 'conv')


class SavedModel:
    """A loaded model plus what was stored alongside it."""

    def __init__(self, model, normalization=None, label_classes=()):
        self.model = model
        self.normalization = normalization
        self.label_classes = tuple(label_classes)


def _config_schema(topology):
    return CnnConfigSchema() if topology == 'conv' else ModelConfigSchema()


class ModelRepository:
    """Repository for model file persistence"""

    @staticmethod
    def encode(model, normalization=None, label_classes=()):
        """Serialize a model to the full file text."""
        body = {
            'config': _config_schema(model.topology).dump(model.config),
            'parameters': {name: array.tolist() for name, array in model.parameters().items()},
            'normalization': None if normalization is None else NormalizationRecordSchema().dump(normalization),
            'label_classes': list(label_classes or (normalization.label_classes if normalization else ())),
        }
        line = json.dumps(body, sort_keys=True, separators=(',', ':'), allow_nan=False)
        digest = hashlib.sha256(line.encode('utf-8')).hexdigest()
        return f"{MAGIC} {VERSION}\ntopology={model.topology}\nsha256={digest}\n{line}\n"

    @staticmethod
    def save_model(model, path, normalization=None, label_classes=()):
        """
        Write a model file.

        Args:
            model: HarsanyiMLP or HarsanyiCNN
            path: destination path
            normalization: optional NormalizationRecord of the training data
        """
        text = ModelRepository.encode(model, normalization, label_classes)
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            f.write(text)
        logger.info(f"Saved {model.topology} model to {path}")

    @staticmethod
    def decode(text, expected_topology=None):
        """
        Parse file text into a SavedModel.

        Raises:
            VersionError: wrong magic line or version
            ChecksumError: body missing, truncated or altered
            TopologyError: topology differs from expected_topology
        """
        lines = text.split('\n')
        header = lines[0].split(' ') if lines else []
        if len(header) != 2 or header[0] != MAGIC:
            raise VersionError("Not a harsanyinet model file")
        if header[1] != VERSION:
            raise VersionError(f"Unsupported model file version {header[1]} (expected {VERSION})")
        if len(lines) < 4 or not lines[1].startswith('topology=') or not lines[2].startswith('sha256='):
            raise ChecksumError("Model file is truncated")
        topology = lines[1][len('topology='):]
        if topology not in TOPOLOGIES:
            raise ModelFileError(f"Unknown topology '{topology}'")
        body = lines[3]
        if hashlib.sha256(body.encode('utf-8')).hexdigest() != lines[2][len('sha256='):]:
            raise ChecksumError("Model file checksum does not match its contents")
        if expected_topology is not None and topology != expected_topology:
            raise TopologyError(f"Expected a {expected_topology} model, file holds a {topology} model")

        data = json.loads(body)
        config = load_or_raise(_config_schema(topology), data['config'], 'model config')
        params = {name: np.array(values, dtype=np.float64) for name, values in data['parameters'].items()}
        try:
            model = ModelRepository._build(topology, config, params)
        except KeyError as e:
            raise ModelFileError(f"Model file lacks parameter {e}")
        normalization = None
        if data.get('normalization') is not None:
            normalization = load_or_raise(NormalizationRecordSchema(), data['normalization'], 'normalization record')
        return SavedModel(model, normalization, data.get('label_classes', ()))

    @staticmethod
    def _build(topology, config, params):
        head = OutputHead(params['head.weights'])
        if topology == 'conv':
            stem = StemLayer(params['stem.weights'], params['stem.bias'])
            blocks = [ConvHarsanyiBlock(params[f'block{l}.weights'], params[f'block{l}.tau'])
                      for l in range(config.block_count)]
            return HarsanyiCNN(config, stem, blocks, head)
        blocks = [HarsanyiBlock(params[f'block{l}.weights'], params[f'block{l}.tau'])
                  for l in range(config.block_count)]
        return HarsanyiMLP(config, blocks, head)

    @staticmethod
    def load_model(path, expected_topology=None):
        with open(path, 'r', encoding='utf-8') as f:
            text = f.read()
        saved = ModelRepository.decode(text, expected_topology)
        logger.info(f"Loaded {saved.model.topology} model from {path}")
        return saved
