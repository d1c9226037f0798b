# harsanyi/schemas/model_schemas.py
"""
Marshmallow schemas for model configurations and the normalization record
stored inside model files.
"""

from marshmallow import Schema, fields, post_load, validate, validates_schema, ValidationError

from harsanyi.models.dataset import NormalizationRecord
from harsanyi.models.harsanyi_cnn import CnnConfig
from harsanyi.models.harsanyi_mlp import AndMode, ChildrenScope, ModelConfig

_positive = validate.Range(min=0, min_inclusive=False)


class ModelConfigSchema(Schema):
    """Schema for Harsanyi-MLP topology and hyperparameters"""

    n_inputs = fields.Int(required=True, validate=validate.Range(min=1))
    block_sizes = fields.List(fields.Int(validate=validate.Range(min=1)), required=True,
                              validate=validate.Length(min=1))
    class_count = fields.Int(required=True, validate=validate.Range(min=1))
    beta = fields.Float(load_default=10.0, validate=_positive)
    gamma = fields.Float(load_default=100.0, validate=_positive)
    children_scope = fields.Enum(ChildrenScope, by_value=True, load_default=ChildrenScope.PREVIOUS_BLOCK_ONLY)
    and_mode = fields.Enum(AndMode, by_value=True, load_default=AndMode.SOFT)
    player_groups = fields.List(fields.List(fields.Int(validate=validate.Range(min=0))),
                                load_default=None, allow_none=True)

    @validates_schema
    def validate_groups(self, data, **kwargs):
        groups = data.get('player_groups')
        if groups is None:
            return
        columns = sorted(c for group in groups for c in group)
        if columns != list(range(data['n_inputs'])) or any(not group for group in groups):
            raise ValidationError('Groups must partition the input columns.', 'player_groups')

    @post_load
    def make_config(self, data, **kwargs):
        data['block_sizes'] = tuple(data['block_sizes'])
        if data.get('player_groups') is not None:
            data['player_groups'] = tuple(tuple(group) for group in data['player_groups'])
        return ModelConfig(**data)


class CnnConfigSchema(Schema):
    """Schema for Harsanyi-CNN stem, blocks and hyperparameters"""

    image_height = fields.Int(required=True, validate=validate.Range(min=1))
    image_width = fields.Int(required=True, validate=validate.Range(min=1))
    class_count = fields.Int(required=True, validate=validate.Range(min=1))
    input_channels = fields.Int(load_default=1, validate=validate.Range(min=1))
    stem_kernel = fields.Int(load_default=3, validate=validate.Range(min=1))
    stem_channels = fields.Int(load_default=8, validate=validate.Range(min=1))
    pool = fields.Int(load_default=1, validate=validate.Range(min=1))
    block_count = fields.Int(load_default=2, validate=validate.Range(min=1))
    channels = fields.Int(load_default=8, validate=validate.Range(min=1))
    kernel = fields.Int(load_default=3, validate=validate.Range(min=1))
    beta = fields.Float(load_default=1000.0, validate=_positive)
    gamma = fields.Float(load_default=1.0, validate=_positive)
    and_mode = fields.Enum(AndMode, by_value=True, load_default=AndMode.SOFT)
    stride = fields.Int(load_default=1, validate=validate.OneOf([1]))
    padding = fields.Str(load_default='same', validate=validate.OneOf(['same']))

    @validates_schema
    def validate_shapes(self, data, **kwargs):
        errors = {}
        for name in ('kernel', 'stem_kernel'):
            if name in data and data[name] % 2 == 0:
                errors[name] = ['Kernel size must be odd.']
        pool = data.get('pool', 1)
        if data['image_height'] % pool or data['image_width'] % pool:
            errors['pool'] = ['Image size must be divisible by the pool factor.']
        if errors:
            raise ValidationError(errors)

    @post_load
    def make_config(self, data, **kwargs):
        data.pop('stride', None)
        data.pop('padding', None)
        return CnnConfig(**data)


class NormalizationRecordSchema(Schema):
    """Schema for the preprocessing record saved with tabular models"""

    feature_names = fields.List(fields.Str(), required=True)
    label_column = fields.Str(required=True)
    numeric = fields.Dict(keys=fields.Str(), values=fields.List(fields.Float(), validate=validate.Length(equal=2)),
                          load_default=dict)
    categorical = fields.Dict(keys=fields.Str(), values=fields.List(fields.Str()), load_default=dict)
    label_classes = fields.List(fields.Str(), load_default=list)

    @post_load
    def make_record(self, data, **kwargs):
        return NormalizationRecord(
            feature_names=tuple(data['feature_names']),
            label_column=data['label_column'],
            numeric={k: (float(v[0]), float(v[1])) for k, v in data['numeric'].items()},
            categorical={k: tuple(v) for k, v in data['categorical'].items()},
            label_classes=tuple(data['label_classes']),
        )
