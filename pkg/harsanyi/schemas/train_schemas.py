# harsanyi/schemas/train_schemas.py
from marshmallow import Schema, fields, post_load, validate

from harsanyi.models.experiment import INIT_SCHEMES, OPTIMIZERS, InitScheme, TrainConfig


class InitSchemeSchema(Schema):
    kind = fields.Str(load_default='mlp_fixed_fanin', validate=validate.OneOf(INIT_SCHEMES))
    fanin = fields.Int(load_default=10, validate=validate.Range(min=1))
    tau_sd = fields.Float(load_default=0.01, validate=validate.Range(min=0, min_inclusive=False))

    @post_load
    def make_scheme(self, data, **kwargs):
        return InitScheme(**data)


class TrainConfigSchema(Schema):
    """Schema for optimization settings"""

    learning_rate = fields.Float(load_default=1e-3, validate=validate.Range(min=0, min_inclusive=False))
    epochs = fields.Int(load_default=50, validate=validate.Range(min=0))
    batch_size = fields.Int(load_default=32, validate=validate.Range(min=1))
    seed = fields.Int(load_default=0, validate=validate.Range(min=0))
    optimizer = fields.Str(load_default='adam', validate=validate.OneOf(OPTIMIZERS))
    init = fields.Nested(InitSchemeSchema, load_default=lambda: InitScheme())
    validation_fraction = fields.Float(load_default=0.2, validate=validate.Range(min=0.0, max=1.0, max_inclusive=False))
    beta = fields.Float(load_default=None, allow_none=True, validate=validate.Range(min=0, min_inclusive=False))
    gamma = fields.Float(load_default=None, allow_none=True, validate=validate.Range(min=0, min_inclusive=False))

    @post_load
    def make_config(self, data, **kwargs):
        return TrainConfig(**data)
