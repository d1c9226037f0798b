# harsanyi/schemas/experiment_schemas.py
from marshmallow import Schema, fields, post_load, validate, validates_schema, ValidationError

from harsanyi.models.dataset import DatasetConfig
from harsanyi.models.experiment import ESTIMATOR_NAMES, ExperimentSpec


class ExperimentSpecSchema(Schema):
    """Schema for a convergence experiment description (JSON file)"""

    model_path = fields.Str(required=True)
    dataset_path = fields.Str(required=True)
    output_path = fields.Str(required=True)
    label_column = fields.Str(load_default=None, allow_none=True)
    summary_path = fields.Str(load_default=None, allow_none=True)
    estimators = fields.List(fields.Str(validate=validate.OneOf(ESTIMATOR_NAMES)), load_default=list(ESTIMATOR_NAMES))
    budgets = fields.List(fields.Int(validate=validate.Range(min=1)), load_default=list)
    budget_multipliers = fields.List(fields.Int(validate=validate.Range(min=1)), load_default=lambda: [4, 16, 64, 256])
    trials = fields.Int(load_default=50, validate=validate.Range(min=1))
    sample_count = fields.Int(load_default=50, validate=validate.Range(min=1))
    seed = fields.Int(load_default=0, validate=validate.Range(min=0))
    mode = fields.Str(load_default=None, allow_none=True, validate=validate.OneOf(['hard', 'soft', 'hard_and', 'soft_and']))
    class_index = fields.Str(load_default='auto')

    @validates_schema
    def validate_budgets(self, data, **kwargs):
        if not data.get('budgets') and not data.get('budget_multipliers'):
            raise ValidationError('Give budgets or budget_multipliers.', 'budgets')
        class_index = data.get('class_index', 'auto')
        if class_index != 'auto' and not class_index.isdigit():
            raise ValidationError("Must be 'auto' or a class index.", 'class_index')

    @post_load
    def make_spec(self, data, **kwargs):
        for key in ('estimators', 'budgets', 'budget_multipliers'):
            data[key] = tuple(data[key])
        return ExperimentSpec(**data)


class DatasetConfigSchema(Schema):
    """Schema for tabular ingestion settings"""

    label_column = fields.Str(required=True)
    categorical = fields.List(fields.Str(), load_default=list)
    validation_fraction = fields.Float(load_default=0.2, validate=validate.Range(min=0.0, max=1.0, max_inclusive=False))

    @post_load
    def make_config(self, data, **kwargs):
        data['categorical'] = tuple(data['categorical'])
        return DatasetConfig(**data)
