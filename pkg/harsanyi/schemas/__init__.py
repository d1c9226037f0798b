"""
Marshmallow schemas for configuration objects and model files.
"""

from marshmallow import ValidationError

from harsanyi.errors import ConfigError


def load_or_raise(schema, data, what='configuration'):
    """Validate and deserialize, turning marshmallow errors into ConfigError."""
    try:
        return schema.load(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid {what}: {e.messages}", e.messages)
