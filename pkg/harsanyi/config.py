import os
from dotenv import load_dotenv

# Load variables
load_dotenv()


def _env_flag(name, default='false'):
    return os.environ.get(name, default).lower() == 'true'


class Config:
    ENV_NAME = os.environ.get("HARSANYI_ENV", "development")

    # Logging
    LOG_LEVEL = os.environ.get("HARSANYI_LOG_LEVEL")
    LOG_DIR = os.environ.get("HARSANYI_LOG_DIR", "logs")
    ENABLE_FILE_LOGGING = _env_flag("ENABLE_FILE_LOGGING")
    LOG_FILE_NAME = "harsanyi.log"
    LOG_MAX_BYTES = 10485760  # 10MB
    LOG_BACKUP_COUNT = 10

    # Batched masked inference: masks evaluated per forward chunk
    FORWARD_BATCH = int(os.environ.get("HARSANYI_FORWARD_BATCH", 1024))

    # 2^24 doubles is 128 MiB per game table
    MAX_ORACLE_PLAYERS = min(24, int(os.environ.get("HARSANYI_MAX_ORACLE_PLAYERS", 24)))

    # Soft-AND switches to log space above this many children
    SOFT_AND_LOG_THRESHOLD = 16

    DEFAULT_SEED = int(os.environ.get("HARSANYI_DEFAULT_SEED", 0))

    # Commands slower than this get a SLOW marker in the command log
    SLOW_COMMAND_SECONDS = 60.0


class DevelopmentConfig(Config):
    DEBUG = True
    TESTING = False


class ProductionConfig(Config):
    DEBUG = False
    TESTING = False

    # Production always keeps a rotating log file
    ENABLE_FILE_LOGGING = True


class TestingConfig(Config):
    """Testing environment configuration"""
    DEBUG = False
    TESTING = True

    LOG_LEVEL = "WARNING"
    ENABLE_FILE_LOGGING = False

    FORWARD_BATCH = 512


# Configuration mapping
config = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'testing': TestingConfig,
    'default': DevelopmentConfig
}

_active = config['default']


def get_config():
    """Return the configuration class selected by the last create_runtime call."""
    return _active


def set_config(config_name):
    global _active
    if config_name not in config:
        from harsanyi.errors import ConfigError
        raise ConfigError(f"Unknown environment '{config_name}'", {'env': [f"must be one of {sorted(config)}"]})
    _active = config[config_name]
    return _active
