"""
Centralized runtime configuration.
Resolves settings from a JSON document, then environment variables, then
the defaults in constants.py.
"""
import os
import json
import logging
from typing import Any, Callable, Dict
from functools import lru_cache

import constants
from error_handler import ConfigurationError

logger = logging.getLogger(__name__)

CONFIG_FILE_ENV = 'SUDOKU_CODES_CONFIG'

# setting name -> (environment variable, parser, default)
_SETTINGS: Dict[str, tuple] = {
    'de_max_iters': ('SUDOKU_DE_MAX_ITERS', int, constants.DE_MAX_ITERS),
    'de_tol': ('SUDOKU_DE_TOL', float, constants.DE_TOL),
    'threshold_precision': ('SUDOKU_THRESHOLD_PRECISION', float, constants.THRESHOLD_PRECISION),
    'decoder_max_iters': ('SUDOKU_DECODER_MAX_ITERS', int, constants.DECODER_MAX_ITERS),
    'sampler_budget': ('SUDOKU_SAMPLER_BUDGET', int, constants.SAMPLER_NODE_BUDGET),
    'sampler_restarts': ('SUDOKU_SAMPLER_RESTARTS', int, constants.SAMPLER_RESTARTS),
    'graph_max_attempts': ('SUDOKU_GRAPH_MAX_ATTEMPTS', int, constants.GRAPH_MAX_ATTEMPTS),
    'log_level': ('SUDOKU_LOG_LEVEL', str, constants.LOG_LEVEL),
}

def _load_config_file() -> Dict[str, Any]:
    path = os.getenv(CONFIG_FILE_ENV)
    if not path:
        return {}
    try:
        with open(path, 'r', encoding='utf-8') as fh:
            document = json.load(fh)
    except FileNotFoundError:
        logger.warning("Config file %s not found, using environment variables", path)
        return {}
    except json.JSONDecodeError as e:
        raise ConfigurationError("Config file is not valid JSON", details={'path': path, 'error': str(e)})
    if not isinstance(document, dict):
        raise ConfigurationError("Config file must hold a JSON object", details={'path': path})
    logger.info("Runtime configuration loaded from %s", path)
    return document

def _coerce(name: str, raw: Any, parser: Callable) -> Any:
    try:
        value = parser(raw)
    except (TypeError, ValueError) as e:
        raise ConfigurationError(f"Invalid value for '{name}'", details={'value': str(raw), 'error': str(e)})
    if isinstance(value, (int, float)) and not isinstance(value, bool) and value <= 0:
        raise ConfigurationError(f"Setting '{name}' must be positive", details={'value': str(raw)})
    return value

@lru_cache(maxsize=1)
def get_runtime_config() -> Dict[str, Any]:
    """
    Get runtime configuration.
    The JSON document wins over environment variables, which win over defaults.
    """
    document = _load_config_file()
    config = {}
    for name, (env_var, parser, default) in _SETTINGS.items():
        if name in document:
            config[name] = _coerce(name, document[name], parser)
        elif os.getenv(env_var) is not None:
            config[name] = _coerce(name, os.environ[env_var], parser)
        else:
            config[name] = default
    unknown = set(document) - set(_SETTINGS)
    if unknown:
        logger.warning("Ignoring unknown config keys: %s", sorted(unknown))
    return config

def get_setting(name: str) -> Any:
    """Get a single runtime setting by name"""
    config = get_runtime_config()
    if name not in config:
        raise ConfigurationError(f"Unknown setting '{name}'")
    return config[name]

def resolve(value: Any, name: str) -> Any:
    """Return value unless it is None, in which case the configured setting"""
    return get_setting(name) if value is None else value

def reload_config() -> Dict[str, Any]:
    """Drop the cached configuration and read it again"""
    get_runtime_config.cache_clear()
    return get_runtime_config()
