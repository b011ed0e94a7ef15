"""Configuration and environment utilities.

Single source of truth for output paths, thread counts and experiment
config files. Environment variables are the base layer; a flat JSON config
file and `--set key=value` overrides sit on top.
"""

import json
import os
from datetime import datetime
from pathlib import Path


class ConfigError(ValueError):
    """Bad configuration: unknown key, nested value or unparseable setting."""


# =============================================================================
# Environment
# =============================================================================

def get_run_id() -> str:
    """Get current run ID (defaults to a timestamp)."""
    return os.environ.get('RUN_ID') or datetime.now().strftime('%Y%m%d-%H%M%S')


def get_out_dir() -> Path:
    """Get result directory, created on first use."""
    path = Path(os.environ.get('ALCC_OUT_DIR', 'results'))
    path.mkdir(parents=True, exist_ok=True)
    return path


def get_threads(cli_value: int | None = None) -> int:
    """Worker-pool size: --threads, then ALCC_THREADS, then 1."""
    if cli_value is not None:
        if cli_value < 1:
            raise ConfigError(f"threads: must be a positive integer, got {cli_value}")
        return cli_value
    raw = os.environ.get('ALCC_THREADS', '1')
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"ALCC_THREADS: not an integer: {raw!r}")
    if value < 1:
        raise ConfigError(f"ALCC_THREADS: must be a positive integer, got {value}")
    return value


def is_logging_enabled() -> bool:
    return os.environ.get('ENABLE_LOGGING', '').lower() == 'true'


def validate_environment():
    """Check that numeric environment variables parse."""
    bad = []
    raw = os.environ.get('ALCC_THREADS')
    if raw is not None and not (raw.isdigit() and int(raw) >= 1):
        bad.append('ALCC_THREADS')
    on_failure = os.environ.get('DAG_ON_FAILURE')
    if on_failure is not None and on_failure not in ('stop', 'continue'):
        bad.append('DAG_ON_FAILURE')
    if bad:
        raise ValueError(f"Invalid environment variables: {bad}")


# =============================================================================
# Config files
# =============================================================================

def parse_value(raw: str):
    """JSON scalar when it parses as one, else the raw string."""
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        return raw
    return value


def parse_override(item: str) -> tuple[str, object]:
    key, sep, raw = item.partition('=')
    if not sep or not key.strip():
        raise ConfigError(f"override {item!r}: expected key=value")
    return key.strip(), parse_value(raw.strip())


def load_config(path: str | None, overrides: list[str] | None = None,
                allowed: set[str] | None = None) -> dict:
    """Merge a flat JSON file with key=value overrides (overrides win).

    Nested values other than lists of scalars, and keys outside ``allowed``,
    raise ConfigError naming the key.
    """
    config: dict = {}
    if path:
        try:
            with open(path, encoding='utf-8') as f:
                doc = json.load(f)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {path}: invalid JSON ({e})")
        if not isinstance(doc, dict):
            raise ConfigError(f"config file {path}: top level must be an object")
        config.update(doc)

    for item in overrides or []:
        key, value = parse_override(item)
        config[key] = value

    for key, value in config.items():
        if isinstance(value, dict) or (isinstance(value, list) and any(isinstance(v, (dict, list)) for v in value)):
            raise ConfigError(f"{key}: nested values are not supported")
        if allowed is not None and key not in allowed:
            raise ConfigError(f"{key}: unknown config key")
    return config
