from .config import ConfigError, load_config, validate_environment, get_out_dir, get_threads
from .io import save_table, load_table, save_json, load_json, save_matrices, load_matrices, write_manifest, data_hash
from .orchestrator import DAG, load_nodes
from .testing import validate
from . import debug

__all__ = [
    'ConfigError', 'load_config', 'validate_environment', 'get_out_dir', 'get_threads',
    'save_table', 'load_table', 'save_json', 'load_json', 'save_matrices', 'load_matrices',
    'write_manifest', 'data_hash',
    'validate',
    'DAG',
    'load_nodes',
    'debug',
]
