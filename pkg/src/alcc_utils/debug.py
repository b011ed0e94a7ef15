import os
import csv
import sys
from datetime import datetime
from pathlib import Path

from .config import get_run_id, is_logging_enabled

_log_dir = None
_quiet = False


def set_quiet(quiet: bool):
    global _quiet
    _quiet = quiet


def echo(message: str = ""):
    """Progress line on stdout, silenced by --quiet."""
    if not _quiet:
        print(message)


def warn(message: str):
    print(message, file=sys.stderr)


def get_log_dir() -> Path:
    global _log_dir
    if _log_dir is None:
        if os.environ.get('LOG_DIR'):
            _log_dir = Path(os.environ['LOG_DIR'])
        else:
            _log_dir = Path("logs") / get_run_id()
        _log_dir.mkdir(parents=True, exist_ok=True)
    return _log_dir


def _append_csv(filename: str, row: dict, fieldnames: list):
    if not is_logging_enabled():
        return
    filepath = get_log_dir() / filename
    file_exists = filepath.exists()
    with open(filepath, 'a', newline='', encoding='utf-8') as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames)
        if not file_exists:
            writer.writeheader()
        writer.writerow(row)


def log_phase(experiment, phase, seconds, trial=None, **kwargs):
    """Log wall time of one experiment phase (encode, worker-eval, decode)."""
    _append_csv("phases.csv", {
        "timestamp": datetime.now().isoformat(),
        "run_id": get_run_id(),
        "experiment": experiment,
        "trial": "" if trial is None else trial,
        "phase": phase,
        "seconds": f"{seconds:.6f}",
    }, ["timestamp", "run_id", "experiment", "trial", "phase", "seconds"])


def log_output(name, row_count, size_bytes, columns=None, **kwargs):
    """Log an emitted artefact.

    Args:
        name: Artefact name (file stem)
        row_count: Number of rows (0 for non-tabular files)
        size_bytes: Size in bytes
        columns: List of column names (only count is logged)
    """
    _append_csv("outputs.csv", {
        "timestamp": datetime.now().isoformat(),
        "run_id": get_run_id(),
        "name": name,
        "rows": row_count,
        "size_bytes": size_bytes,
        "column_count": len(columns) if columns else 0,
    }, ["timestamp", "run_id", "name", "rows", "size_bytes", "column_count"])


def log_run_start(command: str):
    _append_csv("runs.csv", {
        "timestamp": datetime.now().isoformat(),
        "run_id": get_run_id(),
        "command": command,
        "event": "start",
        "status": "",
        "error": ""
    }, ["timestamp", "run_id", "command", "event", "status", "error"])


def log_run_end(command: str, status="completed", error=None):
    _append_csv("runs.csv", {
        "timestamp": datetime.now().isoformat(),
        "run_id": get_run_id(),
        "command": command,
        "event": "end",
        "status": status,
        "error": str(error) if error else ""
    }, ["timestamp", "run_id", "command", "event", "status", "error"])
