"""Artefact tracking for reproduction runs.

Shared context between the orchestrator and io without circular imports:
the orchestrator sets the current node, io records every file it writes or
reads, and the DAG state lists each node's artefacts.
"""

from contextvars import ContextVar
from dataclasses import dataclass

# Current executing node (set by orchestrator)
_current_task_id: ContextVar[str | None] = ContextVar('current_task_id', default=None)


@dataclass
class IORecord:
    path: str
    task_id: str | None
    operation: str  # "read" or "write"


_io_records: list[IORecord] = []


def set_current_task(task_id: str | None):
    _current_task_id.set(task_id)


def record_write(path: str):
    _io_records.append(IORecord(path, _current_task_id.get(), "write"))


def record_read(path: str):
    _io_records.append(IORecord(path, _current_task_id.get(), "read"))


def get_writes_by_task(task_id: str | None) -> list[str]:
    return [r.path for r in _io_records if r.task_id == task_id and r.operation == "write"]


def get_reads_by_task(task_id: str | None) -> list[str]:
    return [r.path for r in _io_records if r.task_id == task_id and r.operation == "read"]


def clear_tracking():
    """Called at start of a DAG run."""
    _io_records.clear()
