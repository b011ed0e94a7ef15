"""Reproduction DAG: discover nodes/*.py, run them in dependency order.

Each node module exports NODES = {run: [deps]}. Node state is kept as plain
dicts so it serialises straight into dag.json.
"""

import importlib.util
import json
import os
import sys
import time
import traceback
from datetime import datetime
from graphlib import CycleError, TopologicalSorter
from pathlib import Path
from typing import Callable

from . import debug
from .tracking import clear_tracking, get_reads_by_task, get_writes_by_task, set_current_task

NODES_DIR = Path(__file__).resolve().parent.parent / "nodes"

Node = Callable[[], None]


def node_id(fn: Node) -> str:
    """'nodes.table1.run' style id."""
    return f"{fn.__module__.removeprefix('src.')}.{fn.__name__}"


def short_name(fn: Node) -> str:
    """Module stem: 'nodes.table1.run' -> 'table1'."""
    return fn.__module__.rsplit(".", 1)[-1]


class DAG:
    def __init__(self, nodes: dict[Node, list[Node]]):
        self.nodes = nodes
        self.ids = {fn: node_id(fn) for fn in nodes}
        self.state = {tid: {"id": tid, "status": "pending"} for tid in self.ids.values()}
        for fn, deps in nodes.items():
            missing = [d for d in deps if d not in self.ids]
            if missing:
                raise ValueError(f"{self.ids[fn]} depends on unknown node {node_id(missing[0])}")

    @property
    def names(self) -> list[str]:
        return [short_name(fn) for fn in self.nodes]

    def order(self) -> list[Node]:
        try:
            return list(TopologicalSorter(self.nodes).static_order())
        except CycleError as e:
            raise ValueError(f"Cycle detected in DAG: {[node_id(fn) for fn in e.args[1]]}")

    def _select(self, targets: list[str] | None) -> list[Node]:
        order = self.order()
        if not targets:
            return order
        wanted = set(targets)
        unknown = wanted - set(self.names) - {fn.__name__ for fn in self.nodes}
        if unknown:
            raise ValueError(f"No nodes matched targets {sorted(unknown)}; available: {self.names}")
        return [fn for fn in order if short_name(fn) in wanted or fn.__name__ in wanted]

    def _execute(self, fn: Node) -> dict:
        record = self.state[self.ids[fn]]
        record.update(status="running", started_at=datetime.now().isoformat())
        set_current_task(record["id"])
        start = time.perf_counter()
        try:
            fn()
        except Exception as e:
            record.update(status="failed", error=str(e), traceback=traceback.format_exc())
        else:
            record["status"] = "done"
        finally:
            set_current_task(None)
            record.update(finished_at=datetime.now().isoformat(), duration_s=time.perf_counter() - start)
        return record

    def run(self, targets: list[str] | None = None) -> "DAG":
        """Run the selected nodes inline.

        Targets run without their dependencies, which are assumed to have
        produced their outputs already. DAG_TARGET (comma separated) overrides
        ``targets``; DAG_ON_FAILURE=continue keeps going after a failed node.
        """
        clear_tracking()
        if env_targets := os.environ.get("DAG_TARGET"):
            targets = [t.strip() for t in env_targets.split(",") if t.strip()]
        keep_going = os.environ.get("DAG_ON_FAILURE", "stop") == "continue"

        for fn in self._select(targets):
            if not targets:
                blocked = [self.ids[d] for d in self.nodes[fn] if self.state[self.ids[d]]["status"] != "done"]
                if blocked:
                    self.state[self.ids[fn]].update(status="skipped", error=f"Dependency {blocked[0]} did not complete")
                    continue

            debug.echo(f"[DAG] Running {self.ids[fn]}...")
            record = self._execute(fn)
            self.save_state()
            if record["status"] == "done":
                debug.echo(f"[DAG] {record['id']} done ({record['duration_s']:.1f}s)")
                continue
            debug.warn(f"[DAG] {record['id']} failed: {record['error']}")
            if not keep_going:
                break
        return self

    @property
    def failed(self) -> list[str]:
        return [tid for tid, s in self.state.items() if s["status"] == "failed"]

    @property
    def status(self) -> str:
        statuses = {s["status"] for s in self.state.values()}
        for s in ("failed", "running"):
            if s in statuses:
                return s
        return "done" if "done" in statuses and statuses <= {"done", "skipped"} else "pending"

    def to_json(self) -> dict:
        nodes = [{**s, "writes": get_writes_by_task(s["id"]), "reads": get_reads_by_task(s["id"])}
                 for s in self.state.values()]
        edges = [{"from": self.ids[dep], "to": self.ids[fn]} for fn, deps in self.nodes.items() for dep in deps]
        return {
            "nodes": nodes,
            "edges": edges,
            "status": self.status,
            "total_duration_s": sum(s.get("duration_s", 0) for s in self.state.values()),
        }

    def save_state(self):
        """Checkpoint dag.json into LOG_DIR (no-op without it)."""
        if not (log_dir := os.environ.get("LOG_DIR")):
            return
        path = Path(log_dir) / "dag.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_json(), indent=2))


def _import_node_module(node_file: Path):
    name = f"nodes.{node_file.stem}"
    if name in sys.modules:
        return sys.modules[name]
    spec = importlib.util.spec_from_file_location(name, node_file)
    if spec is None or spec.loader is None:
        debug.warn(f"Warning: Could not load {node_file}")
        return None
    module = importlib.util.module_from_spec(spec)
    sys.modules[name] = module
    spec.loader.exec_module(module)
    return module


def load_nodes(nodes_dir: Path | str | None = None) -> DAG:
    """Collect NODES from every public module in the nodes directory."""
    nodes_dir = Path(nodes_dir) if nodes_dir is not None else NODES_DIR
    nodes: dict[Node, list[Node]] = {}
    if not nodes_dir.is_dir():
        debug.warn(f"Warning: nodes directory not found: {nodes_dir}")
        return DAG(nodes)

    for node_file in sorted(nodes_dir.glob("[!_]*.py")):
        module = _import_node_module(node_file)
        found = getattr(module, "NODES", None)
        if isinstance(found, dict):
            nodes.update(found)

    debug.echo(f"[DAG] Loaded {len(nodes)} nodes from {nodes_dir}")
    return DAG(nodes)
