"""Result tables, JSON documents, run manifests and share files."""

import csv
import hashlib
import json
import math
import platform
from pathlib import Path

import numpy as np
import psutil
import pyarrow as pa
import pyarrow.parquet as pq

from . import debug
from .config import get_out_dir, get_run_id
from .tracking import record_read, record_write

LIBRARY_VERSION = "0.1.0"


def _out_path(name: str, ext: str, out_dir: str | Path | None = None) -> Path:
    base = Path(out_dir) if out_dir is not None else get_out_dir()
    base.mkdir(parents=True, exist_ok=True)
    return base / f"{name}.{ext}"


def format_cell(value) -> str:
    """CSV text for a cell: floats in 17-digit scientific notation, '.' decimal."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.16e}"
    return str(value)


def data_hash(table: pa.Table) -> str:
    """Hash of a table's CSV rendering, stable across runs."""
    h = hashlib.md5()
    h.update(",".join(table.column_names).encode())
    for row in table.to_pylist():
        h.update(",".join(format_cell(v) for v in row.values()).encode())
    return h.hexdigest()[:16]


def write_csv(table: pa.Table, path: Path):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(table.column_names)
        for row in table.to_pylist():
            writer.writerow([format_cell(row[c]) for c in table.column_names])


def save_table(table: pa.Table, name: str, out_dir=None, parquet: bool = True) -> Path:
    """Write <name>.csv (and <name>.parquet) under the result directory."""
    path = _out_path(name, "csv", out_dir)
    write_csv(table, path)
    record_write(str(path))
    if parquet:
        pq_path = path.with_suffix(".parquet")
        pq.write_table(table, pq_path)
        record_write(str(pq_path))
    debug.log_output(name, table.num_rows, path.stat().st_size, table.column_names)
    debug.echo(f"  -> Saved {path} ({table.num_rows} rows)")
    return path


def load_table(name: str, out_dir=None) -> pa.Table:
    path = _out_path(name, "parquet", out_dir)
    record_read(str(path))
    return pq.read_table(path)


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (set, tuple)):
        return list(obj)
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def save_json(data, name: str, out_dir=None) -> Path:
    path = _out_path(name, "json", out_dir)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n", encoding="utf-8")
    record_write(str(path))
    debug.log_output(name, 0, path.stat().st_size)
    return path


def load_json(name: str, out_dir=None):
    path = _out_path(name, "json", out_dir)
    record_read(str(path))
    return json.loads(path.read_text(encoding="utf-8"))


def write_manifest(command: str, config: dict, seed, out_dir=None, extra: dict | None = None) -> Path:
    """manifest.json: everything needed to re-run the command."""
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "run_id": get_run_id(),
        "library_version": LIBRARY_VERSION,
        "numpy_version": np.__version__,
        "pyarrow_version": pa.__version__,
        "python_version": platform.python_version(),
        "host_cpu_count": psutil.cpu_count(),
    }
    if extra:
        manifest.update(extra)
    return save_json(manifest, "manifest", out_dir)


# =============================================================================
# Share files: <name>.json header + <name>.bin little-endian payload
# =============================================================================

def _word_bytes(bits: int) -> int:
    return max(1, math.ceil(bits / 8))


def save_matrices(name: str, array: np.ndarray, header: dict, out_dir=None, word_bits: int | None = None) -> Path:
    """Store a stack of matrices.

    Complex arrays are written as interleaved (re, im) float64, real arrays as
    float64, unsigned arrays as ceil(word_bits/8)-byte words. All row-major.
    """
    array = np.ascontiguousarray(array)
    if np.iscomplexobj(array):
        dtype, payload = "complex128", array.astype("<c16").tobytes()
    elif np.issubdtype(array.dtype, np.unsignedinteger):
        width = _word_bytes(word_bits or 64)
        words = array.astype("<u8").view(np.uint8).reshape(-1, 8)[:, :width]
        dtype, payload = f"uint{8 * width}", np.ascontiguousarray(words).tobytes()
    else:
        dtype, payload = "float64", array.astype("<f8").tobytes()

    doc = dict(header, dtype=dtype, shape=list(array.shape), byteorder="little")
    bin_path = _out_path(name, "bin", out_dir)
    bin_path.write_bytes(payload)
    json_path = _out_path(name, "json", out_dir)
    json_path.write_text(json.dumps(doc, indent=2, default=_json_default) + "\n", encoding="utf-8")
    record_write(str(bin_path))
    record_write(str(json_path))
    debug.log_output(name, array.shape[0] if array.ndim else 1, len(payload))
    return json_path


def load_matrices(name: str, in_dir=None) -> tuple[np.ndarray, dict]:
    json_path = _out_path(name, "json", in_dir)
    header = json.loads(json_path.read_text(encoding="utf-8"))
    payload = _out_path(name, "bin", in_dir).read_bytes()
    record_read(str(json_path))
    shape = tuple(header["shape"])
    dtype = header["dtype"]
    if dtype == "complex128":
        array = np.frombuffer(payload, dtype="<c16").astype(np.complex128)
    elif dtype == "float64":
        array = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    elif dtype.startswith("uint"):
        width = int(dtype[4:]) // 8
        words = np.frombuffer(payload, dtype=np.uint8).reshape(-1, width)
        padded = np.zeros((words.shape[0], 8), dtype=np.uint8)
        padded[:, :width] = words
        array = padded.view("<u8").astype(np.uint64).ravel()
    else:
        raise ValueError(f"{json_path}: unknown dtype {dtype!r}")
    expected = math.prod(shape)
    if array.size != expected:
        raise ValueError(f"{json_path}: payload holds {array.size} values, header shape needs {expected}")
    return array.reshape(shape), header
