"""
Checks run by reproduction nodes before their tables are saved.

Usage in a node's test():
    from alcc_utils.testing import validate, assert_spread, column_values

    def test(table):
        validate(table, {
            "columns": {"m_prime": "int", "beta": "double", "neg_log10_e_rel": "double"},
            "not_null": ["neg_log10_e_rel"],
            "unique": ["m_prime", "beta"],
            "finite": ["neg_log10_e_rel"],
            "min_rows": 24,
        })
        assert_spread(column_values(table, "neg_log10_e_rel", {"beta": 1.5}), 0.2)

Every check raises AssertionError with the offending values.
"""

import math

import pyarrow as pa

SHOWN = 5


def column_values(table: pa.Table, column: str, where: dict | None = None) -> list:
    """Non-null values of a column, optionally restricted to rows matching ``where``."""
    rows = table.select([column, *(where or {})]).to_pylist()
    return [r[column] for r in rows
            if r[column] is not None and all(r[k] == v for k, v in (where or {}).items())]


def _fail_if(bad: list, message: str):
    assert not bad, f"{message}: {bad[:SHOWN]}{'...' if len(bad) > SHOWN else ''}"


# =============================================================================
# Column checks
# =============================================================================

def assert_in_set(table: pa.Table, column: str, valid_values: set) -> None:
    _fail_if([v for v in column_values(table, column) if v not in valid_values],
             f"Column '{column}' has unexpected values")


def assert_positive(table: pa.Table, column: str, allow_zero: bool = True) -> None:
    """Non-null values are > 0 (>= 0 with allow_zero)."""
    floor_ok = (lambda v: v >= 0) if allow_zero else (lambda v: v > 0)
    kind = "negative" if allow_zero else "non-positive"
    _fail_if([v for v in column_values(table, column) if not floor_ok(v)], f"Column '{column}' has {kind} values")


def assert_in_range(table: pa.Table, column: str, min_val: float | None = None, max_val: float | None = None) -> None:
    lo = -math.inf if min_val is None else min_val
    hi = math.inf if max_val is None else max_val
    _fail_if([v for v in column_values(table, column) if not lo <= v <= hi],
             f"Column '{column}' has values outside [{min_val}, {max_val}]")


# =============================================================================
# Sequence checks
# =============================================================================

def assert_monotone(values, increasing: bool = True, strict: bool = False, rtol: float = 0.0,
                    label: str = "values") -> None:
    """Neighbours step the right way; ``rtol`` allows relative wobble on non-strict checks."""
    values = list(values)
    sign = 1.0 if increasing else -1.0
    for a, b in zip(values, values[1:]):
        step = sign * (b - a)
        ok = step > 0 if strict else step >= -rtol * max(abs(a), abs(b))
        direction = "increasing" if increasing else "decreasing"
        assert ok, f"{label} not {'strictly ' if strict else ''}{direction}: {a} -> {b} in {values}"


def assert_spread(values, max_spread: float, label: str = "values") -> None:
    values = list(values)
    spread = max(values) - min(values)
    assert spread <= max_spread, f"{label} spread {spread:.4g} exceeds {max_spread}: {values}"


# =============================================================================
# Schema
# =============================================================================

def validate(table: pa.Table, schema: dict) -> None:
    """Check a table against a schema dict.

    Keys (all optional):
        columns   {name: substring of the arrow type name}
        not_null  columns without nulls
        finite    float columns without NaN / inf
        unique    columns forming a (composite) key
        min_rows, max_rows
    """
    n = table.num_rows
    if (lo := schema.get("min_rows")) is not None:
        assert n >= lo, f"Expected >= {lo} rows, got {n}"
    if (hi := schema.get("max_rows")) is not None:
        assert n <= hi, f"Expected <= {hi} rows, got {n}"

    for col, type_part in schema.get("columns", {}).items():
        assert col in table.column_names, f"Missing column: {col}"
        arrow_type = str(table.schema.field(col).type)
        assert type_part in arrow_type, f"Column '{col}': expected type containing '{type_part}', got '{arrow_type}'"

    for col in schema.get("not_null", []):
        nulls = table.column(col).null_count
        assert nulls == 0, f"Column '{col}' has {nulls} null values"

    for col in schema.get("finite", []):
        _fail_if([v for v in column_values(table, col) if not math.isfinite(v)],
                 f"Column '{col}' has non-finite values")

    key = schema.get("unique")
    if key:
        key = [key] if isinstance(key, str) else list(key)
        rows = list(zip(*(table.column(c).to_pylist() for c in key)))
        dupes = len(rows) - len(set(rows))
        assert dupes == 0, f"Columns {key} have {dupes} duplicate combinations"
