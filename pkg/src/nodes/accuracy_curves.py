"""Accuracy bounds: ALCC upper bound vs LCC lower bounds over bits, and ALCC over beta.

Bits sweep: k=5, t=3, s=0, m=n=1000, r=100, theta=3, sigma_n=1e12, Gram.
Beta sweep: k=4, t=4, s=0, m=n=1000, r=1e10, theta=3, sigma_n=1e23, Gram.
"""

import math
from dataclasses import asdict

import pyarrow as pa

from alcc import accuracy
from alcc.core import AlccParams
from alcc.polyfun import degree_and_bounds, gram
from alcc_utils import save_json, save_table, validate
from alcc_utils.testing import assert_monotone, column_values

DATASET_ID = "accuracy_curves"

BITS_PARAMS = AlccParams(k=5, t=3, s=0, D=2, r=100.0, theta=3.0, sigma_n=1e12, m=1000, n=1000)
BETA_PARAMS = AlccParams(k=4, t=4, s=0, D=2, r=1e10, theta=3.0, sigma_n=1e23, m=1000, n=1000)
BITS = list(range(accuracy.MIN_LCC_BITS, 257, 4))
BETAS = [1.0 + 0.1 * i for i in range(11)]
SLOPE_TOL = 1e-6


def _slope(table: pa.Table, column: str) -> list[float]:
    b = column_values(table, "value", {"axis": "b"})
    y = [math.log2(v) for v in column_values(table, column, {"axis": "b"})]
    return [(y1 - y0) / (b1 - b0) for b0, b1, y0, y1 in zip(b, b[1:], y, y[1:])]


def test(table: pa.Table) -> None:
    """Validate both accuracy sweeps."""
    validate(table, {
        "columns": {
            "axis": "string",
            "value": "double",
            "alcc_upper_bound": "double",
            "lcc_case1": "double",
            "lcc_case2": "double",
        },
        "not_null": ["axis", "value", "alcc_upper_bound"],
        "finite": ["alcc_upper_bound"],
        "unique": ["axis", "value"],
        "min_rows": len(BITS) + len(BETAS),
    })

    for s in _slope(table, "alcc_upper_bound"):
        assert abs(s + 1.0) <= SLOPE_TOL, f"ALCC log2 slope {s} is not -1"
    for s in _slope(table, "lcc_case1"):
        assert abs(s + 1.0 / 6.0) <= SLOPE_TOL, f"LCC case-1 log2 slope {s} is not -1/6"

    alcc = column_values(table, "alcc_upper_bound", {"axis": "b"})
    lcc = [min(a, b) for a, b in zip(column_values(table, "lcc_case1", {"axis": "b"}),
                                     column_values(table, "lcc_case2", {"axis": "b"}))]
    assert any(a < l for a, l in zip(alcc, lcc)), "ALCC bound never drops below the LCC bounds"

    assert_monotone(column_values(table, "alcc_upper_bound", {"axis": "beta"}), increasing=True,
                    label="ALCC bound over beta")

    print(f"  Validated {len(table)} accuracy bound rows")


def run():
    """Evaluate the bits and beta sweeps and record the crossover b*."""
    print("Computing accuracy bounds...")
    bounds = degree_and_bounds(gram(), (BITS_PARAMS.m, BITS_PARAMS.n))
    print(f"  Gram bounds at {BITS_PARAMS.m}x{BITS_PARAMS.n}: D={bounds.D}, c={bounds.c}, s_a={bounds.s_a}")

    bit_reports = accuracy.bits_sweep(BITS_PARAMS, bounds, BITS, kind="matrix_poly")
    beta_reports = accuracy.beta_sweep(BETA_PARAMS, bounds, BETAS, kind="matrix_poly")
    b_star = accuracy.crossover_bits(BITS_PARAMS, bounds, kind="matrix_poly")
    print(f"  Crossover at b* = {b_star}")

    tables = []
    for axis, values, reports in (("b", BITS, bit_reports), ("beta", BETAS, beta_reports)):
        t = accuracy.reports_table("value", values, reports)
        tables.append(t.add_column(0, "axis", pa.array([axis] * len(t))))

    table = pa.concat_tables(tables)
    test(table)
    save_table(table, DATASET_ID)
    save_json({"crossover_bits": b_star, "bits_params": asdict(BITS_PARAMS), "beta_params": asdict(BETA_PARAMS)},
              f"{DATASET_ID}_crossover")


NODES = {
    run: [],
}

if __name__ == "__main__":
    run()
