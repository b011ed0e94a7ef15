"""Privacy bounds against beta and sigma_n.

N=15 workers (k=4, t=4, Gram), sigma_n=1e23, r=1e10. The beta sweep
covers (1, 2]; beta=1 puts beta_1 on alpha_1 and the bound diverges. The
sigma_n sweep covers one decade above the base level.
"""

import pyarrow as pa

from alcc import privacy
from alcc.core import AlccParams
from alcc_utils import save_table, validate
from alcc_utils.testing import assert_monotone, assert_positive, column_values

DATASET_ID = "privacy_curves"

PARAMS = AlccParams(k=4, t=4, s=0, D=2, sigma_n=1e23, r=1e10, theta=3.0)
BETAS = [1.1 + 0.1 * i for i in range(10)]
SIGMAS = [1e23 * 10 ** (i / 4) for i in range(5)]
# rounding slack between neighbouring cells
RTOL = 1e-9


def test(table: pa.Table) -> None:
    """Validate both privacy sweeps."""
    validate(table, {
        "columns": {
            "axis": "string",
            "value": "double",
            "eta_c": "double",
            "eta_s": "double",
        },
        "not_null": ["axis", "value", "eta_c", "eta_s"],
        "finite": ["eta_c", "eta_s"],
        "unique": ["axis", "value"],
        "min_rows": len(BETAS) + len(SIGMAS),
    })
    assert_positive(table, "eta_c", allow_zero=False)

    for axis in ("beta", "sigma_n"):
        eta_c = column_values(table, "eta_c", {"axis": axis})
        eta_s = column_values(table, "eta_s", {"axis": axis})
        assert_monotone(eta_c, increasing=False, rtol=RTOL, label=f"eta_c over {axis}")
        assert_monotone(eta_s, increasing=False, rtol=RTOL, label=f"eta_s over {axis}")
        for c, s in zip(eta_c, eta_s):
            assert s > c, f"eta_s {s} should exceed eta_c {c} below 2 bits"

    print(f"  Validated {len(table)} privacy bound rows")


def run():
    """Evaluate the MIS / DS bounds over both sweeps."""
    print("Computing privacy bounds...")
    tables = []
    for axis, values, reports in (
        ("beta", BETAS, privacy.beta_sweep(PARAMS, BETAS)),
        ("sigma_n", SIGMAS, privacy.sigma_sweep(PARAMS, SIGMAS)),
    ):
        t = privacy.reports_table("value", values, reports)
        tables.append(t.add_column(0, "axis", pa.array([axis] * len(t))))
        print(f"  {axis}: eta_c {reports[0].eta_c_bound:.3e} -> {reports[-1].eta_c_bound:.3e}")

    table = pa.concat_tables(tables)
    test(table)
    save_table(table, DATASET_ID)


NODES = {
    run: [],
}

if __name__ == "__main__":
    run()
