"""ALCC accuracy grid - -log10(e_rel) over dataset size and beta.

Gram matrix X^T X of standard-normal data, k=5, t=3, s=0, N=15,
sigma_n=1e6, n=100. REFERENCE holds the expected grid; every cell must land
within TOLERANCE of it.
"""

import pyarrow as pa

from alcc.simulator import ExperimentConfig, run_experiment
from alcc_utils import save_table, validate
from alcc_utils.testing import assert_monotone, assert_spread, column_values

DATASET_ID = "table1_alcc_grid"

M_PRIMES = [10_000, 20_000, 40_000, 60_000, 80_000, 100_000]
BETAS = [1.1, 1.5, 1.8, 2.0]
TRIALS = 3
TOLERANCE = 0.3

BASE = ExperimentConfig(protocol="alcc", f="gram", k=5, t=3, s=0, sigma_n=1e6, n=100, trials=TRIALS, seed=0)

REFERENCE = {
    10_000: (4.466, 3.304, 2.316, 1.699),
    20_000: (4.532, 3.307, 2.320, 1.713),
    40_000: (4.584, 3.306, 2.331, 1.723),
    60_000: (4.602, 3.316, 2.326, 1.727),
    80_000: (4.612, 3.313, 2.332, 1.731),
    100_000: (4.614, 3.320, 2.334, 1.728),
}


def test(table: pa.Table) -> None:
    """Validate the ALCC grid."""
    validate(table, {
        "columns": {
            "m_prime": "int",
            "beta": "double",
            "neg_log10_e_rel": "double",
            "reference": "double",
        },
        "not_null": ["m_prime", "beta", "neg_log10_e_rel"],
        "finite": ["neg_log10_e_rel"],
        "unique": ["m_prime", "beta"],
        "min_rows": len(M_PRIMES) * len(BETAS),
    })

    for m_prime in M_PRIMES:
        row = column_values(table, "neg_log10_e_rel", {"m_prime": m_prime})
        assert_monotone(row, increasing=False, strict=True, label=f"m'={m_prime} across beta")

    for beta in BETAS:
        col = column_values(table, "neg_log10_e_rel", {"beta": beta})
        assert_spread(col, 0.2, label=f"beta={beta} across m'")

    for got, want in zip(table.column("neg_log10_e_rel").to_pylist(), table.column("reference").to_pylist()):
        assert abs(got - want) <= TOLERANCE, f"-log10(e_rel) {got:.3f} too far from {want:.3f}"

    print(f"  Validated {len(table)} grid cells")


def run():
    """Run every (m', beta) cell and save the grid."""
    print("Running ALCC accuracy grid...")
    rows = []
    cell = 0
    for m_prime in M_PRIMES:
        for j, beta in enumerate(BETAS):
            result = run_experiment(BASE.with_(m_prime=m_prime, beta=beta), cell)
            cell += 1
            rows.append({
                "m_prime": m_prime,
                "beta": beta,
                "neg_log10_e_rel": result.neg_log10_e_rel,
                "reference": REFERENCE[m_prime][j],
            })
        print(f"  m'={m_prime}: " + ", ".join(f"{r['neg_log10_e_rel']:.3f}" for r in rows[-len(BETAS):]))

    table = pa.Table.from_pylist(rows)
    test(table)
    save_table(table, DATASET_ID)


NODES = {
    run: [],
}

if __name__ == "__main__":
    run()
