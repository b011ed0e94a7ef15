"""LCC overflow cliff against flat ALCC error over dataset size.

Fixed-point LCC (modular reduction, Delta=0.01) for primes near 2^25,
2^26 and 2^28 next to ALCC at beta 1.5 and 2, all with k=5, t=3, s=0,
N=15, sigma_n=1e6, n=100 and Gram matrix f.
"""

import math

import pyarrow as pa

from alcc.simulator import ExperimentConfig, results_table, sweep
from alcc_utils import save_table, validate
from alcc_utils.testing import assert_in_set, assert_spread, column_values

DATASET_ID = "overflow_cliff"

M_PRIMES = [2_000, 5_000, 10_000, 20_000, 40_000, 60_000, 80_000, 100_000]
P_BITS = [25, 26, 28]
BETAS = [1.5, 2.0]
MIN_JUMP_DECADES = 3.0

BASE = ExperimentConfig(f="gram", k=5, t=3, s=0, sigma_n=1e6, n=100, trials=2, seed=0, delta=0.01, mode="modular")


def cliff_position(errors: list[float]) -> int | None:
    """Index of the first sweep cell after the largest log10 jump of at least MIN_JUMP_DECADES."""
    jumps = [math.log10(b) - math.log10(a) for a, b in zip(errors, errors[1:])]
    if not jumps or max(jumps) < MIN_JUMP_DECADES:
        return None
    return jumps.index(max(jumps)) + 1


def test(table: pa.Table) -> None:
    """Validate the paired LCC / ALCC sweep."""
    validate(table, {
        "columns": {
            "m_prime": "int",
            "protocol": "string",
            "e_rel": "double",
        },
        "not_null": ["m_prime", "protocol", "e_rel", "series"],
        "unique": ["series", "m_prime"],
        "min_rows": len(M_PRIMES) * (len(P_BITS) + len(BETAS)),
    })
    assert_in_set(table, "protocol", {"alcc", "lcc"})

    previous = 0
    for bits in P_BITS:
        series = f"lcc_p{bits}"
        errors = column_values(table, "e_rel", {"series": series})
        pos = cliff_position(errors)
        assert pos is not None, f"{series}: no jump of {MIN_JUMP_DECADES} decades in {errors}"
        assert pos > previous, f"{series}: cliff at m'={M_PRIMES[pos]} not right of smaller prime"
        for flag in ("overflow_observed", "overflow_flag"):
            flags = column_values(table, flag, {"series": series})
            assert all(flags[pos:]), f"{series}: {flag} not raised past the cliff"
        previous = pos

    for beta in BETAS:
        values = column_values(table, "neg_log10_e_rel", {"series": f"alcc_beta{beta}"})
        assert_spread(values, 0.2, label=f"ALCC beta={beta}")

    print(f"  Validated {len(P_BITS)} LCC and {len(BETAS)} ALCC series")


def run():
    """Sweep m' for every LCC prime size and ALCC beta."""
    print("Running LCC / ALCC m' comparison...")
    tables = []
    for bits in P_BITS:
        results = sweep(BASE.with_(protocol="lcc", p_bits=bits), "m_prime", M_PRIMES)
        t = results_table(results, "m_prime")
        tables.append(t.append_column("series", pa.array([f"lcc_p{bits}"] * len(t))))
    for beta in BETAS:
        results = sweep(BASE.with_(protocol="alcc", beta=beta), "m_prime", M_PRIMES)
        t = results_table(results, "m_prime")
        tables.append(t.append_column("series", pa.array([f"alcc_beta{beta}"] * len(t))))

    table = pa.concat_tables(tables)
    print(f"  {len(table)} sweep cells")
    test(table)
    save_table(table, DATASET_ID)


NODES = {
    run: [],
}

if __name__ == "__main__":
    run()
