import math

import pytest

from alcc.accuracy import (
    MIN_LCC_BITS,
    alcc_error_bound,
    beta_bar,
    beta_sweep,
    bits_sweep,
    crossover_bits,
    kappa_straggler_bound,
    lcc_error_lower_bounds,
    reports_table,
)
from alcc.core import AlccParams
from alcc.polyfun import PolyBounds, gram, identity

# Gram bounds at 1000 x 1000 inputs (D=2, c=1, s_a=m)
GRAM_1000 = PolyBounds(2, 1.0, 1000.0, False)
CROSSOVER = AlccParams(k=5, t=3, s=0, D=2, r=100.0, theta=3.0, sigma_n=1e12, m=1000, n=1000)


class TestClosedForms:
    @pytest.mark.parametrize("beta", [1.1, 1.5, 2.0])
    @pytest.mark.parametrize("D_tilde", [2, 4, 14])
    def test_beta_bar_matches_sum(self, beta, D_tilde):
        expected = sum(beta ** (2 * i) for i in range(D_tilde // 2 + 1))
        assert beta_bar(beta, D_tilde) == pytest.approx(expected, rel=1e-12)

    def test_beta_bar_at_one(self):
        assert beta_bar(1.0, 4) == 3.0

    def test_kappa_bound_uses_next_odd(self):
        assert kappa_straggler_bound(15, 0) == 17 ** 6
        assert kappa_straggler_bound(16, 0) == 17 ** 6
        assert kappa_straggler_bound(15, 2) == 17 ** 8

    def test_lcc_bounds(self):
        case1, case2 = lcc_error_lower_bounds(GRAM_1000, 100.0, 64)
        assert math.log2(case1) == pytest.approx((math.log2(1000) + 2 * math.log2(100) - 31) / 3)
        assert math.log2(case2) == pytest.approx(2 / 7 * (1.5 * math.log2(1000) + 2 * math.log2(100) - 31))

    def test_lcc_bounds_need_enough_bits(self):
        with pytest.raises(ValueError):
            lcc_error_lower_bounds(GRAM_1000, 1.0, MIN_LCC_BITS - 1)


class TestAlccBound:
    def test_report_fields(self):
        report = alcc_error_bound(CROSSOVER, GRAM_1000, kind="matrix_poly")
        assert report.kappa_B == pytest.approx(1.0, abs=1e-9)
        assert report.lambda_min == pytest.approx(math.sqrt(15), rel=1e-9)
        assert report.b_m == 54
        assert report.remainder_dropped

    def test_general_kind_is_looser(self):
        mp = alcc_error_bound(CROSSOVER, GRAM_1000, kind="matrix_poly")
        gen = alcc_error_bound(CROSSOVER, GRAM_1000, kind="general")
        assert gen.alcc_upper_bound > mp.alcc_upper_bound

    def test_kind_follows_polynomial(self):
        params = AlccParams(k=2, t=1, s=0, D=1, m=3, n=3)
        assert alcc_error_bound(params, identity()).kind == "matrix_poly"

    def test_stragglers_loosen_bound(self):
        params = CROSSOVER.with_(s=1)
        full = alcc_error_bound(params, GRAM_1000, kind="matrix_poly", non_straggler_indices=range(1, 16))
        gap = alcc_error_bound(params, GRAM_1000, kind="matrix_poly", non_straggler_indices=range(2, 17))
        assert gap.kappa_B >= 1.0
        assert full.kappa_B >= 1.0
        assert gap.kappa_B <= kappa_straggler_bound(params.N, 1)

    def test_degree_above_params(self):
        with pytest.raises(ValueError, match="exceeds"):
            alcc_error_bound(AlccParams(k=2, t=1, s=0, D=1, m=2, n=2), gram())

    def test_increases_with_beta(self):
        params = AlccParams(k=4, t=4, s=0, D=2, r=1e10, theta=3.0, sigma_n=1e23, m=1000, n=1000)
        values = [r.alcc_upper_bound for r in beta_sweep(params, GRAM_1000, [1.1, 1.4, 1.7, 2.0], "matrix_poly")]
        assert values == sorted(values)
        assert len(set(values)) == len(values)


class TestBitsSweep:
    def test_alcc_halves_per_bit(self):
        reports = bits_sweep(CROSSOVER, GRAM_1000, range(40, 50), "matrix_poly")
        for a, b in zip(reports, reports[1:]):
            assert math.log2(b.alcc_upper_bound) - math.log2(a.alcc_upper_bound) == pytest.approx(-1.0, abs=1e-6)
            slope = math.log2(b.lcc_lower_bound_case1) - math.log2(a.lcc_lower_bound_case1)
            assert slope == pytest.approx(-1 / 6, abs=1e-6)

    def test_sweep_agrees_with_direct_bound(self):
        (report,) = bits_sweep(CROSSOVER, GRAM_1000, [80], "matrix_poly")
        direct = alcc_error_bound(CROSSOVER.with_(b=80), GRAM_1000, kind="matrix_poly")
        assert report.alcc_upper_bound == pytest.approx(direct.alcc_upper_bound, rel=1e-12)
        assert report.b_m == direct.b_m

    def test_crossover_exists(self):
        b_star = crossover_bits(CROSSOVER, GRAM_1000, kind="matrix_poly")
        assert b_star is not None and MIN_LCC_BITS < b_star < 512
        (before,) = bits_sweep(CROSSOVER, GRAM_1000, [b_star - 1], "matrix_poly")
        assert before.alcc_upper_bound >= min(before.lcc_lower_bound_case1, before.lcc_lower_bound_case2)

    def test_table(self):
        bits = [16, 32]
        table = reports_table("b", bits, bits_sweep(CROSSOVER, GRAM_1000, bits, "matrix_poly"))
        assert table.column_names[:2] == ["b", "alcc_upper_bound"]
        assert table.column("b_m").to_pylist() == [6, 22]
