import numpy as np
import pytest
from scipy import stats

from alcc.core import MatrixBatch
from alcc.lcc import (
    FieldParams,
    QuantizedBatch,
    dequantize,
    field_eval,
    field_points,
    lagrange_coefficients_mod,
    largest_prime_below,
    lcc_encode,
    lcc_eval_and_decode,
    lift,
    max_prime_for_mode,
    overflow_criterion,
    overflow_observed,
    quantize,
)
from alcc.polyfun import X, PolyFn, expand, gram, identity

P25 = largest_prime_below(2 ** 25)


def uniform_batch(k, m, n, seed=0, r=1.0):
    return MatrixBatch(np.random.default_rng(seed).uniform(-r, r, (k, m, n)))


def exact_gram_mod(q, p):
    """Integer-exact X^T X of each signed block, reduced into [0, p)."""
    out = []
    for block in q:
        rows = [[sum(int(block[l, i]) * int(block[l, j]) for l in range(block.shape[0])) % p
                 for j in range(block.shape[1])] for i in range(block.shape[1])]
        out.append(rows)
    return np.array(out, dtype=np.uint64)


class TestField:
    def test_largest_32_bit_prime(self):
        assert max_prime_for_mode(64, "modular") == 4294967291

    def test_integer_once_cap(self):
        p = max_prime_for_mode(40, "integer_once", s_a=4.0, delta=0.5, D=2)
        assert 8.0 * p ** 2 <= 2.0 ** 40
        assert 8.0 * largest_prime_below(2 ** 17) ** 2 <= 2.0 ** 40

    def test_for_bits(self):
        field = FieldParams.for_bits(40, 0.01)
        assert field.p ** 2 <= 2 ** 40
        assert FieldParams.for_bits(64, 0.01, cap=2 ** 25).p == P25

    @pytest.mark.parametrize("kwargs", [
        {"p": 91, "delta": 1.0},
        {"p": 4294967311, "delta": 1.0},
        {"p": 65537, "delta": 1.0, "b": 32},
        {"p": 97, "delta": 0.0},
        {"p": 97, "delta": 1.0, "mode": "saturating"},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            FieldParams(**kwargs)

    def test_integer_once_word_condition(self):
        with pytest.raises(ValueError, match="integer_once"):
            FieldParams(p=P25, delta=0.01, b=64, mode="integer_once", s_a=1000.0, D=2)

    def test_points(self):
        anchors, workers = field_points(2, 1, 4, 97)
        assert anchors == [1, 2, 3]
        assert workers == [4, 5, 6, 7]
        with pytest.raises(ValueError, match="field too small"):
            field_points(5, 3, 15, 23)

    def test_lagrange_identity(self):
        L = lagrange_coefficients_mod([1, 2, 3, 4], [1, 2, 3, 4], 97)
        assert np.array_equal(L, np.eye(4, dtype=np.uint64))


class TestQuantize:
    def test_signed_mapping(self):
        field = FieldParams(p=97, delta=0.5)
        q = quantize(MatrixBatch(np.array([[[0.0, -0.5, 1.85]]])), field)
        assert q.matrices.tolist() == [[[0, 96, 4]]]
        assert q.signed.tolist() == [[[0, -1, 4]]]
        assert dequantize(q.matrices, field).tolist() == [[[0.0, -0.5, 2.0]]]
        assert not q.input_overflow

    def test_round_half_away_from_zero(self):
        q = quantize(MatrixBatch(np.array([[[2.5, -2.5]]])), FieldParams(p=97, delta=1.0))
        assert q.signed.tolist() == [[[3, -3]]]

    def test_input_overflow(self):
        q = quantize(MatrixBatch(np.array([[[60.0]]])), FieldParams(p=97, delta=1.0))
        assert q.input_overflow

    def test_lift(self):
        assert lift(np.array([0, 48, 49, 96], dtype=np.uint64), 97).tolist() == [0, 48, -48, -1]


class TestEncodeDecode:
    def test_constant_polynomial(self):
        field = FieldParams(p=97, delta=1.0)
        data = np.array([[[5, 17]]], dtype=np.uint64)
        q = QuantizedBatch(data, data.astype(np.int64), 1.0, 97, False)
        shares = lcc_encode(q, k=1, t=0, N=3, field=field)
        assert all((s == data[0]).all() for s in shares.shares)

    def test_identity_with_straggler(self):
        field = FieldParams(p=P25, delta=0.01)
        batch = uniform_batch(2, 3, 2)
        shares = lcc_encode(quantize(batch, field), 2, 1, 4, field, seed=1)
        result = lcc_eval_and_decode(shares.subset([1, 3, 4]), identity(), field, 2, 1)
        assert result.indices_used == (1, 3, 4)
        assert np.max(np.abs(result.outputs - batch.matrices)) <= 0.005 + 1e-12

    @pytest.mark.parametrize("threads", [1, 3])
    def test_gram_is_exact_in_safe_region(self, threads):
        field = FieldParams(p=P25, delta=0.01)
        batch = uniform_batch(3, 5, 2, seed=4)
        q = quantize(batch, field)
        shares = lcc_encode(q, 3, 1, 8, field, seed=2)
        result = lcc_eval_and_decode(shares.subset(range(2, 9)), gram(), field, 3, 1, r=1.0, threads=threads)
        assert np.array_equal(result.field_values, exact_gram_mod(q.signed, field.p))
        expected = np.stack([b.T @ b for b in q.signed]) * 0.01 ** 2
        assert np.allclose(result.outputs, expected, rtol=0, atol=1e-12)
        assert not result.overflow_flag
        assert not overflow_observed(q, gram())

    def test_integer_once_without_wrap_matches_modular(self):
        modular = FieldParams(p=P25, delta=0.01)
        once = FieldParams(p=P25, delta=0.01, mode="integer_once")
        q = quantize(uniform_batch(2, 6, 3, seed=8), modular)
        shares = lcc_encode(q, 2, 0, 3, modular, seed=0)
        a = lcc_eval_and_decode(shares, gram(), modular, 2, 0)
        b = lcc_eval_and_decode(shares, gram(), once, 2, 0)
        assert np.array_equal(a.field_values, b.field_values)

    def test_narrow_words_wrap(self):
        modular = FieldParams(p=251, delta=0.1, b=16)
        once = FieldParams(p=251, delta=0.1, b=16, mode="integer_once")
        q = quantize(uniform_batch(2, 20, 2, seed=3, r=0.5), modular)
        shares = lcc_encode(q, 2, 1, 5, modular, seed=6)
        exact = exact_gram_mod(q.signed, 251)
        good = lcc_eval_and_decode(shares, gram(), modular, 2, 1)
        bad = lcc_eval_and_decode(shares, gram(), once, 2, 1)
        assert np.array_equal(good.field_values, exact)
        assert not np.array_equal(bad.field_values, exact)

    def test_general_form_matches_tree(self):
        field = FieldParams(p=P25, delta=0.01)
        shares = lcc_encode(quantize(uniform_batch(1, 3, 2), field), 1, 1, 3, field)
        general = expand(gram(), (3, 2))
        for share in shares.shares:
            assert np.array_equal(field_eval(general, share, field), field_eval(gram(), share, field))

    def test_insufficient_workers(self):
        field = FieldParams(p=P25, delta=0.01)
        shares = lcc_encode(quantize(uniform_batch(2, 2, 2), field), 2, 1, 5, field)
        with pytest.raises(ValueError, match="insufficient workers"):
            lcc_eval_and_decode(shares.subset([1, 2, 3, 4]), gram(), field, 2, 1)

    def test_inhomogeneous_rejected(self):
        field = FieldParams(p=P25, delta=0.01)
        shares = lcc_encode(quantize(uniform_batch(1, 2, 2), field), 1, 0, 3, field)
        with pytest.raises(ValueError, match="homogeneous"):
            lcc_eval_and_decode(shares, PolyFn.matrix(X @ X + X), field, 1, 0)

    def test_fractional_constants_rejected(self):
        field = FieldParams(p=97, delta=1.0)
        with pytest.raises(ValueError, match="integer constants"):
            field_eval(PolyFn.matrix(0.5 * X), np.ones((2, 2), dtype=np.uint64), field)


class TestPrivacy:
    P = 97
    SEEDS = 100
    # 10 x 10 entries per encode, so SEEDS encodes give 10^4 draws per worker
    SHAPE = (10, 10)

    def draw(self, values, first_seed):
        """Shares of workers 1 and 2 for constant data blocks, over SEEDS encodes."""
        field = FieldParams(p=self.P, delta=1.0)
        data = np.stack([np.full(self.SHAPE, v, dtype=np.uint64) for v in values])
        q = QuantizedBatch(data, data.astype(np.int64), 1.0, self.P, False)
        runs = np.stack([lcc_encode(q, k=len(values), t=2, N=5, field=field, seed=first_seed + s).shares[:2]
                         for s in range(self.SEEDS)])
        return runs[:, 0].ravel().astype(np.int64), runs[:, 1].ravel().astype(np.int64)

    def test_single_share_is_uniform(self):
        share, _ = self.draw([5, 60], first_seed=0)
        assert share.size == 10_000
        counts = np.bincount(share, minlength=self.P)
        assert stats.chisquare(counts).pvalue > 1e-3

    def test_colluding_shares_independent_of_data(self):
        # coarse joint cells of the two colluding shares
        def cells(pair):
            a, b = pair
            return np.bincount((a * 10 // self.P) * 10 + b * 10 // self.P, minlength=100)

        table = np.stack([cells(self.draw([5, 60], first_seed=0)), cells(self.draw([0, 96], first_seed=1000))])
        assert stats.chi2_contingency(table).pvalue > 1e-3


class TestOverflow:
    def test_criterion_grows_with_range(self):
        field = FieldParams(p=P25, delta=0.01)
        assert not overflow_criterion(gram(), field, 1.0, (5, 2))
        assert overflow_criterion(gram(), field, 100.0, (5, 2))

    def test_observed_past_half_field(self):
        field = FieldParams(p=P25, delta=0.01)
        q = quantize(MatrixBatch(np.full((1, 400, 1), 3.0)), field)
        # 400 * 300^2 = 3.6e7 > p / 2
        assert overflow_observed(q, gram())

    def test_wrapped_result_is_far_off(self):
        field = FieldParams(p=P25, delta=0.01)
        batch = MatrixBatch(np.full((1, 400, 1), 3.0))
        shares = lcc_encode(quantize(batch, field), 1, 0, 3, field)
        out = lcc_eval_and_decode(shares, gram(), field, 1, 0).outputs
        assert abs(out[0, 0, 0] - 3600.0) > 100.0
