import itertools

import numpy as np
import pytest

from alcc.core import (
    AlccParams,
    EvalSet,
    MatrixBatch,
    decode,
    decoding_matrix,
    encode,
    encode_coefficients,
    encode_direct,
    evaluate_shares,
    lagrange_matrix,
    lagrange_monomial,
    lagrange_monomial_product,
    sample_noise,
)
from alcc.numerics import singular_values
from alcc.polyfun import gram, identity


def random_batch(params, seed=0):
    rng = np.random.default_rng(seed)
    return MatrixBatch(rng.uniform(-params.r, params.r, (params.k, params.m, params.n)))


def relative_error(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


class TestParams:
    def test_worker_count(self):
        assert AlccParams(k=5, t=3, s=0, D=2).N == 15
        assert AlccParams(k=3, t=0, s=1, D=1).N == 4

    def test_evaluation_points_are_roots_of_unity(self):
        params = AlccParams(k=2, t=1, s=1, D=2)
        assert np.allclose(np.abs(params.alphas), 1.0)
        assert params.alpha(1) == 1.0
        assert np.allclose(np.abs(params.betas), params.beta)

    def test_alpha_index_checked(self):
        with pytest.raises(ValueError):
            AlccParams(k=1, t=0, s=0, D=1).alpha(2)

    @pytest.mark.parametrize("bad", [{"k": 0}, {"t": -1}, {"D": 0}, {"beta": 0.0}, {"r": 0.0}, {"b": 10}])
    def test_invalid_params(self, bad):
        args = {"k": 2, "t": 1, "s": 0, "D": 1, **bad}
        with pytest.raises(ValueError):
            AlccParams(**args)

    def test_fingerprint_tracks_fields(self):
        params = AlccParams(k=2, t=1, s=0, D=1)
        assert params.fingerprint() == AlccParams(k=2, t=1, s=0, D=1).fingerprint()
        assert params.fingerprint() != params.with_(beta=2.0).fingerprint()


class TestLagrangeMonomials:
    @pytest.mark.parametrize("K", range(2, 17))
    def test_interpolation_identity(self, K):
        params = AlccParams(k=1, t=K - 1, s=0, D=1, beta=1.3)
        L = lagrange_matrix(params.betas, params)
        assert np.max(np.abs(L - np.eye(K))) <= 1e-10

    def test_sum_form_matches_product_form(self):
        params = AlccParams(k=3, t=2, s=0, D=1, beta=1.7)
        for j, z in itertools.product(range(1, 6), [0.3 + 0.2j, -1.1, 2j]):
            assert lagrange_monomial(j, z, params) == pytest.approx(lagrange_monomial_product(j, z, params),
                                                                    rel=1e-10)

    def test_anchor_index_checked(self):
        with pytest.raises(ValueError):
            lagrange_monomial(4, 0.0, AlccParams(k=2, t=1, s=0, D=1))


class TestEncode:
    def test_single_block_is_identity(self):
        params = AlccParams(k=1, t=0, s=0, D=1, r=10.0, m=2, n=2)
        x = np.array([[1.0, -2.0], [3.0, 4.0]])
        shares = encode(MatrixBatch(x[None]), params)
        assert np.allclose(shares.shares, x[None], atol=1e-12)

    def test_dft_encoder_matches_product_form(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            k, t, D = int(rng.integers(1, 5)), int(rng.integers(0, 4)), int(rng.integers(1, 3))
            params = AlccParams(k=k, t=t, s=int(rng.integers(0, 2)), D=D, beta=float(rng.uniform(1.0, 2.0)),
                                sigma_n=1.0, m=2, n=3, seed=int(rng.integers(1000)))
            batch = random_batch(params, int(rng.integers(1000)))
            noise = sample_noise(params)
            fast, direct = encode(batch, params, noise), encode_direct(batch, params, noise)
            assert relative_error(fast.shares, direct.shares) <= 1e-9

    def test_polynomial_passes_through_data(self):
        params = AlccParams(k=3, t=2, s=0, D=1, sigma_n=5.0, m=2, n=2)
        batch = random_batch(params)
        coeffs = encode_coefficients(batch, params)
        for j in range(params.k):
            assert np.allclose(coeffs.evaluate(params.betas[j]), batch.matrices[j], atol=1e-10)

    def test_share_matches_full_encode(self):
        params = AlccParams(k=2, t=1, s=1, D=2, sigma_n=3.0, m=2, n=2)
        batch = random_batch(params)
        shares = encode(batch, params)
        coeffs = encode_coefficients(batch, params)
        for i in shares.indices:
            assert np.allclose(coeffs.share(i), shares.share(i))

    def test_noise_is_real_by_default(self):
        params = AlccParams(k=2, t=3, s=0, D=1, sigma_n=6.0, m=30, n=30, seed=4)
        noise = sample_noise(params)
        assert noise.shape == (3, 30, 30)
        assert not np.any(noise.imag)
        assert np.max(np.abs(noise)) <= params.theta * params.sigma_n / np.sqrt(params.t)
        assert np.var(noise) == pytest.approx(12.0, rel=0.1)

    def test_complex_noise_option(self):
        params = AlccParams(k=2, t=3, s=0, D=1, sigma_n=6.0, m=30, n=30, seed=4, noise="complex")
        noise = sample_noise(params)
        assert np.any(noise.imag)
        assert np.mean(np.abs(noise) ** 2) == pytest.approx(12.0, rel=0.1)

    def test_unknown_noise_kind(self):
        with pytest.raises(ValueError, match="noise must be one of"):
            AlccParams(k=2, t=1, s=0, D=1, noise="uniform")

    def test_noise_seeded_by_params(self):
        params = AlccParams(k=2, t=2, s=0, D=1, sigma_n=1.0, m=2, n=2, seed=9)
        batch = random_batch(params)
        assert np.array_equal(encode(batch, params).shares, encode(batch, params).shares)

    def test_out_of_range_data(self):
        params = AlccParams(k=1, t=0, s=0, D=1, r=1.0, m=1, n=1)
        with pytest.raises(ValueError, match="data out of range"):
            encode(MatrixBatch(np.array([[[2.0]]])), params)

    def test_dimension_mismatch(self):
        params = AlccParams(k=2, t=0, s=0, D=1, m=2, n=2)
        with pytest.raises(ValueError, match="dimension mismatch"):
            encode(MatrixBatch(np.zeros((2, 3, 2))), params)
        with pytest.raises(ValueError, match="dimension mismatch"):
            MatrixBatch.from_list([np.zeros((2, 2)), np.zeros((3, 2))])


class TestDecode:
    def test_identity_roundtrip_every_straggler(self):
        params = AlccParams(k=3, t=2, s=1, D=1, m=2, n=3)
        batch = random_batch(params, 7)
        shares = encode(batch, params)
        for straggler in shares.indices:
            keep = [i for i in shares.indices if i != straggler]
            out = decode(evaluate_shares(shares, identity(), keep), params).outputs
            assert relative_error(out, batch.matrices) <= 1e-9

    def test_gram_roundtrip_every_straggler(self):
        params = AlccParams(k=3, t=1, s=1, D=2, m=4, n=3)
        batch = random_batch(params, 3)
        f = gram()
        expected = np.stack([f(x) for x in batch.matrices])
        shares = encode(batch, params)
        for straggler in shares.indices:
            keep = [i for i in shares.indices if i != straggler]
            result = decode(evaluate_shares(shares, f, keep, threads=2), params)
            assert relative_error(result.outputs, expected) <= 1e-7
            assert result.imag_residue_max <= 1e-6 * np.max(np.abs(expected))

    def test_use_all_least_squares(self):
        params = AlccParams(k=2, t=1, s=2, D=2, m=3, n=2)
        batch = random_batch(params, 5)
        f = gram()
        expected = np.stack([f(x) for x in batch.matrices])
        shares = encode(batch, params)
        result = decode(evaluate_shares(shares, f), params, use_all=True)
        assert result.indices_used == shares.indices
        assert relative_error(result.outputs, expected) <= 1e-9

    def test_default_uses_first_workers_by_index(self):
        params = AlccParams(k=2, t=0, s=2, D=1, m=1, n=1)
        shares = encode(random_batch(params), params)
        evals = evaluate_shares(shares, identity(), [4, 2, 3, 1])
        assert decode(evals, params).indices_used == (1, 2)

    def test_insufficient_workers(self):
        params = AlccParams(k=2, t=1, s=0, D=1, m=1, n=1)
        shares = encode(random_batch(params), params)
        with pytest.raises(ValueError, match="insufficient workers"):
            decode(evaluate_shares(shares, identity(), [1, 2]), params)

    def test_duplicate_workers(self):
        params = AlccParams(k=1, t=0, s=1, D=1, m=1, n=1)
        evals = EvalSet((1, 1), np.ones((2, 1, 1)), 1)
        with pytest.raises(ValueError, match="duplicate"):
            decode(evals, params)

    def test_degree_above_params(self):
        params = AlccParams(k=1, t=0, s=3, D=1, m=2, n=2)
        shares = encode(random_batch(params), params)
        with pytest.raises(ValueError, match="exceeds"):
            decode(evaluate_shares(shares, gram()), params)

    def test_noise_masks_shares_but_decodes(self):
        params = AlccParams(k=2, t=2, s=0, D=1, sigma_n=1e3, m=2, n=2)
        batch = random_batch(params, 1)
        shares = encode(batch, params)
        assert np.max(np.abs(shares.shares)) > 10 * params.r
        out = decode(evaluate_shares(shares, identity()), params).outputs
        assert relative_error(out, batch.matrices) <= 1e-6


class TestDecodingMatrix:
    @pytest.mark.parametrize("k,t,D", [(2, 1, 2), (5, 3, 2), (4, 4, 1)])
    def test_unitary_without_stragglers(self, k, t, D):
        params = AlccParams(k=k, t=t, s=0, D=D)
        B = decoding_matrix(range(1, params.N + 1), params)
        assert np.allclose(B.conj().T @ B, params.N * np.eye(params.N), atol=1e-9)

    @pytest.mark.parametrize("s", [1, 2])
    def test_straggler_conditioning_bound(self, s):
        params = AlccParams(k=3, t=1, s=s, D=2)
        n_odd = params.N + 1 if params.N % 2 == 0 else params.N + 2
        for drop in itertools.combinations(range(1, params.N + 1), s):
            keep = [i for i in range(1, params.N + 1) if i not in drop]
            sv = singular_values(decoding_matrix(keep, params))
            assert sv[0] / sv[-1] <= n_odd ** (s + 6)

    def test_wrong_size(self):
        params = AlccParams(k=2, t=0, s=1, D=1)
        with pytest.raises(ValueError):
            decoding_matrix([1, 2, 3], params)
