"""Quick sanity suite behind `main.py selftest`.

Each check is a small closed-form identity that a correct build satisfies
exactly (or to rounding). Checks raise AssertionError on failure.
"""

import math
import traceback
from dataclasses import dataclass

import numpy as np

from .accuracy import beta_bar, kappa_straggler_bound
from .core import AlccParams, EvalSet, MatrixBatch, decode, decoding_matrix, encode, lagrange_monomial
from .lcc import FieldParams, QuantizedBatch, dequantize, lcc_encode, quantize
from .numerics import ComplexGaussianSpec, condition_number, dft, sample_truncated_complex_gaussian
from .polyfun import degree_and_bounds, gram, identity
from .privacy import d_mean_bound, eta_s_from_eta_c, mis_bound, truncated_ds_bound


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def check_dft_impulse():
    assert np.allclose(dft([1, 0, 0, 0]), [1, 1, 1, 1])


def check_dft_constant():
    out = dft([2.5] * 5)
    assert abs(out[0] - 12.5) < 1e-12 and np.max(np.abs(out[1:])) < 1e-12


def check_roots_of_unity_conditioning():
    nodes = np.exp(2j * np.pi * np.arange(8) / 8)
    assert abs(condition_number(nodes) - 1.0) < 1e-9
    assert condition_number([1.0]) == 1.0


def check_zero_noise_sampling():
    z = sample_truncated_complex_gaussian(ComplexGaussianSpec(0.0, 3.0, seed=1), 3, 4)
    assert z.shape == (3, 4) and not np.any(z)


def check_interpolation_identity():
    params = AlccParams(k=3, t=2, s=0, D=1, beta=1.3)
    for j in range(1, params.K + 1):
        for i in range(1, params.K + 1):
            expected = 1.0 if i == j else 0.0
            assert abs(lagrange_monomial(j, params.betas[i - 1], params) - expected) < 1e-10


def check_single_block_encode():
    params = AlccParams(k=1, t=0, s=0, D=1, r=10.0, m=2, n=2)
    x = np.array([[1.0, -2.0], [3.0, 4.0]])
    shares = encode(MatrixBatch(x[None]), params)
    assert np.allclose(shares.shares, x[None], atol=1e-12)


def check_identity_roundtrip():
    params = AlccParams(k=3, t=0, s=1, D=1, r=1.0, m=2, n=3)
    rng = np.random.default_rng(7)
    batch = MatrixBatch(rng.uniform(-1, 1, (3, 2, 3)))
    shares = encode(batch, params)
    keep = shares.indices[1:]
    evals = EvalSet(keep, np.stack([shares.share(i) for i in keep]), 1)
    out = decode(evals, params).outputs
    assert np.max(np.abs(out - batch.matrices)) <= 1e-9


def check_unitary_decoder():
    params = AlccParams(k=2, t=1, s=0, D=2)
    B = decoding_matrix(range(1, params.N + 1), params)
    assert np.allclose(B.conj().T @ B, params.N * np.eye(params.N), atol=1e-9)


def check_gram_bounds():
    pb = degree_and_bounds(gram(), (4, 4))
    assert (pb.D, pb.c, pb.s_a) == (2, 1.0, 4.0)
    pb = degree_and_bounds(identity(), (3, 3))
    assert (pb.D, pb.c, pb.s_a) == (1, 1.0, 1.0)


def check_privacy_degenerate():
    params = AlccParams(k=2, t=0, s=0, D=1, sigma_n=1.0)
    assert mis_bound(params).eta_c_bound == 0.0
    assert eta_s_from_eta_c(2.0) == 2.0
    assert math.isclose(d_mean_bound(AlccParams(k=4, t=4, s=0, D=1, beta=1.0, r=3.0)), 12.0)
    assert math.isclose(truncated_ds_bound(AlccParams(k=2, t=2, s=0, D=1, sigma_n=1e6, theta=60.0, r=1.0), 0.5),
                        0.5, rel_tol=1e-12)


def check_accuracy_closed_forms():
    assert beta_bar(1.0, 4) == 3.0
    assert kappa_straggler_bound(15, 0) == 17 ** 6
    assert kappa_straggler_bound(16, 0) == 17 ** 6
    assert kappa_straggler_bound(15, 1) == 17 ** 7


def check_quantize_signed_mapping():
    field = FieldParams(p=97, delta=0.5, b=64)
    q = quantize(MatrixBatch(np.array([[[0.0, -0.5, 1.85]]])), field)
    assert q.matrices.tolist() == [[[0, 96, 4]]]
    assert dequantize(q.matrices, field).tolist() == [[[0.0, -0.5, 2.0]]]


def check_lcc_constant_polynomial():
    field = FieldParams(p=97, delta=1.0, b=64)
    data = np.array([[[5, 17]]], dtype=np.uint64)
    q = QuantizedBatch(data, data.astype(np.int64), 1.0, 97, False)
    shares = lcc_encode(q, k=1, t=0, N=3, field=field)
    assert all((s == data[0]).all() for s in shares.shares)


CHECKS = [
    check_dft_impulse,
    check_dft_constant,
    check_roots_of_unity_conditioning,
    check_zero_noise_sampling,
    check_interpolation_identity,
    check_single_block_encode,
    check_identity_roundtrip,
    check_unitary_decoder,
    check_gram_bounds,
    check_privacy_degenerate,
    check_accuracy_closed_forms,
    check_quantize_signed_mapping,
    check_lcc_constant_polynomial,
]


def run_selftest() -> list[CheckResult]:
    results = []
    for check in CHECKS:
        name = check.__name__.removeprefix("check_")
        try:
            check()
            results.append(CheckResult(name, True))
        except Exception as e:
            detail = str(e) or traceback.format_exception_only(type(e), e)[-1].strip()
            results.append(CheckResult(name, False, detail))
    return results
