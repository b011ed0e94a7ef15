"""Closed-form accuracy bounds for ALCC and the fixed-point LCC baseline.

ALCC upper bound on the absolute entry error of f(X_j):

    beta_bar * c * K_D / lambda_min * sqrt(D~+1) * (k r + t theta sigma_n)^D * kappa_B * 2^(-b_m)

with K_D = (m n e)^D for general polynomials and max(m, n)^D for matrix
polynomials. O(1/sigma_n) remainders are dropped.

LCC lower bounds on the quantisation step (and hence on the output error),
for intermediates reduced mod p after every operation (case 1) or only once
at the end (case 2).
"""

import math
from dataclasses import dataclass, replace

import numpy as np
import pyarrow as pa

from .core import AlccParams, decoding_matrix
from .numerics import singular_values
from .polyfun import PolyBounds, PolyFn, degree_and_bounds

MIN_LCC_BITS = 12


def beta_bar(beta: float, D_tilde: int) -> float:
    """(beta^(D~+2) - 1) / (beta^2 - 1), with limit D~/2 + 1 at beta = 1."""
    if beta == 1.0:
        return D_tilde / 2 + 1
    return (beta ** (D_tilde + 2) - 1.0) / (beta ** 2 - 1.0)


@dataclass(frozen=True)
class AccuracyReport:
    alcc_upper_bound: float
    beta_bar: float
    kappa_B: float
    lambda_min: float
    lcc_lower_bound_case1: float
    lcc_lower_bound_case2: float
    b: int
    b_m: int
    kind: str
    remainder_dropped: bool = True


def _bounds(f, shape) -> PolyBounds:
    return f if isinstance(f, PolyBounds) else degree_and_bounds(f, shape)


def kappa_straggler_bound(N: int, s: int) -> float:
    """N~^(s+6), N~ the smallest odd integer larger than N (constant taken as 1)."""
    if s < 0:
        raise ValueError(f"s must be >= 0, got {s}")
    n_odd = N + 1 if N % 2 == 0 else N + 2
    return float(n_odd) ** (s + 6)


def lcc_error_lower_bounds(f, r: float, b: int, shape=None) -> tuple[float, float]:
    """(case1, case2) lower bounds on the LCC quantisation step Delta.

    case1: (s_a r^D / 2^(b/2 - 1))^(1/(D+1))
    case2: (s_a^(1+1/D) r^D / 2^(b/D - 1))^(D/(D^2+D+1))
    ``f`` is a PolyFn (with ``shape``) or precomputed PolyBounds.
    """
    if b < MIN_LCC_BITS:
        raise ValueError(f"b must be at least {MIN_LCC_BITS}, got {b}")
    pb = _bounds(f, shape)
    D = pb.D
    log_sa, log_r = math.log2(pb.s_a), math.log2(r)
    case1 = (log_sa + D * log_r - (b / 2 - 1)) / (D + 1)
    case2 = D / (D * D + D + 1) * ((1 + 1 / D) * log_sa + D * log_r - (b / D - 1))
    return 2.0 ** case1, 2.0 ** case2


def alcc_error_bound(params: AlccParams, f, kind: str | None = None,
                     non_straggler_indices=None, bounds: PolyBounds | None = None) -> AccuracyReport:
    """ALCC absolute-error bound for the realised set of returned workers.

    kind is "general" or "matrix_poly" (default follows f). Workers default to
    the first D~+1 indices.
    """
    if kind is None:
        kind = "matrix_poly" if isinstance(f, PolyFn) and f.kind == "matrix_poly" else "general"
    if kind not in ("general", "matrix_poly"):
        raise ValueError(f"unknown bound kind {kind!r}")
    shape = (params.m, params.n)
    pb = bounds if bounds is not None else _bounds(f, shape)
    if pb.D > params.D:
        raise ValueError(f"polynomial degree {pb.D} exceeds params.D={params.D}")

    idx = non_straggler_indices
    if idx is None:
        idx = range(1, params.D_tilde + 2)
    sv = singular_values(decoding_matrix(idx, params))
    if sv[-1] <= 0 or not np.isfinite(sv[-1]):
        raise ValueError("singular system: decoding matrix has no inverse")
    lambda_min = float(sv[-1])
    kappa = float(sv[0] / sv[-1])

    D = params.D
    if kind == "general":
        size_term = (params.m * params.n * math.e) ** D
    else:
        size_term = float(max(params.m, params.n)) ** D
    bb = beta_bar(params.beta, params.D_tilde)
    signal = (params.k * params.r + params.t * params.theta * params.sigma_n) ** D
    bound = bb * pb.c * size_term / lambda_min * math.sqrt(params.D_tilde + 1) * signal * kappa
    bound = math.ldexp(bound, -params.b_m)

    case1, case2 = (math.nan, math.nan)
    if params.b >= MIN_LCC_BITS:
        case1, case2 = lcc_error_lower_bounds(pb, params.r, params.b)
    return AccuracyReport(
        alcc_upper_bound=bound,
        beta_bar=bb,
        kappa_B=kappa,
        lambda_min=lambda_min,
        lcc_lower_bound_case1=case1,
        lcc_lower_bound_case2=case2,
        b=params.b,
        b_m=params.b_m,
        kind=kind,
    )


def bits_sweep(params: AlccParams, f, bits, kind: str | None = None) -> list[AccuracyReport]:
    pb = _bounds(f, (params.m, params.n))
    base = alcc_error_bound(params, f, kind, bounds=pb)
    out = []
    for b in bits:
        b = int(b)
        case1, case2 = lcc_error_lower_bounds(pb, params.r, b)
        out.append(replace(base, alcc_upper_bound=math.ldexp(base.alcc_upper_bound, params.b - b),
                           b=b, b_m=b - (params.b - params.b_m),
                           lcc_lower_bound_case1=case1, lcc_lower_bound_case2=case2))
    return out


def beta_sweep(params: AlccParams, f, betas, kind: str | None = None) -> list[AccuracyReport]:
    pb = _bounds(f, (params.m, params.n))
    return [alcc_error_bound(params.with_(beta=float(b)), f, kind, bounds=pb) for b in betas]


def crossover_bits(params: AlccParams, f, bits=range(MIN_LCC_BITS, 513), kind: str | None = None) -> int | None:
    """Smallest b at which the ALCC upper bound is below both LCC lower bounds."""
    for report in bits_sweep(params, f, bits, kind):
        if report.alcc_upper_bound < min(report.lcc_lower_bound_case1, report.lcc_lower_bound_case2):
            return report.b
    return None


def reports_table(axis: str, values, reports: list[AccuracyReport]) -> pa.Table:
    return pa.table({
        axis: (pa.array([int(v) for v in values], pa.int64()) if axis == "b"
               else pa.array([float(v) for v in values], pa.float64())),
        "alcc_upper_bound": pa.array([r.alcc_upper_bound for r in reports], pa.float64()),
        "lcc_case1": pa.array([r.lcc_lower_bound_case1 for r in reports], pa.float64()),
        "lcc_case2": pa.array([r.lcc_lower_bound_case2 for r in reports], pa.float64()),
        "beta_bar": pa.array([r.beta_bar for r in reports], pa.float64()),
        "kappa_B": pa.array([r.kappa_B for r in reports], pa.float64()),
        "lambda_min": pa.array([r.lambda_min for r in reports], pa.float64()),
        "b_m": pa.array([r.b_m for r in reports], pa.int64()),
    })
