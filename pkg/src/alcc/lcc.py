"""Fixed-point Lagrange coded computing over a prime field F_p.

Real data is quantised with step delta, mapped to F_p with negatives stored
as p - |q|, encoded with a field Lagrange polynomial whose anchor points are
1..k+t and whose worker points are k+t+1..k+t+N, evaluated by the workers
and interpolated back by the master.

Field elements live in uint64 arrays. p is kept below 2^32 so a product of
two reduced elements always fits in a word.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import sympy

from .core import MatrixBatch
from .polyfun import (
    Add,
    ConstMatMul,
    Expr,
    Input,
    MatMul,
    PolyFn,
    ScalarMul,
    Transpose,
    degree_and_bounds,
    evaluate,
    is_homogeneous,
)

MODES = ("modular", "integer_once")
MAX_PRIME_BITS = 32
WORD = 2 ** 64


def largest_prime_below(cap: int) -> int:
    if cap <= 2:
        raise ValueError(f"no prime below {cap}")
    return int(sympy.prevprime(int(cap)))


def max_prime_for_mode(b: int, mode: str, s_a: float = 1.0, delta: float = 1.0, D: int = 1) -> int:
    """Largest p allowed by the word-size condition of the chosen mode.

    modular: p^2 <= 2^b. integer_once: (s_a / delta) p^D <= 2^b.
    """
    if mode == "modular":
        cap = math.isqrt(2 ** b)
    elif mode == "integer_once":
        cap = int(2.0 ** ((b - math.log2(s_a / delta)) / D))
        while cap > 1 and (s_a / delta) * float(cap) ** D > 2.0 ** b:
            cap -= 1
    else:
        raise ValueError(f"unknown intermediate mode {mode!r}")
    cap = min(cap, 2 ** MAX_PRIME_BITS - 1)
    return cap if sympy.isprime(cap) else largest_prime_below(cap)


@dataclass(frozen=True)
class FieldParams:
    p: int
    delta: float
    b: int = 64
    mode: str = "modular"
    s_a: float | None = None
    D: int | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown intermediate mode {self.mode!r}")
        if not sympy.isprime(self.p):
            raise ValueError(f"p = {self.p} is not prime")
        if self.p >= 2 ** MAX_PRIME_BITS:
            raise ValueError(f"p must be below 2^{MAX_PRIME_BITS}")
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if not 1 <= self.b <= 64:
            raise ValueError(f"b must lie in [1, 64], got {self.b}")
        if self.mode == "modular" and self.p ** 2 > 2 ** self.b:
            raise ValueError(f"modular mode needs p^2 <= 2^b, got p={self.p}, b={self.b}")
        if self.mode == "integer_once" and self.s_a is not None and self.D is not None:
            if (self.s_a / self.delta) * float(self.p) ** self.D > 2.0 ** self.b:
                raise ValueError(f"integer_once mode needs (s_a/delta) p^D <= 2^b, got p={self.p}, b={self.b}")

    @classmethod
    def for_bits(cls, b: int, delta: float, mode: str = "modular", s_a: float = 1.0, D: int = 1,
                 cap: int | None = None) -> "FieldParams":
        p = max_prime_for_mode(b, mode, s_a, delta, D)
        if cap is not None and cap <= p:
            p = largest_prime_below(cap)
        return cls(p=p, delta=delta, b=b, mode=mode, s_a=s_a, D=D)

    @property
    def mask(self) -> np.uint64:
        return np.uint64(WORD - 1 if self.b == 64 else 2 ** self.b - 1)


@dataclass(frozen=True)
class QuantizedBatch:
    matrices: np.ndarray  # (k, m, n) uint64 field elements
    signed: np.ndarray    # (k, m, n) int64 quantised integers
    delta: float
    p: int
    input_overflow: bool


@dataclass(frozen=True)
class FieldShareSet:
    indices: tuple[int, ...]
    shares: np.ndarray  # (len(indices), m, n) uint64
    field: FieldParams
    N: int

    def __len__(self):
        return len(self.indices)

    def subset(self, indices) -> "FieldShareSet":
        pos = [self.indices.index(i) for i in indices]
        return FieldShareSet(tuple(indices), self.shares[pos], self.field, self.N)


@dataclass(frozen=True)
class LccDecodeResult:
    outputs: np.ndarray   # (k, u, h) float
    field_values: np.ndarray  # (k, u, h) uint64
    overflow_flag: bool
    indices_used: tuple[int, ...]


def quantize(batch: MatrixBatch, field: FieldParams) -> QuantizedBatch:
    """q = round(x / delta), half away from zero, mapped into F_p."""
    x = batch.matrices / field.delta
    q = (np.sign(x) * np.floor(np.abs(x) + 0.5)).astype(np.int64)
    overflow = bool(np.any(2 * np.abs(q) >= field.p))
    return QuantizedBatch(np.mod(q, field.p).astype(np.uint64), q, field.delta, field.p, overflow)


def lift(values, p: int) -> np.ndarray:
    """Signed representatives: v >= p/2 maps to v - p."""
    v = np.asarray(values).astype(np.int64)
    return np.where(2 * v >= p, v - p, v)


def dequantize(values, field: FieldParams, degree: int = 1) -> np.ndarray:
    return lift(values, field.p).astype(np.float64) * field.delta ** degree


def field_points(k: int, t: int, N: int, p: int) -> tuple[list[int], list[int]]:
    """Anchor points 1..k+t and worker points k+t+1..k+t+N."""
    if k + t + N >= p:
        raise ValueError(f"field too small: p={p} cannot hold {k + t} anchors and {N} worker points")
    return list(range(1, k + t + 1)), list(range(k + t + 1, k + t + N + 1))


def lagrange_coefficients_mod(src: list[int], dst: list[int], p: int) -> np.ndarray:
    """L[a, i] = prod_{l != i} (dst[a] - src[l]) / (src[i] - src[l]) mod p."""
    out = np.zeros((len(dst), len(src)), dtype=np.uint64)
    for i, xi in enumerate(src):
        den = 1
        for l, xl in enumerate(src):
            if l != i:
                den = den * (xi - xl) % p
        inv = pow(den, -1, p)
        for a, z in enumerate(dst):
            num = 1
            for l, xl in enumerate(src):
                if l != i:
                    num = num * (z - xl) % p
            out[a, i] = num * inv % p
    return out


def _combine_mod(L: np.ndarray, blocks: np.ndarray, p: int) -> np.ndarray:
    """out[a] = sum_i L[a, i] * blocks[i] mod p."""
    P = np.uint64(p)
    out = np.zeros((L.shape[0],) + blocks.shape[1:], dtype=np.uint64)
    for a in range(L.shape[0]):
        acc = out[a]
        for i in range(L.shape[1]):
            acc += (L[a, i] * blocks[i]) % P
            acc %= P
    return out


def lcc_encode(qbatch: QuantizedBatch, k: int, t: int, N: int, field: FieldParams, seed: int = 0) -> FieldShareSet:
    """Evaluate the field Lagrange polynomial through data and t uniform noise blocks at N worker points."""
    if qbatch.matrices.shape[0] != k:
        raise ValueError(f"dimension mismatch: batch has {qbatch.matrices.shape[0]} blocks, k={k}")
    p = field.p
    betas, alphas = field_points(k, t, N, p)
    rng = np.random.default_rng(seed)
    noise = rng.integers(0, p, size=(t,) + qbatch.matrices.shape[1:], dtype=np.uint64)
    W = np.concatenate([qbatch.matrices, noise])
    L = lagrange_coefficients_mod(betas, alphas, p)
    return FieldShareSet(tuple(range(1, N + 1)), _combine_mod(L, W, p), field, N)


def _to_field_int(value: float, p: int) -> int:
    if value != int(value):
        raise ValueError(f"field evaluation needs integer constants, got {value}")
    return int(value) % p


def _matmul_mod(A: np.ndarray, B: np.ndarray, p: int) -> np.ndarray:
    """A @ B mod p with inner sums split so no partial sum leaves the word."""
    P = np.uint64(p)
    chunk = max(1, (WORD - 1) // ((p - 1) ** 2))
    out = np.zeros((A.shape[0], B.shape[1]), dtype=np.uint64)
    for start in range(0, A.shape[1], chunk):
        stop = start + chunk
        out += (A[:, start:stop] @ B[start:stop]) % P
        out %= P
    return out


def _eval_modular(e: Expr, y: np.ndarray, p: int) -> np.ndarray:
    P = np.uint64(p)
    match e:
        case Input():
            return y
        case Add(a, b):
            return (_eval_modular(a, y, p) + _eval_modular(b, y, p)) % P
        case MatMul(a, b):
            return _matmul_mod(_eval_modular(a, y, p), _eval_modular(b, y, p), p)
        case Transpose(a):
            return np.ascontiguousarray(_eval_modular(a, y, p).T)
        case ScalarMul(c, a):
            return (np.uint64(_to_field_int(c, p)) * _eval_modular(a, y, p)) % P
        case ConstMatMul(const, a, side):
            C = np.array([[_to_field_int(v, p) for v in row] for row in const], dtype=np.uint64)
            inner = _eval_modular(a, y, p)
            return _matmul_mod(C, inner, p) if side == "left" else _matmul_mod(inner, C, p)
    raise TypeError(f"unknown expression node {e!r}")


def _eval_wrapping(e: Expr, y: np.ndarray, field: FieldParams) -> np.ndarray:
    """Plain b-bit unsigned arithmetic; wraparound at 2^b is kept."""
    mask = field.mask
    match e:
        case Input():
            return y
        case Add(a, b):
            return (_eval_wrapping(a, y, field) + _eval_wrapping(b, y, field)) & mask
        case MatMul(a, b):
            return (_eval_wrapping(a, y, field) @ _eval_wrapping(b, y, field)) & mask
        case Transpose(a):
            return np.ascontiguousarray(_eval_wrapping(a, y, field).T)
        case ScalarMul(c, a):
            return (np.uint64(_to_field_int(c, field.p)) * _eval_wrapping(a, y, field)) & mask
        case ConstMatMul(const, a, side):
            C = np.array([[_to_field_int(v, field.p) for v in row] for row in const], dtype=np.uint64)
            inner = _eval_wrapping(a, y, field)
            return ((C @ inner) if side == "left" else (inner @ C)) & mask
    raise TypeError(f"unknown expression node {e!r}")


def _eval_general(f: PolyFn, y: np.ndarray, field: FieldParams) -> np.ndarray:
    p = field.p
    flat = [int(v) for v in y.ravel()]
    modulus = p if field.mode == "modular" else 2 ** field.b
    out = np.zeros((len(f.entries), len(f.entries[0])), dtype=np.uint64)
    for r, row in enumerate(f.entries):
        for c, poly in enumerate(row):
            total = 0
            for mono, coef in poly:
                term = _to_field_int(coef, p)
                for v in mono:
                    term = term * flat[v] % modulus
                total = (total + term) % modulus
            out[r, c] = total % p
    return out


def field_eval(f: PolyFn, share: np.ndarray, field: FieldParams) -> np.ndarray:
    """Worker step over F_p for one share, following the field's intermediate mode."""
    share = np.asarray(share, dtype=np.uint64)
    if f.kind == "general_entrywise":
        f._check_shape(share.shape)
        return _eval_general(f, share, field)
    if field.mode == "modular":
        return _eval_modular(f.expr, share, field.p)
    return _eval_wrapping(f.expr, share, field) % np.uint64(field.p)


def overflow_criterion(f: PolyFn, field: FieldParams, r: float, shape) -> bool:
    """True when (s_a / delta) (r / delta)^D > p / 2."""
    pb = degree_and_bounds(f, shape)
    lhs = math.log2(pb.s_a / field.delta) + pb.D * math.log2(r / field.delta)
    return lhs > math.log2(field.p / 2)


def overflow_observed(qbatch: QuantizedBatch, f: PolyFn) -> bool:
    """Exact check: does any block's quantised result reach p/2 in magnitude?"""
    for block in qbatch.signed:
        out = evaluate(f, block)
        if np.any(2 * np.abs(out) >= qbatch.p):
            return True
    return False


def lcc_eval_and_decode(shares: FieldShareSet, f: PolyFn, field: FieldParams, k: int, t: int,
                        r: float | None = None, threads: int = 1) -> LccDecodeResult:
    """Workers evaluate f, the master interpolates at the anchor points and rescales by delta^D.

    ``overflow_flag`` reports the closed-form criterion for data bounded by
    ``r`` (taken as False when r is not given).
    """
    D = f.degree
    need = (k + t - 1) * D + 1
    if len(shares) < need:
        raise ValueError(f"insufficient workers: {len(shares)} shares, need {need}")
    if not is_homogeneous(f):
        raise ValueError("only homogeneous polynomials can be rescaled after decoding")
    anchors, workers = field_points(k, t, shares.N, field.p)

    chosen = sorted(shares.indices)[:need]
    pos = [shares.indices.index(i) for i in chosen]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            evals = list(pool.map(lambda q: field_eval(f, shares.shares[q], field), pos))
    else:
        evals = [field_eval(f, shares.shares[q], field) for q in pos]

    src = [workers[i - 1] for i in chosen]
    L = lagrange_coefficients_mod(src, anchors[:k], field.p)
    values = _combine_mod(L, np.stack(evals), field.p)

    flag = False
    if r is not None:
        flag = overflow_criterion(f, field, r, shares.shares.shape[1:])
    return LccDecodeResult(dequantize(values, field, D), values, flag, tuple(chosen))
