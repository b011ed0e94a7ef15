"""Analog Lagrange coded computing: parameters, encoding and decoding.

Data blocks sit at the beta-points beta_j = beta * omega^(j-1) on a circle of
radius beta (omega a primitive (k+t)-th root of unity), noise blocks fill the
remaining t anchor points, and worker i receives the Lagrange polynomial
evaluated at alpha_i = gamma^(i-1) (gamma a primitive N-th root of unity).
"""

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .numerics import (
    ComplexGaussianSpec,
    dft,
    sample_truncated_complex_gaussian,
    sample_truncated_real_gaussian,
    solve_vandermonde,
    unit_root_powers,
    vandermonde,
)

# Mantissa bits lost to exponent and sign in a b-bit float
EXPONENT_BITS = 10
NOISE_KINDS = ("real", "complex")


@dataclass(frozen=True)
class AlccParams:
    k: int
    t: int
    s: int
    D: int
    beta: float = 1.5
    sigma_n: float = 0.0
    theta: float = 3.0
    r: float = 1.0
    m: int = 1
    n: int = 1
    seed: int = 0
    b: int = 64
    noise: str = "real"

    def __post_init__(self):
        if self.noise not in NOISE_KINDS:
            raise ValueError(f"noise must be one of {NOISE_KINDS}, got {self.noise!r}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.t < 0 or self.s < 0:
            raise ValueError(f"t and s must be >= 0, got t={self.t}, s={self.s}")
        if self.D < 1:
            raise ValueError(f"D must be >= 1, got {self.D}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not self.r > 0:
            raise ValueError(f"r must be positive, got {self.r}")
        if self.sigma_n < 0:
            raise ValueError(f"sigma_n must be nonnegative, got {self.sigma_n}")
        if not self.theta > 0:
            raise ValueError(f"theta must be positive, got {self.theta}")
        if self.m < 1 or self.n < 1:
            raise ValueError(f"matrix dims must be positive, got {self.m}x{self.n}")
        if self.b <= EXPONENT_BITS:
            raise ValueError(f"b must exceed {EXPONENT_BITS}, got {self.b}")

    @property
    def K(self) -> int:
        """Number of anchor points, k + t."""
        return self.k + self.t

    @property
    def D_tilde(self) -> int:
        return (self.k + self.t - 1) * self.D

    @property
    def N(self) -> int:
        return self.D_tilde + self.s + 1

    @property
    def b_m(self) -> int:
        return self.b - EXPONENT_BITS

    @property
    def omega(self) -> complex:
        return complex(unit_root_powers(self.K, 1))

    @property
    def gamma(self) -> complex:
        return complex(unit_root_powers(self.N, 1))

    @property
    def betas(self) -> np.ndarray:
        """beta_1 .. beta_{k+t}."""
        return self.beta * unit_root_powers(self.K, np.arange(self.K))

    @property
    def alphas(self) -> np.ndarray:
        """alpha_1 .. alpha_N."""
        return unit_root_powers(self.N, np.arange(self.N))

    def alpha(self, i: int) -> complex:
        if not 1 <= i <= self.N:
            raise ValueError(f"worker index {i} outside [1, {self.N}]")
        return complex(unit_root_powers(self.N, i - 1))

    def fingerprint(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True)
        return hashlib.md5(payload.encode()).hexdigest()[:16]

    def with_(self, **changes) -> "AlccParams":
        fields_ = asdict(self)
        fields_.update(changes)
        return AlccParams(**fields_)


@dataclass(frozen=True)
class MatrixBatch:
    """The dataset X = (X_1, ..., X_k) as a real (k, m, n) array."""
    matrices: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.matrices, dtype=np.float64)
        if arr.ndim != 3:
            raise ValueError(f"batch must be a (k, m, n) stack, got shape {arr.shape}")
        object.__setattr__(self, "matrices", arr)

    @classmethod
    def from_list(cls, matrices) -> "MatrixBatch":
        shapes = {np.shape(x) for x in matrices}
        if len(shapes) != 1:
            raise ValueError(f"dimension mismatch: block shapes {sorted(shapes)}")
        return cls(np.stack([np.asarray(x, dtype=np.float64) for x in matrices]))

    @property
    def k(self) -> int:
        return self.matrices.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrices.shape[1], self.matrices.shape[2]

    def check(self, params: AlccParams):
        if self.k != params.k:
            raise ValueError(f"dimension mismatch: batch has {self.k} blocks, params.k={params.k}")
        if self.shape != (params.m, params.n):
            raise ValueError(
                f"dimension mismatch: blocks are {self.shape}, params expect {(params.m, params.n)}")
        peak = float(np.max(np.abs(self.matrices))) if self.matrices.size else 0.0
        if peak > params.r:
            raise ValueError(f"data out of range: max |x| = {peak:.6g} exceeds r = {params.r:.6g}")


@dataclass(frozen=True)
class ShareSet:
    indices: tuple[int, ...]
    shares: np.ndarray  # (len(indices), m, n) complex
    params_fingerprint: str

    def __len__(self):
        return len(self.indices)

    def share(self, i: int) -> np.ndarray:
        return self.shares[self.indices.index(i)]

    def subset(self, indices) -> "ShareSet":
        pos = [self.indices.index(i) for i in indices]
        return ShareSet(tuple(indices), self.shares[pos], self.params_fingerprint)


@dataclass(frozen=True)
class EvalSet:
    indices: tuple[int, ...]
    results: np.ndarray  # (len(indices), u, h) complex
    poly_degree: int

    def __len__(self):
        return len(self.indices)


@dataclass(frozen=True)
class DecodeResult:
    outputs: np.ndarray  # (k, u, h) real
    imag_residue_max: float
    indices_used: tuple[int, ...]


def _check_anchor(j: int, params: AlccParams):
    if not 1 <= j <= params.K:
        raise ValueError(f"anchor index {j} outside [1, {params.K}]")


def lagrange_monomial(j: int, z: complex, params: AlccParams) -> complex:
    """l_j(z) = (1/(k+t)) * sum_{l < k+t} (z / beta_j)^l."""
    _check_anchor(j, params)
    q = complex(z) / params.betas[j - 1]
    return complex(np.sum(q ** np.arange(params.K)) / params.K)


def lagrange_monomial_product(j: int, z: complex, params: AlccParams) -> complex:
    """Product form prod_{i != j} (z - beta_i) / (beta_j - beta_i)."""
    _check_anchor(j, params)
    betas = params.betas
    others = np.delete(betas, j - 1)
    return complex(np.prod((z - others) / (betas[j - 1] - others)))


def lagrange_matrix(zs, params: AlccParams) -> np.ndarray:
    """L[a, j-1] = l_j(zs[a]) for every anchor j."""
    z = np.asarray(zs, dtype=np.complex128).ravel()
    q = z[:, None] / params.betas[None, :]
    return np.sum(q[..., None] ** np.arange(params.K), axis=-1) / params.K


def sample_noise(params: AlccParams, rng: np.random.Generator | None = None) -> np.ndarray:
    """t noise blocks with per-entry std sigma_n/sqrt(t), truncated at theta.

    ``params.noise`` picks real entries (default) or circular complex ones.
    Float error after decoding scales with m for real noise and with sqrt(m)
    for complex noise.
    """
    if params.t == 0:
        return np.zeros((0, params.m, params.n), dtype=np.complex128)
    rng = rng if rng is not None else np.random.default_rng(params.seed)
    spec = ComplexGaussianSpec(sigma=params.sigma_n / np.sqrt(params.t), theta=params.theta)
    sample = sample_truncated_real_gaussian if params.noise == "real" else sample_truncated_complex_gaussian
    return np.stack([sample(spec, params.m, params.n, rng) for _ in range(params.t)])


@dataclass(frozen=True)
class LagrangeCoefficients:
    """Coefficients W~_l / ((k+t) beta^l) of u(z), so u(z) = sum_l coeffs[l] z^l."""
    params: AlccParams
    coeffs: np.ndarray = field(repr=False)

    def evaluate(self, z: complex) -> np.ndarray:
        # Horner
        acc = self.coeffs[-1].copy()
        for c in self.coeffs[-2::-1]:
            acc *= z
            acc += c
        return acc

    def share(self, i: int) -> np.ndarray:
        return self.evaluate(self.params.alpha(i))


def _stack_blocks(batch: MatrixBatch, params: AlccParams, noise) -> np.ndarray:
    batch.check(params)
    if noise is None:
        noise = sample_noise(params)
    noise = np.asarray(noise, dtype=np.complex128)
    if noise.shape != (params.t, params.m, params.n):
        raise ValueError(f"dimension mismatch: noise shape {noise.shape}")
    return np.concatenate([batch.matrices.astype(np.complex128), noise])


def encode_coefficients(batch: MatrixBatch, params: AlccParams, noise=None) -> LagrangeCoefficients:
    coeffs = dft(_stack_blocks(batch, params, noise))
    coeffs /= (params.K * params.beta ** np.arange(params.K))[:, None, None]
    return LagrangeCoefficients(params, coeffs)


def encode(batch: MatrixBatch, params: AlccParams, noise=None) -> ShareSet:
    """Shares Y_i = u(alpha_i) for every worker i in [N].

    Noise blocks are drawn from ``params.seed`` unless given explicitly.
    """
    coeffs = encode_coefficients(batch, params, noise)
    indices = tuple(range(1, params.N + 1))
    shares = np.stack([coeffs.share(i) for i in indices])
    return ShareSet(indices, shares, params.fingerprint())


def encode_direct(batch: MatrixBatch, params: AlccParams, noise=None) -> ShareSet:
    """Reference encoder summing W_j * l_j(alpha_i) with product-form monomials."""
    W = _stack_blocks(batch, params, noise)
    indices = tuple(range(1, params.N + 1))
    L = np.array([[lagrange_monomial_product(j, params.alpha(i), params) for j in range(1, params.K + 1)]
                  for i in indices])
    shares = np.tensordot(L, W, axes=1)
    return ShareSet(indices, shares, params.fingerprint())


def evaluate_shares(shares: ShareSet, f, indices=None, threads: int = 1) -> EvalSet:
    """Worker step: apply f to each selected share."""
    chosen = tuple(shares.indices if indices is None else indices)
    missing = set(chosen) - set(shares.indices)
    if missing:
        raise ValueError(f"no share for workers {sorted(missing)}")
    pos = [shares.indices.index(i) for i in chosen]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda p: f(shares.shares[p]), pos))
    else:
        results = [f(shares.shares[p]) for p in pos]
    return EvalSet(chosen, np.stack(results), f.degree)


def decoding_matrix(non_straggler_indices, params: AlccParams) -> np.ndarray:
    """Vandermonde matrix of alpha_i over the returned workers, (D~+1) x (D~+1)."""
    idx = list(non_straggler_indices)
    if len(idx) != params.D_tilde + 1:
        raise ValueError(f"decoding matrix needs {params.D_tilde + 1} indices, got {len(idx)}")
    if len(set(idx)) != len(idx):
        raise ValueError("duplicate worker indices")
    nodes = [params.alpha(i) for i in idx]
    return vandermonde(nodes, params.D_tilde + 1)


def decode(evals: EvalSet, params: AlccParams, output_dims=None, use_all: bool = False) -> DecodeResult:
    """Interpolate f(u(z)) from worker results and evaluate it at beta_1..beta_k.

    By default the first D~+1 workers by index are used; ``use_all`` solves the
    overdetermined system over every returned result in the least-squares sense.
    """
    idx = list(evals.indices)
    if len(set(idx)) != len(idx):
        raise ValueError("duplicate worker indices")
    if evals.poly_degree > params.D:
        raise ValueError(f"polynomial degree {evals.poly_degree} exceeds params.D={params.D}")
    need = params.D_tilde + 1
    if len(idx) < need:
        raise ValueError(f"insufficient workers: {len(idx)} results, need {need}")
    if output_dims is not None and tuple(evals.results.shape[1:]) != tuple(output_dims):
        raise ValueError(f"dimension mismatch: results are {evals.results.shape[1:]}, expected {output_dims}")

    order = np.argsort(idx, kind="stable")
    if not use_all:
        order = order[:need]
    chosen = [idx[p] for p in order]
    nodes = [params.alpha(i) for i in chosen]
    V = solve_vandermonde(nodes, evals.results[order], cols=need)

    at_betas = vandermonde(params.betas[:params.k], need)
    values = np.tensordot(at_betas, V, axes=1)
    return DecodeResult(
        outputs=values.real.copy(),
        imag_residue_max=float(np.max(np.abs(values.imag))) if values.size else 0.0,
        indices_used=tuple(chosen),
    )
