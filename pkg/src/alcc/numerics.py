"""Complex linear-algebra helpers shared by the encoder, decoder and bounds.

Matrices are plain numpy arrays (complex128 unless stated). Transforms act
along axis 0 so a stack of matrices is transformed entrywise in one call.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

# Relative distance under which two interpolation nodes count as equal
NODE_TOLERANCE = 1e-13


def _is_pow_of_2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def unit_root_powers(order: int, exponents) -> np.ndarray:
    """Return exp(2*pi*i*e/order) for each exponent, reducing e mod order first.

    Reducing the exponent keeps large powers of a root of unity as accurate
    as the root itself.
    """
    exps = np.mod(np.asarray(exponents, dtype=np.int64), order)
    return np.exp(2j * np.pi * exps / order)


def dft_matrix(size: int, inverse: bool = False) -> np.ndarray:
    """F[l, j] = omega^(-j*l) with omega = exp(2*pi*i/size) (conjugated when inverse)."""
    idx = np.arange(size)
    sign = 1 if inverse else -1
    return unit_root_powers(size, sign * np.outer(idx, idx))


def dft(values, fast: bool = True) -> np.ndarray:
    """Discrete Fourier transform along axis 0.

    output[l] = sum_j input[j] * omega^(-j*l), omega = exp(2*pi*i/K). Direct
    summation is used unless K is a power of two and ``fast`` is set.
    """
    v = np.asarray(values, dtype=np.complex128)
    if v.ndim == 0 or v.shape[0] == 0:
        raise ValueError("empty transform")
    size = v.shape[0]
    if fast and _is_pow_of_2(size) and size > 1:
        return np.fft.fft(v, axis=0)
    return np.tensordot(dft_matrix(size), v, axes=1)


def idft(values, fast: bool = True) -> np.ndarray:
    """Inverse of :func:`dft`, so idft(dft(v)) == v."""
    v = np.asarray(values, dtype=np.complex128)
    if v.ndim == 0 or v.shape[0] == 0:
        raise ValueError("empty transform")
    size = v.shape[0]
    if fast and _is_pow_of_2(size) and size > 1:
        return np.fft.ifft(v, axis=0)
    return np.tensordot(dft_matrix(size, inverse=True), v, axes=1) / size


def _check_nodes(nodes) -> np.ndarray:
    z = np.asarray(nodes, dtype=np.complex128).ravel()
    if z.size == 0:
        raise ValueError("empty system")
    if z.size > 1:
        gaps = np.abs(z[:, None] - z[None, :])
        scale = np.maximum(np.abs(z[:, None]), np.abs(z[None, :]))
        np.fill_diagonal(gaps, np.inf)
        if np.any(gaps <= NODE_TOLERANCE * np.maximum(scale, 1.0)):
            raise ValueError("singular system: interpolation nodes are not distinct")
    return z


def vandermonde(nodes, cols: int | None = None) -> np.ndarray:
    """Rows (1, z, z^2, ..., z^(cols-1)) for each node z."""
    z = np.asarray(nodes, dtype=np.complex128).ravel()
    return np.vander(z, cols if cols is not None else z.size, increasing=True)


def solve_vandermonde(nodes, rhs, cols: int | None = None) -> np.ndarray:
    """Solve B @ V = rhs for V, B the Vandermonde matrix of ``nodes``.

    Square systems go through a column-pivoted QR factorisation. With more
    nodes than ``cols`` the least-squares solution is returned. Trailing
    dimensions of ``rhs`` are carried along, so a (M, u, h) stack of
    evaluations yields a (cols, u, h) stack of coefficients.
    """
    z = _check_nodes(nodes)
    rhs = np.asarray(rhs, dtype=np.complex128)
    if rhs.shape[0] != z.size:
        raise ValueError(f"rhs has {rhs.shape[0]} rows, expected {z.size}")
    cols = z.size if cols is None else cols
    if cols > z.size:
        raise ValueError(f"underdetermined system: {z.size} nodes for {cols} coefficients")

    flat = rhs.reshape(z.size, -1)
    B = vandermonde(z, cols)
    if cols == z.size:
        Q, R, perm = scipy.linalg.qr(B, pivoting=True)
        y = scipy.linalg.solve_triangular(R, Q.conj().T @ flat)
        sol = np.empty_like(y)
        sol[perm] = y
    else:
        sol, *_ = np.linalg.lstsq(B, flat, rcond=None)
    return sol.reshape((cols,) + rhs.shape[1:])


def singular_values(matrix) -> np.ndarray:
    return np.linalg.svd(np.asarray(matrix, dtype=np.complex128), compute_uv=False)


def condition_number(nodes) -> float:
    """2-norm condition number of the square Vandermonde matrix of ``nodes``."""
    z = _check_nodes(nodes)
    s = singular_values(vandermonde(z))
    if s[-1] == 0.0:
        raise ValueError("singular system")
    return float(s[0] / s[-1])


@dataclass(frozen=True)
class ComplexGaussianSpec:
    """Circular-symmetric complex Gaussian with per-component truncation.

    ``sigma`` is the per-entry standard deviation, so real and imaginary parts
    each have variance sigma^2/2 before truncation. Each component is cut at
    theta*sigma.
    """
    sigma: float
    theta: float
    seed: int | None = None

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")
        if not self.theta > 0:
            raise ValueError(f"theta must be positive, got {self.theta}")

    @property
    def bound(self) -> float:
        return self.theta * self.sigma


def _truncated_normal(rng: np.random.Generator, scale: float, bound: float, size: int) -> np.ndarray:
    out = rng.normal(0.0, scale, size)
    bad = np.flatnonzero(np.abs(out) > bound)
    while bad.size:
        out[bad] = rng.normal(0.0, scale, bad.size)
        bad = bad[np.abs(out[bad]) > bound]
    return out


def sample_truncated_complex_gaussian(spec: ComplexGaussianSpec, rows: int, cols: int,
                                      rng: np.random.Generator | None = None) -> np.ndarray:
    """Draw a rows x cols matrix of truncated complex Gaussian entries by rejection."""
    if spec.sigma == 0:
        return np.zeros((rows, cols), dtype=np.complex128)
    rng = rng if rng is not None else np.random.default_rng(spec.seed)
    scale = spec.sigma / np.sqrt(2.0)
    size = rows * cols
    re = _truncated_normal(rng, scale, spec.bound, size)
    im = _truncated_normal(rng, scale, spec.bound, size)
    return (re + 1j * im).reshape(rows, cols)


def sample_truncated_real_gaussian(spec: ComplexGaussianSpec, rows: int, cols: int,
                                   rng: np.random.Generator | None = None) -> np.ndarray:
    """Real counterpart: std sigma carried entirely by the real part, cut at theta*sigma."""
    if spec.sigma == 0:
        return np.zeros((rows, cols))
    rng = rng if rng is not None else np.random.default_rng(spec.seed)
    return _truncated_normal(rng, spec.sigma, spec.bound, rows * cols).reshape(rows, cols)
