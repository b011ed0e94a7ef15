"""Privacy upper bounds against a colluding set of t workers.

The mutual-information bound is maximised over colluding sets T of size t:

    eta_c <= max_T log2 det(I + (r^2 t / sigma_n^2) Sigma~_T^{-1} Sigma_T)

with Sigma_T = L_T L_T^H and Sigma~_T = L~_T L~_T^H. The determinant is taken
through the eigenvalues of G G^H, G = L~_T^{-1} L_T, which share the spectrum
of Sigma~_T^{-1} Sigma_T and keep log1p accurate for tiny r/sigma_n.
"""

import math
from dataclasses import dataclass, replace
from itertools import combinations

import numpy as np
import pyarrow as pa

from alcc_utils import debug

from .core import AlccParams, lagrange_matrix

EXHAUSTIVE_LIMIT = 100_000
# Subsets evaluated per batched linear-algebra call
BATCH = 8192
# Noise blocks with a worse condition number count as singular
SINGULAR_COND = 1e12


@dataclass(frozen=True)
class SearchMode:
    """How colluding sets are enumerated.

    kind="auto" is exhaustive up to EXHAUSTIVE_LIMIT subsets and otherwise
    needs an explicit sample count.
    """
    kind: str = "auto"
    count: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("auto", "exhaustive", "sampled"):
            raise ValueError(f"unknown search mode {self.kind!r}")
        if self.kind == "sampled" and not (self.count and self.count > 0):
            raise ValueError("sampled search needs a positive sample count")

    def resolve(self, N: int, t: int) -> "SearchMode":
        if self.kind != "auto":
            return self
        if math.comb(N, t) <= EXHAUSTIVE_LIMIT:
            return SearchMode("exhaustive", seed=self.seed)
        if self.count:
            return SearchMode("sampled", self.count, self.seed)
        raise ValueError(
            f"C({N}, {t}) = {math.comb(N, t)} subsets exceeds {EXHAUSTIVE_LIMIT}; give a sample count")

    @property
    def label(self) -> str:
        if self.kind == "sampled":
            return f"sampled({self.count}, seed={self.seed})"
        return self.kind


@dataclass(frozen=True)
class CollusionContext:
    params: AlccParams
    T: tuple[int, ...]
    L_T: np.ndarray
    Ltilde_T: np.ndarray


@dataclass(frozen=True)
class PrivacyReport:
    eta_c_bound: float
    eta_s_bound: float
    eta_s_truncated_bound: float | None
    d_mean_bound: float
    argmax_T: tuple[int, ...]
    search_mode: str
    lower_estimate: bool
    eta_c_trace_approx: float
    eta_s_trace_approx: float
    eta_s_truncated_note: str | None = None


def enumerate_subsets(N: int, t: int, search: SearchMode = SearchMode()):
    """Yield colluding sets as sorted tuples of 1-based worker indices."""
    if not 0 <= t <= N:
        raise ValueError(f"t must lie in [0, {N}], got {t}")
    mode = search.resolve(N, t)
    if mode.kind == "exhaustive":
        yield from combinations(range(1, N + 1), t)
        return
    rng = np.random.default_rng(mode.seed)
    for _ in range(mode.count):
        yield tuple(int(i) + 1 for i in np.sort(rng.choice(N, size=t, replace=False)))


def collusion_context(params: AlccParams, T) -> CollusionContext:
    T = tuple(T)
    if len(T) != params.t:
        raise ValueError(f"colluding set must have {params.t} workers, got {len(T)}")
    rows = lagrange_matrix([params.alpha(i) for i in T], params)
    ctx = CollusionContext(params, T, rows[:, :params.k], rows[:, params.k:])
    if params.t and np.linalg.cond(ctx.Ltilde_T) > SINGULAR_COND:
        raise ValueError(f"singular noise block for T={T}")
    return ctx


def _leakage_batch(params: AlccParams, rows: np.ndarray, subsets: np.ndarray, strict: bool = True):
    """(exact, trace-approx) log2-det terms for a batch of subsets, in bits.

    A singular noise block raises when ``strict``; otherwise its terms are inf.
    """
    block = rows[subsets - 1]
    L, Lt = block[:, :, :params.k], block[:, :, params.k:]
    ok = np.linalg.cond(Lt) <= SINGULAR_COND
    if strict and not ok.all():
        bad = int(np.flatnonzero(~ok)[0])
        raise ValueError(f"singular noise block for T={tuple(int(i) for i in subsets[bad])}")
    exact = np.full(len(subsets), math.inf)
    trace = np.full(len(subsets), math.inf)
    if ok.any():
        G = np.linalg.solve(Lt[ok], L[ok])
        gram = G @ np.conj(np.swapaxes(G, -1, -2))
        eig = np.clip(np.linalg.eigvalsh(gram), 0.0, None)
        a = params.r ** 2 * params.t / params.sigma_n ** 2
        exact[ok] = np.sum(np.log1p(a * eig), axis=-1) / math.log(2)
        trace[ok] = a * np.sum(eig, axis=-1) / math.log(2)
    return exact, trace


def leakage_bits(params: AlccParams, T) -> tuple[float, float]:
    """(exact, trace-approx) MIS term for a single colluding set."""
    if params.sigma_n == 0:
        raise ValueError("unbounded leakage: sigma_n = 0")
    ctx = collusion_context(params, T)
    rows = np.concatenate([ctx.L_T, ctx.Ltilde_T], axis=1)
    exact, trace = _leakage_batch(params, rows, np.arange(1, len(ctx.T) + 1)[None, :])
    return float(exact[0]), float(trace[0])


def eta_s_from_eta_c(eta_c: float) -> float:
    return math.sqrt(2.0 * eta_c)


def mis_bound(params: AlccParams, search: SearchMode = SearchMode()) -> PrivacyReport:
    """MIS bound maximised over colluding sets, with the derived DS bounds.

    A colluding set whose noise block is singular (beta = 1 puts beta_1 on
    alpha_1) leaks without bound: the report then carries inf and that set.
    """
    d_mean = d_mean_bound(params)
    if params.t == 0:
        return PrivacyReport(0.0, 0.0, 0.0, d_mean, (), "exhaustive", False, 0.0, 0.0)
    if params.sigma_n == 0:
        raise ValueError("unbounded leakage: sigma_n = 0")

    mode = search.resolve(params.N, params.t)
    rows = lagrange_matrix(params.alphas, params)
    best, best_trace, best_T = -1.0, 0.0, ()
    subsets = enumerate_subsets(params.N, params.t, mode)
    while True:
        chunk = [s for _, s in zip(range(BATCH), subsets)]
        if not chunk:
            break
        arr = np.array(chunk, dtype=np.int64)
        exact, trace = _leakage_batch(params, rows, arr, strict=False)
        pos = int(np.argmax(exact))
        if exact[pos] > best:
            best, best_T = float(exact[pos]), tuple(int(i) for i in arr[pos])
        best_trace = max(best_trace, float(np.max(trace)))

    if math.isinf(best):
        debug.warn(f"singular noise block for T={best_T} at beta={params.beta}: leakage unbounded")
    eta_s = eta_s_from_eta_c(best)
    report = PrivacyReport(
        eta_c_bound=best,
        eta_s_bound=eta_s,
        eta_s_truncated_bound=None,
        d_mean_bound=d_mean,
        argmax_T=best_T,
        search_mode=mode.label,
        lower_estimate=mode.kind == "sampled",
        eta_c_trace_approx=best_trace,
        eta_s_trace_approx=eta_s_from_eta_c(best_trace),
    )
    try:
        return replace(report, eta_s_truncated_bound=truncated_ds_bound(params, report))
    except ValueError as e:
        debug.warn(f"no truncated-noise DS bound at beta={params.beta}, sigma_n={params.sigma_n:g}: {e}")
        return replace(report, eta_s_truncated_note=str(e))


def ds_bound(params: AlccParams, search: SearchMode = SearchMode()) -> PrivacyReport:
    """DS bound eta_s <= sqrt(2 eta_c); the report carries both."""
    return mis_bound(params, search)


def d_mean_bound(params: AlccParams) -> float:
    """(k r / (k+t)) * sum_{l < k+t} beta^(-l)."""
    K = params.K
    if params.beta == 1.0:
        return params.k * params.r
    q = 1.0 / params.beta
    return params.k * params.r / K * (q ** K - 1.0) / (q - 1.0)


def truncated_ds_bound(params: AlccParams, base) -> float:
    """DS bound under truncated noise.

    eta'_s <= eta_s / w + (2 exp(-(theta - d sqrt(t)/sigma_n)^2 / 2))^t / w,
    w = (1 - 2 exp(-theta^2 / 2))^t, with d the d_mean bound. ``base`` is a
    PrivacyReport or a bare eta_s value.
    """
    if isinstance(base, PrivacyReport):
        eta_s, d_mean = base.eta_s_bound, base.d_mean_bound
    else:
        eta_s, d_mean = float(base), d_mean_bound(params)
    t, theta = params.t, params.theta
    if t == 0:
        return eta_s
    keep = 1.0 - 2.0 * math.exp(-theta ** 2 / 2.0)
    if keep <= 0:
        raise ValueError(f"truncation factor 1 - 2 exp(-theta^2/2) = {keep:.3g} is not positive")
    w = keep ** t
    if params.sigma_n == 0:
        raise ValueError("truncation level too small for bound: sigma_n = 0")
    shift = d_mean * math.sqrt(t) / params.sigma_n
    if theta <= shift:
        raise ValueError(f"truncation level too small for bound: theta={theta} <= {shift:.6g}")
    tail = (2.0 * math.exp(-0.5 * (theta - shift) ** 2)) ** t
    return eta_s / w + tail / w


def beta_sweep(params: AlccParams, betas, search: SearchMode = SearchMode()) -> list[PrivacyReport]:
    return [mis_bound(params.with_(beta=float(b)), search) for b in betas]


def sigma_sweep(params: AlccParams, sigmas, search: SearchMode = SearchMode()) -> list[PrivacyReport]:
    return [mis_bound(params.with_(sigma_n=float(s)), search) for s in sigmas]


def reports_table(axis: str, values, reports: list[PrivacyReport]) -> pa.Table:
    return pa.table({
        axis: pa.array([float(v) for v in values], pa.float64()),
        "eta_c": pa.array([r.eta_c_bound for r in reports], pa.float64()),
        "eta_s": pa.array([r.eta_s_bound for r in reports], pa.float64()),
        "eta_s_truncated": pa.array([r.eta_s_truncated_bound for r in reports], pa.float64()),
        "eta_c_trace": pa.array([r.eta_c_trace_approx for r in reports], pa.float64()),
        "d_mean": pa.array([r.d_mean_bound for r in reports], pa.float64()),
        "argmax_T": pa.array([" ".join(map(str, r.argmax_T)) for r in reports], pa.string()),
        "search": pa.array([r.search_mode for r in reports], pa.string()),
        "eta_s_truncated_note": pa.array([r.eta_s_truncated_note for r in reports], pa.string()),
    })
