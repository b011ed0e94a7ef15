"""In-process master/worker simulation of ALCC and fixed-point LCC.

A run generates a dataset X of m' x n entries split into k row blocks,
computes the centralised double-precision reference, pushes the blocks
through the selected protocol with stragglers withheld, and reports the
relative Frobenius error of the decoded result.
"""

import math
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import asdict, dataclass, fields, replace

import numpy as np
import pyarrow as pa
import sympy

from alcc_utils import debug

from .core import AlccParams, EvalSet, MatrixBatch, decode, encode_coefficients, sample_noise
from .lcc import (
    FieldParams,
    field_points,
    largest_prime_below,
    lcc_encode,
    lcc_eval_and_decode,
    overflow_observed,
    quantize,
)
from .polyfun import PolyFn, preset

PROTOCOLS = ("alcc", "lcc")
DISTRIBUTIONS = ("standard_normal", "uniform")
STRAGGLER_KINDS = ("none", "fixed_set", "random")
AXES = {
    "alcc": ("m_prime", "beta", "sigma_n"),
    "lcc": ("m_prime", "p", "b"),
}


@dataclass(frozen=True)
class DataSpec:
    distribution: str
    m_prime: int
    n: int
    k: int
    r: float

    @property
    def m(self) -> int:
        return self.m_prime // self.k

    def generate(self, rng: np.random.Generator) -> MatrixBatch:
        shape = (self.k, self.m, self.n)
        if self.distribution == "standard_normal":
            return MatrixBatch(rng.standard_normal(shape))
        return MatrixBatch(rng.uniform(-self.r, self.r, shape))


@dataclass(frozen=True)
class StragglerSpec:
    kind: str = "none"
    indices: tuple[int, ...] = ()
    count: int = 0

    def pick(self, N: int, rng: np.random.Generator) -> tuple[int, ...]:
        if self.kind == "none":
            return ()
        if self.kind == "fixed_set":
            return tuple(sorted(self.indices))
        return tuple(int(i) + 1 for i in np.sort(rng.choice(N, size=self.count, replace=False)))


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat experiment description; keys map 1:1 onto config-file keys."""
    protocol: str = "alcc"
    f: str = "gram"
    k: int = 5
    t: int = 3
    s: int = 0
    beta: float = 1.5
    sigma_n: float = 1e6
    theta: float = 3.0
    noise: str = "real"
    r: float = 1.0
    b: int = 64
    distribution: str = "standard_normal"
    m_prime: int = 10_000
    n: int = 100
    stragglers: str = "none"
    straggler_indices: tuple[int, ...] = ()
    trials: int = 5
    seed: int = 0
    threads: int = 1
    aggregate: str = "auto"
    use_all: bool = False
    p: int | None = None
    p_bits: int = 25
    delta: float = 0.01
    mode: str = "modular"

    @classmethod
    def keys(cls) -> set[str]:
        return {f.name for f in fields(cls)}

    @classmethod
    def from_flat(cls, mapping: dict) -> "ExperimentConfig":
        """Build from a flat dict, coercing scalars to the field types."""
        unknown = set(mapping) - cls.keys()
        if unknown:
            raise ValueError(f"unknown config key {sorted(unknown)[0]!r}")
        kwargs = {}
        for f in fields(cls):
            if f.name not in mapping:
                continue
            value = mapping[f.name]
            try:
                kwargs[f.name] = _coerce(f.name, f.default, value)
            except (TypeError, ValueError):
                raise ValueError(f"{f.name}: cannot use value {value!r}")
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)

    def to_flat(self) -> dict:
        out = asdict(self)
        out["straggler_indices"] = list(self.straggler_indices)
        return out

    @property
    def poly(self) -> PolyFn:
        return preset(self.f)

    @property
    def D(self) -> int:
        return self.poly.degree

    @property
    def N(self) -> int:
        return (self.k + self.t - 1) * self.D + self.s + 1

    @property
    def m(self) -> int:
        return self.m_prime // self.k

    @property
    def data_spec(self) -> DataSpec:
        return DataSpec(self.distribution, self.m_prime, self.n, self.k, self.r)

    @property
    def straggler_spec(self) -> StragglerSpec:
        if self.stragglers == "fixed_set":
            return StragglerSpec("fixed_set", tuple(self.straggler_indices))
        if self.stragglers == "random":
            return StragglerSpec("random", count=self.s)
        return StragglerSpec()

    @property
    def aggregate_mode(self) -> str:
        if self.aggregate == "auto":
            return "sum" if self.f == "gram" else "stack"
        return self.aggregate

    def validate(self):
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"protocol: must be one of {PROTOCOLS}, got {self.protocol!r}")
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(f"distribution: must be one of {DISTRIBUTIONS}, got {self.distribution!r}")
        if self.stragglers not in STRAGGLER_KINDS:
            raise ValueError(f"stragglers: must be one of {STRAGGLER_KINDS}, got {self.stragglers!r}")
        if self.aggregate not in ("auto", "sum", "stack"):
            raise ValueError(f"aggregate: must be auto, sum or stack, got {self.aggregate!r}")
        preset(self.f)
        if self.k < 1 or self.t < 0 or self.s < 0:
            raise ValueError(f"k, t, s: need k >= 1 and t, s >= 0, got {self.k}, {self.t}, {self.s}")
        if self.m_prime < self.k or self.m_prime % self.k:
            raise ValueError(f"m_prime: {self.m_prime} is not a positive multiple of k={self.k}")
        if self.n < 1:
            raise ValueError(f"n: must be positive, got {self.n}")
        if self.trials < 1:
            raise ValueError(f"trials: must be positive, got {self.trials}")
        if self.threads < 1:
            raise ValueError(f"threads: must be positive, got {self.threads}")
        if self.stragglers == "fixed_set":
            idx = self.straggler_indices
            if len(idx) > self.s:
                raise ValueError(f"straggler_indices: {len(idx)} stragglers exceed s={self.s}")
            if len(set(idx)) != len(idx) or any(not 1 <= i <= self.N for i in idx):
                raise ValueError(f"straggler_indices: must be distinct workers in [1, {self.N}]")
        if self.protocol == "alcc":
            self.alcc_params(self.r, self.seed)
        else:
            field = self.field_params()
            field_points(self.k, self.t, self.N, field.p)

    def alcc_params(self, r: float, seed: int) -> AlccParams:
        return AlccParams(k=self.k, t=self.t, s=self.s, D=self.D, beta=self.beta, sigma_n=self.sigma_n,
                          theta=self.theta, r=r, m=self.m, n=self.n, seed=seed, b=self.b,
                          noise=self.noise)

    def field_params(self) -> FieldParams:
        p = self.p if self.p is not None else largest_prime_below(2 ** self.p_bits)
        return FieldParams(p=p, delta=self.delta, b=self.b, mode=self.mode)


def _coerce(name: str, default, value):
    if name == "straggler_indices":
        if isinstance(value, str):
            value = [v for v in value.replace(",", " ").split() if v]
        return tuple(int(v) for v in value)
    if name == "p":
        return None if value is None else int(value)
    if isinstance(default, bool):
        if isinstance(value, str):
            if value.lower() not in ("true", "false"):
                raise ValueError(value)
            return value.lower() == "true"
        return bool(value)
    if isinstance(default, int):
        as_float = float(value)
        if as_float != int(as_float):
            raise ValueError(value)
        return int(as_float)
    if isinstance(default, float):
        return float(value)
    return str(value)


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    e_rel: tuple[float, ...]
    e_rel_mean: float
    neg_log10_e_rel: float
    wall_times: dict
    overflow_flag: bool | None = None
    overflow_observed: bool | None = None
    imag_residue_max: float | None = None
    stragglers: tuple[tuple[int, ...], ...] = ()


def relative_error(estimate: np.ndarray, reference: np.ndarray) -> float:
    """||Y' - Y||_F / ||Y||_F."""
    ref = np.linalg.norm(reference)
    if ref == 0:
        return 0.0 if np.linalg.norm(estimate) == 0 else math.inf
    return float(np.linalg.norm(estimate - reference) / ref)


def _reference(batch: MatrixBatch, f: PolyFn) -> np.ndarray:
    return np.stack([f(x) for x in batch.matrices])


def _aggregate(blocks: np.ndarray, mode: str) -> np.ndarray:
    return blocks.sum(axis=0) if mode == "sum" else blocks


@dataclass
class _Timer:
    label: str
    trial: int
    totals: dict

    @contextmanager
    def phase(self, name: str):
        start = time.perf_counter()
        try:
            yield
        finally:
            elapsed = time.perf_counter() - start
            self.totals[name] = self.totals.get(name, 0.0) + elapsed
            debug.log_phase(self.label, name, elapsed, self.trial)


def _map_workers(fn, items, threads: int) -> list:
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def _run_alcc_trial(cfg: ExperimentConfig, batch: MatrixBatch, rng, timer: _Timer, stragglers):
    r = cfg.r
    if cfg.distribution == "standard_normal":
        r = max(cfg.r, float(np.max(np.abs(batch.matrices))))
    params = cfg.alcc_params(r, cfg.seed)
    f = cfg.poly

    with timer.phase("encode"):
        coeffs = encode_coefficients(batch, params, sample_noise(params, rng))
    returned = [i for i in range(1, params.N + 1) if i not in stragglers]
    with timer.phase("worker-eval"):
        results = _map_workers(lambda i: f(coeffs.share(i)), returned, cfg.threads)
    del coeffs
    with timer.phase("decode"):
        decoded = decode(EvalSet(tuple(returned), np.stack(results), f.degree), params, use_all=cfg.use_all)
    return decoded.outputs, {"imag_residue_max": decoded.imag_residue_max}


def _run_lcc_trial(cfg: ExperimentConfig, batch: MatrixBatch, rng, timer: _Timer, stragglers):
    field = cfg.field_params()
    f = cfg.poly
    r = float(np.max(np.abs(batch.matrices)))
    with timer.phase("encode"):
        q = quantize(batch, field)
        shares = lcc_encode(q, cfg.k, cfg.t, cfg.N, field, seed=int(rng.integers(2 ** 63)))
    returned = [i for i in shares.indices if i not in stragglers]
    with timer.phase("worker-eval+decode"):
        decoded = lcc_eval_and_decode(shares.subset(returned), f, field, cfg.k, cfg.t, r=r, threads=cfg.threads)
    with timer.phase("overflow-check"):
        observed = q.input_overflow or overflow_observed(q, f)
    return decoded.outputs, {"overflow_flag": decoded.overflow_flag, "overflow_observed": observed}


def run_experiment(cfg: ExperimentConfig, cell: int = 0) -> ExperimentResult:
    """Run cfg.trials independent trials and average the relative error.

    Trial streams derive from (seed, cell, trial), so a sweep cell gets fresh
    data while the whole sweep stays reproducible.
    """
    cfg.validate()
    f = cfg.poly
    label = f"{cfg.protocol}:{cell}"
    totals: dict = {}
    errors, flags, observed, residues, straggler_sets = [], [], [], [], []

    for trial in range(cfg.trials):
        rng = np.random.default_rng([cfg.seed, cell, trial])
        batch = cfg.data_spec.generate(rng)
        stragglers = cfg.straggler_spec.pick(cfg.N, rng)
        straggler_sets.append(stragglers)
        timer = _Timer(label, trial, totals)

        reference = _aggregate(_reference(batch, f), cfg.aggregate_mode)
        if cfg.protocol == "alcc":
            outputs, extra = _run_alcc_trial(cfg, batch, rng, timer, stragglers)
            residues.append(extra["imag_residue_max"])
        else:
            outputs, extra = _run_lcc_trial(cfg, batch, rng, timer, stragglers)
            flags.append(extra["overflow_flag"])
            observed.append(extra["overflow_observed"])
        errors.append(relative_error(_aggregate(outputs, cfg.aggregate_mode), reference))

    mean = math.fsum(errors) / len(errors)
    result = ExperimentResult(
        config=cfg,
        e_rel=tuple(errors),
        e_rel_mean=mean,
        neg_log10_e_rel=-math.log10(mean) if mean > 0 else math.inf,
        wall_times={k: v / cfg.trials for k, v in totals.items()},
        overflow_flag=any(flags) if flags else None,
        overflow_observed=any(observed) if observed else None,
        imag_residue_max=max(residues) if residues else None,
        stragglers=tuple(straggler_sets),
    )
    debug.echo(f"[sim] {label} m'={cfg.m_prime} e_rel={mean:.4g} (-log10 {result.neg_log10_e_rel:.3f})")
    return result


def _axis_change(axis: str, value) -> dict:
    if axis in ("m_prime", "b"):
        return {axis: int(value)}
    if axis == "p":
        p = int(value)
        return {"p": p if sympy.isprime(p) else largest_prime_below(p)}
    return {axis: float(value)}


def sweep(cfg: ExperimentConfig, axis: str, values) -> list[ExperimentResult]:
    """One experiment per value, results in input order.

    A ``p`` value that is not prime is replaced by the largest prime below it.
    """
    if axis not in AXES[cfg.protocol]:
        raise ValueError(f"axis {axis!r} not applicable to {cfg.protocol}; choose from {AXES[cfg.protocol]}")
    cells = [cfg.with_(**_axis_change(axis, v)) for v in values]
    for c in cells:
        c.validate()
    return [run_experiment(c, cell) for cell, c in enumerate(cells)]


def results_table(results: list[ExperimentResult], axis: str | None = None) -> pa.Table:
    """One row per result, swept axis first. Timings stay out so identical runs give identical tables."""
    cfgs = [r.config for r in results]
    cols = {
        "protocol": pa.array([c.protocol for c in cfgs], pa.string()),
        "m_prime": pa.array([c.m_prime for c in cfgs], pa.int64()),
        "beta": pa.array([c.beta for c in cfgs], pa.float64()),
        "sigma_n": pa.array([c.sigma_n for c in cfgs], pa.float64()),
        "b": pa.array([c.b for c in cfgs], pa.int64()),
        "p": pa.array([c.field_params().p if c.protocol == "lcc" else None for c in cfgs], pa.int64()),
        "e_rel": pa.array([r.e_rel_mean for r in results], pa.float64()),
        "neg_log10_e_rel": pa.array([r.neg_log10_e_rel for r in results], pa.float64()),
        "overflow_flag": pa.array([r.overflow_flag for r in results], pa.bool_()),
        "overflow_observed": pa.array([r.overflow_observed for r in results], pa.bool_()),
        "imag_residue_max": pa.array([r.imag_residue_max for r in results], pa.float64()),
    }
    if axis is not None:
        if axis not in cols:
            raise ValueError(f"unknown axis {axis!r}")
        cols = {axis: cols.pop(axis), **cols}
    return pa.table(cols)
