"""Analog Lagrange coded computing over complex roots of unity, with an LCC baseline."""

from .core import (
    AlccParams,
    DecodeResult,
    EvalSet,
    MatrixBatch,
    ShareSet,
    decode,
    encode,
    evaluate_shares,
    sample_noise,
)
from .polyfun import PolyFn, degree_and_bounds, evaluate, preset
from .privacy import SearchMode, ds_bound, mis_bound, truncated_ds_bound
from .accuracy import alcc_error_bound, crossover_bits, lcc_error_lower_bounds
from .lcc import FieldParams, lcc_encode, lcc_eval_and_decode, quantize
from .simulator import ExperimentConfig, run_experiment, sweep

__all__ = [
    'AlccParams', 'MatrixBatch', 'ShareSet', 'EvalSet', 'DecodeResult',
    'encode', 'decode', 'evaluate_shares', 'sample_noise',
    'PolyFn', 'evaluate', 'degree_and_bounds', 'preset',
    'SearchMode', 'mis_bound', 'ds_bound', 'truncated_ds_bound',
    'alcc_error_bound', 'lcc_error_lower_bounds', 'crossover_bits',
    'FieldParams', 'quantize', 'lcc_encode', 'lcc_eval_and_decode',
    'ExperimentConfig', 'run_experiment', 'sweep',
]
