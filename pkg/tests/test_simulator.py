import math

import numpy as np
import pytest

from alcc.simulator import (
    DataSpec,
    ExperimentConfig,
    StragglerSpec,
    relative_error,
    results_table,
    run_experiment,
    sweep,
)
from alcc_utils import data_hash

SMALL = ExperimentConfig(k=5, t=3, s=0, m_prime=200, n=8, trials=2, seed=1)


class TestConfig:
    def test_from_flat_coerces(self):
        cfg = ExperimentConfig.from_flat({"k": "4", "beta": 2, "use_all": "true", "straggler_indices": "1,3",
                                          "stragglers": "fixed_set", "s": 2, "m_prime": 400})
        assert cfg.k == 4 and cfg.beta == 2.0 and cfg.use_all is True
        assert cfg.straggler_indices == (1, 3)

    def test_unknown_key(self):
        with pytest.raises(ValueError, match="unknown config key 'gamma'"):
            ExperimentConfig.from_flat({"gamma": 1})

    def test_fractional_int_rejected(self):
        with pytest.raises(ValueError, match="k"):
            ExperimentConfig.from_flat({"k": 2.5})

    @pytest.mark.parametrize("changes", [
        {"m_prime": 201},
        {"protocol": "bgw"},
        {"f": "cube"},
        {"stragglers": "fixed_set", "s": 1, "straggler_indices": (1, 2)},
        {"stragglers": "fixed_set", "s": 1, "straggler_indices": (99,)},
        {"trials": 0},
        {"noise": "laplace"},
    ])
    def test_validate(self, changes):
        with pytest.raises(ValueError):
            SMALL.with_(**changes).validate()

    def test_derived_sizes(self):
        assert SMALL.N == 15
        assert SMALL.m == 40
        assert SMALL.aggregate_mode == "sum"
        assert SMALL.with_(f="identity").aggregate_mode == "stack"

    def test_lcc_prime_from_bits(self):
        cfg = SMALL.with_(protocol="lcc", p_bits=25)
        assert cfg.field_params().p == 33554393


class TestSpecs:
    def test_uniform_data_in_range(self):
        batch = DataSpec("uniform", 60, 4, 3, 2.0).generate(np.random.default_rng(0))
        assert batch.matrices.shape == (3, 20, 4)
        assert np.max(np.abs(batch.matrices)) <= 2.0

    def test_random_stragglers(self):
        picked = StragglerSpec("random", count=2).pick(10, np.random.default_rng(4))
        assert len(picked) == 2 and len(set(picked)) == 2
        assert all(1 <= i <= 10 for i in picked)

    def test_relative_error(self):
        ref = np.ones((2, 2))
        assert relative_error(ref, ref) == 0.0
        assert relative_error(2 * ref, ref) == pytest.approx(1.0)
        assert relative_error(np.zeros(3), np.zeros(3)) == 0.0
        assert relative_error(np.ones(3), np.zeros(3)) == math.inf


class TestAlccRuns:
    def test_noisy_gram_run(self):
        result = run_experiment(SMALL.with_(sigma_n=1e6))
        assert len(result.e_rel) == 2
        assert 0 < result.e_rel_mean < 1
        assert result.neg_log10_e_rel == pytest.approx(-math.log10(result.e_rel_mean))
        assert result.overflow_flag is None
        assert set(result.wall_times) == {"encode", "worker-eval", "decode"}

    @pytest.mark.parametrize("f,tol", [("identity", 1e-8), ("gram", 1e-6)])
    def test_zero_noise_with_stragglers(self, f, tol):
        cfg = SMALL.with_(f=f, sigma_n=0.0, s=1, stragglers="random", trials=4)
        result = run_experiment(cfg)
        assert max(result.e_rel) <= tol
        assert all(len(s) == 1 for s in result.stragglers)

    def test_fixed_stragglers_and_least_squares(self):
        cfg = SMALL.with_(f="identity", sigma_n=0.0, s=2, stragglers="fixed_set", straggler_indices=(3, 9),
                          use_all=True)
        result = run_experiment(cfg)
        assert result.stragglers == ((3, 9), (3, 9))
        assert result.e_rel_mean <= 1e-8

    def test_threads_do_not_change_results(self):
        a = run_experiment(SMALL.with_(sigma_n=1e3))
        b = run_experiment(SMALL.with_(sigma_n=1e3, threads=4))
        assert a.e_rel == b.e_rel

    def test_error_flat_in_dataset_size(self):
        cfg = SMALL.with_(sigma_n=1e6, n=20, trials=3)
        small, large = sweep(cfg, "m_prime", [1_000, 10_000])
        assert abs(small.neg_log10_e_rel - large.neg_log10_e_rel) <= 0.25

    def test_complex_noise_is_less_error_prone_at_scale(self):
        cfg = SMALL.with_(sigma_n=1e6, n=20, m_prime=10_000, trials=3)
        real, circular = run_experiment(cfg), run_experiment(cfg.with_(noise="complex"))
        assert circular.neg_log10_e_rel > real.neg_log10_e_rel

    def test_error_grows_with_beta(self):
        results = sweep(SMALL.with_(sigma_n=1e6, trials=3), "beta", [1.1, 2.0])
        assert results[0].e_rel_mean < results[1].e_rel_mean


class TestLccRuns:
    def test_safe_region(self):
        cfg = SMALL.with_(protocol="lcc", distribution="uniform", m_prime=20, p_bits=25, delta=0.01)
        result = run_experiment(cfg)
        assert result.e_rel_mean < 1e-2
        assert result.overflow_flag is False
        assert result.overflow_observed is False
        assert result.imag_residue_max is None

    def test_p_axis_rounds_to_prime(self):
        cfg = SMALL.with_(protocol="lcc", trials=1)
        (result,) = sweep(cfg, "p", [2 ** 25])
        assert result.config.p == 33554393

    def test_axis_must_fit_protocol(self):
        with pytest.raises(ValueError, match="not applicable"):
            sweep(SMALL, "p", [97])


class TestTables:
    def test_axis_column_first(self):
        results = sweep(SMALL.with_(trials=1), "m_prime", [100, 200])
        table = results_table(results, "m_prime")
        assert table.column_names[0] == "m_prime"
        assert table.column("m_prime").to_pylist() == [100, 200]
        assert table.column("p").null_count == 2

    def test_identical_runs_identical_tables(self):
        cfg = SMALL.with_(sigma_n=1e6)
        first = results_table([run_experiment(cfg)])
        second = results_table([run_experiment(cfg)])
        assert data_hash(first) == data_hash(second)

    def test_cells_draw_fresh_data(self):
        a, b = sweep(SMALL.with_(trials=1, sigma_n=1e6), "beta", [1.5, 1.5])
        assert a.e_rel != b.e_rel


@pytest.mark.slow
@pytest.mark.parametrize("m_prime,beta,expected", [
    (10_000, 1.1, 4.466),
    (10_000, 1.5, 3.304),
    (10_000, 2.0, 1.699),
    (100_000, 2.0, 1.728),
])
def test_table_accuracy_cell(m_prime, beta, expected):
    cfg = ExperimentConfig(f="gram", k=5, t=3, s=0, sigma_n=1e6, n=100, m_prime=m_prime, beta=beta, trials=3)
    assert run_experiment(cfg).neg_log10_e_rel == pytest.approx(expected, abs=0.3)


@pytest.mark.slow
def test_overflow_cliff_at_25_bits():
    cfg = ExperimentConfig(protocol="lcc", f="gram", k=5, t=3, s=0, n=100, p_bits=25, delta=0.01, trials=1)
    before, after = sweep(cfg, "m_prime", [5_000, 10_000])
    assert not before.overflow_observed
    assert after.overflow_observed
    assert math.log10(after.e_rel_mean) - math.log10(before.e_rel_mean) >= 3
