import math

import numpy as np
import pytest

from lowrank_admm.linalg import fro_norm, svd_full
from lowrank_admm.problems import (
    PhaseGrid,
    calibrate_noise,
    generate_instance,
    run_phase_transition,
    snr_reconstruction,
    sufficient_samples,
)


class TestGenerateInstance:
    def test_deterministic(self):
        a = generate_instance(8, 6, 2, 20, snr_m=15, seed=42)
        b = generate_instance(8, 6, 2, 20, snr_m=15, seed=42)
        np.testing.assert_array_equal(a.x_true, b.x_true)
        np.testing.assert_array_equal(a.op.pattern.indices, b.op.pattern.indices)
        np.testing.assert_array_equal(a.b, b.b)

    def test_full_rank_when_r_equals_min_dim(self):
        inst = generate_instance(5, 7, 5, 20, seed=1)
        assert np.linalg.matrix_rank(inst.x_true) == 5

    def test_full_sampling_covers_every_cell(self):
        inst = generate_instance(4, 5, 2, 20, seed=2)
        flat = inst.op.pattern.indices[:, 0] * 5 + inst.op.pattern.indices[:, 1]
        assert sorted(flat.tolist()) == list(range(20))

    def test_noise_hits_requested_snr(self):
        inst = generate_instance(10, 10, 2, 60, snr_m=20, seed=3)
        b_clean = inst.b - inst.noise.e
        realized = 20 * math.log10(
            np.linalg.norm(b_clean) / np.linalg.norm(inst.noise.e)
        )
        assert abs(realized - 20.0) <= 0.01
        np.testing.assert_allclose(b_clean, inst.op.apply(inst.x_true), atol=1e-12)

    def test_rank_is_exactly_r_true(self):
        for seed in range(10):
            inst = generate_instance(9, 8, 3, 40, seed=seed)
            sigma = svd_full(inst.x_true).sigma
            assert sigma[2] > 1e-8
            assert sigma[3] < 1e-8 * sigma[0]

    def test_too_many_samples_rejected(self):
        with pytest.raises(ValueError):
            generate_instance(3, 3, 1, 10, seed=0)

    def test_bad_rank_rejected(self):
        with pytest.raises(ValueError):
            generate_instance(3, 3, 4, 5, seed=0)

    def test_noiseless_variants(self):
        a = generate_instance(5, 5, 1, 10, snr_m=None, seed=4)
        b = generate_instance(5, 5, 1, 10, snr_m=math.inf, seed=4)
        assert a.noise is None and b.noise is None
        np.testing.assert_array_equal(a.b, b.b)

    def test_sampling_is_uniform(self):
        # per-cell observation counts over many seeds stay inside 4-sigma
        # binomial bounds (fixed seeds, so this is deterministic)
        m, n, d, trials = 6, 6, 10, 2000
        counts = np.zeros((m, n))
        for seed in range(trials):
            inst = generate_instance(m, n, 1, d, seed=seed)
            idx = inst.op.pattern.indices
            counts[idx[:, 0], idx[:, 1]] += 1
        p = d / (m * n)
        mean = trials * p
        sigma = math.sqrt(trials * p * (1 - p))
        assert np.all(np.abs(counts - mean) <= 4.0 * sigma)


class TestSnrReconstruction:
    def test_ten_percent_error_is_twenty_db(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((6, 6))
        e = rng.standard_normal((6, 6))
        e *= 0.1 * fro_norm(x) / fro_norm(e)
        assert abs(snr_reconstruction(x, x + e) - 20.0) <= 1e-9

    def test_exact_recovery_hits_cap(self):
        x = np.random.default_rng(6).standard_normal((4, 4))
        assert snr_reconstruction(x, x) == 300.0

    def test_zero_estimate_is_zero_db(self):
        x = np.random.default_rng(7).standard_normal((4, 4))
        assert snr_reconstruction(x, np.zeros((4, 4))) == 0.0

    def test_zero_truth_rejected(self):
        with pytest.raises(ValueError):
            snr_reconstruction(np.zeros((2, 2)), np.eye(2))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            snr_reconstruction(np.eye(2), np.eye(3))


class TestCalibrateNoise:
    def test_infinite_snr_is_noiseless(self):
        b = np.array([1.0, 2.0, 3.0])
        noisy, e = calibrate_noise(b, math.inf, seed=0)
        np.testing.assert_array_equal(e, 0.0)
        np.testing.assert_array_equal(noisy, b)

    def test_zero_db_matches_signal_norm(self):
        b = np.array([3.0, -4.0])
        _, e = calibrate_noise(b, 0.0, seed=1)
        assert abs(np.linalg.norm(e) - np.linalg.norm(b)) <= 1e-12

    def test_realized_ratio_exact(self):
        b = np.random.default_rng(8).standard_normal(50)
        noisy, e = calibrate_noise(b, 20.0, seed=2)
        realized = 20 * math.log10(np.linalg.norm(b) / np.linalg.norm(e))
        assert abs(realized - 20.0) <= 1e-9
        np.testing.assert_array_equal(noisy, b + e)

    def test_zero_signal_rejected(self):
        with pytest.raises(ValueError):
            calibrate_noise(np.zeros(3), 10.0, seed=0)


class TestSufficientSamples:
    def test_small_case(self):
        assert sufficient_samples(10, 1, 1.0) == 16  # ceil(10^1.2) = 16

    def test_clamped_to_matrix_size(self):
        # raw value 10 * ceil(100^1.2 * 10 * 2) = 50240 exceeds n^2
        assert sufficient_samples(100, 10, 10.0) == 10000

    def test_tiny_matrix(self):
        assert sufficient_samples(2, 1, 1.0) == 1  # ceil(2^1.2 * log10 2) = 1

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            sufficient_samples(1, 1)
        with pytest.raises(ValueError):
            sufficient_samples(10, 0)


class TestPhaseTransition:
    def test_single_cell_single_trial(self):
        grid = PhaseGrid(
            n=20, rank_fractions=(0.05,), sampling_fractions=(0.5,),
            trials=1, max_iter=300, seed=5,
        )
        rates = run_phase_transition(grid)
        assert rates.shape == (1, 1)
        assert rates[0, 0] in (0.0, 1.0)

    def test_easy_cell_succeeds(self):
        # well inside the recoverable region: r/n=0.04, d/n^2=0.30
        grid = PhaseGrid(
            n=100, rank_fractions=(0.04,), sampling_fractions=(0.30,),
            trials=1, max_iter=500, seed=6,
        )
        assert run_phase_transition(grid)[0, 0] == 1.0

    def test_impossible_cell_fails(self):
        # degrees of freedom r(2n - r) exceed the sample count
        grid = PhaseGrid(
            n=20, rank_fractions=(0.40,), sampling_fractions=(0.05,),
            trials=2, max_iter=60, seed=7,
        )
        assert run_phase_transition(grid)[0, 0] == 0.0

    def test_infeasible_cell_marked_invalid(self):
        grid = PhaseGrid(
            n=10, rank_fractions=(0.01,), sampling_fractions=(0.5,),
            trials=1, max_iter=10, seed=8,
        )
        assert math.isnan(run_phase_transition(grid)[0, 0])

    def test_parallel_matches_serial(self):
        grid = PhaseGrid(
            n=14, rank_fractions=(0.1, 0.5), sampling_fractions=(0.2, 0.6),
            trials=2, max_iter=40, seed=9,
        )
        serial = run_phase_transition(grid, jobs=1)
        parallel = run_phase_transition(grid, jobs=2)
        np.testing.assert_array_equal(serial, parallel)

    def test_unknown_solver_rejected(self):
        grid = PhaseGrid(
            n=10, rank_fractions=(0.2,), sampling_fractions=(0.5,), trials=1
        )
        with pytest.raises(ValueError):
            run_phase_transition(grid, solver="bogus")

    def test_bad_fractions_rejected(self):
        with pytest.raises(ValueError):
            PhaseGrid(n=10, rank_fractions=(0.0,), sampling_fractions=(0.5,))
