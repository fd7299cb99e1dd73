import warnings
from itertools import islice

import numpy as np
import pytest

import lowrank_admm.solvers as solvers_mod
from lowrank_admm.linalg import fro_norm, svd_full, truncated_svd_project
from lowrank_admm.operators import GeneralOperator, build_normal_solver
from lowrank_admm.problems import ProblemInstance, generate_instance, snr_reconstruction
from lowrank_admm.solvers import (
    AdmmState,
    SolverOptions,
    StopReason,
    admm_completion_iterations,
    admm_general_iterations,
    multiplier_update,
    niht,
    nn_admm,
    rcmc_admm,
    rcms_admm,
    x_update_completion,
    x_update_general,
    y_update,
)


def general_instance(rng, m, n, r_true, d, noiseless=True):
    x_true = rng.standard_normal((m, r_true)) @ rng.standard_normal((n, r_true)).T
    op = GeneralOperator(rng.standard_normal((d, m, n)))
    return ProblemInstance(op=op, b=op.apply(x_true), x_true=x_true, r_true=r_true)


class TestYUpdate:
    def test_fixed_point_when_feasible(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((5, 2)) @ rng.standard_normal((2, 4))
        state = AdmmState(x=x, y=x, lam=np.zeros((5, 4)), mu=1.0, k=0)
        assert fro_norm(y_update(state, 2) - x) <= 1e-10 * fro_norm(x)

    def test_reduces_to_projection(self):
        mu = 2.0
        state = AdmmState(
            x=np.zeros((3, 3)),
            y=np.zeros((3, 3)),
            lam=mu * np.diag([3.0, 2.0, 1.0]),
            mu=mu,
            k=0,
        )
        np.testing.assert_allclose(y_update(state, 2), np.diag([3.0, 2.0, 0.0]), atol=1e-12)

    def test_matches_svd_oracle(self):
        rng = np.random.default_rng(1)
        state = AdmmState(
            x=rng.standard_normal((5, 4)),
            y=np.zeros((5, 4)),
            lam=rng.standard_normal((5, 4)),
            mu=1.7,
            k=3,
        )
        z = state.x + state.lam / state.mu
        f = svd_full(z)
        oracle = (f.u[:, :2] * f.sigma[:2]) @ f.v[:, :2].T
        assert fro_norm(y_update(state, 2) - oracle) <= 1e-12


class TestXUpdateGeneral:
    def test_consistent_measurements_fixed_point(self):
        rng = np.random.default_rng(2)
        y = rng.standard_normal((4, 3))
        op = GeneralOperator(rng.standard_normal((5, 4, 3)))
        b = op.apply(y)
        solver = build_normal_solver(op, mu=1.0)
        state = AdmmState(x=np.zeros((4, 3)), y=y, lam=np.zeros((4, 3)), mu=1.0, k=0)
        x = x_update_general(state, op, b, solver)
        assert fro_norm(x - y) <= 1e-8 * fro_norm(y)

    def test_scalar_algebra_oracle(self):
        a, mu, yv, lamv, bv = 1.3, 0.7, -0.4, 0.25, 2.0
        op = GeneralOperator(np.array([[[a]]]))
        solver = build_normal_solver(op, mu=mu)
        state = AdmmState(
            x=np.zeros((1, 1)),
            y=np.array([[yv]]),
            lam=np.array([[lamv]]),
            mu=mu,
            k=0,
        )
        x = x_update_general(state, op, np.array([bv]), solver)
        expected = (2 * a * bv + mu * yv - lamv) / (2 * a**2 + mu)
        assert abs(x[0, 0] - expected) <= 1e-12

    def test_stationarity_residual(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            op = GeneralOperator(rng.standard_normal((6, 4, 4)))
            mu = float(rng.uniform(0.3, 3.0))
            solver = build_normal_solver(op, mu=mu)
            b = rng.standard_normal(6)
            state = AdmmState(
                x=rng.standard_normal((4, 4)),
                y=rng.standard_normal((4, 4)),
                lam=rng.standard_normal((4, 4)),
                mu=mu,
                k=1,
            )
            x = x_update_general(state, op, b, solver)
            rhs = 2.0 * op.adjoint(b) + mu * state.y - state.lam
            residual = 2.0 * op.adjoint(op.apply(x)) + mu * x - rhs
            assert fro_norm(residual) <= 1e-8 * fro_norm(rhs)


class TestXUpdateCompletion:
    def test_observed_cell(self):
        x = x_update_completion(
            np.array([[1.0]]), np.array([[1.0]]), np.array([[0.0]]),
            np.array([[0.0]]), 1.0,
        )
        assert abs(x[0, 0] - 2.0 / 3.0) <= 1e-15

    def test_unobserved_cell(self):
        x = x_update_completion(
            np.array([[0.0]]), np.array([[0.0]]), np.array([[2.0]]),
            np.array([[1.0]]), 1.0,
        )
        assert abs(x[0, 0] - 1.0) <= 1e-15

    def test_matches_general_path_on_full_matrix(self):
        rng = np.random.default_rng(3)
        inst = generate_instance(4, 4, 2, 9, seed=5)
        op = inst.op
        m_meas = op.adjoint(inst.b)
        omega = op.mask()
        mu = 1.3
        y = rng.standard_normal((4, 4))
        lam = rng.standard_normal((4, 4))
        fast = x_update_completion(m_meas, omega, y, lam, mu)
        gen = op.to_general()
        solver = build_normal_solver(gen, mu=mu)
        state = AdmmState(x=np.zeros((4, 4)), y=y, lam=lam, mu=mu, k=0)
        slow = x_update_general(state, gen, inst.b, solver)
        assert fro_norm(fast - slow) <= 1e-10 * max(fro_norm(slow), 1.0)


class TestMultiplierUpdate:
    def test_unchanged_at_consensus(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((3, 3))
        lam = rng.standard_normal((3, 3))
        state = AdmmState(x=x, y=x.copy(), lam=lam, mu=2.0, k=0)
        np.testing.assert_array_equal(multiplier_update(state), lam)

    def test_scales_gap(self):
        rng = np.random.default_rng(5)
        e = rng.standard_normal((3, 3))
        state = AdmmState(x=e, y=np.zeros((3, 3)), lam=np.zeros((3, 3)), mu=2.0, k=0)
        np.testing.assert_allclose(multiplier_update(state), 2.0 * e, atol=1e-15)


def test_one_iteration_matches_step_composition():
    # the solver loop must equal the manual y -> x -> lambda composition
    rng = np.random.default_rng(6)
    inst = general_instance(rng, 3, 3, 1, 5)
    opts = SolverOptions(rank_estimate=1, mu=1.4, tol=0.0, max_iter=1, seed=11)

    step = next(iter(admm_general_iterations(inst, opts)))

    x0 = np.random.default_rng(11).standard_normal((3, 3))
    lam0 = np.zeros((3, 3))
    state = AdmmState(x=x0, y=np.zeros((3, 3)), lam=lam0, mu=1.4, k=0)
    state.y = y_update(state, 1)
    solver = build_normal_solver(inst.op, mu=1.4)
    state.x = x_update_general(state, inst.op, inst.b, solver)
    state.lam = multiplier_update(state)

    assert fro_norm(step.state.y - state.y) <= 1e-12
    assert fro_norm(step.state.x - state.x) <= 1e-12
    assert fro_norm(step.state.lam - state.lam) <= 1e-12


class TestRcmsAdmm:
    def test_recovers_from_general_measurements(self):
        rng = np.random.default_rng(7)
        inst = general_instance(rng, 20, 20, 2, 300)
        opts = SolverOptions(rank_estimate=2, tol=0.0, max_iter=500, seed=1)
        res = rcms_admm(inst, opts)
        assert snr_reconstruction(inst.x_true, res.x_hat) >= 70.0

    def test_feasible_start_is_fixed_point(self):
        rng = np.random.default_rng(8)
        x0 = rng.standard_normal((5, 2)) @ rng.standard_normal((2, 5))
        op = GeneralOperator(rng.standard_normal((12, 5, 5)))
        inst = ProblemInstance(op=op, b=op.apply(x0), x_true=x0, r_true=2)
        res = rcms_admm(inst, SolverOptions(rank_estimate=2, seed=3), x0=x0)
        assert res.converged is StopReason.REL_CHANGE
        assert res.iterations == 1
        assert fro_norm(res.x_hat - x0) <= 1e-6 * fro_norm(x0)

    def test_rank_estimate_validated(self):
        rng = np.random.default_rng(9)
        inst = general_instance(rng, 3, 3, 1, 4)
        with pytest.raises(ValueError):
            rcms_admm(inst, SolverOptions(rank_estimate=4))

    def test_mu_safe_mode_warns_and_raises_mu(self):
        rng = np.random.default_rng(10)
        inst = general_instance(rng, 4, 4, 1, 6)
        opts = SolverOptions(rank_estimate=1, mu=1.0, enforce_mu_gt_2l=True, max_iter=2)
        with pytest.warns(UserWarning):
            step = next(iter(admm_general_iterations(inst, opts)))
        assert step.state.mu > 2.0 * inst.op.lipschitz_constant()


class TestSpecializationEquivalence:
    def test_iterate_sequences_match(self):
        # completion fast path == general normal-equation path, 10 sweeps
        for seed in range(5):
            inst = generate_instance(5, 5, 1, 13, seed=seed)
            opts = SolverOptions(rank_estimate=2, tol=0.0, max_iter=10, seed=100 + seed)
            for (gs, gr), (cs, cr) in zip(
                admm_general_iterations(inst, opts),
                admm_completion_iterations(inst, opts),
            ):
                assert fro_norm(gs.x - cs.x) <= 1e-10
                assert fro_norm(gs.y - cs.y) <= 1e-10
                assert fro_norm(gs.lam - cs.lam) <= 1e-10
                assert abs(gr - cr) <= 1e-10

    def test_full_observation_recovers_immediately(self):
        inst = generate_instance(6, 6, 2, 36, seed=12)
        res = rcmc_admm(inst, SolverOptions(rank_estimate=2, seed=13))
        assert snr_reconstruction(inst.x_true, res.x_hat) >= 70.0

    def test_requires_sampling_operator(self):
        rng = np.random.default_rng(13)
        inst = general_instance(rng, 4, 4, 1, 5)
        with pytest.raises(ValueError):
            rcmc_admm(inst, SolverOptions(rank_estimate=1))


def test_y_iterates_stay_feasible():
    inst = generate_instance(12, 10, 3, 70, snr_m=20, seed=14)
    opts = SolverOptions(rank_estimate=3, tol=0.0, max_iter=40, seed=15)
    for state, _ in admm_completion_iterations(inst, opts):
        sigma = svd_full(state.y).sigma
        assert sigma[3] <= 1e-9 * max(sigma[0], 1e-30)


def test_constraint_residual_decays():
    inst = generate_instance(60, 60, 3, int(0.3 * 3600), seed=16)
    opts = SolverOptions(rank_estimate=3, tol=0.0, max_iter=200, seed=17)
    gaps = [
        fro_norm(state.x - state.y)
        for state, _ in admm_completion_iterations(inst, opts)
    ]
    assert gaps[199] <= 1e-3 * gaps[0]


def test_multiplier_stop_fires_on_noiseless_instance():
    inst = generate_instance(20, 20, 2, 240, seed=18)
    opts = SolverOptions(
        rank_estimate=2, tol=1e-12, multiplier_tol=1e-6, max_iter=500, seed=19
    )
    res = rcmc_admm(inst, opts)
    assert res.converged is StopReason.MULTIPLIER_NORM
    assert snr_reconstruction(inst.x_true, res.x_hat) >= 70.0


def test_max_iter_stop_reason():
    inst = generate_instance(8, 8, 2, 30, snr_m=5, seed=20)
    res = rcmc_admm(inst, SolverOptions(rank_estimate=2, tol=1e-14, max_iter=7, seed=21))
    assert res.converged is StopReason.MAX_ITER
    assert res.iterations == 7


def test_trace_lengths_and_determinism():
    inst = generate_instance(10, 10, 2, 50, snr_m=20, seed=22)
    opts = SolverOptions(rank_estimate=2, max_iter=60, seed=23, record_trace=True)
    r1 = rcmc_admm(inst, opts)
    r2 = rcmc_admm(inst, opts)
    assert r1.iterations == r2.iterations
    assert len(r1.trace.rel_change) == r1.iterations
    np.testing.assert_array_equal(r1.trace.rel_change, r2.trace.rel_change)
    np.testing.assert_array_equal(r1.trace.multiplier_norm, r2.trace.multiplier_norm)
    np.testing.assert_array_equal(r1.trace.snr_r, r2.trace.snr_r)
    np.testing.assert_array_equal(r1.x_hat, r2.x_hat)


class TestNiht:
    def test_fully_observed_converges_fast(self):
        inst = generate_instance(10, 10, 2, 100, seed=24)
        res = niht(inst, SolverOptions(rank_estimate=3))
        assert res.iterations <= 2
        assert res.converged is StopReason.REL_CHANGE
        assert snr_reconstruction(inst.x_true, res.x_hat) >= 70.0

    def test_partial_observation_recovery(self):
        inst = generate_instance(40, 40, 2, int(0.4 * 1600), seed=25)
        res = niht(inst, SolverOptions(rank_estimate=2, tol=1e-7, max_iter=500))
        assert snr_reconstruction(inst.x_true, res.x_hat) >= 70.0

    def test_requires_sampling_operator(self):
        rng = np.random.default_rng(26)
        inst = general_instance(rng, 4, 4, 1, 5)
        with pytest.raises(ValueError):
            niht(inst, SolverOptions(rank_estimate=1))

    def test_deterministic_without_seed(self):
        inst = generate_instance(12, 12, 2, 70, snr_m=15, seed=27)
        r1 = niht(inst, SolverOptions(rank_estimate=2, seed=1))
        r2 = niht(inst, SolverOptions(rank_estimate=2, seed=999))
        np.testing.assert_array_equal(r1.x_hat, r2.x_hat)


class TestNnAdmm:
    def test_no_shrinkage_reduces_to_least_squares(self):
        # lambda_nn = 0 on a fully observed noiseless instance: the fit must
        # match the measurement matrix on the observed set
        inst = generate_instance(12, 12, 3, 144, seed=28)
        res = nn_admm(
            inst, SolverOptions(rank_estimate=3, tol=1e-10, max_iter=80), lambda_nn=0.0
        )
        m_meas = inst.op.adjoint(inst.b)
        gap = np.max(np.abs((res.x_hat - m_meas) * inst.op.mask()))
        assert gap <= 1e-6

    def test_y_step_delegates_to_svt(self, monkeypatch):
        calls = []
        real = solvers_mod.svt_soft_threshold

        def spy(z, tau):
            calls.append((z.copy(), tau))
            return real(z, tau)

        monkeypatch.setattr(solvers_mod, "svt_soft_threshold", spy)
        inst = generate_instance(6, 6, 1, 20, seed=29)
        nn_admm(inst, SolverOptions(rank_estimate=1, max_iter=3, tol=0.0), lambda_nn=2.0)
        assert len(calls) == 3
        mu = 1e-4
        for k, (z, tau) in enumerate(calls):
            assert abs(tau - 2.0 / mu) <= 1e-12 * abs(tau)
            mu *= 1.1

    def test_penalty_growth_is_capped(self):
        inst = generate_instance(6, 6, 1, 20, seed=30)
        opts = SolverOptions(rank_estimate=1, max_iter=30, tol=0.0, record_trace=True)
        res = nn_admm(inst, opts, mu0=1.0, growth=10.0, mu_max=100.0)
        assert res.iterations == 30  # must not blow up once mu saturates
        assert np.all(np.isfinite(res.trace.multiplier_norm))

    def test_requires_sampling_operator(self):
        rng = np.random.default_rng(31)
        inst = general_instance(rng, 4, 4, 1, 5)
        with pytest.raises(ValueError):
            nn_admm(inst, SolverOptions(rank_estimate=1))

    def test_estimate_respects_rank_bound(self):
        inst = generate_instance(14, 14, 2, 120, snr_m=20, seed=32)
        res = nn_admm(inst, SolverOptions(rank_estimate=2))
        sigma = svd_full(res.x_hat).sigma
        assert sigma[2] <= 1e-9 * sigma[0]


class TestSolverOptionsValidation:
    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(rank_estimate=0),
            dict(rank_estimate=2, mu=0.0),
            dict(rank_estimate=2, mu=-1.0),
            dict(rank_estimate=2, tol=-1e-4),
            dict(rank_estimate=2, max_iter=0),
            dict(rank_estimate=2, multiplier_tol=0.0),
        ],
    )
    def test_bad_options_rejected(self, kwargs):
        with pytest.raises(ValueError):
            SolverOptions(**kwargs)

    def test_zero_tol_disables_stop(self):
        inst = generate_instance(8, 8, 1, 40, seed=33)
        res = rcmc_admm(inst, SolverOptions(rank_estimate=1, tol=0.0, max_iter=12, seed=34))
        assert res.converged is StopReason.MAX_ITER
        assert res.iterations == 12
