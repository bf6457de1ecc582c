import numpy as np
import pytest

from mpcqp import DenseQp, compute_residuals, mode_preset
from mpcqp.ipm_core import (
    IpmArg,
    Status,
    centering,
    check_termination,
    corrector_acceptance,
    duality_measure,
    iterative_refinement,
    max_step,
    recover_step_absolute,
    update_iterate_delta,
)
from mpcqp.kkt_dense import factor
from mpcqp.view import QpSolution, make_view

from conftest import rand_dense_qp, rand_iterate


class TestDualityMeasure:
    def test_simple_average(self):
        assert duality_measure(np.array([1.0, 2.0]), np.array([2.0, 1.0])) == 2.0

    def test_zero_vectors(self):
        assert duality_measure(np.zeros(3), np.zeros(3)) == 0.0

    def test_masked_row_excluded(self):
        act = np.array([True, False])
        mu = duality_measure(np.array([1.0, 5.0]), np.array([1.0, 1.0]), act)
        assert mu == 1.0

    def test_empty_active_set_returns_zero(self):
        assert duality_measure(np.zeros(0), np.zeros(0)) == 0.0

    def test_permutation_invariance(self, rng):
        lam = rng.uniform(0.1, 2.0, 17)
        t = rng.uniform(0.1, 2.0, 17)
        perm = rng.permutation(17)
        assert duality_measure(lam, t) == pytest.approx(
            duality_measure(lam[perm], t[perm]), rel=1e-15
        )


class TestMaxStep:
    def test_zero_direction(self):
        one = np.ones(2)
        assert max_step(one, one, np.zeros(2), np.zeros(2)) == 1.0

    def test_single_blocking(self):
        assert max_step(np.array([1.0]), np.array([1.0]),
                        np.array([-2.0]), np.array([0.0])) == 0.5

    def test_tightest_ratio(self):
        a = max_step(np.array([1.0, 1.0]), np.array([1.0, 1.0]),
                     np.array([-4.0, -2.0]), np.zeros(2))
        assert a == 0.25

    def test_nonnegativity_after_step(self, rng):
        for _ in range(25):
            lam = rng.uniform(0.01, 5.0, 12)
            t = rng.uniform(0.01, 5.0, 12)
            dl = rng.standard_normal(12)
            dt = rng.standard_normal(12)
            a = max_step(lam, t, dl, dt)
            assert np.all(lam + a * dl >= -1e-15)
            assert np.all(t + a * dt >= -1e-15)
            a995 = max_step(lam, t, dl, dt, ftb=0.995)
            assert np.all(lam + a995 * dl > 0.0)
            assert np.all(t + a995 * dt > 0.0)


class TestCenteringAndCorrector:
    def test_cube(self):
        assert centering(1.0, 0.5) == 0.125

    def test_zero_affine(self):
        assert centering(1.0, 0.0) == 0.0

    def test_no_progress(self):
        assert centering(1.0, 1.0) == 1.0

    def test_corrector_accept(self):
        assert corrector_acceptance(1.0, 1.0, threshold=1.5)
        assert not corrector_acceptance(2.0, 1.0, threshold=1.5)
        assert corrector_acceptance(0.0, 0.0, threshold=1.5)


class TestIterateUpdate:
    def _pair(self, rng, qp):
        vw = make_view(qp)
        it = rand_iterate(rng, qp)
        step = QpSolution(vw)
        return vw, it, step

    def test_zero_step_identity(self, rng):
        qp = rand_dense_qp(rng)
        vw, it, step = self._pair(rng, qp)
        before = it.copy()
        update_iterate_delta(it, step, 1.0, vw.act, 1e-12, 1e-12)
        assert np.array_equal(it.y, before.y)
        assert np.array_equal(it.lam, before.lam)

    def test_partial_step(self):
        qp = DenseQp(nv=1, nb=1)
        qp.set_field("lb", [0.0])
        qp.set_field("ub", [1.0])
        vw = make_view(qp)
        it = QpSolution(vw)
        it.lam[:] = 1.0
        it.t[:] = 1.0
        step = QpSolution(vw)
        step.lam[:] = [-1.0, 0.0]
        update_iterate_delta(it, step, 0.9, vw.act, 1e-12, 1e-12)
        assert it.lam[0] == pytest.approx(0.1)

    def test_clipping_floor(self):
        qp = DenseQp(nv=1, nb=1)
        qp.set_field("lb", [0.0])
        qp.set_field("ub", [1.0])
        vw = make_view(qp)
        it = QpSolution(vw)
        it.lam[:] = 1e-13
        it.t[:] = 1.0
        update_iterate_delta(it, QpSolution(vw), 1.0, vw.act, 1e-12, 1e-12)
        assert np.all(it.lam == 1e-12)

    def test_masked_rows_untouched(self):
        qp = DenseQp(nv=1, nb=1)
        qp.set_field("lb", [0.0])  # upper side stays infinite -> inactive
        vw = make_view(qp)
        it = QpSolution(vw)
        update_iterate_delta(it, QpSolution(vw), 1.0, vw.act, 1e-12, 1e-12)
        assert it.lam[1] == 0.0 and it.t[1] == 0.0


class TestRecoverAbsolute:
    def test_identity(self, rng):
        qp = rand_dense_qp(rng)
        it = rand_iterate(rng, qp)
        step = recover_step_absolute(it, it.copy())
        assert np.all(step.y == 0.0) and np.all(step.lam == 0.0)

    def test_difference(self, rng):
        qp = rand_dense_qp(rng)
        a = rand_iterate(rng, qp)
        b = a.copy()
        b.y += 2.0
        assert np.allclose(recover_step_absolute(a, b).y, 2.0)

    def test_cancellation_at_machine_precision(self, rng):
        qp = rand_dense_qp(rng)
        a = rand_iterate(rng, qp)
        b = a.copy()
        b.y[:] = a.y + 1e-16 * np.abs(a.y)  # below double resolution at 1.0
        step = recover_step_absolute(a, b)
        # documents the cancellation hazard: the tiny increment is lost
        assert np.max(np.abs(step.y)) <= 4e-16 * max(1.0, np.max(np.abs(a.y)))


class _FakeRes:
    def __init__(self, g, b, d, m):
        self.res_g, self.res_b, self.res_d, self.res_m = g, b, d, m

    def isfinite(self):
        return all(np.isfinite(v)
                   for v in (self.res_g, self.res_b, self.res_d, self.res_m))


class TestTermination:
    def test_success_speed(self):
        arg = mode_preset("speed").with_tol(1e-6)
        res = _FakeRes(1e-9, 1e-9, 1e-9, 1e-9)
        assert check_termination(res, 1e-9, 1.0, 3, arg) is Status.Success

    def test_max_iterations(self):
        arg = mode_preset("speed").with_tol(1e-6)
        res = _FakeRes(1.0, 1.0, 1.0, 1.0)
        assert check_termination(res, 1.0, 1.0, arg.iter_max, arg) is Status.MaxIter

    def test_min_step(self):
        arg = mode_preset("speed").with_tol(1e-6)
        res = _FakeRes(1.0, 1.0, 1.0, 1.0)
        assert check_termination(res, 1.0, 1e-12, 2, arg) is Status.MinStep

    def test_nan_detected(self):
        arg = mode_preset("speed").with_tol(1e-6)
        res = _FakeRes(np.nan, 1.0, 1.0, 1.0)
        assert check_termination(res, 1.0, 1.0, 0, arg) is Status.NaNDetected

    def test_speed_abs_mu_only(self):
        arg = mode_preset("speed_abs").with_tol(1e-6)
        assert check_termination(None, 1e-9, 1.0, 2, arg) is Status.Success
        assert check_termination(None, 1e-3, 1.0, 2, arg) is None


class TestIterativeRefinement:
    def test_exact_factor_zero_corrections(self, rng):
        M = np.array([[2.0, 0.3], [0.3, 1.5]])
        Minv = np.linalg.inv(M)
        rhs = np.array([1.0, -2.0])
        d0 = -Minv @ rhs
        d, norm, steps = iterative_refinement(
            lambda r: -Minv @ r, lambda x: M @ x, rhs, d0, 2, 1e-12
        )
        assert steps == 0
        assert np.array_equal(d, d0)

    def test_perturbed_factor_contracts(self):
        M = np.array([[2.0, 0.3], [0.3, 1.5]])
        delta = 1e-4
        Mfact_inv = np.linalg.inv(M + delta * np.eye(2))
        rhs = np.array([1.0, -2.0])
        d0 = -Mfact_inv @ rhs
        norms = [np.max(np.abs(M @ d0 + rhs))]
        d = d0
        for _ in range(3):
            d, n, _ = iterative_refinement(
                lambda r: -Mfact_inv @ r, lambda x: M @ x, rhs, d, 1, 0.0
            )
            norms.append(n)
        contraction = delta * np.max(np.abs(np.linalg.inv(M)))
        for a, b in zip(norms, norms[1:]):
            if a > 1e-11:  # above the double-precision floor of the residual
                assert b <= 3.0 * contraction * a
        assert all(b <= a for a, b in zip(norms, norms[1:]))

    def test_zero_rhs_keeps_zero(self):
        M = np.eye(2)
        d, norm, _ = iterative_refinement(
            lambda r: -r, lambda x: M @ x, np.zeros(2), np.zeros(2), 3, 1e-12
        )
        assert np.array_equal(d, np.zeros(2))
        assert norm == 0.0

    def test_never_worse_than_input(self, rng):
        M = np.diag([1.0, 1e-6])
        bad_inv = np.linalg.inv(M + 1e-2 * np.eye(2))
        rhs = rng.standard_normal(2)
        d0 = -bad_inv @ rhs
        n0 = np.max(np.abs(M @ d0 + rhs))
        _, n, _ = iterative_refinement(
            lambda r: -bad_inv @ r, lambda x: M @ x, rhs, d0, 5, 1e-14
        )
        assert n <= n0

    def test_divergence_guard_returns_best(self, rng):
        # a grossly wrong "factorization" (opposite sign) makes every
        # correction worse; the guard stops and the best iterate is kept
        M = np.eye(2)
        rhs = np.array([1.0, 1.0])
        d0 = -rhs  # exact would be -rhs; perturb slightly
        d0 = d0 + 0.1
        n0 = np.max(np.abs(M @ d0 + rhs))
        d, n, steps = iterative_refinement(
            lambda r: +2.0 * r, lambda x: M @ x, rhs, d0, 10, 1e-16
        )
        assert steps <= 3
        assert n <= n0


class TestModePresets:
    def test_speed_abs(self):
        arg = mode_preset("speed_abs")
        assert arg.abs_form and not arg.comp_res_pred
        assert arg.itref_corr_max == 0

    def test_robust(self):
        assert mode_preset("robust").use_qr_always

    def test_speed_has_no_refinement(self):
        assert mode_preset("speed").itref_corr_max == 0

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            mode_preset("turbo")

    def test_speed_equals_balance_without_safeguards(self, rng):
        # disabling refinement, QR fallback and the tighter floors turns the
        # balance preset into the speed algorithm: identical iterates
        from mpcqp import solve_dense_qp
        from dataclasses import replace

        qp = rand_dense_qp(rng, ns=0)
        a_speed = mode_preset("speed").with_tol(1e-8)
        a_bal = replace(
            mode_preset("balance").with_tol(1e-8),
            itref_corr_max=0, use_qr_fallback=False,
            lam_min=a_speed.lam_min, t_min=a_speed.t_min,
        )
        r1 = solve_dense_qp(qp, a_speed)
        r2 = solve_dense_qp(qp, a_bal)
        assert np.array_equal(r1.solution.y, r2.solution.y)
        assert r1.iterations == r2.iterations

    def test_validate_rejects_bad_tolerance(self):
        with pytest.raises(ValueError):
            IpmArg(tol_comp=0.0).validate()


class TestLinearResidualContraction:
    def test_one_iteration_scales_linear_residuals(self, rng):
        # one delta-formulation iteration with sigma = 0 and no corrector
        # scales r_g, r_b, r_d by exactly (1 - alpha)
        for trial in range(5):
            qp = rand_dense_qp(rng, nv=5, ne=1, nb=3, ng=1, ns=1)
            vw = make_view(qp)
            it = rand_iterate(rng, qp)
            res = compute_residuals(qp, it)
            fac = factor(qp, it, IpmArg())
            rm = np.where(vw.act, it.lam * it.t, 0.0)
            step = fac.solve(res.r_g, res.r_b, res.r_d, rm)
            alpha = 0.5 * max_step(it.lam, it.t, step.lam, step.t, vw.act)
            update_iterate_delta(it, step, alpha, vw.act, 0.0, 0.0)
            res2 = compute_residuals(qp, it)
            scale = 1.0 - alpha
            ref = max(res.res_g, res.res_b, res.res_d)
            assert np.max(np.abs(res2.r_g - scale * res.r_g)) <= 1e-10 * ref
            assert np.max(np.abs(res2.r_b - scale * res.r_b)) <= 1e-10 * ref
            assert np.max(np.abs(res2.r_d - scale * res.r_d)) <= 1e-10 * ref
