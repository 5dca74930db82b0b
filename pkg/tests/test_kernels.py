"""Tests for the numeric kernels and backend selection."""
import numpy as np
import pytest

from evtv import _kernels
from evtv._kernels import (
    FIT_CONVERGED,
    FIT_MAXITER,
    FIT_SINGULAR,
    NUMBA_BACKEND,
    NUMPY_BACKEND,
    REP_ARM_MISSING,
    REP_OK,
    _chol_solve,
    get_backend,
)

needs_numba = pytest.mark.skipif(NUMBA_BACKEND is None, reason="numba not installed")


def logistic_cohort(n: int, seed: int):
    """Synthetic two-timepoint cohort with confounded treatments."""
    rng = np.random.default_rng(seed)
    l0 = (rng.random(n) < 0.6).astype(np.float64)
    a0 = (rng.random(n) < 1.0 / (1.0 + np.exp(0.5 - 1.0 * l0))).astype(np.float64)
    l1 = (rng.random(n) < 1.0 / (1.0 + np.exp(0.2 - 0.7 * a0 - 0.8 * l0))).astype(
        np.float64
    )
    a1 = (rng.random(n) < 1.0 / (1.0 + np.exp(1.0 - 0.9 * a0 - 1.1 * l1))).astype(
        np.float64
    )
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(0.3 - 0.8 * a0 - 1.0 * a1 - 0.6 * l1))).astype(
        np.float64
    )
    return l0, a0, l1, a1, y


class TestCholSolve:
    def test_matches_reference_solver(self):
        rng = np.random.default_rng(3)
        for d in (1, 2, 3, 4, 6):
            m = rng.normal(size=(d, d))
            h = m @ m.T + d * np.eye(d)
            g = rng.normal(size=d)
            x, ok = _chol_solve(h.copy(), g.copy())
            assert ok
            assert np.allclose(x, np.linalg.solve(h, g), rtol=1e-10)

    def test_flags_non_positive_definite(self):
        h = np.array([[1.0, 2.0], [2.0, 1.0]])  # indefinite
        _, ok = _chol_solve(h, np.ones(2))
        assert not ok

    def test_flags_singular(self):
        h = np.array([[1.0, 1.0], [1.0, 1.0]])
        _, ok = _chol_solve(h, np.ones(2))
        assert not ok


class TestNumpyFitKernel:
    def test_recovers_known_coefficients(self):
        rng = np.random.default_rng(11)
        n = 200_000
        x = np.column_stack([np.ones(n), rng.normal(size=n), rng.random(n)])
        truth = np.array([-0.4, 0.9, -1.3])
        p = 1.0 / (1.0 + np.exp(-(x @ truth)))
        y = (rng.random(n) < p).astype(np.float64)
        beta, _, gmax, status = NUMPY_BACKEND.fit_logistic(
            x, y, np.ones(n), 1e-8, 100
        )
        assert status == FIT_CONVERGED
        assert gmax < 1e-8
        assert np.all(np.abs(beta - truth) < 0.05)

    def test_weighted_fit_equals_duplicated_rows(self):
        rng = np.random.default_rng(5)
        n = 400
        x = np.column_stack([np.ones(n), rng.normal(size=n)])
        y = (rng.random(n) < 0.5).astype(np.float64)
        w = rng.integers(1, 5, size=n).astype(np.float64)
        reps = np.repeat(np.arange(n), w.astype(np.int64))
        beta_w, _, _, s1 = NUMPY_BACKEND.fit_logistic(x, y, w, 1e-10, 100)
        beta_d, _, _, s2 = NUMPY_BACKEND.fit_logistic(
            x[reps], y[reps], np.ones(reps.shape[0]), 1e-10, 100
        )
        assert s1 == s2 == FIT_CONVERGED
        assert np.allclose(beta_w, beta_d, rtol=1e-10, atol=1e-12)

    def test_zero_weight_rows_are_ignored(self):
        rng = np.random.default_rng(6)
        n = 300
        x = np.column_stack([np.ones(n), rng.normal(size=n)])
        y = (rng.random(n) < 0.4).astype(np.float64)
        w = np.ones(n)
        w[:50] = 0.0
        beta_a, _, _, _ = NUMPY_BACKEND.fit_logistic(x, y, w, 1e-10, 100)
        beta_b, _, _, _ = NUMPY_BACKEND.fit_logistic(
            x[50:], y[50:], np.ones(n - 50), 1e-10, 100
        )
        assert np.allclose(beta_a, beta_b, rtol=1e-10)

    def test_collinear_design_flagged_singular(self):
        rng = np.random.default_rng(7)
        n = 200
        z = rng.normal(size=n)
        x = np.column_stack([np.ones(n), z, 2.0 * z])
        y = (rng.random(n) < 0.5).astype(np.float64)
        _, _, _, status = NUMPY_BACKEND.fit_logistic(x, y, np.ones(n), 1e-8, 100)
        assert status == FIT_SINGULAR

    def test_iteration_cap_reported(self):
        rng = np.random.default_rng(8)
        n = 500
        x = np.column_stack([np.ones(n), rng.normal(size=n)])
        p = 1.0 / (1.0 + np.exp(-(1.5 * x[:, 1] - 0.5)))
        y = (rng.random(n) < p).astype(np.float64)
        beta, iterations, _, status = NUMPY_BACKEND.fit_logistic(
            x, y, np.ones(n), 1e-8, 1
        )
        assert status == FIT_MAXITER
        assert iterations == 1

    def test_perfect_separation_hits_coefficient_bound_or_converges(self):
        # y is a deterministic threshold of x: the MLE lies at infinity
        n = 200
        xv = np.linspace(-2.0, 2.0, n)
        x = np.column_stack([np.ones(n), xv])
        y = (xv > 0.0).astype(np.float64)
        beta, _, _, status = NUMPY_BACKEND.fit_logistic(x, y, np.ones(n), 1e-8, 100)
        assert status in (FIT_CONVERGED, FIT_MAXITER)
        assert np.abs(beta).max() > _kernels.SEPARATION_BOUND


class TestNumpyPipeline:
    def test_status_ok_on_healthy_cohort(self):
        arrs = logistic_cohort(800, 21)
        rr, p11, p00, wmean, wmax, status = NUMPY_BACKEND.rr_pipeline(*arrs)
        assert status == REP_OK
        assert rr == pytest.approx(p11 / p00, rel=1e-12)
        assert 0.0 < p00 < 1.0 and 0.0 < p11 < 1.0
        assert wmax >= wmean > 0.0

    def test_missing_arm_flagged(self):
        l0, a0, l1, a1, y = logistic_cohort(300, 22)
        rr, *_, status = NUMPY_BACKEND.rr_pipeline(l0, np.zeros_like(a0), l1, a1, y)
        assert status == REP_ARM_MISSING
        assert np.isnan(rr)

    def test_bootstrap_statuses_and_determinism(self):
        arrs = logistic_cohort(300, 23)
        n = arrs[0].shape[0]
        rng = np.random.default_rng(9)
        idx = rng.integers(0, n, size=(50, n))
        rr1, st1 = NUMPY_BACKEND.bootstrap_rrs(*arrs, idx)
        rr2, st2 = NUMPY_BACKEND.bootstrap_rrs(*arrs, idx)
        assert np.array_equal(st1, st2)
        assert np.array_equal(rr1, rr2, equal_nan=True)
        assert np.all(st1 == REP_OK)

    def test_bootstrap_matches_pipeline_per_replicate(self):
        arrs = logistic_cohort(250, 24)
        n = arrs[0].shape[0]
        idx = np.random.default_rng(10).integers(0, n, size=(5, n))
        rr, st = NUMPY_BACKEND.bootstrap_rrs(*arrs, idx)
        for r in range(5):
            take = [a[idx[r]] for a in arrs]
            rr_direct, *_, status = NUMPY_BACKEND.rr_pipeline(*take)
            assert status == st[r]
            assert rr_direct == rr[r]


@needs_numba
class TestBackendParity:
    def test_fit_parity(self):
        rng = np.random.default_rng(31)
        n = 3000
        x = np.column_stack([np.ones(n), rng.normal(size=n), rng.random(n)])
        p = 1.0 / (1.0 + np.exp(-(x @ np.array([0.2, -0.7, 1.1]))))
        y = (rng.random(n) < p).astype(np.float64)
        w = rng.random(n) + 0.5
        beta_np, _, _, s_np = NUMPY_BACKEND.fit_logistic(x, y, w, 1e-8, 100)
        beta_nb, _, _, s_nb = NUMBA_BACKEND.fit_logistic(x, y, w, 1e-8, 100)
        assert s_np == s_nb == FIT_CONVERGED
        assert np.allclose(beta_np, beta_nb, rtol=1e-10, atol=1e-12)

    def test_pipeline_parity_across_cohorts(self):
        for seed in (41, 42, 43):
            arrs = logistic_cohort(600, seed)
            out_np = NUMPY_BACKEND.rr_pipeline(*arrs)
            out_nb = NUMBA_BACKEND.rr_pipeline(*arrs)
            assert out_np[-1] == out_nb[-1] == REP_OK
            for a, b in zip(out_np[:-1], out_nb[:-1]):
                assert a == pytest.approx(b, rel=1e-10)

    def test_bootstrap_parity(self):
        arrs = logistic_cohort(400, 44)
        n = arrs[0].shape[0]
        idx = np.random.default_rng(12).integers(0, n, size=(40, n))
        rr_np, st_np = NUMPY_BACKEND.bootstrap_rrs(*arrs, idx)
        rr_nb, st_nb = NUMBA_BACKEND.bootstrap_rrs(*arrs, idx)
        assert np.array_equal(st_np, st_nb)
        assert np.allclose(rr_np, rr_nb, rtol=1e-10)


class TestBackendSelection:
    def test_get_numpy_backend(self):
        assert get_backend("numpy") is NUMPY_BACKEND
        assert NUMPY_BACKEND.name == "numpy"

    def test_unknown_backend_rejected(self):
        with pytest.raises(ValueError):
            get_backend("fortran")

    @needs_numba
    def test_get_numba_backend(self):
        assert get_backend("numba") is NUMBA_BACKEND
        assert NUMBA_BACKEND.name == "numba"

    def test_active_backend_is_well_formed(self):
        b = _kernels.active_backend()
        assert b.name in ("numpy", "numba")
        assert callable(b.fit_logistic)
        assert callable(b.rr_pipeline)
        assert callable(b.bootstrap_rrs)
