"""Numerical kernels behind the estimation engine.

Two interchangeable backends share one source of truth: the plain numpy
functions below, and (when available) numba-compiled twins built from
the same factory closures.  Selection happens once at import via the
EVTV_BACKEND environment variable ("numpy" or "numba"); the default is
numba when importable, numpy otherwise.  Within a backend every kernel
is deterministic; across backends results agree to floating-point
roundoff, not bitwise.
"""
from __future__ import annotations

import os
from typing import Callable, NamedTuple, Optional

import numpy as np

FIT_TOL = 1e-8
FIT_MAX_ITER = 100
SEPARATION_BOUND = 30.0
POSITIVITY_FLOOR = 1e-6
BOUNDARY_FLOOR = 1e-8

# fit_logistic statuses
FIT_CONVERGED = 0
FIT_MAXITER = 1
FIT_SINGULAR = 2

# per-replicate pipeline statuses; OK and NOT_CONVERGED carry usable estimates
REP_OK = 0
REP_NOT_CONVERGED = 1
REP_ARM_MISSING = 2
REP_POSITIVITY = 3
REP_SINGULAR = 4
REP_SEPARATED = 5
REP_DEGENERATE = 6


def _chol_solve(h, g):
    # symmetric positive-definite solve with an explicit rank flag; kept
    # free of numpy.linalg so the numba twin needs no exception handling
    d = h.shape[0]
    low = np.zeros((d, d))
    for j in range(d):
        s = h[j, j]
        for k in range(j):
            s -= low[j, k] * low[j, k]
        if s <= 1e-10 * (1.0 + abs(h[j, j])):
            return np.zeros(d), False
        low[j, j] = np.sqrt(s)
        for i in range(j + 1, d):
            t = h[i, j]
            for k in range(j):
                t -= low[i, k] * low[j, k]
            low[i, j] = t / low[j, j]
    x = np.zeros(d)
    for i in range(d):
        t = g[i]
        for k in range(i):
            t -= low[i, k] * x[k]
        x[i] = t / low[i, i]
    for i in range(d - 1, -1, -1):
        t = x[i]
        for k in range(i + 1, d):
            t -= low[k, i] * x[k]
        x[i] = t / low[i, i]
    return x, True


def _make_fit(chol_solve):
    def fit_logistic(x, y, w, tol, max_iter):
        # damped Newton on the weighted Bernoulli log-likelihood;
        # step-halving keeps the likelihood from decreasing
        n, d = x.shape
        beta = np.zeros(d)
        eta = np.zeros(n)
        ll = np.sum(w * (y * eta - (np.log1p(np.exp(-np.abs(eta))) + np.maximum(eta, 0.0))))
        gmax = np.inf
        for it in range(max_iter):
            # two-branch expit: exp of a nonpositive argument cannot overflow
            e = np.exp(-np.abs(eta))
            mu = np.where(eta >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))
            grad = x.T @ (w * (y - mu))
            gmax = np.max(np.abs(grad))
            if gmax < tol:
                return beta, it, gmax, FIT_CONVERGED
            curv = w * mu * (1.0 - mu)
            hess = (x * curv.reshape(-1, 1)).T @ x
            step, ok = chol_solve(hess, grad)
            if not ok:
                return beta, it, gmax, FIT_SINGULAR
            scale = 1.0
            accepted = False
            cand = beta
            cand_eta = eta
            cand_ll = ll
            for _ in range(30):
                cand = beta + scale * step
                cand_eta = x @ cand
                cand_ll = np.sum(
                    w
                    * (
                        y * cand_eta
                        - (np.log1p(np.exp(-np.abs(cand_eta))) + np.maximum(cand_eta, 0.0))
                    )
                )
                if cand_ll >= ll - 1e-12 * (1.0 + abs(ll)):
                    accepted = True
                    break
                scale *= 0.5
            if not accepted:
                return beta, it, gmax, FIT_MAXITER
            beta = cand
            eta = cand_eta
            ll = cand_ll
        e = np.exp(-np.abs(eta))
        mu = np.where(eta >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))
        grad = x.T @ (w * (y - mu))
        gmax = np.max(np.abs(grad))
        status = FIT_CONVERGED if gmax < tol else FIT_MAXITER
        return beta, max_iter, gmax, status

    return fit_logistic


def _make_rr_pipeline(fit_logistic):
    def rr_pipeline(l0, a0, l1, a1, y):
        # stabilized-weight IPW fit of the marginal outcome model on one
        # cohort; returns (rr, p11, p00, weight_mean, weight_max, status)
        n = l0.shape[0]
        nf = float(n)
        bad = (np.nan, np.nan, np.nan, np.nan, np.nan)
        sa0 = a0.sum()
        sa1 = a1.sum()
        if sa0 == 0.0 or sa0 == nf or sa1 == 0.0 or sa1 == nf:
            return bad + (REP_ARM_MISSING,)
        sy = y.sum()
        if sy == 0.0 or sy == nf:
            return bad + (REP_SEPARATED,)
        ones = np.ones(n)
        w1 = np.ones(n)

        xd0 = np.empty((n, 2))
        xd0[:, 0] = ones
        xd0[:, 1] = l0
        bd0, _, _, st0 = fit_logistic(xd0, a0, w1, FIT_TOL, FIT_MAX_ITER)
        xn0 = np.empty((n, 1))
        xn0[:, 0] = ones
        bn0, _, _, st1 = fit_logistic(xn0, a0, w1, FIT_TOL, FIT_MAX_ITER)
        xd1 = np.empty((n, 4))
        xd1[:, 0] = ones
        xd1[:, 1] = a0
        xd1[:, 2] = l0
        xd1[:, 3] = l1
        bd1, _, _, st2 = fit_logistic(xd1, a1, w1, FIT_TOL, FIT_MAX_ITER)
        xn1 = np.empty((n, 2))
        xn1[:, 0] = ones
        xn1[:, 1] = a0
        bn1, _, _, st3 = fit_logistic(xn1, a1, w1, FIT_TOL, FIT_MAX_ITER)
        for st in (st0, st1, st2, st3):
            if st == FIT_SINGULAR:
                return bad + (REP_SINGULAR,)
        for b in (bd0, bn0, bd1, bn1):
            if np.max(np.abs(b)) > SEPARATION_BOUND:
                return bad + (REP_SEPARATED,)

        pd0 = 1.0 / (1.0 + np.exp(-(xd0 @ bd0)))
        pn0 = 1.0 / (1.0 + np.exp(-(xn0 @ bn0)))
        pd1 = 1.0 / (1.0 + np.exp(-(xd1 @ bd1)))
        pn1 = 1.0 / (1.0 + np.exp(-(xn1 @ bn1)))
        pd0a = np.where(a0 == 1.0, pd0, 1.0 - pd0)
        pn0a = np.where(a0 == 1.0, pn0, 1.0 - pn0)
        pd1a = np.where(a1 == 1.0, pd1, 1.0 - pd1)
        pn1a = np.where(a1 == 1.0, pn1, 1.0 - pn1)
        if np.min(pd0a) < POSITIVITY_FLOOR or np.min(pd1a) < POSITIVITY_FLOOR:
            return bad + (REP_POSITIVITY,)
        sw = (pn0a / pd0a) * (pn1a / pd1a)

        xm = np.empty((n, 3))
        xm[:, 0] = ones
        xm[:, 1] = a0
        xm[:, 2] = a1
        bm, _, _, st4 = fit_logistic(xm, y, sw, FIT_TOL, FIT_MAX_ITER)
        if st4 == FIT_SINGULAR:
            return bad + (REP_SINGULAR,)
        if np.max(np.abs(bm)) > SEPARATION_BOUND:
            return bad + (REP_SEPARATED,)
        p11 = 1.0 / (1.0 + np.exp(-(bm[0] + bm[1] + bm[2])))
        p00 = 1.0 / (1.0 + np.exp(-bm[0]))
        if (
            p00 < BOUNDARY_FLOOR
            or p00 > 1.0 - BOUNDARY_FLOOR
            or p11 < BOUNDARY_FLOOR
            or p11 > 1.0 - BOUNDARY_FLOOR
        ):
            return bad + (REP_DEGENERATE,)
        status = REP_OK
        for st in (st0, st1, st2, st3, st4):
            if st == FIT_MAXITER:
                status = REP_NOT_CONVERGED
        return p11 / p00, p11, p00, sw.mean(), sw.max(), status

    return rr_pipeline


def _make_bootstrap(rr_pipeline):
    def bootstrap_rrs(l0, a0, l1, a1, y, idx):
        # idx holds one row of resample indices per replicate
        reps = idx.shape[0]
        rr = np.empty(reps)
        status = np.empty(reps, np.int64)
        for j in range(reps):
            k = idx[j]
            out = rr_pipeline(l0[k], a0[k], l1[k], a1[k], y[k])
            rr[j] = out[0]
            status[j] = out[5]
        return rr, status

    return bootstrap_rrs


class Backend(NamedTuple):
    name: str
    fit_logistic: Callable
    rr_pipeline: Callable
    bootstrap_rrs: Callable


def _build_numpy() -> Backend:
    fit = _make_fit(_chol_solve)
    rr = _make_rr_pipeline(fit)
    return Backend("numpy", fit, rr, _make_bootstrap(rr))


def _build_numba() -> Optional[Backend]:
    try:
        from numba import njit
    except ImportError:
        return None
    # closures cannot be cached, so each process pays a one-time JIT cost
    chol = njit(cache=False)(_chol_solve)
    fit = njit(cache=False)(_make_fit(chol))
    rr = njit(cache=False)(_make_rr_pipeline(fit))
    boot = njit(cache=False)(_make_bootstrap(rr))
    return Backend("numba", fit, rr, boot)


NUMPY_BACKEND = _build_numpy()
NUMBA_BACKEND = _build_numba()


def get_backend(name: str) -> Backend:
    """Fetch a backend by name, independent of the active selection."""
    if name == "numpy":
        return NUMPY_BACKEND
    if name == "numba":
        if NUMBA_BACKEND is None:
            raise RuntimeError("numba backend requested but numba is not importable")
        return NUMBA_BACKEND
    raise ValueError(f"unknown backend {name!r}; expected 'numpy' or 'numba'")


def _select_backend() -> Backend:
    choice = os.environ.get("EVTV_BACKEND", "").strip().lower()
    if choice == "":
        return NUMBA_BACKEND if NUMBA_BACKEND is not None else NUMPY_BACKEND
    return get_backend(choice)


ACTIVE_BACKEND = _select_backend()


def active_backend() -> Backend:
    return ACTIVE_BACKEND
