"""ARIMA fitting by conditional sum of squares with AIC order selection.

Deliberately dependency-free estimation: CSS residual recursion plus a
Nelder-Mead refinement, jitted with numba so a per-asset-per-day fit stays in
the tens of microseconds.  Pure AR candidates (q = 0) are solved exactly by
least squares; only candidates with an MA part need the simplex.

The order grid is small on purpose: p, q in {0, 1, 2}, d in {0, 1}, no
seasonal terms (daily residual returns have none).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ArimaFitError, ContractError

logger = logging.getLogger(__name__)

MIN_EXTRA_OBS = 20  # window must hold at least this many points beyond p+q+d

_OK = 0
_DEGENERATE = 1
_UNSTABLE = 2
_NONFINITE = 3

_STATUS_TEXT = {
    _DEGENERATE: "degenerate (constant) series",
    _UNSTABLE: "explosive or non-invertible coefficients",
    _NONFINITE: "non-finite objective",
}


@dataclass(frozen=True)
class ArimaOrder:
    p: int
    d: int
    q: int

    def __post_init__(self):
        if self.p not in (0, 1, 2) or self.q not in (0, 1, 2):
            raise ContractError(f"p and q must be in {{0,1,2}}, got ({self.p},{self.q})")
        if self.d not in (0, 1):
            raise ContractError(f"d must be in {{0,1}}, got {self.d}")


DEFAULT_ORDER_GRID: tuple[ArimaOrder, ...] = tuple(
    ArimaOrder(p, d, q) for d in (0, 1) for p in (0, 1, 2) for q in (0, 1, 2)
)


@dataclass(frozen=True)
class ArimaFit:
    order: ArimaOrder
    ar_coeffs: np.ndarray
    ma_coeffs: np.ndarray
    intercept: float
    sigma2: float
    aic: float
    loglik: float


@njit(cache=True, nogil=True)
def _region_penalty(vec, p, q):
    """Distance outside the stationarity/invertibility region (0 when inside).

    p, q <= 2, so the AR(2) triangle conditions cover every case; the MA
    polynomial 1 + t1 z + t2 z^2 maps onto the same triangle via (-t1, -t2).
    """
    pen = 0.0
    lim = 1.0 - 1e-6
    if p == 1:
        pen += max(0.0, abs(vec[1]) - lim)
    elif p == 2:
        a1 = vec[1]
        a2 = vec[2]
        pen += max(0.0, a1 + a2 - lim)
        pen += max(0.0, a2 - a1 - lim)
        pen += max(0.0, abs(a2) - lim)
    if q == 1:
        pen += max(0.0, abs(vec[1 + p]) - lim)
    elif q == 2:
        b1 = -vec[1 + p]
        b2 = -vec[2 + p]
        pen += max(0.0, b1 + b2 - lim)
        pen += max(0.0, b2 - b1 - lim)
        pen += max(0.0, abs(b2) - lim)
    return pen


@njit(cache=True, nogil=True)
def _css_ssr(vec, y, p, q):
    """Conditional sum of squares; huge penalty outside the stable region."""
    pen = _region_penalty(vec, p, q)
    if pen > 0.0:
        return 1e12 * (1.0 + pen)
    n = y.shape[0]
    c = vec[0]
    eps = np.zeros(n)
    ssr = 0.0
    for t in range(p, n):
        pred = c
        for i in range(p):
            pred += vec[1 + i] * y[t - 1 - i]
        for j in range(q):
            k = t - 1 - j
            if k >= 0:
                pred += vec[1 + p + j] * eps[k]
        e = y[t] - pred
        eps[t] = e
        ssr += e * e
    return ssr


@njit(cache=True, nogil=True)
def _nelder_mead(y, p, q, x0, steps, max_iter, ftol):
    ndim = x0.shape[0]
    npts = ndim + 1
    sim = np.empty((npts, ndim))
    fx = np.empty(npts)
    sim[0, :] = x0
    fx[0] = _css_ssr(x0, y, p, q)
    for i in range(ndim):
        pt = x0.copy()
        pt[i] += steps[i]
        sim[i + 1, :] = pt
        fx[i + 1] = _css_ssr(pt, y, p, q)

    for _ in range(max_iter):
        order = np.argsort(fx)
        sim = sim[order]
        fx = fx[order]
        if abs(fx[npts - 1] - fx[0]) <= ftol * (abs(fx[0]) + 1e-300):
            break
        centroid = np.zeros(ndim)
        for i in range(npts - 1):
            centroid += sim[i]
        centroid /= npts - 1

        xr = centroid + (centroid - sim[npts - 1])
        fr = _css_ssr(xr, y, p, q)
        if fr < fx[0]:
            xe = centroid + 2.0 * (centroid - sim[npts - 1])
            fe = _css_ssr(xe, y, p, q)
            if fe < fr:
                sim[npts - 1] = xe
                fx[npts - 1] = fe
            else:
                sim[npts - 1] = xr
                fx[npts - 1] = fr
        elif fr < fx[npts - 2]:
            sim[npts - 1] = xr
            fx[npts - 1] = fr
        else:
            if fr < fx[npts - 1]:
                xc = centroid + 0.5 * (xr - centroid)
            else:
                xc = centroid + 0.5 * (sim[npts - 1] - centroid)
            fc = _css_ssr(xc, y, p, q)
            if fc < min(fr, fx[npts - 1]):
                sim[npts - 1] = xc
                fx[npts - 1] = fc
            else:
                for i in range(1, npts):
                    sim[i] = sim[0] + 0.5 * (sim[i] - sim[0])
                    fx[i] = _css_ssr(sim[i], y, p, q)

    best = np.argmin(fx)
    return sim[best], fx[best]


@njit(cache=True, nogil=True)
def _fit_core(y, p, q):
    """Fit ARMA(p, q) with intercept on a differenced series.

    Returns (status, params[5], ssr) with params = [c, phi_1..p, theta_1..q].
    """
    params = np.zeros(5)
    n = y.shape[0]
    y0 = y[0]
    constant = True
    for t in range(n):
        if y[t] != y0:
            constant = False
            break
    if constant:
        return _DEGENERATE, params, 0.0

    mean = y.mean()
    sd = y.std()
    if not np.isfinite(sd) or sd <= 0.0:
        return _DEGENERATE, params, 0.0

    if p == 0 and q == 0:
        ssr = 0.0
        for t in range(n):
            e = y[t] - mean
            ssr += e * e
        params[0] = mean
        return _OK, params, ssr

    ndim = 1 + p + q
    x0 = np.zeros(ndim)
    x0[0] = mean
    sol = np.zeros(p + 1)
    sol[0] = mean
    if p > 0:
        rows = n - p
        X = np.ones((rows, p + 1))
        for t in range(rows):
            for i in range(p):
                X[t, 1 + i] = y[p + t - 1 - i]
        sol = np.linalg.lstsq(X, y[p:].copy(), rcond=-1.0)[0]
        x0[0] = sol[0]
        total = 0.0
        for i in range(p):
            phi = min(0.9, max(-0.9, sol[1 + i]))
            x0[1 + i] = phi
            total += abs(phi)
        if p == 2 and total > 0.95:
            shrink = 0.95 / total
            x0[1] *= shrink
            x0[2] *= shrink

    if q == 0:
        # pure AR: CSS is exactly least squares, reuse the solution unclamped
        x0[0] = sol[0]
        for i in range(p):
            x0[1 + i] = sol[1 + i]
        if _region_penalty(x0, p, q) > 0.0:
            return _UNSTABLE, params, 0.0
        ssr = _css_ssr(x0, y, p, q)
        if not np.isfinite(ssr):
            return _NONFINITE, params, 0.0
        for i in range(ndim):
            params[i] = x0[i]
        return _OK, params, ssr

    steps = np.empty(ndim)
    steps[0] = 0.1 * sd + 1e-12
    for i in range(1, ndim):
        steps[i] = 0.2
    xb, fb = _nelder_mead(y, p, q, x0, steps, 400, 1e-12)
    xb, fb = _nelder_mead(y, p, q, xb, steps * 0.05, 200, 1e-14)
    if not np.isfinite(fb):
        return _NONFINITE, params, 0.0
    if _region_penalty(xb, p, q) > 0.0 or fb >= 1e12:
        return _UNSTABLE, params, 0.0
    for i in range(ndim):
        params[i] = xb[i]
    return _OK, params, fb


@njit(cache=True, nogil=True)
def _one_step(y, params, p, q):
    """One-step-ahead mean forecast of the differenced series."""
    n = y.shape[0]
    c = params[0]
    eps = np.zeros(n)
    for t in range(p, n):
        pred = c
        for i in range(p):
            pred += params[1 + i] * y[t - 1 - i]
        for j in range(q):
            k = t - 1 - j
            if k >= 0:
                pred += params[1 + p + j] * eps[k]
        eps[t] = y[t] - pred
    fc = c
    for i in range(p):
        fc += params[1 + i] * y[n - 1 - i]
    for j in range(q):
        k = n - 1 - j
        if k >= 0:
            fc += params[1 + p + j] * eps[k]
    return fc


def _as_array(window) -> np.ndarray:
    values = getattr(window, "returns", window)
    arr = np.ascontiguousarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ContractError("window must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise ContractError("window contains non-finite values")
    return arr


def arima_fit(window, order: ArimaOrder) -> ArimaFit:
    """Fit one ARIMA(p, d, q) candidate on a context window.

    The series is differenced d times, then the ARMA part is estimated by
    conditional sum of squares.  AIC uses the Gaussian likelihood of the CSS
    residuals with k = p + q + 2 (intercept and innovation variance).
    """
    arr = _as_array(window)
    p, d, q = order.p, order.d, order.q
    min_len = MIN_EXTRA_OBS + p + q + d
    if arr.size < min_len:
        raise ContractError(f"window length {arr.size} < required {min_len} for {order}")

    y = np.diff(arr, n=d) if d else arr
    status, params, ssr = _fit_core(np.ascontiguousarray(y), p, q)
    if status != _OK:
        raise ArimaFitError(f"{order}: {_STATUS_TEXT[status]}")

    n_eff = y.size - p
    sigma2 = ssr / n_eff
    if sigma2 <= 0.0 or not math.isfinite(sigma2):
        raise ArimaFitError(f"{order}: zero innovation variance")
    loglik = -0.5 * n_eff * (math.log(2.0 * math.pi * sigma2) + 1.0)
    k = p + q + 2
    aic = 2.0 * k - 2.0 * loglik
    return ArimaFit(
        order=order,
        ar_coeffs=params[1 : 1 + p].copy(),
        ma_coeffs=params[1 + p : 1 + p + q].copy(),
        intercept=float(params[0]),
        sigma2=float(sigma2),
        aic=float(aic),
        loglik=float(loglik),
    )


def one_step_forecast(fit: ArimaFit, window) -> float:
    """Mean one-step-ahead forecast of the raw (undifferenced) series."""
    arr = _as_array(window)
    p, d, q = fit.order.p, fit.order.d, fit.order.q
    y = np.diff(arr, n=d) if d else arr
    params = np.zeros(5)
    params[0] = fit.intercept
    params[1 : 1 + p] = fit.ar_coeffs
    params[1 + p : 1 + p + q] = fit.ma_coeffs
    fc = _one_step(np.ascontiguousarray(y), params, p, q)
    return float(arr[-1] + fc) if d else float(fc)


def auto_arima_select(window, grid: tuple[ArimaOrder, ...] = DEFAULT_ORDER_GRID) -> ArimaFit | None:
    """Grid-search the order space, keeping the smallest-AIC successful fit.

    Ties resolve to the earliest order in the grid; None when every candidate
    fails (the caller degrades to a neutral forecast).
    """
    best: ArimaFit | None = None
    for order in grid:
        try:
            fit = arima_fit(window, order)
        except ArimaFitError:
            continue
        if best is None or fit.aic < best.aic:
            best = fit
    return best


def auto_arima_forecast(window, grid: tuple[ArimaOrder, ...] = DEFAULT_ORDER_GRID) -> float:
    """One-step forecast of the minimum-AIC model; 0.0 when no model fits."""
    best = auto_arima_select(window, grid)
    if best is None:
        logger.debug("auto-arima: all candidates failed, returning neutral forecast")
        return 0.0
    return one_step_forecast(best, window)
