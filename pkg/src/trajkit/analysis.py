"""Post-processing: smoothing, saturation fits, order parameters, scaling laws.

Saturation times come from fitting a * exp(-t/b) + c to the (optionally
Gaussian-smoothed) time trace; the reported time is the fitted b.  When
the direct fit is poor the routine falls back to fitting the absolute
deviation |y - y_ss| from the steady-state value with the same form.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter1d
from scipy.optimize import curve_fit

from .errors import FitError

__all__ = [
    "SaturationFit",
    "OrderParameter",
    "CriticalPoint",
    "ScalingFit",
    "smooth_series",
    "smooth_and_fit_saturation",
    "order_parameters",
    "critical_point",
    "scaling_fit",
    "dominant_period",
]


@dataclass(frozen=True)
class SaturationFit:
    a: float
    b: float
    c: float
    mode: str              # 'direct' | 'absolute-deviation'
    residual: float        # rms residual of the chosen fit
    window: tuple          # (t0, t1) actually fitted
    stationary: bool       # amplitude negligible, tau undefined
    a_err: float = float("nan")
    b_err: float = float("nan")
    c_err: float = float("nan")

    @property
    def tau(self):
        return None if self.stationary else self.b


@dataclass(frozen=True)
class OrderParameter:
    kind: str              # 'steady-state' | 'dynamical'
    value: float
    window: tuple
    boundary: float        # the transient/steady split time 3*tau


@dataclass(frozen=True)
class CriticalPoint:
    value: float | None
    uncertainty: float
    inconclusive: bool
    reason: str = ""


@dataclass(frozen=True)
class ScalingFit:
    model: str             # 'constant' | 'log-power' | 'exponential'
    p: float
    p_err: float
    prefactor: float
    residual: float
    residuals_by_model: dict


def dominant_period(times, values) -> float | None:
    """Period of the strongest nonzero Fourier component, if pronounced.

    Returns None when the spectrum has no clear oscillation (peak less
    than five times the median spectral weight).
    """
    values = np.asarray(values, dtype=float)
    times = np.asarray(times, dtype=float)
    y = values - values.mean()
    if y.size < 8 or np.allclose(y, 0):
        return None
    spec = np.abs(np.fft.rfft(y)) ** 2
    freq = np.fft.rfftfreq(y.size, d=times[1] - times[0])
    spec[0] = 0.0
    k = int(np.argmax(spec))
    if freq[k] == 0 or spec[k] < 5.0 * np.median(spec[1:]):
        return None
    return 1.0 / freq[k]


def smooth_series(times, values, sigma: float) -> np.ndarray:
    """Gaussian smoothing with reflect padding; sigma in time units."""
    times = np.asarray(times, dtype=float)
    dt = times[1] - times[0]
    return gaussian_filter1d(np.asarray(values, float), sigma / dt, mode="reflect")


def _exp_model(t, a, b, c):
    return a * np.exp(-t / b) + c


def _fit_exponential(t, y):
    c0 = float(np.mean(y[int(0.8 * y.size):]))
    a0 = float(y[0] - c0)
    if a0 != 0.0:
        target = c0 + a0 / math.e
        crossing = np.nonzero((y - target) * np.sign(a0) <= 0)[0]
        b0 = float(t[crossing[0]]) if crossing.size else float(t[-1] / 3.0)
    else:
        b0 = float(t[-1] / 3.0)
    b0 = max(b0, float(t[1] - t[0]))
    guess = (a0, b0, c0)
    try:
        popt, pcov = curve_fit(
            _exp_model, t, y, p0=guess,
            bounds=([-np.inf, 1e-12, -np.inf], [np.inf, np.inf, np.inf]),
            maxfev=20000,
        )
    except RuntimeError as exc:
        resid = float(np.sqrt(np.mean((y - _exp_model(t, *guess)) ** 2)))
        raise FitError(
            f"exponential fit did not converge: {exc}",
            initial_guess=guess, residual=resid,
        ) from exc
    resid = float(np.sqrt(np.mean((y - _exp_model(t, *popt)) ** 2)))
    perr = np.sqrt(np.abs(np.diag(pcov)))
    return popt, perr, resid, guess


def smooth_and_fit_saturation(times, values, sigma: float | None = None,
                              skip_fraction: float = 0.0) -> SaturationFit:
    """Smooth a trace and fit its relaxation toward the steady value.

    sigma defaults to the dominant oscillation period when one is
    detected, else five output steps.  The direct fit is replaced by the
    absolute-deviation variant (fit of |y - y_ss|) when its residual is
    more than twice the alternative's.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if sigma is None:
        period = dominant_period(times, values)
        sigma = period if period is not None else 5.0 * (times[1] - times[0])
    if times[-1] - times[0] < 5.0 * sigma:
        raise ValueError("series shorter than five smoothing widths")
    smooth = smooth_series(times, values, sigma)
    i0 = int(skip_fraction * times.size)
    t, y = times[i0:], smooth[i0:]

    popt_d, perr_d, resid_d, guess = _fit_exponential(t, y)
    y_ss = float(np.mean(y[int(0.8 * y.size):]))
    dev = np.abs(y - y_ss)
    try:
        popt_a, perr_a, resid_a, _ = _fit_exponential(t, dev)
    except FitError:
        popt_a, perr_a, resid_a = None, None, np.inf

    if popt_a is not None and resid_d > 2.0 * resid_a:
        popt, perr, resid, mode = popt_a, perr_a, resid_a, "absolute-deviation"
    else:
        popt, perr, resid, mode = popt_d, perr_d, resid_d, "direct"

    scale = max(np.max(np.abs(y)), np.ptp(y), 1e-30)
    stationary = abs(popt[0]) < 1e-3 * scale
    return SaturationFit(
        a=float(popt[0]), b=float(popt[1]), c=float(popt[2]), mode=mode,
        residual=resid, window=(float(t[0]), float(t[-1])),
        stationary=bool(stationary),
        a_err=float(perr[0]), b_err=float(perr[1]), c_err=float(perr[2]),
    )


def order_parameters(times, values, tau: float):
    """Steady-state and dynamical time averages split at T = 3 tau.

    The steady-state order parameter averages over [3 tau, t_f], the
    dynamical one over [0, 3 tau].
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    boundary = 3.0 * tau
    if times[-1] <= boundary:
        raise ValueError(
            f"series ends at t={times[-1]:.4g} before the window boundary "
            f"3 tau = {boundary:.4g}"
        )
    late = times >= boundary
    early = times <= boundary
    ss = float(np.trapezoid(values[late], times[late])
               / (times[late][-1] - times[late][0]))
    dyn = float(np.trapezoid(values[early], times[early])
                / (times[early][-1] - times[early][0]))
    return (
        OrderParameter("steady-state", ss, (boundary, float(times[-1])), boundary),
        OrderParameter("dynamical", dyn, (0.0, boundary), boundary),
    )


def critical_point(x, y) -> CriticalPoint:
    """Location of the maximum derivative of a scan curve.

    Centered finite differences plus a parabolic refinement of the peak;
    the quoted uncertainty is one grid spacing.  A peak on the grid
    boundary or a featureless derivative is reported as inconclusive.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 7:
        raise ValueError("need at least 7 grid points")
    dy = np.gradient(y, x)
    spacing = float(np.mean(np.diff(x)))
    k = int(np.argmax(dy))
    if k == 0 or k == x.size - 1:
        return CriticalPoint(None, spacing, True, "derivative peak on boundary")
    if not np.isfinite(dy[k]) or np.ptp(dy) <= 0:
        return CriticalPoint(None, spacing, True, "featureless derivative")
    # parabola through the three points around the maximum
    d0, d1, d2 = dy[k - 1], dy[k], dy[k + 1]
    denom = d0 - 2.0 * d1 + d2
    shift = 0.0 if denom == 0 else 0.5 * (d0 - d2) / denom
    shift = float(np.clip(shift, -1.0, 1.0))
    return CriticalPoint(float(x[k] + shift * spacing), spacing, False)


_SCALING_MODELS = ("constant", "log-power", "exponential")


def scaling_fit(sizes, values, candidates=_SCALING_MODELS) -> ScalingFit:
    """Fit tau(N) against constant, A ln^p N, or A exp(p N) laws.

    Least squares in log tau coordinates for every candidate; the winner
    is the model with the smallest residual sum.  ``p`` carries the OLS
    standard error.
    """
    sizes = np.asarray(sizes, dtype=float)
    values = np.asarray(values, dtype=float)
    if sizes.size < 4:
        raise ValueError("need at least 4 sizes")
    if np.any(values <= 0):
        raise ValueError("scaling fits need positive values")
    logv = np.log(values)
    fits = {}
    for model in candidates:
        if model == "constant":
            pred = np.full_like(logv, logv.mean())
            p, perr, pref = 0.0, 0.0, float(np.exp(logv.mean()))
        else:
            if model == "log-power":
                if np.any(sizes <= 1.0):
                    continue
                xs = np.log(np.log(sizes))
            else:
                xs = sizes
            a = np.vstack([np.ones_like(xs), xs]).T
            coef, rss, *_ = np.linalg.lstsq(a, logv, rcond=None)
            pred = a @ coef
            dof = max(logv.size - 2, 1)
            sigma2 = float(np.sum((logv - pred) ** 2)) / dof
            cov = sigma2 * np.linalg.inv(a.T @ a)
            p, perr = float(coef[1]), float(np.sqrt(cov[1, 1]))
            pref = float(np.exp(coef[0]))
        rss = float(np.sum((logv - pred) ** 2))
        fits[model] = (p, perr, pref, rss)
    if not fits:
        raise FitError("no candidate model applicable")
    best = min(fits, key=lambda m: fits[m][3])
    p, perr, pref, rss = fits[best]
    if best != "constant" and not np.isfinite(perr):
        raise FitError("degenerate scaling fit", residual=rss)
    return ScalingFit(
        model=best, p=p, p_err=perr, prefactor=pref, residual=rss,
        residuals_by_model={m: v[3] for m, v in fits.items()},
    )
