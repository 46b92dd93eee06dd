"""Jackknife errors, shape statistics and autocorrelation estimates for
Monte Carlo sample sets."""

from __future__ import annotations

import numpy as np

from .errors import ValidationError


def jackknife_mean(samples: np.ndarray) -> tuple[float, float]:
    """Delete-1 jackknife mean and its standard error."""
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n < 2:
        raise ValidationError("jackknife needs at least 2 samples")
    mean = x.mean()
    loo = (mean * n - x) / (n - 1)
    err = np.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2))
    return float(mean), float(err)


def jackknife_variance(samples: np.ndarray) -> tuple[float, float]:
    """Delete-1 jackknife estimate of the population variance (ddof=1) and
    its standard error."""
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n < 3:
        raise ValidationError("variance jackknife needs at least 3 samples")
    mean = x.mean()
    ss = np.sum((x - mean) ** 2)
    var = ss / (n - 1)
    # delete-1 identities: ss_i = ss - (x_i - mean)^2 * n/(n-1)
    ss_loo = ss - (x - mean) ** 2 * n / (n - 1)
    var_loo = ss_loo / (n - 2)
    err = np.sqrt((n - 1) / n * np.sum((var_loo - var_loo.mean()) ** 2))
    return float(var), float(err)


def skewness(samples: np.ndarray) -> float:
    x = np.asarray(samples, dtype=float)
    c = x - x.mean()
    m2 = np.mean(c ** 2)
    if m2 == 0.0:
        return 0.0
    return float(np.mean(c ** 3) / m2 ** 1.5)


def excess_kurtosis(samples: np.ndarray) -> float:
    x = np.asarray(samples, dtype=float)
    c = x - x.mean()
    m2 = np.mean(c ** 2)
    if m2 == 0.0:
        return 0.0
    return float(np.mean(c ** 4) / m2 ** 2 - 3.0)


def integrated_autocorr_time(series: np.ndarray, window_factor: float = 5.0) -> float:
    """Integrated autocorrelation time with self-consistent windowing.

    tau(W) = 1/2 + sum_{s=1}^{W} rho(s), cut at the first W >= window_factor
    * tau(W).  Returns 0.5 for an uncorrelated (or constant) series.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < 4:
        raise ValidationError("autocorrelation needs at least 4 points")
    c = x - x.mean()
    var = np.mean(c * c)
    if var == 0.0:
        return 0.5
    # FFT autocovariance, normalized lags
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(c, m)
    acov = np.fft.irfft(f * np.conj(f), m)[:n] / np.arange(n, 0, -1)
    rho = acov / acov[0]
    tau = 0.5
    for s in range(1, n // 2):
        tau += rho[s]
        if s >= window_factor * tau:
            break
    return float(max(tau, 0.5))


def power_law_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Least-squares fit of y = c * x^e on log-log axes.

    Returns (exponent, exponent_stderr, log_prefactor).  Requires positive
    ordinates and at least 3 points.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3:
        raise ValidationError("power-law fit needs at least 3 points")
    if np.any(y <= 0) or np.any(x <= 0):
        raise ValidationError("power-law fit needs positive abscissae and ordinates")
    lx, ly = np.log(x), np.log(y)
    dx = lx - lx.mean()
    sxx = np.sum(dx * dx)
    slope = np.sum(dx * (ly - ly.mean())) / sxx
    intercept = ly.mean() - slope * lx.mean()
    resid = ly - (intercept + slope * lx)
    dof = max(x.size - 2, 1)
    slope_err = np.sqrt(np.sum(resid ** 2) / dof / sxx)
    return float(slope), float(slope_err), float(intercept)
