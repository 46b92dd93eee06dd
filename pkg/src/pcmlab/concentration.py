"""Empirical study of the pushforward distribution of t(O): moments of Haar
sample campaigns, comparison of the mean against its closed form, and
power-law fits of the variance against N or the lattice side."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .lattice import Dispersion, LatticeSpec, build_lattice
from .orthogonal import SpectrumEnsemble, spectrum_ensemble
from .rngstreams import sample_stream
from .spectral import assemble_K, sample_multiplier_field, t0_closed_form, t_of_O
from .stats import (excess_kurtosis, jackknife_mean, jackknife_variance,
                    power_law_fit, skewness)


@dataclass(frozen=True)
class EmpiricalMoments:
    """Sample moments of a t-campaign with jackknife standard errors."""

    sample_count: int
    mean: float
    variance: float
    mean_stderr: float
    variance_stderr: float
    skewness: float
    excess_kurtosis: float

    @classmethod
    def from_samples(cls, samples: np.ndarray) -> "EmpiricalMoments":
        x = np.asarray(samples, dtype=float)
        mean, mean_err = jackknife_mean(x)
        var, var_err = jackknife_variance(x)
        return cls(
            sample_count=x.size,
            mean=mean,
            variance=var,
            mean_stderr=mean_err,
            variance_stderr=var_err,
            skewness=skewness(x),
            excess_kurtosis=excess_kurtosis(x),
        )


def _t_sample(seed: int, point_index: int, sample_index: int,
              side: int, volume: float, kind: str, mu: float,
              eigenvalues: np.ndarray) -> float:
    lattice = build_lattice(side, volume)
    spectrum = spectrum_ensemble(eigenvalues)
    rng = sample_stream(seed, point_index, sample_index)
    field = sample_multiplier_field(lattice, spectrum, rng)
    return t_of_O(assemble_K(lattice, Dispersion(kind), mu, field))


def t_samples(lattice: LatticeSpec, spectrum: SpectrumEnsemble, mu: float,
              n_samples: int, seed: int, point_index: int = 0,
              dispersion: Dispersion = Dispersion(),
              workers: int = 1) -> np.ndarray:
    """Independent draws of t(O), one Haar multiplier field per sample.

    Sample i uses the stream derived from (seed, point_index, i), so the
    returned array is identical for any worker count.
    """
    if n_samples < 1:
        raise ValidationError(f"need at least one sample, got {n_samples}")
    args = [(seed, point_index, i, lattice.side, lattice.volume,
             dispersion.kind, mu, spectrum.eigenvalues)
            for i in range(n_samples)]
    if workers <= 1:
        values = [_t_sample(*a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(_t_sample, *zip(*args), chunksize=8))
    return np.asarray(values)


def sample_t_distribution(lattice: LatticeSpec, spectrum: SpectrumEnsemble,
                          mu: float, n_samples: int, seed: int,
                          point_index: int = 0,
                          dispersion: Dispersion = Dispersion(),
                          workers: int = 1) -> EmpiricalMoments:
    """Moments of the empirical t distribution at one parameter point."""
    if n_samples < 50:
        raise ValidationError(f"need at least 50 samples, got {n_samples}")
    if not mu + float(np.min(spectrum.eigenvalues)) > 0:
        raise ValidationError("mu + min(Mhat) must be positive")
    samples = t_samples(lattice, spectrum, mu, n_samples, seed,
                        point_index=point_index, dispersion=dispersion,
                        workers=workers)
    return EmpiricalMoments.from_samples(samples)


@dataclass(frozen=True)
class MeanCheck:
    gap: float
    gap_in_stderr: float


def mean_vs_t0(moments: EmpiricalMoments, lattice: LatticeSpec,
               dispersion: Dispersion, mu: float, mbar: float) -> MeanCheck:
    """Distance of the empirical mean from the closed-form target, in
    absolute units and in units of the mean's standard error."""
    gap = abs(moments.mean - t0_closed_form(lattice, dispersion, mu, mbar))
    if moments.mean_stderr > 0:
        in_err = gap / moments.mean_stderr
    else:
        in_err = 0.0 if gap == 0.0 else np.inf
    return MeanCheck(gap=gap, gap_in_stderr=in_err)


@dataclass(frozen=True)
class ScalingFit:
    axis: str
    abscissae: np.ndarray
    ordinates: np.ndarray
    exponent: float
    exponent_stderr: float


def variance_scaling_fit(runs, axis: str) -> ScalingFit:
    """Log-log least-squares fit of campaign variances along one axis.

    `runs` is a list of (abscissa, EmpiricalMoments) pairs with everything
    else held fixed; targets are exponent -2 for axis 'N' and -4 for axis
    'side'.
    """
    if axis not in ("N", "side"):
        raise ValidationError(f"axis must be 'N' or 'side', got {axis!r}")
    if len(runs) < 3:
        raise ValidationError("need at least 3 runs along the axis")
    xs = np.array([float(x) for x, _ in runs])
    ys = np.array([m.variance if isinstance(m, EmpiricalMoments) else float(m)
                   for _, m in runs])
    if np.any(ys <= 0):
        raise ValidationError("every run must have a positive variance")
    exponent, err, _ = power_law_fit(xs, ys)
    return ScalingFit(axis=axis, abscissae=xs, ordinates=ys,
                      exponent=exponent, exponent_stderr=err)


@dataclass(frozen=True)
class GaussianityReport:
    skewness: float
    excess_kurtosis: float
    both_small: bool


SKEWNESS_THRESHOLD = 0.2
KURTOSIS_THRESHOLD = 0.5


def gaussianity_report(moments: EmpiricalMoments) -> GaussianityReport:
    """Flag whether the sampled distribution is near-Gaussian in shape."""
    if moments.sample_count < 500:
        raise ValidationError(
            f"gaussianity check needs >= 500 samples, got {moments.sample_count}"
        )
    small = (abs(moments.skewness) < SKEWNESS_THRESHOLD
             and abs(moments.excess_kurtosis) < KURTOSIS_THRESHOLD)
    return GaussianityReport(skewness=moments.skewness,
                             excess_kurtosis=moments.excess_kurtosis,
                             both_small=small)
