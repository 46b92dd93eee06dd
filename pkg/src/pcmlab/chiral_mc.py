"""Metropolis simulation of the lattice O(N) principal chiral model.

The field is one orthogonal matrix per site with action

    S = (N / lambda) sum_{x, mu} Tr[ I - phi^T(x) phi(x + mu) ],

sampled by single-site updates: Givens rotations of a random coordinate pair
acting from the left (angle uniform in (-eps, eps), adaptively tuned), with a
row-sign reflector sweep on a fixed cadence so both connected components of
O(N) are reached.  Observables are the zero-spatial-momentum correlator of
(1/N) Tr[phi^T(x) phi(y)] with vacuum subtraction, jackknife errors, and a
cosh effective mass with a correlated plateau fit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import NumericalError, ValidationError
from .lattice import LatticeSpec
from .orthogonal import sample_haar
from .stats import integrated_autocorr_time

ADAPT_BLOCK = 50          # sweeps per proposal-angle adaptation step
ACCEPTANCE_WINDOW = (0.4, 0.6)


@dataclass
class McParams:
    """Simulation parameters; counts are in sweeps."""

    n_colors: int
    coupling: float
    lattice: LatticeSpec
    thermalization: int = 1000
    measurements: int = 200
    spacing: int = 10
    proposal_angle: float = 0.5
    reortho_interval: int = 100
    reflect_every: int = 10
    hits_per_site: int = 1
    seed: int = 0
    chain_index: int = 0
    cold_start: bool = True
    adapt_proposal: bool = True

    def __post_init__(self):
        if self.n_colors < 1:
            raise ValidationError("n_colors must be >= 1")
        if not self.coupling > 0:
            raise ValidationError("coupling must be positive")
        for name in ("thermalization", "measurements", "spacing",
                     "reortho_interval", "reflect_every", "hits_per_site"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be a positive count")
        if not 0.0 < self.proposal_angle < np.pi:
            raise ValidationError("proposal angle must lie in (0, pi)")


@dataclass
class FieldConfig:
    """Per-site orthogonal matrices, site-major layout (n_sites, N, N)."""

    lattice: LatticeSpec
    phi: np.ndarray

    @classmethod
    def cold(cls, lattice: LatticeSpec, n_colors: int) -> "FieldConfig":
        phi = np.broadcast_to(np.eye(n_colors),
                              (lattice.n_sites, n_colors, n_colors)).copy()
        return cls(lattice=lattice, phi=phi)

    @classmethod
    def hot(cls, lattice: LatticeSpec, n_colors: int,
            rng: np.random.Generator) -> "FieldConfig":
        return cls(lattice=lattice,
                   phi=sample_haar(n_colors, rng, size=lattice.n_sites))

    def orthogonality_drift(self) -> float:
        n = self.phi.shape[-1]
        gram = np.einsum("xab,xac->xbc", self.phi, self.phi)
        return float(np.max(np.abs(gram - np.eye(n))))

    def reorthogonalize(self) -> None:
        """Project every site onto its nearest orthogonal matrix (polar
        projection; preserves the O(N) component of each site)."""
        u, _, vt = np.linalg.svd(self.phi)
        self.phi = u @ vt


def neighbor_table(side: int) -> np.ndarray:
    """(n_sites, 4) indices of +0, -0, +1, -1 neighbours on the torus."""
    i, j = np.divmod(np.arange(side * side), side)
    return np.stack([
        ((i + 1) % side) * side + j,
        ((i - 1) % side) * side + j,
        i * side + (j + 1) % side,
        i * side + (j - 1) % side,
    ], axis=1)


def action(config: FieldConfig, params: McParams) -> float:
    """S = (N/lambda) sum_{x,mu} (N - Tr[phi^T(x) phi(x+mu)]); nonnegative,
    zero only for a constant field."""
    side = config.lattice.side
    n = params.n_colors
    phi4 = config.phi.reshape(side, side, n, n)
    s = 0.0
    for axis in (0, 1):
        s += np.einsum("ijab,ijab->", phi4, np.roll(phi4, -1, axis=axis))
    n_links = 2 * config.lattice.n_sites
    return params.n_colors / params.coupling * (n_links * n - s)


@dataclass
class SweepResult:
    acceptance_rate: float


def _checkerboard(side: int) -> tuple[np.ndarray, np.ndarray]:
    i, j = np.divmod(np.arange(side * side), side)
    black = (i + j) % 2 == 0
    return np.flatnonzero(black), np.flatnonzero(~black)


def _batched_updates(phi: np.ndarray, sites: np.ndarray, s_nb: np.ndarray,
                     beta: float, proposal_angle: float, hits: int,
                     use_reflect: bool, rng: np.random.Generator) -> int:
    """Metropolis proposals on a set of sites whose neighbour sums are frozen.

    Successive hits reuse the same neighbour sums, which stays exact because
    only the visited sites change.  Returns the number of accepted proposals.
    """
    m = sites.size
    n = phi.shape[-1]
    block = phi[sites]
    idx = np.arange(m)
    rows_a = rng.integers(0, n, size=(hits, m))
    if not use_reflect:
        rows_b = rng.integers(0, n - 1, size=(hits, m))
        rows_b = rows_b + (rows_b >= rows_a)
        angles = rng.uniform(-proposal_angle, proposal_angle, size=(hits, m))
    uniforms = rng.random((hits, m))

    accepted = 0
    for h in range(hits):
        i = rows_a[h]
        sb_i = s_nb[idx, i]
        if use_reflect:
            d_s = 2.0 * beta * np.sum(block[idx, i] * sb_i, axis=1)
            acc = (d_s <= 0.0) | (uniforms[h] < np.exp(-np.minimum(d_s, 700.0)))
            flip = idx[acc]
            block[flip, i[acc]] *= -1.0
        else:
            j = rows_b[h]
            c = np.cos(angles[h])[:, None]
            s = np.sin(angles[h])[:, None]
            row_i = block[idx, i]
            row_j = block[idx, j]
            new_i = c * row_i - s * row_j
            new_j = s * row_i + c * row_j
            sb_j = s_nb[idx, j]
            d_s = -beta * (np.sum((new_i - row_i) * sb_i, axis=1)
                           + np.sum((new_j - row_j) * sb_j, axis=1))
            acc = (d_s <= 0.0) | (uniforms[h] < np.exp(-np.minimum(d_s, 700.0)))
            take = idx[acc]
            block[take, i[acc]] = new_i[acc]
            block[take, j[acc]] = new_j[acc]
        accepted += int(np.count_nonzero(acc))
    phi[sites] = block
    return accepted


def metropolis_sweep(config: FieldConfig, params: McParams,
                     rng: np.random.Generator, proposal_angle: float,
                     reflect: bool = False) -> SweepResult:
    """One pass over all sites, `hits_per_site` proposals each.

    Rotation hits left-multiply phi(x) by a Givens rotation on a random
    coordinate pair; reflector hits flip the sign of one random row, which
    moves between the two components of O(N).  Each proposal is accepted with
    min(1, exp(-dS)), giving detailed balance with respect to exp(-S) times
    the invariant measure.  Even-sided lattices are swept checkerboard-wise
    so each half updates in one vectorized batch (the torus is bipartite
    there); odd sides fall back to a site-by-site raster pass.
    """
    phi = config.phi
    n = phi.shape[-1]
    side = config.lattice.side
    nbr = neighbor_table(side)
    beta = params.n_colors / params.coupling
    use_reflect = reflect or n == 1
    hits = params.hits_per_site

    accepted = 0
    if side % 2 == 0:
        for sites in _checkerboard(side):
            s_nb = (phi[nbr[sites, 0]] + phi[nbr[sites, 1]]
                    + phi[nbr[sites, 2]] + phi[nbr[sites, 3]])
            accepted += _batched_updates(phi, sites, s_nb, beta,
                                         proposal_angle, hits, use_reflect, rng)
    else:
        for x in range(side * side):
            sites = np.array([x])
            s_nb = (phi[nbr[x, 0]] + phi[nbr[x, 1]]
                    + phi[nbr[x, 2]] + phi[nbr[x, 3]])[None]
            accepted += _batched_updates(phi, sites, s_nb, beta,
                                         proposal_angle, hits, use_reflect, rng)
    return SweepResult(acceptance_rate=accepted / (side * side * hits))


def _slice_matrices(config: FieldConfig, n: int) -> np.ndarray:
    """A(t): spatial average of phi over each fixed-t line, shape (L, N, N)."""
    side = config.lattice.side
    return config.phi.reshape(side, side, n, n).mean(axis=1)


def _slice_correlator(slices: np.ndarray) -> np.ndarray:
    """c(r) = (1/(L N)) sum_t Tr[A^T(t) A(t+r)] for r = 0..L-1."""
    L, n = slices.shape[0], slices.shape[-1]
    return np.array([
        np.einsum("tab,tab->", slices, np.roll(slices, -r, axis=0)) / (L * n)
        for r in range(L)
    ])


@dataclass
class SimulationRun:
    """Raw output of one Markov chain."""

    params: McParams
    proposal_angle: float
    acceptance_thermalization: float
    acceptance_measurement: float
    energies: np.ndarray            # action density, one entry per sweep
    slice_correlators: np.ndarray   # (measurements, L)
    vacuum_matrices: np.ndarray     # (measurements, N, N)
    tau_int_sweeps: float
    final_drift: float


def run_simulation(params: McParams) -> SimulationRun:
    """Thermalize, adapt the proposal angle, then measure on a fixed cadence.

    All randomness stems from (seed, chain_index) via one derived stream.
    """
    ss = np.random.SeedSequence(params.seed, spawn_key=(params.chain_index,))
    rng = np.random.default_rng(ss)
    n = params.n_colors
    if params.cold_start:
        config = FieldConfig.cold(params.lattice, n)
    else:
        config = FieldConfig.hot(params.lattice, n, rng)

    eps = params.proposal_angle
    sweep_count = 0
    acc_hist: list[float] = []
    acc_therm = []
    for _ in range(params.thermalization):
        reflect = sweep_count % params.reflect_every == params.reflect_every - 1
        res = metropolis_sweep(config, params, rng, eps, reflect=reflect)
        sweep_count += 1
        acc_therm.append(res.acceptance_rate)
        if not reflect:
            acc_hist.append(res.acceptance_rate)
        if params.adapt_proposal and len(acc_hist) >= ADAPT_BLOCK:
            mean_acc = float(np.mean(acc_hist))
            if mean_acc < ACCEPTANCE_WINDOW[0]:
                eps = max(eps * 0.8, 1e-3)
            elif mean_acc > ACCEPTANCE_WINDOW[1]:
                eps = min(eps * 1.25, np.pi * (1.0 - 1e-9))
            acc_hist.clear()
        if sweep_count % params.reortho_interval == 0:
            config.reorthogonalize()

    energies = []
    correlators = []
    vacua = []
    acc_meas = []
    for _ in range(params.measurements):
        for _ in range(params.spacing):
            reflect = sweep_count % params.reflect_every == params.reflect_every - 1
            res = metropolis_sweep(config, params, rng, eps, reflect=reflect)
            sweep_count += 1
            acc_meas.append(res.acceptance_rate)
            energies.append(action(config, params) / config.lattice.n_sites)
            if sweep_count % params.reortho_interval == 0:
                config.reorthogonalize()
        slices = _slice_matrices(config, n)
        correlators.append(_slice_correlator(slices))
        vacua.append(slices.mean(axis=0))

    energy_arr = np.asarray(energies)
    if energy_arr.size < 4 or np.ptp(energy_arr) == 0:
        tau = 0.5
    else:
        tau = integrated_autocorr_time(energy_arr)
    return SimulationRun(
        params=params,
        proposal_angle=eps,
        acceptance_thermalization=float(np.mean(acc_therm)) if acc_therm else 1.0,
        acceptance_measurement=float(np.mean(acc_meas)) if acc_meas else 1.0,
        energies=energy_arr,
        slice_correlators=np.asarray(correlators),
        vacuum_matrices=np.asarray(vacua),
        tau_int_sweeps=float(tau),
        final_drift=config.orthogonality_drift(),
    )


@dataclass
class CorrelatorEstimate:
    """Connected zero-momentum correlator on r = 0..L/2 with jackknife errors."""

    separations: np.ndarray
    values: np.ndarray
    errors: np.ndarray
    jackknife_values: np.ndarray    # (measurements, len(separations))
    tau_int_sweeps: float
    n_measurements: int

    @classmethod
    def synthetic(cls, values: np.ndarray) -> "CorrelatorEstimate":
        """Exact correlator with zero errors, for closed-form checks."""
        values = np.asarray(values, dtype=float)
        nr = values.size
        return cls(
            separations=np.arange(nr),
            values=values,
            errors=np.zeros(nr),
            jackknife_values=np.tile(values, (2, 1)),
            tau_int_sweeps=0.5,
            n_measurements=2,
        )


def _connected_symmetrized(correlators: np.ndarray, vacua: np.ndarray,
                           n_colors: int) -> np.ndarray:
    """Vacuum-subtracted, reflection-averaged correlator from mean rows."""
    L = correlators.shape[-1]
    cbar = correlators.mean(axis=0)
    vac = vacua.mean(axis=0)
    conn = cbar - np.sum(vac * vac) / n_colors
    half = L // 2
    out = np.empty(half + 1)
    for r in range(half + 1):
        out[r] = 0.5 * (conn[r] + conn[(L - r) % L])
    return out


def measure_correlator(run: SimulationRun,
                       min_measurements: int = 100) -> CorrelatorEstimate:
    """Build the connected correlator with jackknife errors.

    Requires at least `min_measurements` entries and a measurement spacing
    exceeding twice the integrated autocorrelation time of the energy;
    insufficient decorrelation raises instead of silently passing through.
    """
    n_meas = run.slice_correlators.shape[0]
    if n_meas < min_measurements:
        raise ValidationError(
            f"need >= {min_measurements} measurements, got {n_meas}"
        )
    if run.params.spacing <= 2.0 * run.tau_int_sweeps:
        raise NumericalError(
            f"measurements are insufficiently decorrelated: spacing "
            f"{run.params.spacing} sweeps vs integrated autocorrelation "
            f"time {run.tau_int_sweeps:.2f} sweeps"
        )
    n = run.params.n_colors
    full = _connected_symmetrized(run.slice_correlators, run.vacuum_matrices, n)
    jack = np.empty((n_meas, full.size))
    mask = np.ones(n_meas, dtype=bool)
    for m in range(n_meas):
        mask[m] = False
        jack[m] = _connected_symmetrized(run.slice_correlators[mask],
                                         run.vacuum_matrices[mask], n)
        mask[m] = True
    errors = np.sqrt((n_meas - 1) / n_meas
                     * np.sum((jack - jack.mean(axis=0)) ** 2, axis=0))
    return CorrelatorEstimate(
        separations=np.arange(full.size),
        values=full,
        errors=errors,
        jackknife_values=jack,
        tau_int_sweeps=run.tau_int_sweeps,
        n_measurements=n_meas,
    )


def _cosh_mass(ratio: float, r: int, period: int) -> float:
    """Solve cosh(m (r - T/2)) / cosh(m (r + 1 - T/2)) = ratio for m >= 0."""
    if not np.isfinite(ratio) or ratio <= 1.0:
        return 0.0

    def g(m: float) -> float:
        return (np.cosh(m * (r - period / 2.0))
                / np.cosh(m * (r + 1 - period / 2.0)) - ratio)

    hi = 1.0
    while g(hi) < 0 and hi < 64.0:
        hi *= 2.0
    if g(hi) < 0:
        return np.nan
    return float(brentq(g, 0.0, hi, xtol=1e-12, rtol=1e-12))


@dataclass
class EffectiveMassResult:
    separations: np.ndarray
    values: np.ndarray
    errors: np.ndarray
    plateau: float
    plateau_error: float
    window: tuple[int, int]


def effective_mass(corr: CorrelatorEstimate,
                   fit_window: tuple[int, int] | None = None) -> EffectiveMassResult:
    """Cosh-corrected effective mass and its correlated plateau fit.

    m_eff(r) solves C(r)/C(r+1) against the symmetric-lattice cosh ratio for
    the full period 2 * (len(C) - 1).  The plateau is a constant fitted by
    correlated least squares on the window, with the covariance estimated
    from the correlator jackknife (diagonal fallback when singular).
    """
    nr = corr.values.size
    period = 2 * (nr - 1)
    if fit_window is None:
        fit_window = (2, nr - 2)
    lo, hi = fit_window
    if not 1 <= lo <= hi <= nr - 2:
        raise ValidationError(
            f"fit window {fit_window} outside the usable range [1, {nr - 2}]"
        )
    if np.any(corr.values[lo:hi + 2] <= 0):
        bad = int(np.argmax(corr.values[lo:hi + 2] <= 0)) + lo
        raise NumericalError(
            f"non-positive correlator inside the fit window at r={bad} "
            f"(value {corr.values[bad]:.3e}); shrink the window"
        )

    rs = np.arange(1, nr - 1)
    values = np.array([
        _cosh_mass(corr.values[r] / corr.values[r + 1], r, period)
        if corr.values[r] > 0 and corr.values[r + 1] > 0 else np.nan
        for r in rs
    ])

    n_meas = corr.jackknife_values.shape[0]
    jack_masses = np.full((n_meas, rs.size), np.nan)
    for m in range(n_meas):
        c = corr.jackknife_values[m]
        for idx, r in enumerate(rs):
            if c[r] > 0 and c[r + 1] > 0:
                jack_masses[m, idx] = _cosh_mass(c[r] / c[r + 1], r, period)
    spread = jack_masses - np.nanmean(jack_masses, axis=0)
    errors = np.sqrt((n_meas - 1) / n_meas * np.nansum(spread ** 2, axis=0))

    sel = [idx for idx, r in enumerate(rs)
           if lo <= r <= hi and np.isfinite(values[idx])]
    if not sel:
        raise NumericalError("no finite effective-mass points in the window")
    sel = np.asarray(sel)
    m_win = values[sel]
    if np.all(errors[sel] == 0):
        plateau = float(np.mean(m_win))
        plateau_err = 0.0
    else:
        cov = (n_meas - 1) / n_meas * np.einsum(
            "mi,mj->ij", spread[:, sel], spread[:, sel])
        try:
            winv = np.linalg.inv(cov)
        except np.linalg.LinAlgError:
            winv = np.diag(1.0 / np.maximum(np.diag(cov), 1e-30))
        ones = np.ones(sel.size)
        norm = ones @ winv @ ones
        if not np.isfinite(norm) or norm <= 0:
            winv = np.diag(1.0 / np.maximum(np.diag(cov), 1e-30))
            norm = float(np.sum(np.diag(winv)))
        plateau = float(ones @ winv @ m_win / norm)
        plateau_err = float(np.sqrt(1.0 / norm))
    return EffectiveMassResult(
        separations=rs,
        values=values,
        errors=errors,
        plateau=plateau,
        plateau_error=plateau_err,
        window=(lo, hi),
    )
