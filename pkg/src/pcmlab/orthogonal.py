"""Haar sampling on O(N), leading-order moments of matrix entries, and
spectral-density bookkeeping for symmetric-matrix eigenvalues.

Haar draws use QR of an i.i.d. standard-normal matrix with the signs of the
triangular factor's diagonal absorbed into Q, which yields the exact invariant
probability measure (including both connected components of O(N)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

MAX_PAIRING_DEGREE = 12  # combinatorial guard: (11)!! = 10395 matchings


def _sign_fixed_qr(g: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(g)
    d = np.sign(np.einsum("...ii->...i", r))
    d[d == 0] = 1.0
    return q * d[..., None, :]


def sample_haar(n: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Haar-distributed orthogonal matrices.

    Returns one (n, n) matrix, or a (size, n, n) stack when `size` is given.
    """
    if n < 1:
        raise ValidationError(f"dimension must be >= 1, got {n}")
    shape = (n, n) if size is None else (size, n, n)
    return _sign_fixed_qr(rng.standard_normal(shape))


def haar_frame(n: int, k: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """First k columns of a Haar orthogonal matrix (an orthonormal frame).

    The marginal distribution of any k distinct columns of a Haar draw equals
    the sign-fixed Q factor of an (n, k) standard-normal matrix, so moments of
    entries from at most k columns can be sampled without the full QR cost.
    """
    if not 1 <= k <= n:
        raise ValidationError(f"need 1 <= k <= n, got k={k}, n={n}")
    shape = (n, k) if size is None else (size, n, k)
    return _sign_fixed_qr(rng.standard_normal(shape))


def enumerate_pair_partitions(two_k: int) -> list[tuple[tuple[int, int], ...]]:
    """All perfect matchings of {1, ..., two_k} into unordered pairs.

    Canonical order: the smallest unpaired index is matched with each larger
    one in turn, recursively, so the list is deterministic and each matching
    appears once.  Count is (two_k - 1)!!.
    """
    if two_k <= 0 or two_k % 2 != 0:
        raise ValidationError(f"need a positive even count, got {two_k}")
    if two_k > MAX_PAIRING_DEGREE:
        raise ValidationError(
            f"degree {two_k} exceeds the combinatorial guard {MAX_PAIRING_DEGREE}"
        )

    def match(rest: tuple[int, ...]):
        if not rest:
            yield ()
            return
        first, tail = rest[0], rest[1:]
        for i, partner in enumerate(tail):
            remaining = tail[:i] + tail[i + 1:]
            for sub in match(remaining):
                yield ((first, partner),) + sub

    return list(match(tuple(range(1, two_k + 1))))


def _validate_moment_spec(rows, cols) -> tuple[np.ndarray, np.ndarray]:
    rows = np.asarray(rows, dtype=int)
    cols = np.asarray(cols, dtype=int)
    if rows.ndim != 1 or rows.shape != cols.shape:
        raise ValidationError("row and column index lists must have equal length")
    return rows, cols


def leading_moment(n: int, rows, cols) -> float:
    """Leading large-N value of E[O_{a1 b1} ... O_{a2k b2k}] for Haar O(N):

        N^{-k} * sum over pair partitions of prod delta_{a a} delta_{b b},

    exact for degree 2 and accurate to o(N^{-k}) beyond.  Odd degrees vanish
    by the O -> -O symmetry and return 0.
    """
    rows, cols = _validate_moment_spec(rows, cols)
    degree = rows.size
    if degree == 0:
        return 1.0
    if degree % 2 == 1:
        return 0.0
    k = degree // 2
    total = 0
    for matching in enumerate_pair_partitions(degree):
        term = 1
        for a, b in matching:
            i, j = a - 1, b - 1
            if rows[i] != rows[j] or cols[i] != cols[j]:
                term = 0
                break
        total += term
    return total / float(n) ** k


@dataclass(frozen=True)
class MomentEstimate:
    estimate: float
    stderr: float
    samples: int


def mc_moment(n: int, rows, cols, samples: int, rng: np.random.Generator,
              batch: int = 50_000) -> MomentEstimate:
    """Monte Carlo estimate of E[prod_i O_{rows_i, cols_i}] over Haar draws.

    Only the columns actually referenced are sampled (a Haar frame), which is
    distribution-identical to projecting full draws and much cheaper at large
    N.  Returns the empirical mean and its standard error.
    """
    rows, cols = _validate_moment_spec(rows, cols)
    if samples < 100:
        raise ValidationError(f"need at least 100 samples, got {samples}")
    if np.any((rows < 0) | (rows >= n) | (cols < 0) | (cols >= n)):
        raise ValidationError("moment indices must lie in [0, n)")

    unique_cols, col_pos = np.unique(cols, return_inverse=True)
    k = unique_cols.size
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < samples:
        m = min(batch, samples - done)
        if k <= n // 2:
            frames = haar_frame(n, k, rng, size=m)
            vals = np.ones(m)
            for i in range(rows.size):
                vals *= frames[:, rows[i], col_pos[i]]
        else:
            draws = sample_haar(n, rng, size=m)
            vals = np.ones(m)
            for i in range(rows.size):
                vals *= draws[:, rows[i], cols[i]]
        total += vals.sum()
        total_sq += (vals * vals).sum()
        done += m
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    return MomentEstimate(
        estimate=float(mean),
        stderr=float(np.sqrt(var / max(samples - 1, 1))),
        samples=samples,
    )


@dataclass(frozen=True)
class SpectrumEnsemble:
    """Eigenvalue vector of the multiplier field with its empirical moments.

    The spectral density is the normalized empirical measure
    (1/N) sum_a delta(. - eigenvalues[a]); mean and mean_square are its first
    two moments.
    """

    eigenvalues: np.ndarray
    mean: float
    mean_square: float

    @property
    def count(self) -> int:
        return self.eigenvalues.size

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.eigenvalues)))

    def moment(self, k: int) -> float:
        return float(np.mean(self.eigenvalues ** k))


def spectrum_ensemble(values) -> SpectrumEnsemble:
    """Package an eigenvalue list with its density moments."""
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise ValidationError("spectrum must contain at least one eigenvalue")
    return SpectrumEnsemble(
        eigenvalues=arr,
        mean=float(arr.mean()),
        mean_square=float(np.mean(arr * arr)),
    )


def two_point_spectrum(m1: float, m2: float, n: int) -> SpectrumEnsemble:
    """Equal-weight two-point spectrum {m1, m2}; n must be even so the
    weights are exactly 1/2 each."""
    if n < 2 or n % 2 != 0:
        raise ValidationError(f"two-point spectra need an even count, got {n}")
    values = np.empty(n)
    values[: n // 2] = m1
    values[n // 2:] = m2
    return spectrum_ensemble(values)
