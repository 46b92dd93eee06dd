"""The multiplier-field operator K, the per-configuration spectral functional
t(O), the source functional J K^{-1} J, and the closed-form large-N targets
for their Haar averages.

K acts on vectors indexed by (site, color) as

    (K v)(x, a) = sum_y T_{xy} v(y, a) + mu v(x, a)
                  + sum_b [O(x)^T Mhat O(x)]_{ab} v(x, b)

with T the momentum-diagonal kinetic operator of the chosen dispersion.  All
discrete sums here are plain sums over sites; the convention is pinned by
requiring the decoupled (Mhat = 0) source functional to reproduce the lattice
propagator exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import NumericalError, ValidationError
from .lattice import Dispersion, LatticeSpec, kinetic_matrix, propagator_matrix
from .orthogonal import SpectrumEnsemble, sample_haar

#: refuse dense realizations beyond this dimension (desk scale)
MAX_DENSE_DIM = 8192

_KRON_CACHE: dict[tuple, np.ndarray] = {}
_KRON_CACHE_CAPACITY = 2


@dataclass(frozen=True)
class MultiplierField:
    """Per-site orthogonal matrices sharing one eigenvalue vector."""

    lattice: LatticeSpec
    matrices: np.ndarray          # (n_sites, N, N)
    spectrum: SpectrumEnsemble

    @property
    def n_colors(self) -> int:
        return self.matrices.shape[-1]

    def site_blocks(self) -> np.ndarray:
        """Q(x) = O(x)^T diag(Mhat) O(x) for every site, shape (n_sites, N, N)."""
        eig = self.spectrum.eigenvalues
        if np.all(eig == eig[0]):
            # degenerate spectrum: O^T (c I) O = c I exactly
            n = self.n_colors
            return np.broadcast_to(eig[0] * np.eye(n),
                                   (self.lattice.n_sites, n, n)).copy()
        return np.einsum("xbi,b,xbj->xij", self.matrices, eig, self.matrices,
                         optimize=True)


def sample_multiplier_field(lattice: LatticeSpec, spectrum: SpectrumEnsemble,
                            rng: np.random.Generator) -> MultiplierField:
    """Draw an independent Haar matrix at every site."""
    mats = sample_haar(spectrum.count, rng, size=lattice.n_sites)
    return MultiplierField(lattice=lattice, matrices=mats, spectrum=spectrum)


def _kron_base(lattice: LatticeSpec, dispersion: Dispersion, n_colors: int) -> np.ndarray:
    key = (lattice.side, lattice.volume, dispersion.kind, n_colors)
    base = _KRON_CACHE.get(key)
    if base is None:
        T = kinetic_matrix(lattice, dispersion)
        base = np.kron(T, np.eye(n_colors))
        while len(_KRON_CACHE) >= _KRON_CACHE_CAPACITY:
            _KRON_CACHE.pop(next(iter(_KRON_CACHE)))
        _KRON_CACHE[key] = base
    return base


class KOperator:
    """Real symmetric operator (-Laplacian + mu) (x) I_N + diag_x O^T Mhat O.

    Positive definite whenever mu + min(Mhat) > 0.  The dense realization is
    built lazily; the log-determinant uses a Cholesky factorization (with the
    eigendecomposition available separately as an independent diagnostic and
    oracle route).
    """

    def __init__(self, lattice: LatticeSpec, dispersion: Dispersion,
                 mu: float, field: MultiplierField):
        self.lattice = lattice
        self.dispersion = dispersion
        self.mu = float(mu)
        self.field = field
        self.n_colors = field.n_colors
        self.dimension = lattice.n_sites * self.n_colors
        self._dense = None
        self._chol = None

    def dense(self) -> np.ndarray:
        if self._dense is None:
            if self.dimension > MAX_DENSE_DIM:
                raise NumericalError(
                    f"dense realization of dimension {self.dimension} exceeds "
                    f"the cap {MAX_DENSE_DIM}"
                )
            n = self.n_colors
            K = _kron_base(self.lattice, self.dispersion, n).copy()
            K.flat[:: self.dimension + 1] += self.mu
            for x, block in enumerate(self.field.site_blocks()):
                K[x * n:(x + 1) * n, x * n:(x + 1) * n] += block
            self._dense = K
        return self._dense

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Matrix-free application to a vector of shape (dimension,) or
        (dimension, m)."""
        n = self.n_colors
        sites = self.lattice.n_sites
        T = kinetic_matrix(self.lattice, self.dispersion)
        w = np.asarray(v, dtype=float)
        single = w.ndim == 1
        w = w.reshape(sites, n, -1)
        out = np.einsum("xy,yaj->xaj", T, w) + self.mu * w
        out += np.einsum("xab,xbj->xaj", self.field.site_blocks(), w)
        out = out.reshape(self.dimension, -1)
        return out[:, 0] if single else out

    def _factor(self):
        if self._chol is None:
            try:
                self._chol = sla.cho_factor(self.dense(), lower=True,
                                            check_finite=False)
            except sla.LinAlgError:
                smallest = float(np.linalg.eigvalsh(self.dense())[0])
                raise NumericalError(
                    f"operator is not positive definite "
                    f"(smallest eigenvalue {smallest:.6e})"
                ) from None
        return self._chol

    def logdet(self) -> float:
        c, _ = self._factor()
        return float(2.0 * np.sum(np.log(np.diag(c))))

    def solve(self, b: np.ndarray) -> np.ndarray:
        return sla.cho_solve(self._factor(), b, check_finite=False)

    def eigenvalues(self) -> np.ndarray:
        """Full spectrum by symmetric eigendecomposition (diagnostic route)."""
        return np.linalg.eigvalsh(self.dense())


def assemble_K(lattice: LatticeSpec, dispersion: Dispersion, mu: float,
               field: MultiplierField) -> KOperator:
    """Build the operator, enforcing the positive-definiteness guard."""
    margin = mu + float(np.min(field.spectrum.eigenvalues))
    if not margin > 0:
        raise ValidationError(
            f"positive-definiteness guard violated: mu + min(Mhat) = {margin:.6e}"
        )
    return KOperator(lattice, dispersion, mu, field)


def t_of_O(k_op: KOperator) -> float:
    """The pushforward functional t = (1/(2 N V)) Tr ln K."""
    return k_op.logdet() / (2.0 * k_op.n_colors * k_op.lattice.volume)


def t0_closed_form(lattice: LatticeSpec, dispersion: Dispersion,
                   mu: float, mbar: float) -> float:
    """Large-N mean of t: (1/2V) sum_p ln(disp(p) + mu + mbar).

    This is the leading closed form; the distinct empirical mean carries an
    additional coincident-site correction suppressed by 1/side^2.
    """
    m = mu + mbar
    if not m > 0:
        raise ValidationError(f"mu + mbar must be positive, got {m}")
    disp = dispersion.of_grid(lattice)
    return float(np.sum(np.log(disp + m)) / (2.0 * lattice.volume))


def random_source(lattice: LatticeSpec, n_colors: int,
                  rng: np.random.Generator) -> np.ndarray:
    """Standard-normal source J(x) at every site, shape (n_sites, N, N)."""
    return rng.standard_normal((lattice.n_sites, n_colors, n_colors))


def single_site_source(lattice: LatticeSpec, n_colors: int, site: int = 0,
                       row: int = 0, col: int = 0,
                       amplitude: float = 1.0) -> np.ndarray:
    J = np.zeros((lattice.n_sites, n_colors, n_colors))
    J[site, row, col] = amplitude
    return J


def j_functional(k_op: KOperator, source: np.ndarray) -> float:
    """The quadratic source functional sum_{x,y,a,a',b} J_ab(x)
    [K^{-1}]_{(x,a),(y,a')} J_a'b(y); nonnegative for positive definite K."""
    source = np.asarray(source, dtype=float)
    n = k_op.n_colors
    if source.shape != (k_op.lattice.n_sites, n, n):
        raise ValidationError(
            f"source shape {source.shape} does not match field "
            f"({k_op.lattice.n_sites}, {n}, {n})"
        )
    rhs = source.reshape(k_op.dimension, n)
    x = k_op.solve(rhs)
    return float(np.sum(rhs * x))


def averaged_j_prediction(lattice: LatticeSpec, dispersion: Dispersion,
                          mu: float, mbar: float, source: np.ndarray) -> float:
    """Large-N Haar average of the source functional: the same quadratic form
    with the scalar propagator of mass mu + mbar in place of K^{-1}."""
    m = mu + mbar
    if not m > 0:
        raise ValidationError(f"mu + mbar must be positive, got {m}")
    P = propagator_matrix(lattice, dispersion, m)
    return float(np.einsum("xab,xy,yab->", source, P, source, optimize=True))


@dataclass(frozen=True)
class LipschitzCheck:
    ratio: float
    bound: float

    @property
    def within(self) -> bool:
        return self.ratio <= self.bound


def lipschitz_ratio(source: np.ndarray, mu: float, field_a: MultiplierField,
                    field_b: MultiplierField,
                    dispersion: Dispersion = Dispersion()) -> LipschitzCheck:
    """Difference quotient of the source functional between two multiplier
    configurations against the Lipschitz constant

        bound = 2 max_x ||J(x)||_HS^2 ||Mhat||^2 / mu^2,

    with the distance sum_x ||O_a(x) - O_b(x)||_HS.  The bound presumes the
    rotated operator still dominates mu, i.e. min(Mhat) >= 0.
    """
    distance = float(np.sum(np.sqrt(np.sum(
        (field_a.matrices - field_b.matrices) ** 2, axis=(1, 2)))))
    if distance == 0.0:
        raise ValidationError("field pair is identical; distance is zero")
    j_a = j_functional(assemble_K(field_a.lattice, dispersion, mu, field_a), source)
    j_b = j_functional(assemble_K(field_b.lattice, dispersion, mu, field_b), source)
    ratio = abs(j_a - j_b) / distance
    max_j = float(np.max(np.sum(np.asarray(source) ** 2, axis=(1, 2))))
    bound = 2.0 * max_j * field_a.spectrum.sup_norm ** 2 / mu ** 2
    return LipschitzCheck(ratio=ratio, bound=bound)


def variance_prediction(lattice: LatticeSpec, n_colors: int,
                        mbar: float, m2bar: float) -> float:
    """Scaling target for Var[t]:

        (1/N^2) (4 m2bar mbar^4 + m2bar^2) V / side^4,

    an up-to-constant asymptotic, so only its N and side exponents are
    testable.
    """
    if n_colors < 1:
        raise ValidationError(f"n_colors must be >= 1, got {n_colors}")
    return (4.0 * m2bar * mbar ** 4 + m2bar ** 2) \
        * lattice.volume / (n_colors ** 2 * float(lattice.side) ** 4)
