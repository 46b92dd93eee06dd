"""Numerical check of the one-dimensional contour-rotation identity

    integral_C f(z) |z| dz  =  i^2 integral f(it) |t| dt,

valid for f analytic in the first and third quadrants and decaying at
infinity.  The catalog is restricted to rational functions whose denominator
factors are z^2 + i c with c > 0, so every pole sits in quadrants two and
four and the decay is a power law with an analytic tail bound (oscillatory
integrands that converge only conditionally are excluded on purpose).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .errors import NumericalError, ValidationError

QUAD_LIMIT = 400


@dataclass(frozen=True)
class ContourTestCase:
    """One catalog entry.

    tail_bound(R) = tail_const / R**tail_power bounds the combined magnitude
    of both discarded |z| > R tails and the two quarter-circle arcs, so
    |lhs_R - rhs_R| plus the distance to the R -> infinity value stays below
    it.
    """

    name: str
    func: Callable[[complex], complex]
    default_truncation: float
    tail_const: float
    tail_power: float
    closed_form: complex | None = None
    quad_tol: float = 1e-12

    def tail_bound(self, truncation: float) -> float:
        return self.tail_const / truncation ** self.tail_power


def _catalog() -> list[ContourTestCase]:
    return [
        ContourTestCase(
            name="inverse-square-pole",
            func=lambda z: 1.0 / (z * z + 1j) ** 2,
            default_truncation=4.0e4,
            tail_const=2.0 * np.pi,
            tail_power=2.0,
            closed_form=-1j,
        ),
        ContourTestCase(
            name="pole-pair-product",
            func=lambda z: 1.0 / ((z * z + 1j) * (z * z + 2j)),
            default_truncation=4.0e4,
            tail_const=2.0 * np.pi,
            tail_power=2.0,
            closed_form=-1j * np.log(2.0),
        ),
        ContourTestCase(
            name="odd-vanishing",
            func=lambda z: z / (z * z + 1j) ** 3,
            default_truncation=2.0e3,
            tail_const=2.0 * np.pi,
            tail_power=3.0,
            closed_form=0.0 + 0.0j,
        ),
        ContourTestCase(
            name="scaled-pole",
            func=lambda z: 1.0 / (z * z + 3j) ** 2,
            default_truncation=4.0e4,
            tail_const=2.0 * np.pi,
            tail_power=2.0,
            closed_form=-1j / 3.0,
        ),
        ContourTestCase(
            name="even-cubic-pole",
            func=lambda z: z * z / (z * z + 1j) ** 3,
            default_truncation=4.0e4,
            tail_const=2.0 * np.pi,
            tail_power=2.0,
            closed_form=-0.5j,
        ),
    ]


CATALOG: tuple[ContourTestCase, ...] = tuple(_catalog())


def case_by_name(name: str) -> ContourTestCase:
    for case in CATALOG:
        if case.name == name:
            return case
    raise ValidationError(
        f"unknown catalog entry {name!r}; known: {[c.name for c in CATALOG]}"
    )


_TAIL_SPLIT = 8.0


def _complex_quad(g: Callable[[float], complex], a: float, b: float,
                  epsabs: float) -> complex:
    re, _ = quad(lambda s: g(s).real, a, b, epsabs=epsabs, limit=QUAD_LIMIT)
    im, _ = quad(lambda s: g(s).imag, a, b, epsabs=epsabs, limit=QUAD_LIMIT)
    return re + 1j * im


def _halfline_quad(f: Callable[[complex], complex], direction: complex,
                   upper: float, epsabs: float) -> complex:
    """integral_0^upper s * f(direction * s) ds.

    The far region is mapped through s -> 1/w so the quadrature never sees a
    long slowly-decaying interval (every catalog entry decays at least like
    s^-4, so the transformed integrand s f / w^3 vanishes at w -> 0).
    """
    def near(s: float) -> complex:
        return s * f(direction * s)

    out = _complex_quad(near, 0.0, min(_TAIL_SPLIT, upper), epsabs)
    if upper > _TAIL_SPLIT:
        def far(w: float) -> complex:
            return f(direction / w) / w ** 3

        out += _complex_quad(far, 1.0 / upper, 1.0 / _TAIL_SPLIT, epsabs)
    return out


@dataclass(frozen=True)
class RotationCheck:
    lhs: complex
    rhs: complex
    tail_bound: float

    @property
    def difference(self) -> float:
        return abs(self.lhs - self.rhs)

    @property
    def gap(self) -> float:
        """Conservative total discrepancy: quadrature difference plus the
        analytic bound on everything beyond the truncation radius."""
        return self.difference + self.tail_bound


def verify_rotation(case: ContourTestCase, truncation: float | None = None,
                    tolerance: float = 1e-6) -> RotationCheck:
    """Evaluate both sides of the rotation identity at finite truncation.

    lhs = integral_{-R}^{R} f(x) |x| dx
    rhs = i^2 integral_{-R}^{R} f(it) |t| dt

    Refuses (with the radius that would suffice) when the analytic tail bound
    at the requested truncation exceeds the tolerance.
    """
    R = case.default_truncation if truncation is None else float(truncation)
    if R <= 0:
        raise ValidationError(f"truncation must be positive, got {R}")
    tail = case.tail_bound(R)
    if tail > tolerance:
        required = (case.tail_const / tolerance) ** (1.0 / case.tail_power)
        raise NumericalError(
            f"tail bound {tail:.3e} exceeds tolerance {tolerance:.1e} at "
            f"truncation {R:.3g}; needs at least {required:.3g}"
        )
    eps = case.quad_tol
    f = case.func
    # both sides split at the |.| kink into four half-line integrals
    lhs = (_halfline_quad(f, 1.0, R, eps)
           + _halfline_quad(f, -1.0, R, eps))
    rhs = -(_halfline_quad(f, 1j, R, eps)
            + _halfline_quad(f, -1j, R, eps))
    return RotationCheck(lhs=lhs, rhs=rhs, tail_bound=tail)
