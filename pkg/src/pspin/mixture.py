"""Mixture functions for mixed p-spin models.

A mixture is a finite sequence of non-negative coefficients (gamma_1, ..., gamma_P)
defining

    xi(t)   = sum_p gamma_p^2 t^p
    zeta(t) = sqrt(xi''(t))

together with the two gain integrals the ascent guarantees are measured against:
int zeta(t) sqrt(1-t) dt on the cube and sqrt(eps) * int zeta(t) dt on polytopes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_MAX_DEGREE = 8

_DOMAIN_TOL = 1e-9


class MixtureError(ValueError):
    """Base class for invalid mixtures."""


class NotASpinGlassError(MixtureError):
    """No gamma_p > 0 with p >= 2."""


class NegativeCoefficientError(MixtureError):
    """Some gamma_p < 0."""


class DomainError(ValueError):
    """Evaluation point outside the allowed interval."""


@dataclass(frozen=True)
class Mixture:
    """Finite-support mixture (gamma_1, ..., gamma_P); immutable and thread-safe."""

    gammas: tuple[float, ...]
    max_degree: int = field(default=DEFAULT_MAX_DEGREE, repr=False)

    def __init__(self, gammas, max_degree: int = DEFAULT_MAX_DEGREE):
        object.__setattr__(self, "gammas", tuple(float(g) for g in gammas))
        object.__setattr__(self, "max_degree", int(max_degree))
        self.validate()

    @classmethod
    def pure(cls, p: int, gamma: float = 1.0, **kw) -> "Mixture":
        """Single-degree mixture with gamma_p = gamma."""
        gs = [0.0] * p
        gs[p - 1] = gamma
        return cls(gs, **kw)

    @classmethod
    def from_config(cls, records, **kw) -> "Mixture":
        """Build from a list of {"p": int, "gamma": float} records."""
        if not records:
            raise NotASpinGlassError("empty mixture config")
        pmax = max(int(r["p"]) for r in records)
        gs = [0.0] * pmax
        for r in records:
            p = int(r["p"])
            if p < 1:
                raise MixtureError(f"degree must be >= 1, got {p}")
            gs[p - 1] = float(r["gamma"])
        return cls(gs, **kw)

    def to_config(self) -> list[dict]:
        return [
            {"p": p, "gamma": g} for p, g in enumerate(self.gammas, start=1) if g != 0.0
        ]

    @property
    def degrees(self) -> tuple[int, ...]:
        """Degrees p with gamma_p > 0, ascending."""
        return tuple(p for p, g in enumerate(self.gammas, start=1) if g > 0.0)

    def validate(self) -> None:
        """Raise if the coefficients do not define a genuine spin glass."""
        for p, g in enumerate(self.gammas, start=1):
            if g < 0.0:
                raise NegativeCoefficientError(f"gamma_{p} = {g} < 0")
        if not any(g > 0.0 for g in self.gammas[1:]):
            raise NotASpinGlassError("need gamma_p > 0 for some p >= 2")
        if len(self.gammas) > self.max_degree:
            raise MixtureError(
                f"max degree {len(self.gammas)} exceeds cap {self.max_degree}; "
                "pass a larger max_degree explicitly if intended"
            )

    def xi(self, t: float) -> float:
        """xi(t) = sum_p gamma_p^2 t^p for |t| <= 1."""
        if abs(t) > 1.0 + _DOMAIN_TOL:
            raise DomainError(f"xi needs |t| <= 1, got {t}")
        return float(sum(g * g * t**p for p, g in enumerate(self.gammas, start=1)))

    def xi_prime(self, t: float) -> float:
        if abs(t) > 1.0 + _DOMAIN_TOL:
            raise DomainError(f"xi' needs |t| <= 1, got {t}")
        return float(
            sum(p * g * g * t ** (p - 1) for p, g in enumerate(self.gammas, start=1))
        )

    def xi_second(self, t: float) -> float:
        if t < -_DOMAIN_TOL or t > 1.0 + _DOMAIN_TOL:
            raise DomainError(f"xi'' needs t in [0, 1], got {t}")
        t = min(max(t, 0.0), 1.0)
        return float(
            sum(
                p * (p - 1) * g * g * t ** (p - 2)
                for p, g in enumerate(self.gammas, start=1)
                if p >= 2
            )
        )

    def zeta(self, t: float) -> float:
        """zeta(t) = sqrt(xi''(t)); strictly positive for t > 0."""
        return float(np.sqrt(self.xi_second(t)))


def _adaptive_simpson(f, a: float, b: float, tol: float, max_depth: int = 60) -> float:
    """Adaptive Simpson quadrature with interval bisection, absolute tolerance."""
    if a == b:
        return 0.0

    def simpson(x0, x2, f0, f1, f2):
        return (x2 - x0) / 6.0 * (f0 + 4.0 * f1 + f2)

    def rec(x0, x2, f0, f1, f2, whole, eps, depth):
        xm = 0.5 * (x0 + x2)
        xl = 0.5 * (x0 + xm)
        xr = 0.5 * (xm + x2)
        fl = f(xl)
        fr = f(xr)
        left = simpson(x0, xm, f0, fl, f1)
        right = simpson(xm, x2, f1, fr, f2)
        if depth >= max_depth or abs(left + right - whole) <= 15.0 * eps:
            return left + right + (left + right - whole) / 15.0
        return rec(x0, xm, f0, fl, f1, left, eps / 2.0, depth + 1) + rec(
            xm, x2, f1, fr, f2, right, eps / 2.0, depth + 1
        )

    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = simpson(a, b, fa, fm, fb)
    return rec(a, b, fa, fm, fb, whole, tol, 0)


def _check_limits(a: float, b: float) -> None:
    if not (0.0 <= a <= b <= 1.0):
        raise DomainError(f"need 0 <= a <= b <= 1, got a={a}, b={b}")


def gain_integral_cube(m: Mixture, a: float, b: float, tol: float = 1e-10) -> float:
    """int_a^b zeta(t) sqrt(1-t) dt for 0 <= a <= b <= 1.

    Integrated under the substitution u = sqrt(1-t), which removes the
    square-root endpoint behaviour at t = 1 before the adaptive pass.
    """
    _check_limits(a, b)
    ua = float(np.sqrt(1.0 - a))
    ub = float(np.sqrt(1.0 - b))

    def g(u):
        return 2.0 * u * u * m.zeta(1.0 - u * u)

    return _adaptive_simpson(g, ub, ua, tol)


def gain_integral_polytope(
    m: Mixture, a: float, b: float, eps: float, tol: float = 1e-10
) -> float:
    """sqrt(eps) * int_a^b zeta(t) dt for 0 <= a <= b <= 1, 0 < eps <= 1."""
    _check_limits(a, b)
    if not (0.0 < eps <= 1.0):
        raise DomainError(f"need eps in (0, 1], got {eps}")
    return float(np.sqrt(eps)) * _adaptive_simpson(m.zeta, a, b, tol)
