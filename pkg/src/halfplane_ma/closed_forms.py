"""Closed-form solution families of ``det D^2 u = RHS`` and their derivatives.

Three families are covered:

* :class:`DirichletFamily` -- half-plane, ``RHS = (a+by)**alpha``,
  ``u(x, 0) = x**2/2``;
* :class:`NeumannFamily` -- half-plane, ``RHS = y**alpha``, ``u_y(x, 0) = 0``;
* :class:`EntireFamily` -- whole plane, ``RHS = |y|**alpha``.

All evaluators broadcast over array arguments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (ALPHA_LOG_TOL, DomainError, EquationParams, FamilyCoeffs,
                   GridSpec, ScalarField)


@dataclass(frozen=True)
class DirichletFamily:
    params: EquationParams
    coeffs: FamilyCoeffs = FamilyCoeffs()

    def __post_init__(self):
        self.params.require_family_range()

    @property
    def branch(self) -> str:
        return "log" if abs(self.params.alpha + 1.0) <= ALPHA_LOG_TOL else "generic"

    # -- the y-only part g(y), with g(0) = 0 and g'' = (1+Ay)(a+by)^alpha --

    def _check_log(self):
        if self.branch == "log" and self.params.a == 0:
            raise DomainError("alpha = -1 branch needs a > 0 (a*ln(a) term)")

    def height_part(self, y):
        """``g(y)``: the part of ``u`` depending on ``y`` alone, minus ``-B*y``."""
        self._check_log()
        a, b, al = self.params.a, self.params.b, self.params.alpha
        A = self.coeffs.A
        y = np.asarray(y, dtype=float)
        t = a + b * y
        if self.branch == "log":
            return ((b - a * A) / b**3 * (t * np.log(t) - a * math.log(a))
                    + A / (2.0 * b) * y**2)
        k1 = (b - a * A) / (b**3 * (1 + al) * (2 + al))
        k2 = A / (b**3 * (2 + al) * (3 + al))
        return k1 * (t ** (2 + al) - a ** (2 + al)) + k2 * (t ** (3 + al) - a ** (3 + al))

    def height_part_d1(self, y):
        self._check_log()
        a, b, al = self.params.a, self.params.b, self.params.alpha
        A = self.coeffs.A
        y = np.asarray(y, dtype=float)
        t = a + b * y
        if self.branch == "log":
            return (b - a * A) / b**2 * (np.log(t) + 1.0) + A / b * y
        k1 = (b - a * A) / (b**3 * (1 + al) * (2 + al))
        k2 = A / (b**3 * (2 + al) * (3 + al))
        return k1 * (2 + al) * b * t ** (1 + al) + k2 * (3 + al) * b * t ** (2 + al)

    def height_part_d2(self, y):
        self._check_log()
        a, b, al = self.params.a, self.params.b, self.params.alpha
        A = self.coeffs.A
        y = np.asarray(y, dtype=float)
        t = a + b * y
        if self.branch == "log":
            return (b - a * A) / (b * t) + A / b
        k1 = (b - a * A) / (b**3 * (1 + al) * (2 + al))
        k2 = A / (b**3 * (2 + al) * (3 + al))
        return (k1 * (2 + al) * (1 + al) * b * b * t ** al
                + k2 * (3 + al) * (2 + al) * b * b * t ** (1 + al))

    # -- u and its derivatives --

    def value(self, x, y):
        A, B, C = self.coeffs.A, self.coeffs.B, self.coeffs.C
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if np.any(y < 0):
            raise DomainError("Dirichlet family lives on y >= 0")
        s = x - C * y
        return self.height_part(y) - B * y + s * s / (2.0 * (1.0 + A * y))

    def gradient(self, x, y):
        A, B, C = self.coeffs.A, self.coeffs.B, self.coeffs.C
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        s = x - C * y
        w = 1.0 + A * y
        ux = s / w
        uy = self.height_part_d1(y) - B - C * s / w - A * s * s / (2.0 * w * w)
        return ux, uy

    def hessian(self, x, y):
        A, C = self.coeffs.A, self.coeffs.C
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if np.any(y <= 0):
            raise DomainError("Dirichlet Hessian is evaluated at y > 0")
        s = x - C * y
        w = 1.0 + A * y
        m = C * w + A * s
        uxx = 1.0 / w
        uxy = -m / (w * w)
        uyy = self.height_part_d2(y) + m * m / w**3
        return np.broadcast_arrays(uxx, uxy, uyy)

    def rhs(self, x, y):
        return np.broadcast_to(self.params.rhs(y), np.broadcast(x, y).shape)

    def star_value(self, xi, eta):
        """Partial Legendre transform in ``x``: ``xi**2 (1+A eta)/2 + C xi eta + B eta - g(eta)``."""
        A, B, C = self.coeffs.A, self.coeffs.B, self.coeffs.C
        xi = np.asarray(xi, dtype=float)
        eta = np.asarray(eta, dtype=float)
        return 0.5 * xi * xi * (1.0 + A * eta) + C * xi * eta + B * eta - self.height_part(eta)


@dataclass(frozen=True)
class NeumannFamily:
    """``x**2/(2A) + A y**(2+alpha)/((2+alpha)(1+alpha)) + p*x + q``."""

    alpha: float
    A: float
    p: float = 0.0
    q: float = 0.0

    def __post_init__(self):
        if not self.A > 0:
            raise DomainError(f"Neumann family needs A > 0, got {self.A}")
        if not self.alpha >= 0:
            raise DomainError(f"Neumann family needs alpha >= 0, got {self.alpha}")

    def value(self, x, y):
        al, A = self.alpha, self.A
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return (x * x / (2 * A) + A * y ** (2 + al) / ((2 + al) * (1 + al))
                + self.p * x + self.q)

    def gradient(self, x, y):
        al, A = self.alpha, self.A
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.broadcast_arrays(x / A + self.p, A * y ** (1 + al) / (1 + al))

    def hessian(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.alpha < 1 and np.any(y <= 0):
            raise DomainError("Hessian needs y > 0 when alpha < 1")
        uyy = self.A * y ** self.alpha
        return np.broadcast_arrays(np.full_like(x, 1.0 / self.A), np.zeros_like(x), uyy)

    def rhs(self, x, y):
        return np.broadcast_to(np.asarray(y, dtype=float) ** self.alpha,
                               np.broadcast(x, y).shape)


@dataclass(frozen=True)
class EntireFamily:
    """``x**2/(2A) + A B**2 y**2/2 + B x y + A|y|**(2+alpha)/((2+alpha)(1+alpha)) + l``."""

    alpha: float
    A: float
    B: float = 0.0
    p: float = 0.0
    q: float = 0.0
    r: float = 0.0

    def __post_init__(self):
        if not self.A > 0:
            raise DomainError(f"entire family needs A > 0, got {self.A}")
        if not self.alpha > -1:
            raise DomainError(f"entire family needs alpha > -1, got {self.alpha}")

    def value(self, x, y):
        al, A, B = self.alpha, self.A, self.B
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return (x * x / (2 * A) + A * B * B * y * y / 2 + B * x * y
                + A * np.abs(y) ** (2 + al) / ((2 + al) * (1 + al))
                + self.p * x + self.q * y + self.r)

    def gradient(self, x, y):
        al, A, B = self.alpha, self.A, self.B
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        ux = x / A + B * y + self.p
        uy = A * B * B * y + B * x + A * np.sign(y) * np.abs(y) ** (1 + al) / (1 + al) + self.q
        return ux, uy

    def hessian(self, x, y):
        al, A, B = self.alpha, self.A, self.B
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if al < 1 and np.any(y == 0):
            raise DomainError("Hessian needs y != 0 when alpha < 1")
        uyy = A * B * B + A * np.abs(y) ** al
        return np.broadcast_arrays(np.full_like(x, 1.0 / A), np.full_like(x, B), uyy + 0 * x)

    def rhs(self, x, y):
        return np.broadcast_to(np.abs(np.asarray(y, dtype=float)) ** self.alpha,
                               np.broadcast(x, y).shape)


def dirichlet_eval(fam: DirichletFamily, x, y):
    return fam.value(x, y)


def dirichlet_hessian(fam: DirichletFamily, x, y):
    return fam.hessian(x, y)


def neumann_eval(fam: NeumannFamily, x, y):
    return fam.value(x, y)


def neumann_hessian(fam: NeumannFamily, x, y):
    return fam.hessian(x, y)


def entire_eval(fam: EntireFamily, x, y):
    return fam.value(x, y)


def entire_hessian(fam: EntireFamily, x, y):
    return fam.hessian(x, y)


def hessian_det(fam, x, y):
    uxx, uxy, uyy = fam.hessian(x, y)
    return uxx * uyy - uxy * uxy


def sample_family(fam, spec: GridSpec) -> ScalarField:
    return ScalarField.sample(spec, fam.value)


def sample_star(fam: DirichletFamily, spec: GridSpec) -> ScalarField:
    """Analytic partial Legendre transform of a Dirichlet family on a ``(xi, eta)`` grid."""
    return ScalarField.sample(spec, fam.star_value)


def sharpness_lower_bound(alpha: float, C: float, y):
    """Lower bound forcing ``u -> +inf`` as ``y -> 0+`` when ``alpha <= -2``.

    ``y**(2+alpha) / (C (1+alpha)(2+alpha))`` for ``alpha < -2`` and
    ``-ln(y)/C`` for ``alpha = -2``.
    """
    if alpha > -2 + ALPHA_LOG_TOL:
        raise DomainError(f"the blow-up bound applies to alpha <= -2, got {alpha}")
    if not C > 0:
        raise DomainError("C must be positive")
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise DomainError("y must be positive")
    if abs(alpha + 2) <= ALPHA_LOG_TOL:
        out = -np.log(y) / C
    else:
        out = y ** (2 + alpha) / (C * (1 + alpha) * (2 + alpha))
    return float(out) if out.ndim == 0 else out
