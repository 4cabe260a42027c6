"""Change of variables to divergence form, Kelvin transform, moving spheres.

The Grushin-type equation ``(a+b*eta)**alpha v_xixi + v_etaeta = 0`` becomes
``div(x2**a_w grad v) = 0`` with ``a_w = alpha/(alpha+2)`` after substituting
``eta = f(x2)`` (see :func:`eta_of_x2`). Half-space solutions of the latter
that vanish on ``x2 = l`` are one-dimensional profiles
``C*(x2**(1-a_w) - l**(1-a_w))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .core import (DomainError, EquationParams, GridError, GridSpec,
                   ResidualReport, ScalarField, residual_report)

KELVIN_CENTER_GUARD = 1e-6


@dataclass(frozen=True)
class DivFormParams:
    a_w: float
    l: float
    n: int = 2

    @classmethod
    def from_equation(cls, params: EquationParams, n: int = 2) -> "DivFormParams":
        params.require_family_range()
        al = params.alpha
        a_w = al / (al + 2.0)
        l = 2.0 * params.a ** ((al + 2.0) / 2.0) / (params.b * (al + 2.0))
        return cls(a_w, l, n)


@dataclass(frozen=True)
class KelvinParams:
    """Inversion in the sphere ``|y - center| = lam`` with ``center`` on ``x_n = 0``."""

    center: tuple
    lam: float
    tau: float = 0.0

    def __post_init__(self):
        c = tuple(float(v) for v in self.center)
        if len(c) < 2:
            raise DomainError("center needs at least two coordinates")
        if c[-1] != 0.0:
            raise DomainError("center must lie on the boundary hyperplane x_n = 0")
        if not self.lam > 0:
            raise DomainError("radius must be positive")
        object.__setattr__(self, "center", c)

    @property
    def dim(self) -> int:
        return len(self.center)


# ---------------------------------------------------------------------------
# eta <-> x2
# ---------------------------------------------------------------------------

def eta_of_x2(params: EquationParams, x2):
    """``b**(-alpha/(alpha+2)) * ((alpha+2)/2 * x2)**(2/(alpha+2)) - a/b``."""
    params.require_family_range()
    x2 = np.asarray(x2, dtype=float)
    if np.any(x2 < 0):
        raise DomainError("x2 must be >= 0")
    a, b, al = params.a, params.b, params.alpha
    out = b ** (-al / (al + 2)) * ((al + 2) / 2 * x2) ** (2 / (al + 2)) - a / b
    return float(out) if out.ndim == 0 else out


def x2_of_eta(params: EquationParams, eta):
    """Inverse of :func:`eta_of_x2` on ``eta >= -a/b``."""
    params.require_family_range()
    eta = np.asarray(eta, dtype=float)
    a, b, al = params.a, params.b, params.alpha
    base = (eta + a / b) * b ** (al / (al + 2))
    if np.any(base < -1e-14 * max(1.0, a / b)):
        raise DomainError("eta below -a/b is outside the image of f")
    out = 2 / (al + 2) * np.maximum(base, 0.0) ** ((al + 2) / 2)
    return float(out) if out.ndim == 0 else out


def pullback_to_divform(v: ScalarField, params: EquationParams,
                        n_x2: int | None = None) -> ScalarField:
    """Resample ``v(xi, eta)`` as ``v~(x1, x2) = v(x1, f(x2))`` on a uniform ``x2`` grid.

    Interpolation along ``eta`` is a not-a-knot cubic spline; query heights
    are clamped to the sampled ``eta`` range against round-off.
    """
    spec = v.spec
    if spec.y_min < -params.a / params.b - 1e-14:
        raise DomainError(
            f"eta range starts at {spec.y_min:.6g}, below the image of f (-a/b)")
    x2_lo = x2_of_eta(params, spec.y_min)
    x2_hi = x2_of_eta(params, spec.y_max)
    ny = spec.ny if n_x2 is None else int(n_x2)
    out = GridSpec(spec.x_min, spec.x_max, x2_lo, x2_hi, spec.nx, ny,
                   derived=spec.derived)
    eta = np.clip(eta_of_x2(params, out.y), spec.y_min, spec.y_max)
    spline = CubicSpline(spec.y, v.values, axis=0)
    return ScalarField(out, spline(eta))


@dataclass(frozen=True, eq=False)
class DivFormChain:
    """Result of pushing a transformed field through the change of variables."""

    field: ScalarField
    divform: DivFormParams
    c_star: float
    profile_error: float
    residual: ResidualReport

    def to_dict(self):
        return {"a_w": self.divform.a_w, "l": self.divform.l, "c_star": self.c_star,
                "profile_rel_error": self.profile_error,
                "divform_residual": self.residual.to_dict()}


def divform_chain(star: ScalarField, params: EquationParams,
                  n_x2: int | None = None) -> DivFormChain:
    """``v = u*_xixi - 1`` pulled back to ``(x1, x2)`` and matched to a Liouville profile.

    ``C*`` is fitted at the top node of the first column; ``profile_error``
    is the sup-norm mismatch relative to the profile's sup-norm.
    """
    from .partial_legendre import second_diff_in_xi

    d = DivFormParams.from_equation(params)
    vt = pullback_to_divform(second_diff_in_xi(star), params, n_x2)
    X1, X2 = vt.spec.mesh()
    e = 1.0 - d.a_w
    top = vt.spec.y_max
    denom = top ** e - d.l ** e
    if not denom > 0:
        raise DomainError("x2 range collapses onto l; cannot fit the profile")
    c_star = float(vt.values[-1, 0] / denom)
    shape = np.maximum(X2, d.l) ** e - d.l ** e
    prof = c_star * shape
    scale = float(np.max(np.abs(prof)))
    err = float(np.max(np.abs(vt.values - prof)))
    rel = err / scale if scale > 0 else err
    return DivFormChain(vt, d, c_star, rel, divform_residual(vt, d.a_w))


# ---------------------------------------------------------------------------
# divergence-form residuals
# ---------------------------------------------------------------------------

def divform_residual_field(values, origin: Sequence[float], spacing: Sequence[float],
                           a_w: float):
    """Pointwise ``Laplacian v + a_w/x_n * dv/dx_n`` on interior nodes of an n-d grid.

    ``values`` is indexed ``[i_1, ..., i_n]`` with the last axis being the
    height ``x_n``. Returns ``(resid, coords, mask)``; ``mask`` drops nodes
    with ``x_n <= 0`` (their residual is set to zero).
    """
    V = np.asarray(values, dtype=float)
    n = V.ndim
    if n < 2 or any(s < 3 for s in V.shape):
        raise GridError("need at least 3 nodes along every axis")
    inner = tuple(slice(1, -1) for _ in range(n))
    c = V[inner]
    lap = np.zeros_like(c)
    for k in range(n):
        hi = list(inner)
        lo = list(inner)
        hi[k] = slice(2, None)
        lo[k] = slice(None, -2)
        lap += (V[tuple(hi)] - 2.0 * c + V[tuple(lo)]) / spacing[k] ** 2
    hi = list(inner)
    lo = list(inner)
    hi[-1] = slice(2, None)
    lo[-1] = slice(None, -2)
    dn = (V[tuple(hi)] - V[tuple(lo)]) / (2.0 * spacing[-1])
    axes = [origin[k] + spacing[k] * np.arange(1, V.shape[k] - 1) for k in range(n)]
    coords = np.meshgrid(*axes, indexing="ij")
    xn = coords[-1]
    ok = xn > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        resid = np.where(ok, lap + a_w * dn / np.where(ok, xn, 1.0), 0.0)
    return resid, coords, ok


def divform_residual_nd(values, origin: Sequence[float], spacing: Sequence[float],
                        a_w: float) -> ResidualReport:
    """Report of ``|Laplacian v + a_w/x_n * dv/dx_n|``; see :func:`divform_residual_field`."""
    resid, coords, ok = divform_residual_field(values, origin, spacing, a_w)
    return residual_report(resid, coords, ok)


def divform_residual(field: ScalarField, a_w: float) -> ResidualReport:
    """``|v11 + v22 + a_w/x2 * v2|`` for a field on ``(x1, x2)``; ``argmax`` is ``(x1, x2)``."""
    s = field.spec
    return divform_residual_nd(field.values.T, (s.x_min, s.y_min), (s.hx, s.hy), a_w)


def neumann_flux(field: ScalarField, a_w: float) -> float:
    """``max |x2**a_w * dv/dx2|`` on the bottom row (one-sided, second order).

    At ``x2 = 0`` the weight is ``0`` for ``a_w > 0`` and infinite for
    ``a_w < 0``; a zero slope counts as zero flux in either case.
    """
    s = field.spec
    V = field.values
    d = np.abs((-3.0 * V[0] + 4.0 * V[1] - V[2]) / (2.0 * s.hy))
    if s.y_min == 0:
        if a_w > 0:
            return 0.0
        if a_w < 0:
            return math.inf if np.any(d > 0) else 0.0
        weight = 1.0
    else:
        weight = s.y_min ** a_w
    return float(np.max(weight * d))


# ---------------------------------------------------------------------------
# one-dimensional profiles and the zero extension
# ---------------------------------------------------------------------------

def liouville_profile(a_w: float, l: float, c_star: float, x_n):
    """``c_star * (x_n**(1-a_w) - l**(1-a_w))``; forced to zero when ``a_w >= 1``."""
    if l < 0:
        raise DomainError("l must be >= 0")
    if c_star < 0:
        raise DomainError("c_star must be >= 0")
    if a_w >= 1 and c_star != 0:
        raise DomainError("for a_w >= 1 the only admissible profile has c_star = 0")
    x_n = np.asarray(x_n, dtype=float)
    if np.any(x_n < l):
        raise DomainError("profile is defined for x_n >= l")
    if c_star == 0:
        out = np.zeros_like(x_n)
    else:
        e = 1.0 - a_w
        out = c_star * (x_n ** e - l ** e)
    return float(out) if out.ndim == 0 else out


def extend_by_zero(u: Callable, l: float) -> Callable:
    """Piecewise evaluator: ``u`` on ``x_n >= l`` and ``0`` on ``0 <= x_n < l``.

    ``u`` takes points of shape ``(..., n)``.
    """
    def ext(y):
        y = np.asarray(y, dtype=float)
        above = y[..., -1] >= l
        out = np.zeros(y.shape[:-1])
        if np.any(above):
            out[above] = np.asarray(u(y[above]), dtype=float)
        return out
    return ext


def profile_function(a_w: float, l: float, c_star: float) -> Callable:
    """Liouville profile as a function of points ``(..., n)``, zero below ``l``."""
    return extend_by_zero(lambda p: liouville_profile(a_w, l, c_star, p[..., -1]), l)


# ---------------------------------------------------------------------------
# Kelvin transform
# ---------------------------------------------------------------------------

def _points(kp: KelvinParams, y):
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != kp.dim:
        raise DomainError(f"points must have {kp.dim} coordinates")
    d = y - np.asarray(kp.center)
    r = np.sqrt(np.sum(d * d, axis=-1))
    return y, d, r


def kelvin_point(kp: KelvinParams, y):
    """``center + lam**2 (y - center)/|y - center|**2``."""
    y, d, r = _points(kp, y)
    if np.any(r == 0):
        raise DomainError("the sphere center has no Kelvin image")
    return np.asarray(kp.center) + kp.lam ** 2 * d / (r * r)[..., None]


def kelvin_lift(kp: KelvinParams, n: int, a_w: float, u: Callable, y):
    """Weighted Kelvin transform of ``u`` evaluated at ``y``.

    ``(lam/|y-x|)**(n-2+a_w) * u(y^{x,lam})``, or
    ``u(y^{x,lam}) + ln(lam/|y-x|)`` when ``n - 2 + a_w = 0``. ``u`` takes
    points of shape ``(..., n)``.
    """
    if kp.dim != n:
        raise DomainError(f"center has {kp.dim} coordinates, expected {n}")
    y, d, r = _points(kp, y)
    if np.any(r <= KELVIN_CENTER_GUARD * kp.lam):
        raise DomainError("point too close to the sphere center")
    img = kp.center + kp.lam ** 2 * d / (r * r)[..., None]
    vals = np.asarray(u(img), dtype=float)
    expo = n - 2 + a_w
    if abs(expo) <= 1e-12:
        out = vals + np.log(kp.lam / r)
    else:
        out = (kp.lam / r) ** expo * vals
    return float(out) if np.ndim(out) == 0 else out


def moving_sphere_check(f: Callable, tau: float, kp: KelvinParams, samples,
                        log_variant: bool = False, margin: float = 0.0):
    """Points where the moving-sphere comparison fails.

    For each sample ``y`` with ``|y - x| >= lam`` the inequality is
    ``(lam/|y-x|)**tau * f(y^{x,lam}) <= f(y)`` or, with ``log_variant``,
    ``f(y^{x,lam}) + ln(lam/|y-x|) <= f(y)``. A sample is reported when the
    left side exceeds the right by more than ``margin``.

    ``f`` is called on a single point (1-d array of length n).

    Returns
    -------
    list of dict
        ``{"index", "point", "lhs", "rhs"}`` per violation, in sample order.
    """
    pts = np.atleast_2d(np.asarray(samples, dtype=float))
    if pts.shape[-1] != kp.dim:
        raise DomainError(f"samples must have {kp.dim} coordinates")
    if np.any(pts[:, -1] < 0):
        raise DomainError("samples must lie in the closed upper half-space")
    _, _, r = _points(kp, pts)
    inside = r < kp.lam
    if np.any(inside):
        k = int(np.argmax(inside))
        raise DomainError(f"sample {k} lies inside the open ball of radius {kp.lam}")
    images = kelvin_point(kp, pts)
    out = []
    for k in range(pts.shape[0]):
        ratio = kp.lam / r[k]
        fz = float(f(images[k]))
        lhs = fz + math.log(ratio) if log_variant else ratio ** tau * fz
        rhs = float(f(pts[k]))
        if lhs > rhs + margin:
            out.append({"index": k, "point": pts[k].tolist(), "lhs": lhs, "rhs": rhs})
    return out


def kelvin_profile_residual(kp: KelvinParams, a_w: float, l: float, c_star: float,
                            spec_axes: Sequence[tuple]) -> ResidualReport:
    """Divergence-form residual of the Kelvin-lifted Liouville profile on a box.

    ``spec_axes`` is ``[(lo, hi, count), ...]`` with the height last; the box
    should stay away from the sphere center.
    """
    n = kp.dim
    if len(spec_axes) != n:
        raise DomainError(f"need {n} axes, got {len(spec_axes)}")
    pts, origin, spacing, _ = kelvin_grid(spec_axes)
    vals = kelvin_lift(kp, n, a_w, profile_function(a_w, l, c_star), pts)
    return divform_residual_nd(vals, origin, spacing, a_w)


def kelvin_grid(spec_axes: Sequence[tuple]):
    """Node coordinates of a uniform n-d box: returns ``(points, origin, spacing, shape)``.

    ``spec_axes`` is a sequence of ``(lo, hi, count)``; the last axis is the height.
    """
    axes = [np.linspace(lo, hi, int(m)) for lo, hi, m in spec_axes]
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack(grids, axis=-1)
    origin = [a[0] for a in axes]
    spacing = [a[1] - a[0] for a in axes]
    return pts, origin, spacing, pts.shape[:-1]
