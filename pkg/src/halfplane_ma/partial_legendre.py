"""Discrete partial Legendre transform in ``x`` and the Grushin residual.

Each ``y``-slice of a sampled field is conjugated separately:
``u*(xi, eta) = max_x (x*xi - u(x, eta))``. The discrete maximiser is found
on the grid (brute force or the monotone sweep valid for convex data). By
default it is then refined on the local parabola through the maximiser and
its two neighbours, which makes the transform exact on quadratics at any
``xi``; ``refine=False`` keeps the plain grid maximum.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import (DomainError, EquationParams, GridError, GridSpec,
                   ResidualReport, ScalarField, fd_hessian, residual_report)


class ConvexityError(ValueError):
    """A slice is not strictly convex in the transformed variable."""


@dataclass(frozen=True, eq=False)
class PLTResult:
    field_star: ScalarField
    xi_spec: GridSpec


def _slopes_range(field: ScalarField):
    """Per-slice ``[min u_x, max u_x]`` intersected over slices."""
    spec = field.spec
    ux = np.gradient(field.values, spec.hx, axis=1, edge_order=2)
    lo = float(np.max(ux.min(axis=1)))
    hi = float(np.min(ux.max(axis=1)))
    return lo, hi


def check_slices_convex(field: ScalarField, tol: float = 0.0):
    """Raise :class:`ConvexityError` naming the first non-convex ``y``-slice."""
    U = field.values
    d2 = U[:, 2:] - 2.0 * U[:, 1:-1] + U[:, :-2]
    bad = np.nonzero(np.any(d2 <= tol, axis=1))[0]
    if bad.size:
        j = int(bad[0])
        raise ConvexityError(
            f"slice {j} (y = {field.spec.y[j]:.6g}) is not strictly convex in x")


def conjugate_slice(x, u, xi, method="monotone", refine=True):
    """Discrete Legendre-Fenchel conjugate of one convex slice.

    Parameters
    ----------
    x : (n,) array, uniform and increasing
    u : (n,) array, strictly convex samples
    xi : (m,) array, nondecreasing
    method : {"monotone", "brute"}
    refine : bool
        Refine on the local parabola; otherwise return the plain grid maximum.

    Returns
    -------
    values : (m,) array
        ``max(x*xi - p(x))`` where ``p`` is the local parabola through the
        discrete maximiser; never below the grid maximum.
    idx : (m,) int array
        Discrete (grid) maximiser.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    xi = np.asarray(xi, dtype=float)
    n = x.size
    if method == "monotone":
        slopes = np.diff(u) / np.diff(x)
        idx = _kernels.conjugate_argmax_monotone(slopes, xi)
    elif method == "brute":
        idx = _kernels.conjugate_argmax_brute(x, u, xi)
    else:
        raise ValueError(f"unknown method {method!r}")

    discrete = x[idx] * xi - u[idx]
    if not refine:
        return discrete, idx
    # near-ties (xi equal to a segment slope) may be broken differently by
    # the two argmax methods; centre the parabola by the slope rule
    s = np.diff(u) / np.diff(x)
    k = idx.copy()
    k[(k < n - 1) & (s[np.minimum(k, n - 2)] < xi)] += 1
    k[(k > 0) & (s[np.maximum(k - 1, 0)] >= xi)] -= 1
    k = np.clip(k, 1, n - 2)
    h = x[k + 1] - x[k]
    d1 = (u[k + 1] - u[k - 1]) / (x[k + 1] - x[k - 1])
    d2 = (u[k + 1] - 2.0 * u[k] + u[k - 1]) / (h * h)
    xs = np.clip(x[k] + (xi - d1) / d2, x[k - 1], x[k + 1])
    dx = xs - x[k]
    refined = xs * xi - (u[k] + d1 * dx + 0.5 * d2 * dx * dx)
    return np.maximum(refined, discrete), idx


def _conjugate_field(field: ScalarField, n_out: int, method: str, refine: bool, check=True):
    if n_out < 3:
        raise GridError("need at least 3 output nodes")
    if check:
        check_slices_convex(field)
    lo, hi = _slopes_range(field)
    if not hi > lo:
        raise GridError(
            f"degenerate slope range [{lo:.6g}, {hi:.6g}]; slices share no common u_x interval")
    spec = field.spec
    out_spec = GridSpec(lo, hi, spec.y_min, spec.y_max, n_out, spec.ny)
    xi = out_spec.x
    x = spec.x
    star = np.empty((spec.ny, n_out))
    for j in range(spec.ny):
        star[j], _ = conjugate_slice(x, field.values[j], xi, method, refine)
    return ScalarField(out_spec, star)


def plt_forward(u: ScalarField, n_xi: int, method: str = "monotone",
                refine: bool = True) -> PLTResult:
    """Partial Legendre transform of ``u`` in ``x`` onto a uniform ``xi`` grid.

    The ``xi`` range is the intersection over slices of the range of ``u_x``
    so that the result lives on a rectangle; ``eta`` reuses the ``y`` nodes.
    """
    star = _conjugate_field(u, n_xi, method, refine)
    return PLTResult(star, star.spec)


def plt_inverse(star, n_x: int, method: str = "monotone",
                refine: bool = True) -> ScalarField:
    """Conjugate back in ``xi``; the transform is an involution on convex slices."""
    f = star.field_star if isinstance(star, PLTResult) else star
    return _conjugate_field(f, n_x, method, refine)


def fenchel_young_gap(u: ScalarField, star: ScalarField):
    """``min over (x, xi) of u(x) + u*(xi) - x*xi`` for every slice.

    Nonnegative for a valid conjugate; close to zero at the maximisers.
    """
    if u.spec.ny != star.spec.ny:
        raise GridError("fields must share the y nodes")
    x = u.spec.x
    xi = star.spec.x
    gap = (u.values[:, None, :] + star.values[:, :, None]
           - xi[None, :, None] * x[None, None, :])
    return gap.min(axis=(1, 2))


def involution_error(u: ScalarField, back: ScalarField, reference=None) -> float:
    """Sup-norm distance between ``back`` and ``u`` on ``back``'s nodes.

    ``reference(x, y)`` evaluates the original function exactly when known;
    otherwise ``u`` is interpolated per slice with a cubic spline.
    """
    X, Y = back.spec.mesh()
    if reference is not None:
        target = reference(X, Y)
    else:
        from scipy.interpolate import CubicSpline

        if not np.allclose(back.spec.y, u.spec.y, rtol=0, atol=1e-12):
            raise GridError("round trip changed the y nodes")
        spline = CubicSpline(u.spec.x, u.values, axis=1)
        xs = np.clip(back.spec.x, u.spec.x_min, u.spec.x_max)
        target = spline(xs)
    return float(np.max(np.abs(back.values - target)))


def grushin_residual_field(star: ScalarField, params: EquationParams):
    """Signed ``(a+b*eta)**alpha * u*_xixi + u*_etaeta`` on interior nodes.

    Returns ``(field, mask)``; rows with ``a + b*eta <= 0`` are masked out
    and hold zero.
    """
    sxx, _, syy = fd_hessian(star)
    _, ETA = sxx.spec.mesh()
    ok = params.finite_rows(ETA)
    with np.errstate(divide="ignore", invalid="ignore"):
        weight = np.where(ok, params.rhs(np.where(ok, ETA, 1.0)), 0.0)
    return ScalarField(sxx.spec, np.where(ok, weight * sxx.values + syy.values, 0.0)), ok


def grushin_residual(star: ScalarField, params: EquationParams) -> ResidualReport:
    """``|(a+b*eta)**alpha * u*_xixi + u*_etaeta|`` on interior nodes."""
    res, ok = grushin_residual_field(star, params)
    return residual_report(res.values, res.spec.mesh(), ok)


def second_diff_in_xi(star: ScalarField) -> ScalarField:
    """``v = u*_xixi - 1`` on interior ``xi`` nodes and all ``eta`` rows."""
    spec = star.spec
    if spec.nx < 3:
        raise GridError("need at least 3 xi nodes")
    S = star.values
    h = spec.hx
    v = (S[:, 2:] - 2.0 * S[:, 1:-1] + S[:, :-2]) / (h * h) - 1.0
    out = GridSpec(spec.x_min + h, spec.x_max - h, spec.y_min, spec.y_max,
                   spec.nx - 2, spec.ny, derived=True)
    return ScalarField(out, v)


__all__ = [
    "ConvexityError", "DomainError", "PLTResult", "check_slices_convex",
    "conjugate_slice", "fenchel_young_gap", "grushin_residual", "grushin_residual_field",
    "involution_error", "plt_forward", "plt_inverse", "second_diff_in_xi",
]
