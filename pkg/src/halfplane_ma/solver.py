"""Damped Newton finite-difference solver for ``det D^2 u = (a+by)**alpha``.

Dirichlet data is imposed on the whole boundary of a rectangle. The
discrete operator is the 9-point central-difference determinant
``uxx*uyy - uxy**2``.

Two Newton formulations are available. ``"cofactor"`` applies Newton to
``F = det - f`` directly, with the cofactor-weighted Jacobian
``uyy*Dxx + uxx*Dyy - 2*uxy*Dxy``. The central-difference determinant has
non-convex discrete roots as well, and plain Newton drifts into them on
degenerate data (``a = 0``, ``alpha >= 1``). ``"convex-root"`` (the default)
applies Newton to ``G = Laplacian - sqrt((uxx-uyy)**2 + 4*uxy**2 + 4f)``.
Its zeros are exactly the roots of ``F`` with nonnegative discrete
Laplacian, and at a root its Jacobian is the cofactor operator times
``2/(uxx+uyy)``. Convergence is always measured on ``F``.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import MatrixRankWarning, spsolve

from . import _kernels
from .core import DomainError, EquationParams, GridSpec, ScalarField, fd_hessian, observed_orders

log = logging.getLogger(__name__)


INITS = ("poisson", "quadratic", "boundary-blend")


class SolverError(RuntimeError):
    """The Newton system could not be solved."""


@dataclass(frozen=True)
class SolverConfig:
    grid: GridSpec
    params: EquationParams
    boundary: Callable
    newton_tol: float = 1e-10
    max_iters: int = 50
    damping: float = 1.0
    init: str = "poisson"
    max_halvings: int = 30
    formulation: str = "convex-root"

    def __post_init__(self):
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.init not in INITS:
            raise ValueError(f"unknown init {self.init!r}")
        if self.formulation not in ("convex-root", "cofactor"):
            raise ValueError(f"unknown formulation {self.formulation!r}")


@dataclass(frozen=True, eq=False)
class SolveReport:
    solution: ScalarField
    iterations: int
    final_residual: float
    converged: bool
    convexity_violations: int
    residual_history: tuple = field(default=())
    newton_history: tuple = field(default=())

    def to_dict(self):
        return {"iterations": self.iterations, "final_residual": self.final_residual,
                "converged": self.converged,
                "convexity_violations": self.convexity_violations,
                "residual_history": list(self.residual_history),
                "newton_history": list(self.newton_history)}


def _boundary_mask(ny, nx):
    m = np.zeros((ny, nx), dtype=bool)
    m[0, :] = m[-1, :] = m[:, 0] = m[:, -1] = True
    return m


def _laplacian(nx, ny, hx, hy):
    mx, my = nx - 2, ny - 2
    dxx = sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(mx, mx)) / (hx * hx)
    dyy = sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(my, my)) / (hy * hy)
    return (sp.kron(sp.identity(my), dxx) + sp.kron(dyy, sp.identity(mx))).tocsc()


def poisson_guess(grid: GridSpec, data: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``Laplacian u = 2*sqrt(f)`` with the Dirichlet data.

    For ``det D^2 u = f`` the AM-GM bound gives ``Laplacian u >= 2*sqrt(f)``,
    with equality when ``uxx = uyy`` and ``uxy = 0``.
    """
    hx, hy = grid.hx, grid.hy
    b = 2.0 * np.sqrt(np.asarray(rhs, dtype=float))
    b[:, 0] -= data[1:-1, 0] / hx**2
    b[:, -1] -= data[1:-1, -1] / hx**2
    b[0, :] -= data[0, 1:-1] / hy**2
    b[-1, :] -= data[-1, 1:-1] / hy**2
    U = np.array(data, dtype=float)
    U[1:-1, 1:-1] = spsolve(_laplacian(grid.nx, grid.ny, hx, hy), b.ravel()).reshape(b.shape)
    return U


def initial_guess(cfg: SolverConfig, data: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Starting iterate agreeing with ``data`` on the boundary ring."""
    g = cfg.grid
    X, Y = g.mesh()
    if cfg.init == "poisson":
        return poisson_guess(g, data, rhs)
    if cfg.init == "quadratic":
        # s(x^2+y^2)/2 plus the bilinear function that matches the corners
        s = float(np.sqrt(max(np.mean(rhs), 1e-12)))
        bowl = 0.5 * s * (X * X + Y * Y)
        corners = [(0, 0), (0, -1), (-1, 0), (-1, -1)]
        M = np.array([[1.0, X[c], Y[c], X[c] * Y[c]] for c in corners])
        t = np.array([data[c] - bowl[c] for c in corners])
        p = np.linalg.solve(M, t)
        U = bowl + p[0] + p[1] * X + p[2] * Y + p[3] * X * Y
    else:
        # transfinite (Coons) blend of the four sides
        sx = (X - g.x_min) / (g.x_max - g.x_min)
        sy = (Y - g.y_min) / (g.y_max - g.y_min)
        left, right = data[:, :1], data[:, -1:]
        bottom, top = data[:1, :], data[-1:, :]
        U = ((1 - sx) * left + sx * right + (1 - sy) * bottom + sy * top
             - ((1 - sx) * (1 - sy) * data[0, 0] + sx * (1 - sy) * data[0, -1]
                + (1 - sx) * sy * data[-1, 0] + sx * sy * data[-1, -1]))
    U = np.array(U, dtype=float)
    bd = _boundary_mask(g.ny, g.nx)
    U[bd] = data[bd]
    return U


def solve_dirichlet(cfg: SolverConfig) -> SolveReport:
    """Solve the Dirichlet problem on ``cfg.grid`` by damped Newton.

    Raises
    ------
    DomainError
        Non-finite boundary data or right-hand side.
    SolverError
        Singular Newton system (message names the iteration).
    """
    g = cfg.grid
    X, Y = g.mesh()
    data = np.asarray(np.broadcast_to(cfg.boundary(X, Y), X.shape), dtype=float)
    bd = _boundary_mask(g.ny, g.nx)
    if not np.all(np.isfinite(data[bd])):
        raise DomainError("boundary data is not finite on every boundary node")
    Yi = Y[1:-1, 1:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        rhs = cfg.params.rhs(Yi)
    if not np.all(np.isfinite(rhs)) or not np.all(cfg.params.finite_rows(Yi)):
        raise DomainError("right-hand side is not finite on interior nodes; raise y_min")

    U = initial_guess(cfg, data, rhs)
    convex = cfg.formulation == "convex-root"
    hx, hy = g.hx, g.hy
    m = (g.nx - 2) * (g.ny - 2)
    R, F, rows, cols, vals = _kernels.ma_operator(U, hx, hy, rhs, convex)
    rnorm = float(np.max(np.abs(R)))
    res = float(np.max(np.abs(F)))
    history = [res]
    newton_history = [rnorm]
    converged = res <= cfg.newton_tol
    it = 0
    while not converged and it < cfg.max_iters:
        it += 1
        J = sp.csc_matrix((vals, (rows, cols)), shape=(m, m))
        with warnings.catch_warnings():
            warnings.simplefilter("error", MatrixRankWarning)
            try:
                d = spsolve(J, -R.ravel())
            except (MatrixRankWarning, RuntimeError) as exc:
                raise SolverError(f"singular Newton system at iteration {it}") from exc
        if not np.all(np.isfinite(d)):
            raise SolverError(f"singular Newton system at iteration {it}")
        d = d.reshape(g.ny - 2, g.nx - 2)

        # backtracking: both the Newton residual and det - f must not grow
        step = cfg.damping
        accepted = False
        for _ in range(cfg.max_halvings + 1):
            trial = U.copy()
            trial[1:-1, 1:-1] += step * d
            out = _kernels.ma_operator(trial, hx, hy, rhs, convex)
            t_rnorm = float(np.max(np.abs(out[0])))
            t_res = float(np.max(np.abs(out[1])))
            if t_rnorm <= rnorm and t_res <= res:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            log.info("newton: no decrease after %d halvings at iteration %d",
                     cfg.max_halvings, it)
            break
        U = trial
        R, F, rows, cols, vals = out
        rnorm, res = t_rnorm, t_res
        history.append(res)
        newton_history.append(rnorm)
        log.debug("newton it=%d step=%.3g |F|=%.3e", it, step, res)
        converged = res <= cfg.newton_tol

    sol = ScalarField(g, U)
    return SolveReport(sol, it, res, converged, convexity_audit(sol),
                       tuple(history), tuple(newton_history))


def convexity_audit(field: ScalarField, tol: float = 1e-10) -> int:
    """Interior nodes where the discrete ``uxx`` or Hessian determinant is below ``-tol``."""
    uxx, uxy, uyy = fd_hessian(field)
    det = uxx.values * uyy.values - uxy.values ** 2
    return int(np.count_nonzero((uxx.values < -tol) | (det < -tol)))


def convergence_study(family, x_range=(-1.0, 1.0), y_range=(0.0, 1.0),
                      sizes=(17, 33, 65), **solver_opts):
    """Solve with the family's own boundary data on square grids of increasing size.

    Returns a list of rows ``{n, h, max_error, observed_order, iterations,
    final_residual, converged, convexity_violations}``; the first row has
    ``observed_order = None``.
    """
    rows = []
    for n in sizes:
        grid = GridSpec(x_range[0], x_range[1], y_range[0], y_range[1], n, n)
        cfg = SolverConfig(grid, family.params, family.value, **solver_opts)
        rep = solve_dirichlet(cfg)
        X, Y = grid.mesh()
        err = float(np.max(np.abs(rep.solution.values - family.value(X, Y))))
        rows.append({"n": n, "h": max(grid.hx, grid.hy), "max_error": err,
                     "observed_order": None, "iterations": rep.iterations,
                     "final_residual": rep.final_residual,
                     "converged": rep.converged,
                     "convexity_violations": rep.convexity_violations})
    errs = [r["max_error"] for r in rows]
    hs = [r["h"] for r in rows]
    for k in range(1, len(rows)):
        if errs[k] > 0 and errs[k - 1] > 0:
            rows[k]["observed_order"] = float(
                np.log(errs[k - 1] / errs[k]) / np.log(hs[k - 1] / hs[k]))
    return rows


__all__ = ["SolverConfig", "SolveReport", "SolverError", "convergence_study",
           "convexity_audit", "initial_guess", "observed_orders", "poisson_guess",
           "solve_dirichlet"]
