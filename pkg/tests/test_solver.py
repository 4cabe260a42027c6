import numpy as np
import pytest

from halfplane_ma.closed_forms import DirichletFamily, sample_family
from halfplane_ma.core import (DomainError, EquationParams, FamilyCoeffs, GridSpec,
                               ScalarField, fd_hessian)
from halfplane_ma.solver import (SolverConfig, SolverError, convergence_study,
                                 convexity_audit, initial_guess, solve_dirichlet)

EXACT = 1e-10  # scheme reproduces polynomials of degree <= 3 in y to rounding


def fam(a, b, al, A=0.0, B=0.0, C=0.0):
    return DirichletFamily(EquationParams(a, b, al), FamilyCoeffs(A, B, C))


def orders_or_exact(rows):
    errs = [r["max_error"] for r in rows]
    if max(errs) <= EXACT:
        return None
    return [r["observed_order"] for r in rows[1:]]


@pytest.mark.parametrize("init", ["poisson", "quadratic", "boundary-blend"])
def test_quadratic_recovered(init):
    grid = GridSpec(-1, 1, -1, 1, 17, 17)
    u = lambda x, y: 0.5 * (x * x + y * y)  # noqa: E731
    rep = solve_dirichlet(SolverConfig(grid, EquationParams(1, 1, 0), u, init=init))
    assert rep.converged and rep.final_residual <= 1e-10
    assert rep.iterations <= 5
    X, Y = grid.mesh()
    assert np.max(np.abs(rep.solution.values - u(X, Y))) <= 1e-8


def test_reference_family_convergence_and_hessian():
    f = fam(0, 1, 1, A=0.5, C=0.3)
    rows = convergence_study(f, sizes=(17, 33, 65))
    assert all(r["converged"] and r["final_residual"] <= 1e-10 for r in rows)
    assert all(r["convexity_violations"] == 0 for r in rows)
    assert all(o >= 1.9 for o in orders_or_exact(rows))
    grid = GridSpec(-1, 1, 0, 1, 65, 65)
    rep = solve_dirichlet(SolverConfig(grid, f.params, f.value))
    uxx, _, _ = fd_hessian(rep.solution)
    j, i = 31, 31  # interior index of (0, 0.5)
    assert uxx.spec.x[i] == pytest.approx(0.0, abs=1e-12)
    assert uxx.spec.y[j] == pytest.approx(0.5)
    assert abs(uxx.values[j, i] - 0.8) <= 5e-3


def test_savin_family_is_reproduced_exactly():
    # x^2/2 + y^3/6: cubic in y, central differences are exact
    rows = convergence_study(fam(0, 1, 1), sizes=(17, 33, 65))
    assert orders_or_exact(rows) is None


@pytest.mark.parametrize("al", [0.0, 0.5, 1.0, 2.0])
@pytest.mark.parametrize("a", [0.0, 1.0])
def test_order_of_accuracy(al, a):
    sizes = (65, 129, 257) if (al == 0.5 and a == 0.0) else (17, 33, 65)
    rows = convergence_study(fam(a, 1, al, A=0.5, B=0.1, C=0.3), sizes=sizes)
    assert all(r["converged"] for r in rows)
    o = orders_or_exact(rows)
    assert o is None or all(v >= 1.9 for v in o), rows


def test_singular_rhs_truncated_domain():
    f = fam(0, 1, -0.5, A=0.5, C=0.3)
    rows = convergence_study(f, y_range=(1e-2, 1.0), sizes=(17, 33, 65))
    assert all(r["converged"] and r["convexity_violations"] == 0 for r in rows)
    assert rows[-1]["max_error"] < rows[0]["max_error"] / 10


def test_residual_monotone_and_boundary_exact():
    f = fam(0, 1, 2, A=0.5, B=-0.3, C=0.3)
    grid = GridSpec(-1, 1, 0, 1, 33, 33)
    for formulation in ("convex-root", "cofactor"):
        rep = solve_dirichlet(SolverConfig(grid, f.params, f.value, formulation=formulation))
        assert rep.converged
        h = np.array(rep.residual_history)
        assert np.all(np.diff(h) <= 0)
        assert np.all(np.diff(rep.newton_history) <= 0)
        X, Y = grid.mesh()
        exact = f.value(X, Y)
        V = rep.solution.values
        for edge in (np.s_[0, :], np.s_[-1, :], np.s_[:, 0], np.s_[:, -1]):
            assert np.array_equal(V[edge], exact[edge])


def test_convexity_audit():
    g = GridSpec(-1, 1, 0, 1, 17, 17)
    assert convexity_audit(sample_family(fam(0.5, 1, 0.7, 0.4, 0, -0.2), g)) == 0
    assert convexity_audit(ScalarField.sample(g, lambda x, y: -x * x + 0 * y)) == 15 * 15


def test_singular_newton_system():
    g = GridSpec(-1, 1, 0, 1, 9, 9)
    cfg = SolverConfig(g, EquationParams(1, 1, 0), lambda x, y: 0 * x,
                       init="boundary-blend", formulation="cofactor")
    with pytest.raises(SolverError, match="iteration 1"):
        solve_dirichlet(cfg)


def test_unreachable_tolerance_reports_not_converged():
    f = fam(0, 1, 1, A=0.5, C=0.3)
    cfg = SolverConfig(GridSpec(-1, 1, 0, 1, 17, 17), f.params, f.value,
                       newton_tol=1e-300, max_iters=8)
    rep = solve_dirichlet(cfg)
    assert not rep.converged
    assert rep.final_residual > cfg.newton_tol
    assert rep.to_dict()["converged"] is False


def test_input_errors():
    g = GridSpec(-1, 1, 0, 1, 9, 9)
    with pytest.raises(DomainError), np.errstate(divide="ignore"):
        solve_dirichlet(SolverConfig(g, EquationParams(1, 1, 0), lambda x, y: np.log(y)))
    with pytest.raises(DomainError):
        solve_dirichlet(SolverConfig(GridSpec(-1, 1, -2, -1, 9, 9), EquationParams(0, 1, 0.5),
                                     lambda x, y: x * x))
    for bad in ({"newton_tol": 0}, {"max_iters": 0}, {"damping": 0}, {"init": "x"},
                {"formulation": "x"}):
        with pytest.raises(ValueError):
            SolverConfig(g, EquationParams(1, 1, 0), lambda x, y: x, **bad)


def test_initial_guess_matches_boundary():
    f = fam(1, 2, 0.5, 0.3, -1, 0.2)
    g = GridSpec(-1, 1, 0, 1, 13, 11)
    X, Y = g.mesh()
    data = f.value(X, Y)
    rhs = f.params.rhs(Y[1:-1, 1:-1])
    for init in ("poisson", "quadratic", "boundary-blend"):
        U = initial_guess(SolverConfig(g, f.params, f.value, init=init), data, rhs)
        ring = np.ones_like(U, dtype=bool)
        ring[1:-1, 1:-1] = False
        assert np.array_equal(U[ring], data[ring])
