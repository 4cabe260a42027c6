import numpy as np
import pytest
from hypothesis import example, given
from hypothesis import strategies as st

from halfplane_ma.closed_forms import DirichletFamily, sample_family, sample_star
from halfplane_ma.core import EquationParams, FamilyCoeffs, GridError, GridSpec, ScalarField
from halfplane_ma.partial_legendre import (ConvexityError, conjugate_slice,
                                           fenchel_young_gap, grushin_residual,
                                           involution_error, plt_forward, plt_inverse,
                                           second_diff_in_xi)


def field(fn, spec=GridSpec(-1, 1, 0, 1, 65, 9)):
    return ScalarField.sample(spec, fn)


def dirichlet(a=0.0, b=1.0, al=1.0, A=0.5, B=0.0, C=0.2):
    return DirichletFamily(EquationParams(a, b, al), FamilyCoeffs(A, B, C))


@pytest.mark.parametrize("refine", [True, False])
def test_half_square_is_self_conjugate(refine):
    res = plt_forward(field(lambda x, y: 0.5 * x * x), 65, refine=refine)
    XI, _ = res.xi_spec.mesh()
    tol = 1e-13 if refine else (2 / 64) ** 2
    np.testing.assert_allclose(res.field_star.values, 0.5 * XI * XI, atol=tol)
    assert res.xi_spec.y_min == 0 and res.xi_spec.y_max == 1


def test_scaled_square():
    res = plt_forward(field(lambda x, y: 2 * x * x), 81)
    XI, _ = res.xi_spec.mesh()
    np.testing.assert_allclose(res.field_star.values, XI * XI / 8, atol=1e-12)
    assert res.xi_spec.x_min == pytest.approx(-4) and res.xi_spec.x_max == pytest.approx(4)


def test_dirichlet_xi_curvature():
    fam = dirichlet()
    res = plt_forward(sample_family(fam, GridSpec(-1, 1, 0, 1, 257, 17)), 257)
    v = second_diff_in_xi(res.field_star)
    _, ETA = v.spec.mesh()
    assert np.max(np.abs(v.values + 1 - (1 + 0.5 * ETA))) <= 2e-2


def test_round_trips():
    u = field(lambda x, y: 0.5 * x * x)
    back = plt_inverse(plt_forward(u, 65), 65)
    assert back.spec == u.spec or np.allclose(back.spec.x, u.spec.x)
    assert involution_error(u, back, lambda x, y: 0.5 * x * x) <= 1e-8
    u7 = field(lambda x, y: x * x + 7)
    back = plt_inverse(plt_forward(u7, 65), 65)
    assert involution_error(u7, back, lambda x, y: x * x + 7) <= 1e-8


def test_involution_error_decreases_without_refinement():
    fam = dirichlet(C=0.3)
    errs = []
    for n in (33, 65, 129, 257):
        u = sample_family(fam, GridSpec(-1, 1, 0, 1, n, 9))
        back = plt_inverse(plt_forward(u, n, refine=False), n, refine=False)
        errs.append(involution_error(u, back, fam.value))
    assert all(e1 < e0 for e0, e1 in zip(errs, errs[1:]))
    h = 2 / np.array([32, 64, 128, 256])
    assert np.all(np.array(errs) <= 5 * h * np.log(1 / h))


def test_fenchel_young():
    fam = dirichlet()
    u = sample_family(fam, GridSpec(-1, 1, 0, 1, 65, 9))
    res = plt_forward(u, 65)
    gap = fenchel_young_gap(u, res.field_star)
    assert np.all(gap >= -1e-12)
    assert np.all(gap <= 1e-3)
    res = plt_forward(u, 65, refine=False)
    assert np.all(np.abs(fenchel_young_gap(u, res.field_star)) <= 1e-12)


def test_boundary_row_maps_to_half_square():
    fam = dirichlet(a=0.4, b=1.5, al=0.5, A=0.8, C=-0.4)
    res = plt_forward(sample_family(fam, GridSpec(-2, 2, 0, 1, 129, 9)), 129)
    xi = res.xi_spec.x
    np.testing.assert_allclose(res.field_star.values[0], 0.5 * xi * xi, atol=1e-12)


def test_derivative_identity_on_family():
    fam = dirichlet(a=1.0, b=2.0, al=0.5, A=0.3, B=-1, C=0.2)
    spec = GridSpec(-1, 1, 0.1, 1, 65, 10)
    sxx = second_diff_in_xi(sample_star(fam, spec))
    XI, ETA = sxx.spec.mesh()
    uxx, _, _ = fam.hessian(XI, ETA)
    np.testing.assert_allclose((sxx.values + 1) * uxx, 1.0, atol=1e-10)


def test_grushin_residual_examples():
    p = EquationParams(1.0, 2.0, 0.5)
    spec = GridSpec(-1, 1, 0, 1, 33, 33)
    const = grushin_residual(ScalarField(spec, np.ones((33, 33))), p)
    assert const.max_abs == 0
    a, b, al = 1.0, 2.0, 0.5
    simple = field(lambda xi, eta: 0.5 * xi * xi
                   - (a + b * eta) ** (2 + al) / (b * b * (1 + al) * (2 + al)) + 3, spec)
    assert grushin_residual(simple, p).max_abs < 1e-4
    errs = []
    for n in (33, 65, 129):
        star = sample_star(dirichlet(1, 2, 0.5, 0.3, -1, 0.2), GridSpec(-1, 1, 0, 1, n, n))
        errs.append(grushin_residual(star, p).max_abs)
    assert errs[0] > errs[1] > errs[2]


def test_second_diff_examples():
    v = second_diff_in_xi(field(lambda xi, eta: 0.5 * xi * xi))
    assert np.max(np.abs(v.values)) < 1e-10
    v = second_diff_in_xi(field(lambda xi, eta: 0.5 * xi * xi * (1 + eta)))
    _, ETA = v.spec.mesh()
    np.testing.assert_allclose(v.values, ETA, atol=1e-10)
    fam = dirichlet(a=0.5, b=1.0, al=1.0, A=0.7, C=0.1)
    v = second_diff_in_xi(sample_star(fam, GridSpec(-1, 1, 0, 1, 33, 17)))
    _, ETA = v.spec.mesh()
    np.testing.assert_allclose(v.values, 0.7 * ETA, atol=1e-10)
    assert v.spec.nx == 31 and v.spec.ny == 17


def test_errors():
    with pytest.raises(ConvexityError, match="slice 2"):
        plt_forward(field(lambda x, y: np.where(y > 0.2, -x * x, x * x)), 33)
    with pytest.raises(ConvexityError):
        plt_forward(field(lambda x, y: x + 0 * y), 33)
    with pytest.raises(GridError):
        plt_forward(field(lambda x, y: x * x), 2)
    # slopes at different heights share no common interval
    with pytest.raises(GridError, match="degenerate"):
        plt_forward(field(lambda x, y: 0.01 * x * x + 10 * y * x), 33)
    with pytest.raises(ValueError):
        conjugate_slice([0, 1, 2], [0, 1, 4], [0.5], method="nope")


@given(st.lists(st.floats(0.05, 5), min_size=4, max_size=40),
       st.floats(-3, 3), st.integers(3, 60))
@example(curv=[0.375, 1.0, 0.375, 1.0], shift=0.0, m=3)  # xi hits a segment slope
def test_monotone_matches_brute(curv, shift, m):
    # convex slice from positive second differences
    h = 0.1
    d2 = np.asarray(curv) * h * h
    slopes = shift * h + np.concatenate([[0.0], np.cumsum(d2)])
    u = np.concatenate([[0.0], np.cumsum(slopes)])
    x = h * np.arange(u.size)
    s = np.diff(u) / h
    xi = np.linspace(s[0], s[-1], m)
    for refine in (False, True):
        v1, i1 = conjugate_slice(x, u, xi, "monotone", refine)
        v2, i2 = conjugate_slice(x, u, xi, "brute", refine)
        assert np.all(np.abs(v1 - v2) <= 1e-12 * (1 + np.abs(v2)))
        assert np.all((i1 == i2) | np.isclose(x[i1] * xi - u[i1], x[i2] * xi - u[i2],
                                                rtol=0, atol=1e-12))


@given(st.floats(0.2, 4), st.floats(-1, 1), st.floats(-2, 2))
def test_refined_conjugate_exact_on_quadratics(c, p, q):
    x = np.linspace(-1, 1, 41)
    u = c * x * x + p * x + q
    xi = np.linspace(-2 * c + p, 2 * c + p, 23)
    v, _ = conjugate_slice(x, u, xi)
    np.testing.assert_allclose(v, (xi - p) ** 2 / (4 * c) - q, atol=1e-11)
