"""Hot inner loops, compiled with numba when available.

Every kernel has a pure-numpy twin with identical semantics. The backend is
chosen once at import time:

* ``HALFPLANE_MA_NUMBA=0`` (or ``false``/``off``) forces the numpy path;
* otherwise numba is used if it can be imported.

Both implementations are always importable as ``<name>_numpy`` and
``<name>_numba`` (the latter is ``None`` without numba) so tests and the
benchmark can compare them directly.
"""
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a soft dependency
    numba = None


def _numba_requested():
    flag = os.environ.get("HALFPLANE_MA_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "no", "off")


HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and _numba_requested()
BACKEND = "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# discrete conjugate: argmax_i (x_i * xi_j - u_i)
# ---------------------------------------------------------------------------

def conjugate_argmax_brute_numpy(x, u, xi):
    """First maximiser of ``x_i*xi_j - u_i`` over ``i`` for every ``xi_j``.

    O(len(x) * len(xi)); valid for any ``u``.
    """
    vals = np.multiply.outer(xi, x) - u[None, :]
    return np.argmax(vals, axis=1).astype(np.int64)


def conjugate_argmax_monotone_numpy(slopes, xi):
    """Maximiser index for convex data from the sorted segment slopes.

    For convex ``u`` the objective is concave in ``i`` and it increases from
    node ``i`` to ``i+1`` exactly when ``xi > slopes[i]``; the first maximiser
    is the number of segment slopes strictly below ``xi``.
    """
    return np.searchsorted(slopes, xi, side="left").astype(np.int64)


def _conjugate_argmax_brute_loop(x, u, xi):
    m = xi.shape[0]
    n = x.shape[0]
    out = np.empty(m, dtype=np.int64)
    for j in range(m):
        best = x[0] * xi[j] - u[0]
        k = 0
        for i in range(1, n):
            v = x[i] * xi[j] - u[i]
            if v > best:
                best = v
                k = i
        out[j] = k
    return out


def _conjugate_argmax_monotone_loop(slopes, xi):
    # two-pointer sweep; xi must be nondecreasing
    m = xi.shape[0]
    ns = slopes.shape[0]
    out = np.empty(m, dtype=np.int64)
    i = 0
    for j in range(m):
        while i < ns and xi[j] > slopes[i]:
            i += 1
        out[j] = i
    return out


# ---------------------------------------------------------------------------
# Monge-Ampere residual and Newton Jacobian on the 9-point stencil
# ---------------------------------------------------------------------------
#
# Two residuals share one stencil. With ``convex=False`` the residual is
# F = uxx*uyy - uxy**2 - f and the Jacobian is the cofactor operator
# uyy*Dxx + uxx*Dyy - 2*uxy*Dxy. With ``convex=True`` the residual is
# G = uxx + uyy - sqrt((uxx-uyy)**2 + 4*uxy**2 + 4*f), whose zeros are the
# discretely convex roots of F = 0; at such a root its Jacobian is the
# cofactor operator scaled by 2/(uxx+uyy).

S_FLOOR = 1e-300


def ma_operator_numpy(U, hx, hy, rhs, convex=True):
    """Residual, determinant defect and Jacobian triplets.

    Parameters
    ----------
    U : (ny, nx) array
        Full grid values, boundary ring included.
    hx, hy : float
        Grid spacings.
    rhs : (ny-2, nx-2) array
        Right-hand side on interior nodes.
    convex : bool
        Use the convex-root residual ``G`` instead of ``F``.

    Returns
    -------
    R : (ny-2, nx-2) array
        Residual being driven to zero (``G`` or ``F``).
    F : (ny-2, nx-2) array
        ``uxx*uyy - uxy**2 - rhs``.
    rows, cols, vals : 1-d arrays
        COO triplets of dR/dU restricted to interior unknowns, numbered
        row-major over the interior block, stencil order within a row.
    """
    ny, nx = U.shape
    mx, my = nx - 2, ny - 2
    c = U[1:-1, 1:-1]
    uxx = (U[1:-1, 2:] - 2.0 * c + U[1:-1, :-2]) / (hx * hx)
    uyy = (U[2:, 1:-1] - 2.0 * c + U[:-2, 1:-1]) / (hy * hy)
    uxy = (U[2:, 2:] - U[2:, :-2] - U[:-2, 2:] + U[:-2, :-2]) / (4.0 * hx * hy)
    F = uxx * uyy - uxy * uxy - rhs
    if convex:
        S = np.maximum(np.sqrt((uxx - uyy) ** 2 + 4.0 * uxy * uxy + 4.0 * rhs), S_FLOOR)
        R = uxx + uyy - S
        cxx = 1.0 - (uxx - uyy) / S
        cyy = 1.0 + (uxx - uyy) / S
        cxy = -4.0 * uxy / S
    else:
        R = F
        cxx, cyy, cxy = uyy, uxx, -2.0 * uxy

    ax = cxx / (hx * hx)
    ay = cyy / (hy * hy)
    axy = cxy / (4.0 * hx * hy)
    stencil = (
        (-1, -1, axy), (-1, 0, ay), (-1, 1, -axy),
        (0, -1, ax), (0, 0, -2.0 * ax - 2.0 * ay), (0, 1, ax),
        (1, -1, -axy), (1, 0, ay), (1, 1, axy),
    )
    jj, ii = np.meshgrid(np.arange(my), np.arange(mx), indexing="ij")
    row_id = jj * mx + ii
    rows, cols, vals = [], [], []
    for dj, di, w in stencil:
        tj = jj + dj
        ti = ii + di
        inside = (tj >= 0) & (tj < my) & (ti >= 0) & (ti < mx)
        rows.append(row_id[inside])
        cols.append((tj * mx + ti)[inside])
        vals.append(np.broadcast_to(w, row_id.shape)[inside])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    order = np.argsort(rows, kind="stable")
    return R, F, rows[order], cols[order], vals[order]


def _ma_operator_loop(U, hx, hy, rhs, convex):
    ny, nx = U.shape
    mx, my = nx - 2, ny - 2
    R = np.empty((my, mx))
    F = np.empty((my, mx))
    cap = 9 * mx * my
    rows = np.empty(cap, dtype=np.int64)
    cols = np.empty(cap, dtype=np.int64)
    vals = np.empty(cap)
    k = 0
    for j in range(my):
        for i in range(mx):
            J = j + 1
            I = i + 1
            c = U[J, I]
            uxx = (U[J, I + 1] - 2.0 * c + U[J, I - 1]) / (hx * hx)
            uyy = (U[J + 1, I] - 2.0 * c + U[J - 1, I]) / (hy * hy)
            uxy = (U[J + 1, I + 1] - U[J + 1, I - 1] - U[J - 1, I + 1]
                   + U[J - 1, I - 1]) / (4.0 * hx * hy)
            f = rhs[j, i]
            F[j, i] = uxx * uyy - uxy * uxy - f
            if convex:
                S = np.sqrt((uxx - uyy) ** 2 + 4.0 * uxy * uxy + 4.0 * f)
                if S < S_FLOOR:
                    S = S_FLOOR
                R[j, i] = uxx + uyy - S
                cxx = 1.0 - (uxx - uyy) / S
                cyy = 1.0 + (uxx - uyy) / S
                cxy = -4.0 * uxy / S
            else:
                R[j, i] = F[j, i]
                cxx = uyy
                cyy = uxx
                cxy = -2.0 * uxy
            ax = cxx / (hx * hx)
            ay = cyy / (hy * hy)
            axy = cxy / (4.0 * hx * hy)
            r = j * mx + i
            for dj in range(-1, 2):
                for di in range(-1, 2):
                    tj = j + dj
                    ti = i + di
                    if tj < 0 or tj >= my or ti < 0 or ti >= mx:
                        continue
                    if dj == 0 and di == 0:
                        w = -2.0 * ax - 2.0 * ay
                    elif dj == 0:
                        w = ax
                    elif di == 0:
                        w = ay
                    elif dj == di:
                        w = axy
                    else:
                        w = -axy
                    rows[k] = r
                    cols[k] = tj * mx + ti
                    vals[k] = w
                    k += 1
    return R, F, rows[:k], cols[:k], vals[:k]


if HAVE_NUMBA:
    conjugate_argmax_brute_numba = numba.njit(cache=True)(_conjugate_argmax_brute_loop)
    conjugate_argmax_monotone_numba = numba.njit(cache=True)(_conjugate_argmax_monotone_loop)
    ma_operator_numba = numba.njit(cache=True)(_ma_operator_loop)
else:  # pragma: no cover
    conjugate_argmax_brute_numba = None
    conjugate_argmax_monotone_numba = None
    ma_operator_numba = None


def _as_f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def conjugate_argmax_brute(x, u, xi):
    if USE_NUMBA:
        return conjugate_argmax_brute_numba(_as_f64(x), _as_f64(u), _as_f64(xi))
    return conjugate_argmax_brute_numpy(x, u, xi)


def conjugate_argmax_monotone(slopes, xi):
    if USE_NUMBA:
        return conjugate_argmax_monotone_numba(_as_f64(slopes), _as_f64(xi))
    return conjugate_argmax_monotone_numpy(slopes, xi)


def ma_operator(U, hx, hy, rhs, convex=True):
    if USE_NUMBA:
        return ma_operator_numba(_as_f64(U), float(hx), float(hy), _as_f64(rhs), bool(convex))
    return ma_operator_numpy(U, hx, hy, rhs, convex)
