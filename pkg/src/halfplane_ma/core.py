"""Shared types: equation parameters, grids, sampled fields, residual reports."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

ANALYTIC_TOL = 1e-9
ALPHA_LOG_TOL = 1e-12


class DomainError(ValueError):
    """Parameters or points outside the domain where a formula is defined."""


class GridError(ValueError):
    """Malformed or too-small grid."""


@dataclass(frozen=True)
class EquationParams:
    """Right-hand side ``(a + b*y)**alpha`` of ``det D^2 u``."""

    a: float
    b: float
    alpha: float

    def __post_init__(self):
        for name in ("a", "b", "alpha"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if self.a < 0:
            raise DomainError(f"a must be >= 0, got {self.a}")
        if self.b <= 0:
            raise DomainError(f"b must be > 0, got {self.b}")

    def rhs(self, y):
        return (self.a + self.b * np.asarray(y, dtype=float)) ** self.alpha

    def finite_rows(self, y):
        """Mask of heights with ``a + b*y > 0``.

        This also drops ``y = 0`` when ``a = 0``, where the right-hand side
        vanishes or blows up.
        """
        y = np.asarray(y, dtype=float)
        return self.a + self.b * y > 0

    def require_family_range(self):
        if not self.alpha > -2:
            raise DomainError(
                f"classified families need alpha > -2, got {self.alpha}")


@dataclass(frozen=True)
class FamilyCoeffs:
    A: float = 0.0
    B: float = 0.0
    C: float = 0.0

    def __post_init__(self):
        for name in ("A", "B", "C"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if self.A < 0:
            raise DomainError(f"A must be >= 0, got {self.A}")


@dataclass(frozen=True)
class GridSpec:
    """Uniform tensor grid on ``[x_min, x_max] x [y_min, y_max]``.

    ``nx`` and ``ny`` count nodes, endpoints included. Grids derived by
    stripping boundary rings (``derived=True``) may have fewer than three
    nodes per axis.
    """

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    nx: int
    ny: int
    derived: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("x_min", "x_max", "y_min", "y_max"):
            if not math.isfinite(getattr(self, name)):
                raise GridError(f"{name} must be finite")
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise GridError("nx and ny must be integers")
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))
        if self.derived:
            if self.nx < 1 or self.ny < 1:
                raise GridError("empty grid")
            return
        if self.nx < 3 or self.ny < 3:
            raise GridError(f"need nx, ny >= 3, got {self.nx}x{self.ny}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise GridError("need x_min < x_max and y_min < y_max")

    @property
    def hx(self) -> float:
        return (self.x_max - self.x_min) / (self.nx - 1) if self.nx > 1 else 0.0

    @property
    def hy(self) -> float:
        return (self.y_max - self.y_min) / (self.ny - 1) if self.ny > 1 else 0.0

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)

    @property
    def y(self) -> np.ndarray:
        return np.linspace(self.y_min, self.y_max, self.ny)

    def mesh(self):
        """``(X, Y)`` arrays of shape ``(ny, nx)``."""
        return np.meshgrid(self.x, self.y, indexing="xy")

    def interior(self) -> "GridSpec":
        if self.nx < 3 or self.ny < 3:
            raise GridError("grid has no interior")
        return GridSpec(self.x_min + self.hx, self.x_max - self.hx,
                        self.y_min + self.hy, self.y_max - self.hy,
                        self.nx - 2, self.ny - 2, derived=True)

    def to_dict(self):
        return {"x_min": self.x_min, "x_max": self.x_max,
                "y_min": self.y_min, "y_max": self.y_max,
                "nx": self.nx, "ny": self.ny}

    @classmethod
    def from_dict(cls, d, derived=False):
        return cls(float(d["x_min"]), float(d["x_max"]), float(d["y_min"]),
                   float(d["y_max"]), int(d["nx"]), int(d["ny"]), derived=derived)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Values on a :class:`GridSpec`, stored as ``(ny, nx)`` (y outer)."""

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.size != self.spec.nx * self.spec.ny:
            raise GridError(
                f"expected {self.spec.nx * self.spec.ny} values, got {vals.size}")
        vals = vals.reshape(self.spec.ny, self.spec.nx)
        if not np.all(np.isfinite(vals)):
            raise GridError("field values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def sample(cls, spec: GridSpec, fn: Callable) -> "ScalarField":
        """Sample a vectorised ``fn(X, Y)`` on the grid nodes."""
        X, Y = spec.mesh()
        return cls(spec, np.broadcast_to(fn(X, Y), X.shape))

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def max_abs_diff(self, other: "ScalarField") -> float:
        if other.spec != self.spec:
            raise GridError("fields live on different grids")
        return float(np.max(np.abs(self.values - other.values)))

    # -- serialisation --------------------------------------------------

    def to_csv(self) -> str:
        X, Y = self.spec.mesh()
        buf = io.StringIO()
        buf.write("x,y,value\n")
        for xv, yv, v in zip(X.ravel(), Y.ravel(), self.values.ravel()):
            buf.write(f"{fmt17(xv)},{fmt17(yv)},{fmt17(v)}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ScalarField":
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["x", "y", "value"]:
            raise GridError("CSV header must be 'x,y,value'")
        rows = np.array([[float(c) for c in r] for r in reader if r], dtype=float)
        if rows.ndim != 2 or rows.shape[1] != 3:
            raise GridError("CSV rows must have three columns")
        xs = np.unique(rows[:, 0])
        ys = np.unique(rows[:, 1])
        nx, ny = xs.size, ys.size
        if nx * ny != rows.shape[0]:
            raise GridError("CSV nodes do not form a full tensor grid")
        spec = GridSpec(float(xs[0]), float(xs[-1]), float(ys[0]), float(ys[-1]), nx, ny)
        order = np.lexsort((rows[:, 0], rows[:, 1]))
        return cls(spec, rows[order, 2].reshape(ny, nx))

    def to_json(self) -> str:
        return dumps17({"spec": self.spec.to_dict(), "values": self.values.ravel().tolist()})

    @classmethod
    def from_json(cls, text: str) -> "ScalarField":
        d = json.loads(text)
        return cls(GridSpec.from_dict(d["spec"]), np.asarray(d["values"], dtype=float))


@dataclass(frozen=True)
class ResidualReport:
    max_abs: float
    mean_abs: float
    argmax: tuple
    n_evaluated: int

    def __post_init__(self):
        if self.n_evaluated < 1:
            raise ValueError("residual report over an empty set")

    def to_dict(self):
        return {"max_abs": self.max_abs, "mean_abs": self.mean_abs,
                "argmax": list(self.argmax), "n_evaluated": self.n_evaluated}


def residual_report(resid, coords: Sequence[np.ndarray], mask=None) -> ResidualReport:
    """Summarise ``|resid|`` over ``mask``; ``coords`` broadcast like ``resid``."""
    r = np.abs(np.asarray(resid, dtype=float))
    if mask is None:
        mask = np.ones(r.shape, dtype=bool)
    mask = np.broadcast_to(mask, r.shape)
    n = int(mask.sum())
    if n == 0:
        raise DomainError("no nodes left to evaluate")
    sel = r[mask]
    k = int(np.argmax(sel))
    where = tuple(float(np.broadcast_to(c, r.shape)[mask][k]) for c in coords)
    # np.mean on a fixed-order 1-d array is a deterministic pairwise sum
    return ResidualReport(float(sel[k]), float(np.mean(sel)), where, n)


def fd_hessian(field: ScalarField):
    """Central second differences on interior nodes.

    Returns ``(uxx, uxy, uyy)`` as fields on ``field.spec.interior()``.
    Exact on polynomials of total degree two and on ``x**3`` in ``uxx``.
    """
    spec = field.spec
    if spec.nx < 3 or spec.ny < 3:
        raise GridError("fd_hessian needs at least 3 nodes per axis")
    U = field.values
    hx, hy = spec.hx, spec.hy
    c = U[1:-1, 1:-1]
    uxx = (U[1:-1, 2:] - 2.0 * c + U[1:-1, :-2]) / (hx * hx)
    uyy = (U[2:, 1:-1] - 2.0 * c + U[:-2, 1:-1]) / (hy * hy)
    uxy = (U[2:, 2:] - U[2:, :-2] - U[:-2, 2:] + U[:-2, :-2]) / (4.0 * hx * hy)
    inner = spec.interior()
    return ScalarField(inner, uxx), ScalarField(inner, uxy), ScalarField(inner, uyy)


def ma_residual(field: ScalarField, params: EquationParams) -> ResidualReport:
    """Pointwise ``|uxx*uyy - uxy**2 - (a+by)**alpha|`` over interior nodes.

    Rows where the right-hand side is undefined or infinite are skipped.
    """
    uxx, uxy, uyy = fd_hessian(field)
    X, Y = uxx.spec.mesh()
    ok = params.finite_rows(Y)
    with np.errstate(divide="ignore", invalid="ignore"):
        rhs = np.where(ok, params.rhs(np.where(ok, Y, 1.0)), 0.0)
    det = uxx.values * uyy.values - uxy.values ** 2
    return residual_report(det - rhs, (X, Y), ok)


def restrict_to(field: ScalarField, coarse: GridSpec) -> ScalarField:
    """Values of ``field`` at the nodes of a nested coarser grid.

    Convergence orders measured at coincident nodes compare the same
    physical points across refinements.
    """
    fine = field.spec
    out = []
    for f_axis, c_axis, h in ((fine.x, coarse.x, fine.hx), (fine.y, coarse.y, fine.hy)):
        idx = np.rint((c_axis - f_axis[0]) / h).astype(int) if h > 0 else np.zeros(1, int)
        if (np.any(idx < 0) or np.any(idx >= f_axis.size)
                or not np.allclose(f_axis[np.clip(idx, 0, f_axis.size - 1)], c_axis,
                                   rtol=0, atol=1e-9 * max(1.0, h))):
            raise GridError("coarse grid nodes are not a subset of the fine grid")
        out.append(idx)
    ix, iy = out
    return ScalarField(coarse, field.values[np.ix_(iy, ix)])


def observed_orders(errors, ratio=2.0):
    """``log_ratio(e_k / e_{k+1})`` for successive refinements."""
    e = np.asarray(errors, dtype=float)
    return np.log(e[:-1] / e[1:]) / np.log(ratio)


def fmt17(v) -> str:
    return format(float(v), ".17g")


def dumps17(obj, indent=2) -> str:
    """JSON text with every float written at 17 significant digits."""
    def enc(o, level):
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if isinstance(o, bool) or o is None:
            return json.dumps(o)
        if isinstance(o, (int, np.integer)):
            return str(int(o))
        if isinstance(o, (float, np.floating)):
            return fmt17(o) if math.isfinite(o) else "null"
        if isinstance(o, str):
            return json.dumps(o)
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f"{pad}{json.dumps(str(k))}: {enc(v, level + 1)}" for k, v in o.items()]
            return "{\n" + ",\n".join(items) + "\n" + end + "}"
        if isinstance(o, (list, tuple, np.ndarray)):
            seq = list(o)
            if not seq:
                return "[]"
            if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool)
                   for v in seq):
                return "[" + ", ".join(enc(v, level + 1) for v in seq) + "]"
            items = [f"{pad}{enc(v, level + 1)}" for v in seq]
            return "[\n" + ",\n".join(items) + "\n" + end + "]"
        raise TypeError(f"cannot serialise {type(o).__name__}")
    return enc(obj, 0) + "\n"
