"""Command-line entry point.

Every subcommand builds a JSON payload from ``--config`` (a JSON file) and
its flags (flags win), validates it against ``schemas/<command>.json`` and
writes a deterministic artifact to ``--output`` (stdout by default).

Exit status: 0 success, 2 invalid input or domain error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from importlib import resources

import jsonschema
import numpy as np

from . import _kernels
from .closed_forms import (DirichletFamily, EntireFamily, NeumannFamily,
                           sample_family, sample_star, sharpness_lower_bound)
from .core import (DomainError, EquationParams, FamilyCoeffs, GridError, GridSpec,
                   ScalarField, dumps17, ma_residual)
from .partial_legendre import (ConvexityError, fenchel_young_gap, involution_error,
                               plt_forward, plt_inverse)
from .solver import SolverConfig, SolverError, convergence_study, solve_dirichlet
from .transforms import (KelvinParams, divform_chain, divform_residual_field,
                         kelvin_grid, kelvin_lift, kelvin_point, moving_sphere_check,
                         profile_function)

log = logging.getLogger("halfplane_ma")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

COMMANDS = ("family", "residual", "plt", "divform", "kelvin-check", "ms-check",
            "solve", "convergence", "sharpness")
CSV_COMMANDS = ("family", "plt", "solve", "divform")

# documented reference configuration for `convergence`
REFERENCE_CONVERGENCE = {"alpha": 1.0, "a": 0.0, "b": 1.0, "A": 0.5, "B": 0.0, "C": 0.3,
                         "x_range": [-1.0, 1.0], "y_range": [0.0, 1.0], "sizes": [17, 33, 65]}


class NumericalFailure(RuntimeError):
    pass


def load_schema(command):
    text = resources.files("halfplane_ma").joinpath("schemas", f"{command}.json").read_text()
    return json.loads(text)


def validate(command, payload):
    schema = load_schema(command)
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(payload), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = ".".join(str(p) for p in e.absolute_path) or "<payload>"
        raise jsonschema.ValidationError(f"field '{where}': {e.message}")


# ---------------------------------------------------------------------------
# flag parsing helpers
# ---------------------------------------------------------------------------

def _floats(text):
    return [float(t) for t in text.split(",") if t.strip()]


def _grid_flag(text):
    parts = text.split(",")
    if len(parts) != 6:
        raise argparse.ArgumentTypeError("grid must be x_min,x_max,y_min,y_max,nx,ny")
    try:
        x0, x1, y0, y1 = (float(p) for p in parts[:4])
        nx, ny = (int(p) for p in parts[4:])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}: {exc}") from None
    return {"x_min": x0, "x_max": x1, "y_min": y0, "y_max": y1, "nx": nx, "ny": ny}


def _axes_flag(text):
    # "lo,hi,n;lo,hi,n;..." with the height axis last
    out = []
    for chunk in text.split(";"):
        lo, hi, m = chunk.split(",")
        out.append([float(lo), float(hi), int(m)])
    return out


def _add_common(p, fmt_default):
    p.add_argument("--config", help="JSON file with the command payload")
    p.add_argument("--output", help="artifact path (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default=fmt_default)


def _add_params(p):
    p.add_argument("--alpha", type=float)
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)


def _add_coeffs(p):
    p.add_argument("--A", type=float)
    p.add_argument("--B", type=float)
    p.add_argument("--C", type=float)


def _add_newton(p):
    p.add_argument("--newton-tol", dest="newton_tol", type=float)
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--damping", type=float)
    p.add_argument("--init", choices=("poisson", "quadratic", "boundary-blend"))
    p.add_argument("--formulation", choices=("convex-root", "cofactor"))


def build_parser():
    ap = argparse.ArgumentParser(
        prog="halfplane-ma", allow_abbrev=False,
        description="Monge-Ampere families, transforms and solver on the half-plane.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("family", help="sample a closed-form family on a grid", allow_abbrev=False)
    _add_common(p, "csv")
    p.add_argument("--family", choices=("dirichlet", "neumann", "entire"))
    _add_params(p)
    _add_coeffs(p)
    for k in ("p", "q", "r"):
        p.add_argument(f"--{k}", type=float)
    p.add_argument("--grid", type=_grid_flag)

    p = sub.add_parser("residual", help="discrete Monge-Ampere residual of a field", allow_abbrev=False)
    _add_common(p, "json")
    p.add_argument("--input")
    _add_params(p)

    p = sub.add_parser("plt", help="partial Legendre transform of a field", allow_abbrev=False)
    _add_common(p, "csv")
    p.add_argument("--input")
    p.add_argument("--n-xi", dest="n_xi", type=int)
    p.add_argument("--method", choices=("monotone", "brute"))
    p.add_argument("--no-refine", dest="refine", action="store_const", const=False)
    p.add_argument("--summary", help="path for the JSON involution summary (default: stderr)")

    p = sub.add_parser("divform", help="Dirichlet family through the divergence-form chain",
                       allow_abbrev=False)
    _add_common(p, "json")
    _add_params(p)
    _add_coeffs(p)
    p.add_argument("--grid", type=_grid_flag, help="(xi, eta) grid")
    p.add_argument("--n-x2", dest="n_x2", type=int)

    for name, hlp in (("kelvin-check", "residual of the Kelvin-lifted Liouville profile"),
                      ("ms-check", "moving-sphere inequality checker")):
        p = sub.add_parser(name, help=hlp, allow_abbrev=False)
        _add_common(p, "json")
        p.add_argument("--center", type=_floats)
        p.add_argument("--lambda", dest="lambda", type=float)
        p.add_argument("--tau", type=float)
        p.add_argument("--grid", type=_axes_flag, help="axes 'lo,hi,n;...', height last")
        if name == "kelvin-check":
            p.add_argument("--a-w", dest="a_w", type=float)
            p.add_argument("--l", type=float)
            p.add_argument("--c-star", dest="c_star", type=float)
            p.add_argument("--tol", type=float)
        else:
            p.add_argument("--log-variant", dest="log_variant", action="store_const", const=True)
            p.add_argument("--margin", type=float)
            p.add_argument("--function", dest="function_kind",
                           choices=("constant", "height", "profile", "linear"))
            p.add_argument("--value", type=float)

    p = sub.add_parser("solve", help="Newton solve with family boundary data", allow_abbrev=False)
    _add_common(p, "csv")
    _add_params(p)
    _add_coeffs(p)
    p.add_argument("--grid", type=_grid_flag)
    _add_newton(p)
    p.add_argument("--report", help="path for the JSON solve report (default: stderr)")

    p = sub.add_parser("convergence", help="grid convergence study against a family",
                       allow_abbrev=False)
    _add_common(p, "json")
    _add_params(p)
    _add_coeffs(p)
    p.add_argument("--x-range", dest="x_range", type=_floats)
    p.add_argument("--y-range", dest="y_range", type=_floats)
    p.add_argument("--sizes", type=lambda s: [int(t) for t in s.split(",")])
    _add_newton(p)

    p = sub.add_parser("sharpness", help="blow-up lower bound for alpha <= -2", allow_abbrev=False)
    _add_common(p, "json")
    p.add_argument("--alpha", type=float)
    p.add_argument("--C", type=float)
    p.add_argument("--y", type=float, nargs="+")
    return ap


_NOT_PAYLOAD = {"command", "config", "output", "format", "verbose", "summary", "report",
                "function_kind", "value"}


def build_payload(args):
    payload = {}
    if args.config:
        with open(args.config) as fh:
            payload = json.load(fh)
        if not isinstance(payload, dict):
            raise jsonschema.ValidationError("field '<payload>': config must be a JSON object")
    for k, v in vars(args).items():
        if k in _NOT_PAYLOAD or v is None:
            continue
        payload[k] = v
    if args.command == "ms-check" and args.function_kind:
        fn = {"kind": args.function_kind}
        if args.value is not None:
            fn["value"] = args.value
        payload["function"] = fn
    if args.command == "sharpness" and isinstance(payload.get("y"), list) and len(payload["y"]) == 1:
        payload["y"] = payload["y"][0]
    if args.command == "convergence":
        for k, v in REFERENCE_CONVERGENCE.items():
            payload.setdefault(k, v)
    if args.command == "family":
        payload.setdefault("family", "dirichlet")
    return payload


# ---------------------------------------------------------------------------
# commands; each returns (artifact text, side outputs)
# ---------------------------------------------------------------------------

def _params(pl):
    return EquationParams(pl.get("a", 0.0), pl.get("b", 1.0), pl["alpha"])


def _coeffs(pl):
    return FamilyCoeffs(pl.get("A", 0.0), pl.get("B", 0.0), pl.get("C", 0.0))


def _dirichlet(pl):
    return DirichletFamily(_params(pl), _coeffs(pl))


def _read_field(path):
    with open(path) as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        return ScalarField.from_json(text)
    return ScalarField.from_csv(text)


def _emit_field(field, fmt):
    return field.to_csv() if fmt == "csv" else field.to_json()


def cmd_family(pl, fmt):
    kind = pl["family"]
    if kind == "dirichlet":
        fam = _dirichlet(pl)
    elif kind == "neumann":
        fam = NeumannFamily(pl["alpha"], pl.get("A", 1.0), pl.get("p", 0.0), pl.get("q", 0.0))
    else:
        fam = EntireFamily(pl["alpha"], pl.get("A", 1.0), pl.get("B", 0.0),
                           pl.get("p", 0.0), pl.get("q", 0.0), pl.get("r", 0.0))
    return _emit_field(sample_family(fam, GridSpec.from_dict(pl["grid"])), fmt), {}


def cmd_residual(pl, fmt):
    rep = ma_residual(_read_field(pl["input"]), _params(pl))
    return dumps17(rep.to_dict()), {}


def cmd_plt(pl, fmt):
    u = _read_field(pl["input"])
    n_xi = pl.get("n_xi", u.spec.nx)
    method = pl.get("method", "monotone")
    refine = pl.get("refine", True)
    res = plt_forward(u, n_xi, method, refine)
    back = plt_inverse(res, u.spec.nx, method, refine)
    gap = fenchel_young_gap(u, res.field_star)
    summary = {"n_x": u.spec.nx, "n_xi": n_xi, "method": method, "refine": refine,
               "xi_range": [res.xi_spec.x_min, res.xi_spec.x_max],
               "involution_error": involution_error(u, back),
               "fenchel_young_min_gap": float(np.min(gap))}
    return _emit_field(res.field_star, fmt), {"summary": dumps17(summary)}


def cmd_divform(pl, fmt):
    fam = _dirichlet(pl)
    star = sample_star(fam, GridSpec.from_dict(pl["grid"]))
    chain = divform_chain(star, fam.params, pl.get("n_x2"))
    if fmt == "csv":
        return chain.field.to_csv(), {}
    return dumps17(chain.to_dict()), {}


def _points_from(pl):
    if "samples" in pl:
        return np.asarray(pl["samples"], dtype=float)
    if "grid" in pl:
        pts, _, _, _ = kelvin_grid(pl["grid"])
        return pts.reshape(-1, pts.shape[-1])
    raise jsonschema.ValidationError("field '<payload>': need 'samples' or 'grid'")


def _kp(pl):
    return KelvinParams(tuple(pl["center"]), pl["lambda"], pl.get("tau", 0.0))


def cmd_kelvin_check(pl, fmt):
    kp = _kp(pl)
    n = kp.dim
    a_w = pl["a_w"]
    tol = pl.get("tol", 1e-6)
    out = {"dim": n, "a_w": a_w, "log_variant": abs(n - 2 + a_w) <= 1e-12, "tol": tol}
    violations = []
    if "grid" in pl:
        axes = pl["grid"]
        if len(axes) != n:
            raise DomainError(f"grid has {len(axes)} axes, center has {n} coordinates")
        pts, origin, spacing, _ = kelvin_grid(axes)
        f = profile_function(a_w, pl.get("l", 0.0), pl.get("c_star", 1.0))
        vals = kelvin_lift(kp, n, a_w, f, pts)
        resid, coords, ok = divform_residual_field(vals, origin, spacing, a_w)
        r = np.abs(resid)
        bad = np.argwhere(ok & (r > tol))
        for idx in bad:
            t = tuple(idx)
            violations.append({"point": [float(c[t]) for c in coords], "residual": float(resid[t])})
        sel = r[ok]
        out["residual"] = {"max_abs": float(sel.max()), "mean_abs": float(np.mean(sel)),
                           "n_evaluated": int(sel.size)}
    if "samples" in pl:
        pts = np.asarray(pl["samples"], dtype=float)
        img = kelvin_point(kp, pts)
        back = kelvin_point(kp, img)
        c = np.asarray(kp.center)
        prod = np.linalg.norm(img - c, axis=-1) * np.linalg.norm(pts - c, axis=-1)
        for k in range(pts.shape[0]):
            inv_err = float(np.max(np.abs(back[k] - pts[k])))
            rad_err = float(abs(prod[k] - kp.lam ** 2))
            if inv_err > tol * (1 + np.max(np.abs(pts[k]))) or rad_err > tol * kp.lam ** 2:
                violations.append({"index": k, "point": pts[k].tolist(),
                                   "involution_error": inv_err, "radius_error": rad_err})
        out["n_samples"] = int(pts.shape[0])
    if "grid" not in pl and "samples" not in pl:
        raise jsonschema.ValidationError("field '<payload>': need 'samples' or 'grid'")
    out["violations"] = violations
    return dumps17(out), {}


def _ms_function(spec):
    kind = spec["kind"]
    if kind == "constant":
        v = float(spec.get("value", 1.0))
        return lambda p: v
    if kind == "height":
        return lambda p: float(p[-1])
    if kind == "profile":
        prof = profile_function(spec.get("a_w", 0.0), spec.get("l", 0.0), spec.get("c_star", 1.0))
        return lambda p: float(prof(np.asarray(p)[None, :])[0])
    coef = np.asarray(spec.get("coeffs", [0.0]), dtype=float)
    return lambda p: float(coef[0] + np.dot(coef[1:], np.asarray(p)[: coef.size - 1]))


def cmd_ms_check(pl, fmt):
    kp = _kp(pl)
    pts = _points_from(pl)
    skipped = 0
    if "samples" not in pl:
        # grid mode: drop nodes inside the open ball
        r = np.linalg.norm(pts - np.asarray(kp.center), axis=-1)
        keep = r >= kp.lam
        skipped = int(np.count_nonzero(~keep))
        pts = pts[keep]
    if pts.shape[0] == 0:
        raise DomainError("no sample points outside the sphere")
    viol = moving_sphere_check(_ms_function(pl["function"]), kp.tau, kp, pts,
                               log_variant=pl.get("log_variant", False),
                               margin=pl.get("margin", 0.0))
    out = {"n_checked": int(pts.shape[0]), "n_skipped": skipped, "violations": viol}
    return dumps17(out), {}


def _solver_opts(pl):
    keys = ("newton_tol", "max_iters", "damping", "init", "formulation")
    return {k: pl[k] for k in keys if k in pl}


def cmd_solve(pl, fmt):
    fam = _dirichlet(pl)
    cfg = SolverConfig(GridSpec.from_dict(pl["grid"]), fam.params, fam.value, **_solver_opts(pl))
    rep = solve_dirichlet(cfg)
    side = {"report": dumps17(rep.to_dict())}
    if not rep.converged:
        raise NumericalFailure(
            f"Newton did not converge: |F| = {rep.final_residual:.3e} after "
            f"{rep.iterations} iterations", _emit_field(rep.solution, fmt), side)
    return _emit_field(rep.solution, fmt), side


def cmd_convergence(pl, fmt):
    fam = _dirichlet(pl)
    rows = convergence_study(fam, tuple(pl["x_range"]), tuple(pl["y_range"]),
                             tuple(pl["sizes"]), **_solver_opts(pl))
    cfg = {k: pl[k] for k in ("alpha", "a", "b", "A", "B", "C", "x_range", "y_range", "sizes")}
    text = dumps17({"config": cfg, "rows": rows})
    if not all(r["converged"] for r in rows):
        raise NumericalFailure("a convergence-study solve did not converge", text, {})
    return text, {}


def cmd_sharpness(pl, fmt):
    C = pl.get("C", 1.0)
    y = pl["y"]
    bound = sharpness_lower_bound(pl["alpha"], C, y)
    out = {"alpha": pl["alpha"], "C": C, "y": y,
           "bound": bound.tolist() if isinstance(bound, np.ndarray) else bound}
    return dumps17(out), {}


HANDLERS = {"family": cmd_family, "residual": cmd_residual, "plt": cmd_plt,
            "divform": cmd_divform, "kelvin-check": cmd_kelvin_check,
            "ms-check": cmd_ms_check, "solve": cmd_solve, "convergence": cmd_convergence,
            "sharpness": cmd_sharpness}


def _write(path, text):
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _write_side(path, text):
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stderr.write(text)


_LIST_FLAGS = ("--grid", "--center", "--x-range", "--y-range")


def _glue_list_flags(argv):
    # "--grid -1,1,..." would be read as an option; rewrite to "--grid=-1,1,..."
    out = []
    it = iter(argv)
    for tok in it:
        if tok in _LIST_FLAGS:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(_glue_list_flags(argv))
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    log.debug("kernel backend: %s", _kernels.BACKEND)
    cmd = args.command
    if args.format == "csv" and cmd not in CSV_COMMANDS:
        print(f"error: {cmd} only writes JSON", file=sys.stderr)
        return EXIT_INPUT
    try:
        payload = build_payload(args)
        validate(cmd, payload)
        text, side = HANDLERS[cmd](payload, args.format)
    except jsonschema.ValidationError as exc:
        print(f"error: invalid payload: {exc.message}", file=sys.stderr)
        return EXIT_INPUT
    except (DomainError, GridError, ConvexityError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalFailure as exc:
        msg, text, side = exc.args
        _write(args.output, text)
        for key, val in side.items():
            _write_side(getattr(args, key, None), val)
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_NUMERIC
    except (SolverError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    _write(args.output, text)
    for key, val in side.items():
        _write_side(getattr(args, key, None), val)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
