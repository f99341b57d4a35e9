"""Command-line front end.

Every invocation writes one JSON document (or one CSV table with
``--format csv``) to standard output and diagnostics to standard error.
Exit status: 0 success, 1 invalid configuration, 2 domain error, 3
numerical non-convergence.

Numbers are written with 17 significant digits; non-finite values become
``null``.  The output of a given command line is byte-identical across
runs.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from importlib import resources

import jsonschema
import numpy as np

from . import __version__
from .constants import c0_of_c, proposition_constants
from .errors import ConfigInvalid, DomainError, NumericalError, ZSCError
from .immersion.chart import chart_batch
from .immersion.models import interior_points, model_from_dict
from .immersion.radial import ball_volume, growth_exponent, profile_of
from .invariants import (
    PINCHING_MAX, Eigenvalues, invariants_from_eigenvalues, k_bound, normalize_orientation, p1_spectrum,
    pinching_array,
)
from .oracles import monte_carlo_tube_volume
from .report import run_battery
from .stability import (
    FAMILIES, corollary_p_window, instability_search, parametric_bump, piecewise_linear_radial,
    quadratic_form_q1, sobolev_crossover, ssy_corollary_check, ssy_cutoff,
)
from .tubes import (
    constant_tube, euclidean_ball_bound, self_intersection_test, subfocal_tube, theorem_c_tube, tube_volume,
)

EXIT_CONFIG, EXIT_DOMAIN, EXIT_NUMERIC = 1, 2, 3

MODEL_ALIASES = {
    "schwarzschild": "rotational", "rotational": "rotational",
    "cylinder": "cylinder", "circle": "cylinder", "graph": "graph",
}


# --------------------------------------------------------------------------
# serialization


def _plain(x):
    """Convert numpy containers and scalars to plain Python values."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    return x


def _emit(x, out, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if x is None:
        out.append("null")
    elif isinstance(x, bool):
        out.append("true" if x else "false")
    elif isinstance(x, int):
        out.append(str(x))
    elif isinstance(x, float):
        out.append(format(x, ".17g") if math.isfinite(x) else "null")
    elif isinstance(x, str):
        out.append(json.dumps(x))
    elif isinstance(x, list):
        if not x:
            out.append("[]")
            return
        out.append("[\n")
        for i, v in enumerate(x):
            out.append(pad)
            _emit(v, out, indent, level + 1)
            out.append(",\n" if i < len(x) - 1 else "\n")
        out.append(end + "]")
    elif isinstance(x, dict):
        if not x:
            out.append("{}")
            return
        out.append("{\n")
        items = list(x.items())
        for i, (k, v) in enumerate(items):
            out.append(pad + json.dumps(k) + ": ")
            _emit(v, out, indent, level + 1)
            out.append(",\n" if i < len(items) - 1 else "\n")
        out.append(end + "}")
    else:
        raise TypeError(f"cannot serialize {type(x).__name__}")


def dumps(doc, indent=2):
    """JSON text with floats at 17 significant digits and ``null`` for non-finite."""
    out = []
    _emit(_plain(doc), out, indent, 0)
    return "".join(out) + "\n"


def _cell(v):
    if isinstance(v, float):
        return format(v, ".17g") if math.isfinite(v) else ""
    return "" if v is None else v


def csv_text(columns, rows):
    """CSV text with floats at 17 significant digits and empty cells for non-finite values."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(v) for v in _plain(list(row))])
    return buf.getvalue()


def load_schema(name):
    return json.loads(resources.files("zsc.schema").joinpath(name).read_text())


# --------------------------------------------------------------------------
# argument helpers


class _Parser(argparse.ArgumentParser):
    """Parser whose usage errors become :class:`ConfigInvalid` (exit 1)."""

    def error(self, message):
        raise ConfigInvalid(message, "argv")


def _floats(text, path):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigInvalid(f"expected comma-separated numbers, got {text!r}", path) from exc


def _model_doc(args):
    if args.model_json:
        src = args.model_json
        try:
            text = src if src.lstrip().startswith("{") else open(src, encoding="utf-8").read()
            doc = json.loads(text)
        except OSError as exc:
            raise ConfigInvalid(f"cannot read model file: {exc}", "model_json") from exc
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"model JSON is malformed: {exc}", "model_json") from exc
    else:
        kind = MODEL_ALIASES.get(args.model)
        if kind is None:
            raise ConfigInvalid(f"unknown model {args.model!r}; expected one of {sorted(MODEL_ALIASES)}", "model")
        if kind == "rotational":
            doc = {"kind": kind, "params": {"profile": "schwarzschild", "m": args.m}}
        elif kind == "cylinder":
            doc = {"kind": kind, "params": {"curve": "circle", "radius": args.radius}}
        else:
            doc = {"kind": kind, "params": {"F": args.F, "a": args.a}}
        if args.t_max is not None:
            lo = 0.0 if kind == "rotational" else -args.t_max
            doc["domain"] = {"t": [lo, args.t_max]}
    validate_model_doc(doc)
    return doc


def validate_model_doc(doc):
    """Validate a model document against the shipped schema.

    Raises:
        ConfigInvalid: with the dotted path of the first offending field.
    """
    validator = jsonschema.Draft202012Validator(load_schema("model.schema.json"))
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = errors[0]
        raise ConfigInvalid(err.message, ".".join(map(str, err.absolute_path)) or "model")


def _model(args):
    doc = _model_doc(args)
    return model_from_dict(doc), doc


def _add_model_args(p):
    g = p.add_argument_group("model")
    g.add_argument("--model", default="schwarzschild", help="schwarzschild | cylinder | graph")
    g.add_argument("--model-json", help="model document: a file path or inline JSON")
    g.add_argument("--m", type=float, default=1.0, help="Schwarzschild mass parameter")
    g.add_argument("--radius", type=float, default=1.0, help="cylinder circle radius")
    g.add_argument("--F", default="quadratic", help="graph height family: zero | quadratic | hyperbolic")
    g.add_argument("--a", type=float, default=1.0, help="graph height coefficient")
    g.add_argument("--t-max", type=float, help="chart extent of the profile parameter")


def _add_common(p):
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--seed", type=int, default=0)


# --------------------------------------------------------------------------
# commands; each returns (document, csv table or None)


def cmd_invariants(args):
    vals = _floats(args.eigenvalues, "eigenvalues")
    if len(vals) != 3 or not all(math.isfinite(v) for v in vals):
        raise ConfigInvalid("expected three finite eigenvalues", "eigenvalues")
    ev = Eigenvalues.of(vals)
    inv = invariants_from_eigenvalues(ev)
    norm = normalize_orientation(ev)
    doc = {
        "eigenvalues": list(ev), **inv.to_dict(),
        "normalized_eigenvalues": list(norm), "normalized_p1_spectrum": list(p1_spectrum(norm)),
        "k_bound": {"K": inv.K, "bound": float(k_bound(inv.normA)), "holds": bool(inv.K <= k_bound(inv.normA) * (1 + 1e-12))},
    }
    table = (("key", "value"), [(k, v) for k, v in doc.items() if not isinstance(v, (list, dict))])
    return doc, table


def cmd_constants(args):
    c0 = args.c0 if args.c0 is not None else c0_of_c(args.c)
    consts = proposition_constants(
        args.c, args.q, beta=args.beta, delta=args.delta, c0=c0, c0_exponent=args.c0_exponent,
    )
    doc = consts.to_dict()
    doc["c0_source"] = "given" if args.c0 is not None else "optimized"
    if args.delta is not None:
        doc["pinching_margin"] = consts.pinching_margin(args.delta)
    table = (("key", "value"), [(k, v) for k, v in doc.items() if not isinstance(v, (list, dict))])
    return doc, table


def cmd_surface(args):
    model, mdoc = _model(args)
    grid = mdoc.get("grid", {})
    n = args.samples or grid.get("samples", 1000)
    P = interior_points(model, n, args.seed)
    b = chart_batch(model, P)
    lam = np.sort(b.eigenvalues, axis=1)
    H = lam.sum(axis=1)
    R = lam[:, 0] * lam[:, 1] + lam[:, 0] * lam[:, 2] + lam[:, 1] * lam[:, 2]
    K = np.prod(lam, axis=1)
    pinch = pinching_array(lam)
    ref = model.reference_eigenvalues(P)
    err = np.max(np.abs(lam - ref), axis=1) if ref is not None else np.full(n, np.nan)
    reach = profile_of(model).reach()
    radii = args.radii or grid.get("radii") or [5.0, 10.0, 20.0, 40.0, 50.0]
    radii = [float(r) for r in radii if r <= reach]
    vols = [ball_volume(model, r) for r in radii]
    finite = pinch[np.isfinite(pinch)]
    doc = {
        "model": model.to_dict(), "samples": n, "seed": args.seed,
        "max_eigenvalue_error": float(np.max(err)) if ref is not None else None,
        "max_abs_R": float(np.max(np.abs(R))),
        "H_range": [float(H.min()), float(H.max())],
        "pinching_range": [float(finite.min()), float(finite.max())] if finite.size else None,
        "reach": reach,
        "ball_volumes": [{"r": r, "volume": v} for r, v in zip(radii, vols)],
    }
    if len(radii) >= 4:
        alpha, stderr = growth_exponent(model, radii)
        doc["growth_exponent"] = {"alpha": alpha, "stderr": stderr}
    cols = ("x0", "x1", "x2", "lambda1", "lambda2", "lambda3", "H", "R", "K", "pinching", "reference_error")
    rows = [(*P[i], *lam[i], H[i], R[i], K[i], pinch[i], err[i]) for i in range(n)]
    return doc, (cols, rows)


def _test_function(args):
    kind = args.test
    if kind == "ssy":
        return ssy_cutoff(args.r)
    if kind == "bump":
        return parametric_bump(args.center, args.width, args.amplitude)
    knots = _floats(args.knots or "", "knots")
    values = _floats(args.values or "", "values")
    return piecewise_linear_radial(knots, values)


def cmd_stability(args):
    model, _ = _model(args)
    if args.bound and not args.search:
        raise ConfigInvalid("--bound only applies with --search", "bound")
    if args.search:
        names = {n for n, _, _ in FAMILIES[args.search]}
        bounds = {}
        for item in args.bound or ():
            name, _, rng = item.partition("=")
            if name not in names:
                raise ConfigInvalid(f"unknown bound {name!r} for family {args.search}; expected one of {sorted(names)}",
                                    "bound")
            lo_hi = _floats(rng, f"bound.{name}")
            if len(lo_hi) != 2 or not lo_hi[0] <= lo_hi[1]:
                raise ConfigInvalid("expected NAME=LO,HI with LO <= HI", f"bound.{name}")
            bounds[name] = lo_hi
        rep = instability_search(model, args.search, budget=args.budget, seed=args.seed, bounds=bounds or None)
    else:
        rep = quadratic_form_q1(model, _test_function(args))
    doc = {"model": model.to_dict(), **rep.to_dict()}
    table = (("key", "value"), [(k, v) for k, v in rep.to_dict().items() if not isinstance(v, (list, dict))])
    return doc, table


def cmd_sobolev(args):
    model, _ = _model(args)
    c0 = args.c0 if args.c0 is not None else c0_of_c(args.c)
    consts = proposition_constants(args.c, args.q, beta=args.beta, c0=c0, c0_exponent=args.c0_exponent)
    delta = args.delta if args.delta is not None else args.delta_frac * consts.delta_max()
    radii = args.radii or [5.0, 10.0, 20.0, 40.0]
    cross = sobolev_crossover(model, consts, delta, radii)
    lo, hi = corollary_p_window(c0, args.c0_exponent)
    p = args.p if args.p is not None else 0.5 * (lo + hi)
    cor = [ssy_corollary_check(model, p, r, c0, args.c0_exponent) for r in radii]
    lhs = [rep.lhs for rep in cross.reports]
    rhs = [rep.rhs for rep in cross.reports]
    doc = {
        "model": model.to_dict(), "constants": consts.to_dict(), "delta": delta,
        "sobolev": cross.to_dict(),
        "rhs_decreasing": bool(np.all(np.diff(rhs) < 0)),
        "lhs_nondecreasing": bool(np.all(np.diff(lhs) >= -1e-9 * np.abs(lhs[1:]))),
        "corollary": {
            "p": p, "p_window": [lo, hi], "points": [rep.to_dict() for rep in cor],
            "ratio_growth": cor[-1].ratio / cor[0].ratio if cor[0].ratio > 0 else None,
        },
    }
    cols = ("r", "lhs", "rhs", "rhs_bound", "ratio", "corollary_lhs", "corollary_rhs", "corollary_ratio")
    rows = [(s.r, s.lhs, s.rhs, s.rhs_bound, s.ratio, c.lhs, c.rhs, c.ratio) for s, c in zip(cross.reports, cor)]
    return doc, (cols, rows)


def cmd_tube(args):
    model, _ = _model(args)
    if args.radius_function == "constant":
        spec = constant_tube(model, args.h0, args.r, args.two_sided)
    elif args.radius_function == "subfocal":
        spec = subfocal_tube(model, args.epsilon, args.r, args.two_sided)
    else:
        spec = theorem_c_tube(model, args.b1, args.b2, args.delta, args.r, args.two_sided)
    vol = tube_volume(spec)
    emb = self_intersection_test(spec, sampling=args.sampling)
    doc = {"spec": spec.to_dict(), "volume": vol, "embedding": emb.to_dict()}
    if args.mc_samples and emb.embedded:
        mc, se = monte_carlo_tube_volume(spec, n=args.mc_samples, seed=args.seed)
        doc["monte_carlo"] = {"samples": args.mc_samples, "seed": args.seed, "estimate": mc, "stderr": se,
                              "relative_gap": abs(mc - vol) / vol}
    if args.ball_bound is not None:
        V, bound, _ = euclidean_ball_bound(model, args.ball_bound, args.r)
        doc["ball_bound"] = {"b1": args.ball_bound, "tube_volume": V, "bound": bound, "holds": bool(V <= bound)}
    rows = [("volume", vol), ("verdict", emb.to_dict()["verdict"])]
    if "monte_carlo" in doc:
        rows += [("mc_estimate", doc["monte_carlo"]["estimate"]), ("mc_stderr", doc["monte_carlo"]["stderr"])]
    return doc, (("key", "value"), rows)


def cmd_report(args):
    model, _ = _model(args)
    doc, tables = run_battery(model, seed=args.seed, budget=args.budget, samples=args.samples)
    if args.csv_dir:
        os.makedirs(args.csv_dir, exist_ok=True)
        for name, (cols, rows) in tables.items():
            with open(os.path.join(args.csv_dir, f"{name}.csv"), "w", encoding="utf-8", newline="") as fh:
                fh.write(csv_text(cols, rows))
    doc["plot_data"] = {name: {"columns": list(cols), "rows": [list(r) for r in rows]}
                        for name, (cols, rows) in tables.items()}
    return doc, None


# --------------------------------------------------------------------------


def build_parser():
    p = _Parser(prog="zsc", description="Numerical lab for zero-scalar-curvature hypersurfaces of R^4.")
    p.add_argument("--version", action="version", version=f"zsc {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("invariants", help="curvature invariants of one eigenvalue triple")
    s.add_argument("--eigenvalues", required=True, help="l1,l2,l3")
    _add_common(s)
    s.set_defaults(run=cmd_invariants)

    s = sub.add_parser("constants", help="pinching constant chain")
    s.add_argument("--c", type=float, default=PINCHING_MAX, help="pinching floor in (0, 4/27]")
    s.add_argument("--q", type=float, required=True)
    s.add_argument("--beta", type=float)
    s.add_argument("--delta", type=float)
    s.add_argument("--c0", type=float, help="skip the c0 optimization and use this value")
    s.add_argument("--c0-exponent", type=int, choices=(1, 2), default=2)
    _add_common(s)
    s.set_defaults(run=cmd_constants)

    s = sub.add_parser("surface", help="chart samples, ball volumes and growth exponent")
    _add_model_args(s)
    s.add_argument("--samples", type=int)
    s.add_argument("--radii", type=lambda t: _floats(t, "radii"))
    _add_common(s)
    s.set_defaults(run=cmd_surface)

    s = sub.add_parser("stability", help="stability form of one test function, or a search")
    _add_model_args(s)
    s.add_argument("--search", choices=sorted(FAMILIES), help="minimize Q1 over this family")
    s.add_argument("--budget", type=int, default=2000)
    s.add_argument("--bound", action="append", help="search box override NAME=LO,HI (repeatable)")
    s.add_argument("--test", choices=("ssy", "bump", "linear"), default="ssy")
    s.add_argument("--r", type=float, default=5.0, help="ssy cutoff radius")
    s.add_argument("--center", type=float, default=1.0)
    s.add_argument("--width", type=float, default=3.0)
    s.add_argument("--amplitude", type=float, default=1.0)
    s.add_argument("--knots", help="piecewise-linear knots k1,k2,...")
    s.add_argument("--values", help="piecewise-linear values (last must be 0)")
    _add_common(s)
    s.set_defaults(run=cmd_stability)

    s = sub.add_parser("sobolev", help="Sobolev-type inequality and corollary trends over r")
    _add_model_args(s)
    s.add_argument("--c", type=float, default=PINCHING_MAX)
    s.add_argument("--q", type=float, default=0.01)
    s.add_argument("--beta", type=float)
    s.add_argument("--c0", type=float)
    s.add_argument("--c0-exponent", type=int, choices=(1, 2), default=2)
    s.add_argument("--delta", type=float, help="absolute delta (default: --delta-frac of delta_max)")
    s.add_argument("--delta-frac", type=float, default=0.5)
    s.add_argument("--p", type=float, help="corollary exponent (default: window midpoint)")
    s.add_argument("--radii", type=lambda t: _floats(t, "radii"))
    _add_common(s)
    s.set_defaults(run=cmd_sobolev)

    s = sub.add_parser("tube", help="tube volume, embeddedness and Monte-Carlo check")
    _add_model_args(s)
    s.add_argument("--radius-function", choices=("constant", "subfocal", "theoremC"), default="subfocal")
    s.add_argument("--h0", type=float, default=0.5)
    s.add_argument("--epsilon", type=float, default=0.5)
    s.add_argument("--b1", type=float, default=0.5)
    s.add_argument("--b2", type=float, default=1.0)
    s.add_argument("--delta", type=float, default=0.5)
    s.add_argument("--r", type=float, default=5.0, help="intrinsic ball radius of the region")
    s.add_argument("--two-sided", action="store_true")
    s.add_argument("--sampling", type=int, default=24)
    s.add_argument("--mc-samples", type=int, default=1_000_000, help="0 disables the Monte-Carlo check")
    s.add_argument("--ball-bound", type=float, metavar="B1", help="also compare with omega4 (r + 2 B1 a)^4")
    _add_common(s)
    s.set_defaults(run=cmd_tube)

    s = sub.add_parser("report", help="full verification battery")
    _add_model_args(s)
    s.add_argument("--budget", type=int, default=2000)
    s.add_argument("--samples", type=int, default=200)
    s.add_argument("--csv-dir", help="also write plot-data CSV files here")
    _add_common(s)
    s.set_defaults(run=cmd_report)
    return p


def _config(args):
    skip = {"run", "format"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def run(argv=None, stdout=None, stderr=None):
    """Parse ``argv``, run the command and write its output; returns the exit code."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        doc, table = args.run(args)
        if args.format == "csv":
            if table is None:
                raise ConfigInvalid("this command has no CSV form; use --csv-dir", "format")
            stdout.write(csv_text(*table))
        else:
            stdout.write(dumps({"command": args.command, "version": __version__, "config": _config(args),
                                "result": doc}))
        return 0
    except ConfigInvalid as exc:
        print(f"zsc: invalid configuration: {exc}", file=stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"zsc: domain error: {type(exc).__name__}: {exc}", file=stderr)
        return EXIT_DOMAIN
    except (NumericalError, ArithmeticError) as exc:
        print(f"zsc: numerical error: {type(exc).__name__}: {exc}", file=stderr)
        return EXIT_NUMERIC
    except (ZSCError, ValueError) as exc:
        print(f"zsc: domain error: {type(exc).__name__}: {exc}", file=stderr)
        return EXIT_DOMAIN


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
