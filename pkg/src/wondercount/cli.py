"""Command-line front end.

    wondercount predict --group A2 --lambda anticanonical --divisor none
    wondercount count --group A1 --lambda 2 --divisor all --places inf,2 --bmax 1e6
    wondercount compare counts.csv prediction.json
    wondercount local-factor --group A2 --prime 5 --s 3,3
    wondercount cell-volume --group A2 --prime 3 --a 1,0
    wondercount height --matrix "2,1;0,2" --lambda 2

Settings may also come from a JSON file (--config); flags given explicitly
on the command line win over the file.  Exit status is 0 on success, 2 on
invalid input and 3 when a count would exceed the work budget.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from fractions import Fraction

from wondercount.enumeration import (
    BudgetExceeded, CountResult, count_configs, fit_exponents, geometric_grid,
)
from wondercount.geometry import (
    DivisorChoice, PicClass, invariants, parse_divisor, parse_lambda, parse_places,
)
from wondercount.heights import ARCH_DPS, delta_indicator, global_height, local_cartan, parse_matrix
from wondercount.local_integrals import (
    cell_volume, local_series, predicted_constant,
)
from wondercount.root_data import CartanType, build_root_datum

FORMAT_VERSION = 1
EXIT_INVALID = 2
EXIT_BUDGET = 3

#: flag defaults, kept apart so a config file can fill what the user left out
DEFAULTS = {
    "group": "A1",
    "lambda": "anticanonical",
    "divisor": "none",
    "places": "inf",
    "bmin": 100.0,
    "bmax": 1e6,
    "bpoints": 13,
    "workers": os.cpu_count() or 1,
    "budget_ops": 1e11,
    "out": None,
    "p_max": 1_000_000,
}

#: keys that define a job; echoed into outputs and compared across files
JOB_KEYS = ("group", "lambda", "divisor", "places")


class CliError(ValueError):
    pass


def _jsonable(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if hasattr(x, "item"):
        return x.item()
    return x


def _settings(args, keys):
    """Merge defaults, the config file and explicit flags, in that order."""
    out = {k: DEFAULTS.get(k) for k in keys}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read config {args.config}: {exc}") from None
        for k, v in data.items():
            k = k.replace("-", "_")
            if k not in keys:
                raise CliError(f"unknown config key {k!r}")
            out[k] = v
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            out[k] = v
    return out


def _job(cfg):
    try:
        ct = CartanType.parse(str(cfg["group"]))
    except ValueError as exc:
        raise CliError(str(exc)) from None
    rd = build_root_datum(ct)
    D = parse_divisor(str(cfg["divisor"]), rd.rank)
    lam = parse_lambda(str(cfg["lambda"]), rd, D)
    S = parse_places(str(cfg["places"]))
    return ct, rd, D, lam, S


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


# -- predict ----------------------------------------------------------------

def prediction(cfg) -> dict:
    ct, rd, D, lam, S = _job(cfg)
    inv = invariants(rd, lam, D, S)
    report = {
        "format_version": FORMAT_VERSION,
        "config": {k: cfg[k] for k in JOB_KEYS},
        "lambda_coefficients": [str(c) for c in lam.coeffs],
        "kappa": list(rd.kappa),
        "a": str(inv.a),
        "A_lambda": sorted(i + 1 for i in inv.A_lambda),
        "r": inv.r_lambda,
        "d": inv.d_lambda,
        "b": inv.b,
    }
    if ct.family != "A":
        report["constant"] = {"available": False,
                              "reason": "constant unavailable: local integrals exist for type A only"}
        report["c"] = None
        return report
    rep = predicted_constant(ct.rank + 1, lam, D, S, p_max=int(cfg.get("p_max") or DEFAULTS["p_max"]))
    body = rep.as_dict()
    for k in ("a", "b", "r_lambda", "d_lambda", "A_lambda", "n", "lam", "D", "S"):
        body.pop(k, None)
    body["available"] = rep.c_predicted is not None
    report["constant"] = body
    report["c"] = rep.c_predicted
    return report


def cmd_predict(args) -> int:
    cfg = _settings(args, list(JOB_KEYS) + ["out", "p_max"])
    _emit(_dump(prediction(cfg)), cfg["out"])
    return 0


# -- count ------------------------------------------------------------------

CSV_HEADER = ["B", "N_integral", "N_rational", "predicted_a", "predicted_b",
              "fitted_a", "fitted_b", "fitted_c"]


def _fmt(x) -> str:
    if x is None:
        return "."
    if isinstance(x, float):
        return repr(x)
    return str(x)


def count_csv(cfg, result: CountResult, a, b) -> str:
    try:
        fa, fb, fc = fit_exponents(result, a, b)
    except ValueError:
        fa = fb = fc = None
    buf = io.StringIO()
    buf.write(f"# format_version: {FORMAT_VERSION}\n")
    buf.write("# config: " + json.dumps(_jsonable(cfg), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    last = len(result.rows) - 1
    for j, (B, ni, nr) in enumerate(result.rows):
        fit = (fa, fb, fc) if j == last else (None, None, None)
        w.writerow([_fmt(B), ni, nr, str(a), b] + [_fmt(x) for x in fit])
    return buf.getvalue()


def cmd_count(args) -> int:
    keys = list(JOB_KEYS) + ["bmin", "bmax", "bpoints", "workers", "budget_ops", "out"]
    cfg = _settings(args, keys)
    ct, rd, D, lam, S = _job(cfg)
    if ct.family != "A":
        raise CliError("counting needs a group of type A (PGL_n)")
    grid = geometric_grid(float(cfg["bmin"]), float(cfg["bmax"]), int(cfg["bpoints"]))
    res = count_configs(ct.rank + 1, lam, grid, [(D, S)], workers=int(cfg["workers"]),
                        budget=float(cfg["budget_ops"]))[0]
    inv = invariants(rd, lam, D, S)
    # workers and output path do not change the counts
    echo = {k: cfg[k] for k in keys if k not in ("workers", "out")}
    _emit(count_csv(echo, res, inv.a, inv.b), cfg["out"])
    return 0


# -- compare ----------------------------------------------------------------

def read_count_csv(path: str):
    meta, rows = {}, []
    with open(path) as fh:
        lines = fh.read().splitlines()
    body = []
    for ln in lines:
        if ln.startswith("# format_version:"):
            meta["format_version"] = int(ln.split(":", 1)[1])
        elif ln.startswith("# config:"):
            meta["config"] = json.loads(ln.split(":", 1)[1])
        elif ln.strip():
            body.append(ln)
    reader = csv.DictReader(body)
    if reader.fieldnames != CSV_HEADER:
        raise CliError(f"{path}: unexpected header {reader.fieldnames}")
    for r in reader:
        rows.append((float(r["B"]), int(r["N_integral"]), int(r["N_rational"])))
    if "config" not in meta:
        raise CliError(f"{path}: missing config line")
    return meta, rows


def comparison(meta, rows, pred, tol_ratio=0.05, tol_a=0.05) -> dict:
    for k in JOB_KEYS:
        if str(meta["config"].get(k)) != str(pred["config"].get(k)):
            raise CliError(f"config mismatch on {k}: {meta['config'].get(k)!r} vs {pred['config'].get(k)!r}")
    a, b, c = Fraction(pred["a"]), int(pred["b"]), pred.get("c")
    table = []
    for B, N, _ in rows:
        shape = B ** float(a) * math.log(B) ** (b - 1) if B > 1 else B ** float(a)
        expected = c * shape if c is not None else None
        table.append({"B": B, "N": N, "predicted": expected,
                      "ratio": (N / expected) if expected else None})
    res = CountResult.from_counts([r[0] for r in rows], [r[1] for r in rows])
    try:
        fa, fb, fc = fit_exponents(res, a, b)
    except ValueError:
        fa = fb = fc = None
    top = [t["ratio"] for t in table if t["B"] >= rows[-1][0] / 10 * (1 - 1e-12) and t["ratio"]]
    drift = (max(top) / min(top) - 1) if top else None
    checks = {
        "exponent": fa is not None and abs(fa - float(a)) <= tol_a,
        "ratio_drift": drift is None or drift <= tol_ratio,
    }
    return {
        "format_version": FORMAT_VERSION,
        "config": meta["config"],
        "rows": table,
        "predicted": {"a": str(a), "b": b, "c": c},
        "fitted": {"a": fa, "b": fb, "c": fc},
        "top_decade_ratio_drift": drift,
        "tolerances": {"ratio_drift": tol_ratio, "a": tol_a},
        "checks": checks,
        "pass": all(checks.values()),
    }


def cmd_compare(args) -> int:
    meta, rows = read_count_csv(args.count_csv)
    try:
        with open(args.predict_json) as fh:
            pred = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read {args.predict_json}: {exc}") from None
    _emit(_dump(comparison(meta, rows, pred, args.tol_ratio, args.tol_a)), args.out)
    return 0


# -- debugging helpers ------------------------------------------------------

def _type_a_rank(group: str) -> int:
    ct = CartanType.parse(group)
    if ct.family != "A":
        raise CliError("local computations need a group of type A (PGL_n)")
    return ct.rank


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise CliError(f"cannot parse integer vector {text!r}") from None


def cmd_local_factor(args) -> int:
    r = _type_a_rank(args.group)
    D = parse_divisor(args.divisor, r)
    try:
        s = tuple(float(Fraction(x)) for x in args.s.split(","))
    except ValueError:
        raise CliError(f"cannot parse s = {args.s!r}") from None
    lf = local_series(r + 1, args.prime, s, D, cutoff=args.cutoff, tol=args.tol)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["p", "cutoff", "J_p", "f_p", "tail_bound"])
    w.writerow([lf.p, lf.cutoff, repr(lf.J), repr(lf.f), repr(lf.tail)])
    _emit(buf.getvalue(), args.out)
    return 0


def cmd_cell_volume(args) -> int:
    r = _type_a_rank(args.group)
    a = _ints(args.a)
    if len(a) != r:
        raise CliError(f"a must have {r} entries")
    _emit(f"{cell_volume(r + 1, args.prime, a)}\n", args.out)
    return 0


def cmd_height(args) -> int:
    P = parse_matrix(args.matrix)
    rd = build_root_datum(CartanType("A", P.n - 1))
    D = parse_divisor(args.divisor, rd.rank)
    lam = parse_lambda(args.lam, rd, D)
    S = parse_places(args.places)
    h = global_height(P, lam)
    import mpmath

    with mpmath.workdps(ARCH_DPS):
        report = {
            "matrix": str(P),
            "det": P.det,
            "lambda": [str(c) for c in lam.coeffs],
            "cartan": {str(p): [str(x) for x in local_cartan(P, p).a] for p, _ in h.finite_exponents},
            "cartan_inf": [mpmath.nstr(x, 20) for x in local_cartan(P, "inf").a],
            "finite_part": str(h.finite_part),
            "arch_part": mpmath.nstr(h.arch_part, 20),
            "total": mpmath.nstr(h.total, 20),
            "delta": delta_indicator(P, D, S),
        }
    _emit(_dump(report), args.out)
    return 0


# -- parser -----------------------------------------------------------------

def _job_flags(p, counting=False):
    p.add_argument("--config", help="JSON file with settings; explicit flags take precedence")
    p.add_argument("--group", help="Cartan type such as A2 or G2 (default A1)")
    p.add_argument("--lambda", dest="lambda",
                   help="class: rationals like 3,3 or anticanonical / log-anticanonical")
    p.add_argument("--divisor", help="boundary components in D: 1,2 / all / none")
    p.add_argument("--places", help="places in S, e.g. inf,2,3")
    p.add_argument("--out", help="output file (default stdout)")
    if counting:
        p.add_argument("--bmin", type=float)
        p.add_argument("--bmax", type=float)
        p.add_argument("--bpoints", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--budget-ops", dest="budget_ops", type=float,
                       help="refuse jobs estimated to visit more matrices than this")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wondercount", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("predict", help="a, b and the leading constant as JSON")
    _job_flags(p)
    p.add_argument("--p-max", dest="p_max", type=int, help="Euler product truncation")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("count", help="exhaustive PGL_n(Q) counts on a B grid as CSV")
    _job_flags(p, counting=True)
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("compare", help="compare a count CSV with a prediction JSON")
    p.add_argument("count_csv")
    p.add_argument("predict_json")
    p.add_argument("--tol-ratio", type=float, default=0.05)
    p.add_argument("--tol-a", type=float, default=0.05)
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("local-factor", help="truncated local series J_p(s) as CSV")
    p.add_argument("--group", default="A1")
    p.add_argument("--prime", type=int, required=True)
    p.add_argument("--s", required=True, help="evaluation point, e.g. 3,3")
    p.add_argument("--divisor", default="none")
    p.add_argument("--cutoff", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_local_factor)

    p = sub.add_parser("cell-volume", help="number of right cosets in K t(a) K")
    p.add_argument("--group", default="A1")
    p.add_argument("--prime", type=int, required=True)
    p.add_argument("--a", required=True, help="Cartan vector, e.g. 1,0")
    p.add_argument("--out")
    p.set_defaults(func=cmd_cell_volume)

    p = sub.add_parser("height", help="Cartan data and height of one matrix")
    p.add_argument("--matrix", required=True, help='row-major, e.g. "2,1;0,2"')
    p.add_argument("--lambda", dest="lam", default="anticanonical")
    p.add_argument("--divisor", default="none")
    p.add_argument("--places", default="inf")
    p.add_argument("--out")
    p.set_defaults(func=cmd_height)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BudgetExceeded as exc:
        print(f"error: refused: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
