"""Command-line front end.

Commands: check, dual, sep, eig, cube, avail, sweep, simulate.  Inputs are
spec files (see :mod:`mobiusdual.specfile`); outputs are plot-ready
delimiter-separated tables whose header comments name the model, parameters
and tolerances.  Exit codes: 0 success, 1 input/schema error, 2 structural
precondition failure, 3 numerical failure; every failure writes a
machine-readable JSON error block to stderr.

The environment variable MOBIUSDUAL_OUTPUT_DIR, when set, prefixes relative
--output paths.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import convergence, duality, monotonicity
from .availability import availability_pipeline
from .chain import Chain, reverse, stationary, validate_chain
from .cube import (
    CubeWalkParams,
    axis_transformed_walk,
    cube_stationary_product,
    nearest_neighbor_walk,
)
from .errors import (
    InputError,
    MobiusDualError,
    PreconditionError,
    PreconditionFailed,
    SchemaError,
    exit_code,
)
from .poset import zeta_mobius
from .specfile import (
    fmt,
    label_str,
    load_model,
    nu_vector,
    serialize_dual,
)

CURVE_COLUMNS = ("n", "s", "tail", "formula", "empirical", "band_lo", "band_hi")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mobiusdual",
        description=(
            "Mobius-monotonicity analysis and strong stationary duals for "
            "ergodic chains on finite posets"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("check", "decide all monotonicity notions for a kernel"),
        ("dual", "construct and serialize the strong stationary dual"),
        ("sep", "separation-distance curve (plus dual tail when available)"),
        ("eig", "eigenvalues via the cube closed form or the dual diagonal"),
        ("cube", "generate a cube walk and run the full analysis"),
        ("avail", "availability pipeline from breakdown/repair rates"),
        ("sweep", "map admissibility over an (alpha, beta, kappa) grid"),
        ("simulate", "Monte Carlo absorption-time tail of the dual"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--input", required=True, help="model spec file")
        p.add_argument("--output", help="output path (default: stdout)")
        p.add_argument("--direction", choices=("down", "up"), default="down")
        p.add_argument("--horizon", type=int, default=200)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--samples", type=int, default=10000)
        p.add_argument("--tolerance-row", type=float, default=1e-12)
        p.add_argument("--tolerance-mono", type=float, default=1e-10)
        p.add_argument("--exact", action="store_true",
                       help="re-run near-boundary verdicts in exact arithmetic")
        p.add_argument("--multiplier", type=float, default=1.05,
                       help="uniformization multiplier (avail)")
        p.add_argument("--stop-below", type=float, default=None,
                       help="truncate curves once s(n) falls below this")
    return parser


def _out_path(args):
    if args.output is None:
        return None
    path = args.output
    base = os.environ.get("MOBIUSDUAL_OUTPUT_DIR")
    if base and not os.path.isabs(path):
        path = os.path.join(base, path)
    return path


def _emit(args, text):
    path = _out_path(args)
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _error_block(exc):
    block = {
        "error": type(exc).__name__,
        "exit": exit_code(exc),
        "detail": str(exc),
    }
    for attr in ("line", "field", "witness", "pair", "period", "stage"):
        value = getattr(exc, attr, None)
        if value is not None:
            block[attr] = repr(value)
    report = getattr(exc, "report", None)
    if report is not None:
        block["notion"] = report.notion
        block["worst_value"] = fmt(report.worst_value)
    return json.dumps(block, sort_keys=True)


def _witness_str(witness):
    if witness is None:
        return "-"
    if isinstance(witness, tuple) and all(b in (0, 1) for b in witness):
        return label_str(witness)          # a single cube state
    if isinstance(witness, tuple) and len(witness) == 3 and isinstance(
        witness[2], tuple
    ):
        x, y, upset = witness
        inner = ",".join(label_str(e) for e in upset)
        return f"{label_str(x)}<={label_str(y)}:{{{inner}}}"
    if isinstance(witness, tuple):
        return ",".join(label_str(w) for w in witness)
    return label_str(witness)


def _resolve_chain(loaded, args, need_nu):
    """Turn a loaded model into (chain, cube_params_or_None)."""
    if loaded.kind == "cube":
        params = loaded.cube
        chain = nearest_neighbor_walk(params)
        token = loaded.nu_token
        nu = None
        if loaded.exact_nu is not None:
            nu = np.array([float(v) for v in loaded.exact_nu])
        elif token in ("delta_min", "delta_max", "uniform"):
            nu = nu_vector(token, chain.poset)
        elif token == "stationary":
            nu = stationary(chain).pi
        elif need_nu:
            nu = nu_vector("delta_min", chain.poset)
        if nu is not None:
            chain = chain.with_nu(nu, row_tol=args.tolerance_row)
        return chain, params
    if loaded.kind == "chain":
        chain = loaded.chain
        if loaded.nu_token == "stationary":
            chain = chain.with_nu(stationary(chain).pi, row_tol=args.tolerance_row)
        if not args.exact and chain.exact is not None:
            chain = Chain(poset=chain.poset, P=chain.P, nu=chain.nu)
        if need_nu and chain.nu is None:
            raise InputError("this command needs an initial law: add a nu line")
        return chain, None
    raise InputError(f"command {args.command!r} needs a chain or cube spec")


def _table(header_lines, columns, rows):
    lines = [f"# {h}" for h in header_lines]
    lines.append("\t".join(columns))
    for row in rows:
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"


def _curve_table(args, header, n_values, s=None, tail=None, formula=None,
                 empirical=None, lo=None, hi=None):
    cols = {"s": s, "tail": tail, "formula": formula,
            "empirical": empirical, "band_lo": lo, "band_hi": hi}
    rows = []
    for k, n in enumerate(n_values):
        row = [str(int(n))]
        for name in CURVE_COLUMNS[1:]:
            v = cols[name]
            row.append(fmt(v[k]) if v is not None and k < len(v) else "nan")
        rows.append(row)
    return _table(header, CURVE_COLUMNS, rows)


def _model_line(loaded):
    if loaded is None:
        return None
    if loaded.kind == "cube":
        params = loaded.cube
        return (
            f"model: cube d={params.d} "
            "alpha=" + ",".join(fmt(a) for a in params.alpha) + " "
            "beta=" + ",".join(fmt(b) for b in params.beta)
        )
    if loaded.kind == "chain":
        return f"model: chain M={loaded.chain.size}"
    if loaded.kind == "rates":
        return f"model: rates d={loaded.rates.d}"
    if loaded.kind == "poset":
        return f"model: poset M={loaded.poset.size}"
    return None


def _mono_header(args, extra=(), loaded=None):
    lines = [
        f"mobiusdual {args.command}",
        f"input: {args.input}",
        f"tolerances: row={fmt(args.tolerance_row)} mono={fmt(args.tolerance_mono)}",
    ]
    model = _model_line(loaded)
    if model is not None:
        lines.insert(2, model)
    lines.extend(extra)
    return tuple(lines)


def _all_notion_reports(chain, zm, args):
    tol = args.tolerance_mono
    return (
        monotonicity.mobius_monotone_down(chain, zm, tol=tol),
        monotonicity.mobius_monotone_up(chain, zm, tol=tol),
        monotonicity.weak_monotone(chain, zm, "down", tol=tol),
        monotonicity.weak_monotone(chain, zm, "up", tol=tol),
        monotonicity.strong_stochastic_monotone(chain, tol=tol),
    )


def _report_rows(reports):
    return [
        [
            r.notion,
            "true" if r.verdict else "false",
            fmt(r.worst_value),
            _witness_str(r.witness),
            fmt(r.tolerance_used),
        ]
        for r in reports
    ]


def cmd_check(args):
    loaded = load_model(args.input, row_tol=args.tolerance_row)
    chain, _ = _resolve_chain(loaded, args, need_nu=False)
    zm = zeta_mobius(chain.poset)
    reports = _all_notion_reports(chain, zm, args)
    text = _table(
        _mono_header(args, loaded=loaded),
        ("notion", "verdict", "worst_value", "witness", "tolerance"),
        _report_rows(reports),
    )
    _emit(args, text)
    return 0


def _build_dual(chain, args):
    law = stationary(chain)
    zm = zeta_mobius(chain.poset)
    dual = duality.build_ssd(chain, law, zm, direction=args.direction)
    link = duality.build_link(law, zm, direction=args.direction)
    return law, zm, dual, link


def cmd_dual(args):
    loaded = load_model(args.input, row_tol=args.tolerance_row)
    chain, _ = _resolve_chain(loaded, args, need_nu=True)
    law, zm, dual, link = _build_dual(chain, args)
    _emit(args, serialize_dual(dual, chain.poset))
    return 0


def cmd_sep(args):
    loaded = load_model(args.input, row_tol=args.tolerance_row)
    chain, params = _resolve_chain(loaded, args, need_nu=True)
    law = stationary(chain)
    curve = convergence.separation_curve(
        chain, law, args.horizon, stop_below=args.stop_below
    )
    n_values = range(curve.horizon + 1)
    tail = formula = None
    zm = zeta_mobius(chain.poset)
    try:
        dual = duality.build_ssd(chain, law, zm, direction=args.direction)
        tail = convergence.absorption_tail(dual, curve.horizon).tail
    except PreconditionError:
        tail = None     # curve is still valid without a dual
    if params is not None and chain.nu is not None and chain.nu[0] == 1.0:
        if sum(params.alpha) + sum(params.beta) <= 1.0:
            formula = [
                convergence.cube_separation_formula(params.alpha, params.beta, n)
                for n in n_values
            ]
    header = _mono_header(
        args, extra=(f"horizon: {curve.horizon}",), loaded=loaded
    )
    _emit(args, _curve_table(args, header, n_values, s=curve.values,
                             tail=tail, formula=formula))
    return 0


def cmd_eig(args):
    loaded = load_model(args.input, row_tol=args.tolerance_row)
    chain, params = _resolve_chain(loaded, args, need_nu=False)
    if params is not None:
        values = convergence.cube_eigenvalues(params.alpha, params.beta)
        source = "cube_closed_form"
    else:
        if chain.nu is None:
            chain = chain.with_nu(stationary(chain).pi)
        law, zm, dual, _ = _build_dual(chain, args)
        lower = np.tril(dual.P_star, -1)
        if np.abs(lower).max() > args.tolerance_mono:
            raise PreconditionFailed(
                "dual is not triangular; eigenvalue read-off unavailable"
            )
        values = np.sort(np.diag(dual.P_star))[::-1]
        source = "dual_diagonal"
    header = _mono_header(args, extra=(f"source: {source}",), loaded=loaded)
    lines = [f"# {h}" for h in header] + [fmt(v) for v in values]
    _emit(args, "\n".join(lines) + "\n")
    return 0


def cmd_cube(args):
    loaded = load_model(args.input, row_tol=args.tolerance_row)
    if loaded.kind != "cube":
        raise InputError("the cube command needs a [cube] generator spec")
    chain, params = _resolve_chain(loaded, args, need_nu=True)
    law = stationary(chain)
    zm = zeta_mobius(chain.poset)
    product_law = cube_stationary_product(params)
    reports = _all_notion_reports(chain, zm, args)
    sections = [
        f"# mobiusdual cube d={params.d}",
        "# alpha: " + " ".join(fmt(a) for a in params.alpha),
        "# beta: " + " ".join(fmt(b) for b in params.beta),
        f"# admissible: {str(params.admissible).lower()}",
        f"# stationary_residual: {fmt(law.residual)}",
        f"# product_form_deviation: {fmt(float(np.abs(law.pi - product_law).max()))}",
        "",
        _table(("monotonicity",),
               ("notion", "verdict", "worst_value", "witness", "tolerance"),
               _report_rows(reports)).rstrip("\n"),
        "",
        "# eigenvalues (closed form, descending)",
        " ".join(fmt(v) for v in convergence.cube_eigenvalues(
            params.alpha, params.beta)),
    ]
    try:
        dual = duality.build_ssd(chain, law, zm, direction=args.direction)
    except PreconditionFailed as exc:
        sections += ["", f"# dual: precondition failed ({exc.report.notion})"]
        dual = None
    if dual is not None:
        sections += [
            "",
            f"# dual direction={dual.direction} absorbing="
            f"{label_str(chain.poset.elements[dual.absorbing_index])}",
            f"# nu_residual: {fmt(dual.nu_residual)}",
            f"# intertwine_residual: {fmt(dual.intertwine_residual)}",
        ]
        curve = convergence.separation_curve(
            chain, law, args.horizon, stop_below=args.stop_below
        )
        tail = convergence.absorption_tail(dual, curve.horizon)
        formula = None
        if chain.nu[0] == 1.0 and params.admissible:
            formula = [
                convergence.cube_separation_formula(params.alpha, params.beta, n)
                for n in range(curve.horizon + 1)
            ]
        sections += [
            "",
            _curve_table(args, (f"curve horizon={curve.horizon}",),
                         range(curve.horizon + 1), s=curve.values,
                         tail=tail.tail, formula=formula).rstrip("\n"),
        ]
    _emit(args, "\n".join(sections) + "\n")
    return 0


def cmd_avail(args):
    loaded = load_model(args.input, row_tol=args.tolerance_row)
    if loaded.kind != "rates":
        raise InputError("the avail command needs a [rates] spec")
    report = availability_pipeline(
        loaded.rates,
        multiplier=args.multiplier,
        direction=args.direction,
        horizon=args.horizon,
        stop_below=args.stop_below
        if args.stop_below is not None
        else convergence.STOP_BELOW_DEFAULT,
        single_moves_only=loaded.rates_single_moves,
    )
    sections = [
        f"# mobiusdual avail d={report.d}",
        f"# uniformization_rate: {fmt(report.rate)}",
        f"# multiplier: {fmt(args.multiplier)}",
        f"# stationary_residual: {fmt(report.law.residual)}",
        "# stationary: " + " ".join(fmt(v) for v in report.law.pi),
        "",
        _table(
            ("monotonicity (kernel and its reversal)",),
            ("notion", "verdict", "worst_value", "witness", "tolerance"),
            _report_rows(report.reports[:2])
            + [
                ["reversed_" + row[0]] + row[1:]
                for row in _report_rows(report.reports[2:])
            ],
        ).rstrip("\n"),
    ]
    if report.stopped_at is not None:
        sections += ["", f"# pipeline stopped at: {report.stopped_at}"]
    else:
        sections += [
            "",
            f"# dual absorbing_index={report.dual.absorbing_index} "
            f"direction={report.dual.direction}",
            f"# nu_residual: {fmt(report.dual.nu_residual)}",
            f"# intertwine_residual: {fmt(report.dual.intertwine_residual)}",
            f"# mean_absorption: {fmt(report.tail.mean)}",
            f"# sst_bound_ok: {str(report.bound.ok).lower()}",
            "",
            _curve_table(args, (f"curve horizon={report.curve.horizon}",),
                         range(report.curve.horizon + 1),
                         s=report.curve.values,
                         tail=report.tail.tail).rstrip("\n"),
        ]
    _emit(args, "\n".join(sections) + "\n")
    return 0


def _parse_sweep(path):
    from .specfile import _number, _sections

    with open(path, encoding="utf-8") as fh:
        sections = _sections(fh.read())
    if set(sections) != {"sweep"}:
        raise SchemaError("sweep input must hold exactly a [sweep] section")
    d = None
    grids = {}
    for n, key, tokens in sections["sweep"]:
        if key == "d":
            d = int(tokens[0])
        elif key in ("alpha", "beta", "kappa"):
            if len(tokens) != 3:
                raise SchemaError(
                    f"line {n}: {key} needs 'start stop count'", line=n
                )
            start, stop = float(_number(tokens[0], n)), float(_number(tokens[1], n))
            count = int(tokens[2])
            grids[key] = np.linspace(start, stop, count)
        else:
            raise SchemaError(f"line {n}: unknown key {key!r} in [sweep]", line=n)
    if d is None or "alpha" not in grids or "beta" not in grids:
        raise SchemaError("[sweep] needs d, alpha and beta grids")
    kappas = grids.get("kappa", np.array([0.0]))
    return d, grids["alpha"], grids["beta"], kappas


def cmd_sweep(args):
    d, alphas, betas, kappas = _parse_sweep(args.input)
    rows = []
    for a in alphas:
        for b in betas:
            for k in kappas:
                rows.append(_sweep_point(d, float(a), float(b), float(k), args))
    text = _table(
        _mono_header(args, extra=(f"d: {d}",)),
        ("alpha", "beta", "kappa", "status", "mobius_down_reversed",
         "worst_value", "dual_ok"),
        rows,
    )
    _emit(args, text)
    return 0


def _sweep_point(d, a, b, k, args):
    out = [fmt(a), fmt(b), fmt(k)]
    try:
        params = CubeWalkParams(d=d, alpha=(a,) * d, beta=(b,) * d)
        if k > 0:
            if d != 3:
                raise InputError("kappa > 0 needs d = 3 (symmetry-axis moves)")
            chain = axis_transformed_walk(params, k)
        else:
            chain = nearest_neighbor_walk(params)
        chain = chain.with_nu(nu_vector("delta_min", chain.poset))
        law = stationary(chain)
        zm = zeta_mobius(chain.poset)
        rev = reverse(chain, law)
        rep = monotonicity.mobius_monotone_down(rev, zm, tol=args.tolerance_mono)
        try:
            duality.build_ssd(chain, law, zm, direction="down")
            dual_ok = "true"
        except MobiusDualError:
            dual_ok = "false"
        out += ["ok", "true" if rep.verdict else "false",
                fmt(rep.worst_value), dual_ok]
    except MobiusDualError as exc:
        out += [type(exc).__name__, "-", "nan", "false"]
    return out


def cmd_simulate(args):
    loaded = load_model(args.input, row_tol=args.tolerance_row)
    chain, _ = _resolve_chain(loaded, args, need_nu=True)
    law, zm, dual, _ = _build_dual(chain, args)
    result = convergence.simulate_absorption(
        dual, args.samples, args.seed, horizon=args.horizon
    )
    analytic = convergence.absorption_tail(dual, args.horizon)
    header = _mono_header(
        args,
        extra=(
            f"samples: {args.samples}",
            f"seed: {args.seed}",
            f"confidence: {fmt(result.confidence)}",
        ),
        loaded=loaded,
    )
    text = _curve_table(
        args, header, range(args.horizon + 1),
        tail=analytic.tail, empirical=result.tail,
        lo=result.lower, hi=result.upper,
    )
    _emit(args, text)
    return 0


COMMANDS = {
    "check": cmd_check,
    "dual": cmd_dual,
    "sep": cmd_sep,
    "eig": cmd_eig,
    "cube": cmd_cube,
    "avail": cmd_avail,
    "sweep": cmd_sweep,
    "simulate": cmd_simulate,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except MobiusDualError as exc:
        sys.stderr.write(_error_block(exc) + "\n")
        return exit_code(exc)
    except OSError as exc:
        sys.stderr.write(json.dumps(
            {"error": "IOError", "exit": 1, "detail": str(exc)}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
