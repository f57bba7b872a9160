"""Command-line surface: assumptions + query + data in; estimand, estimate
and fit indices out.

Exit codes: 0 success, 1 usage or input error, 2 the query is not
identifiable (FAILURE), 3 the data cannot support the request (zero stratum,
missing data, degenerate resamples, zero-probability evidence).
"""

from __future__ import annotations

import argparse
import contextlib
import sys
from typing import IO

from .discover import DataOracle, GraphOracle, discover_cpdag, render_cpdag
from .estimate import (
    MissingDataPresent,
    TooManyDegenerateResamples,
    bootstrap_interval,
    load_table,
    plug_in,
)
from .expr import ConditioningOnZero, render, simplify
from .fitcheck import fit_indices, render_fit_report
from .graph import parse_graph
from .identify import NonIdentifiable, QueryTerm, identify, parse_query
from .mediation import mediation_effects_data, mediation_effects_scm
from .pnps import pn_ps_exact, pnps_bounds
from .recover import (
    NotRecoverable,
    NotRecoverableError,
    parse_mgraph,
    recover_estimate,
    recoverability,
)
from .scm import CounterfactualQuery, ZeroEvidence, counterfactual_query, parse_scm
from .estimate import empirical_joint

__all__ = ["run", "main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILURE = 2
EXIT_DATA = 3

_DATA_EXCEPTIONS = (
    ConditioningOnZero,
    MissingDataPresent,
    TooManyDegenerateResamples,
    ZeroEvidence,
    NotRecoverableError,
)


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _read(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scmkit",
        description="Causal inference engine over discrete structural causal models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("identify", help="symbolic estimand for a causal query")
    p.add_argument("--graph", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--porcelain", action="store_true")

    p = sub.add_parser("estimate", help="plug-in estimate of an identified query")
    p.add_argument("--graph", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--bootstrap", type=int, metavar="B")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--porcelain", action="store_true")

    p = sub.add_parser("fit", help="fit indices: implied independencies vs data")
    p.add_argument("--graph", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--bonferroni", action="store_true")
    p.add_argument("--porcelain", action="store_true")

    p = sub.add_parser("counterfactual", help="exact counterfactual probability")
    p.add_argument("--scm", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--porcelain", action="store_true")

    p = sub.add_parser("pnps", help="probabilities of causation, exact or bounds")
    p.add_argument("--scm")
    p.add_argument("--data")
    p.add_argument("--exposure", default="X")
    p.add_argument("--outcome", default="Y")
    p.add_argument("--px1", type=float)
    p.add_argument("--px0", type=float)
    p.add_argument("--experiment", help="two-line file with px1 and px0")
    p.add_argument("--x1", default="1")
    p.add_argument("--x0", default="0")
    p.add_argument("--y1", default="1")
    p.add_argument("--y0", default="0")
    p.add_argument("--porcelain", action="store_true")

    p = sub.add_parser("mediate", help="natural direct and indirect effects")
    p.add_argument("--scm")
    p.add_argument("--graph")
    p.add_argument("--data")
    p.add_argument("--exposure", required=True)
    p.add_argument("--mediator", required=True)
    p.add_argument("--outcome", required=True)
    p.add_argument("--x0", required=True)
    p.add_argument("--x1", required=True)
    p.add_argument("--porcelain", action="store_true")

    p = sub.add_parser("recover", help="recoverable estimate from incomplete data")
    p.add_argument("--graph", required=True, help="m-graph file")
    p.add_argument("--data", required=True)
    p.add_argument("--target", required=True, help="e.g. 'Y=1' or 'X=0,Y=1'")
    p.add_argument("--porcelain", action="store_true")

    p = sub.add_parser("discover", help="CPDAG from data or a known graph")
    p.add_argument("--data")
    p.add_argument("--graph")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--porcelain", action="store_true")

    return parser


def run(argv: list[str], stdout: IO[str] | None = None, stderr: IO[str] | None = None) -> int:
    out = stdout if stdout is not None else sys.stdout
    err = stderr if stderr is not None else sys.stderr
    parser = _build_parser()
    try:
        with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
            args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    handler = {
        "identify": _cmd_identify,
        "estimate": _cmd_estimate,
        "fit": _cmd_fit,
        "counterfactual": _cmd_counterfactual,
        "pnps": _cmd_pnps,
        "mediate": _cmd_mediate,
        "recover": _cmd_recover,
        "discover": _cmd_discover,
    }[args.command]
    try:
        return handler(args, out, err)
    except _DATA_EXCEPTIONS as exc:
        print(f"error: {exc}", file=err)
        return EXIT_DATA
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run(sys.argv[1:]))


# --- command handlers -----------------------------------------------------------


def _cmd_identify(args, out, err) -> int:
    g = parse_graph(_read(args.graph))
    q = parse_query(args.query)
    result = identify(g, q)
    if isinstance(result, NonIdentifiable):
        print("FAILURE: the query is not identifiable from the observational "
              "distribution", file=err)
        print(result.describe(), file=err)
        return EXIT_FAILURE
    print(render(simplify(result.estimand)), file=out)
    return EXIT_OK


def _require_literal(terms: tuple[QueryTerm, ...]) -> None:
    symbolic = [t.var for t in terms if not t.literal]
    if symbolic:
        raise ValueError(
            "estimation needs explicit values for "
            + ", ".join(sorted(symbolic))
            + ", e.g. P(Y=1|do(X=0))"
        )


def _cmd_estimate(args, out, err) -> int:
    g = parse_graph(_read(args.graph))
    q = parse_query(args.query)
    d = load_table(args.data)
    result = identify(g, q)
    if isinstance(result, NonIdentifiable):
        print("FAILURE: the query is not identifiable from the observational "
              "distribution", file=err)
        print(result.describe(), file=err)
        return EXIT_FAILURE
    _require_literal(q.outcome + q.do + q.condition)
    estimand = result.estimand
    if args.bootstrap is not None:
        est = bootstrap_interval(
            estimand, d, binding={}, B=args.bootstrap, level=args.level,
            seed=args.seed,
        )
    else:
        est = plug_in(estimand, d, binding={})
    if args.porcelain:
        fields = [_fmt(est.value), str(est.n)]
        if est.interval:
            lo, hi, level = est.interval
            fields += [_fmt(lo), _fmt(hi), f"{level:g}"]
        print("\t".join(fields), file=out)
        return EXIT_OK
    print(f"estimand: {render(simplify(estimand))}", file=out)
    print(f"estimate: {_fmt(est.value)}", file=out)
    print(f"n: {est.n}", file=out)
    if est.interval:
        lo, hi, level = est.interval
        print(
            f"ci: [{_fmt(lo)}, {_fmt(hi)}] level={level:g} "
            f"B={args.bootstrap} seed={args.seed}",
            file=out,
        )
    return EXIT_OK


def _cmd_fit(args, out, err) -> int:
    g = parse_graph(_read(args.graph))
    d = load_table(args.data)
    report = fit_indices(g, d, alpha=args.alpha, bonferroni=args.bonferroni)
    print(render_fit_report(report, porcelain=args.porcelain), file=out)
    return EXIT_OK


def _cmd_counterfactual(args, out, err) -> int:
    m = parse_scm(_read(args.scm))
    q = parse_query(args.query)
    if q.do:
        raise ValueError(
            "counterfactual queries take subscripts, e.g. P(Y_{X=1}=1 | X=0)"
        )
    _require_literal(q.outcome + q.condition)
    antecedents = {t.dos for t in q.outcome}
    if len(antecedents) != 1:
        raise ValueError("all outcome terms must share one antecedent world")
    cq = CounterfactualQuery(
        target=tuple((t.var, t.token) for t in q.outcome),
        antecedent=next(iter(antecedents)),
        evidence=tuple((t.var, t.token) for t in q.condition),
    )
    value = counterfactual_query(m, cq)
    if args.porcelain:
        print(_fmt(value), file=out)
    else:
        print(f"probability: {_fmt(value)}", file=out)
    return EXIT_OK


def _parse_experiment_file(text: str) -> tuple[float, float]:
    px1 = px0 = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace("=", " ").split()
        if len(parts) != 2 or parts[0] not in ("px1", "px0"):
            raise ValueError(f"experiment file line {lineno}: expected 'px1 = <p>'")
        if parts[0] == "px1":
            px1 = float(parts[1])
        else:
            px0 = float(parts[1])
    if px1 is None or px0 is None:
        raise ValueError("experiment file must set both px1 and px0")
    return px1, px0


def _print_pnps(result, out, err, porcelain: bool) -> None:
    for name in ("pn", "ps", "pns"):
        value = getattr(result, name)
        if porcelain:
            if value is None:
                print(f"{name}\tNA", file=out)
            elif isinstance(value, tuple):
                print(f"{name}\t{_fmt(value[0])}\t{_fmt(value[1])}", file=out)
            else:
                print(f"{name}\t{_fmt(value)}", file=out)
        else:
            if value is None:
                print(f"{name}: undefined", file=out)
            elif isinstance(value, tuple):
                print(f"{name}: [{_fmt(value[0])}, {_fmt(value[1])}]", file=out)
            else:
                print(f"{name}: {_fmt(value)}", file=out)
    for note in result.notes:
        print(f"note: {note}", file=err)


def _cmd_pnps(args, out, err) -> int:
    if args.scm and not args.data:
        m = parse_scm(_read(args.scm))
        result = pn_ps_exact(
            m, args.exposure, args.outcome,
            x1=args.x1, x0=args.x0, y1=args.y1, y0=args.y0,
        )
    elif args.data and not args.scm:
        if args.experiment:
            px1, px0 = _parse_experiment_file(_read(args.experiment))
        elif args.px1 is not None and args.px0 is not None:
            px1, px0 = args.px1, args.px0
        else:
            raise ValueError("bounds mode needs --px1/--px0 or --experiment")
        d = load_table(args.data)
        obs = empirical_joint(d.select((args.exposure, args.outcome)))
        result = pnps_bounds(
            obs, px1, px0, x=args.exposure, y=args.outcome,
            x1=args.x1, x0=args.x0, y1=args.y1, y0=args.y0,
        )
    else:
        raise ValueError("pnps needs exactly one of --scm (exact) or --data (bounds)")
    _print_pnps(result, out, err, args.porcelain)
    return EXIT_OK


def _cmd_mediate(args, out, err) -> int:
    if args.scm and not (args.graph or args.data):
        m = parse_scm(_read(args.scm))
        report = mediation_effects_scm(
            m, args.exposure, args.mediator, args.outcome, args.x0, args.x1
        )
    elif args.graph and args.data and not args.scm:
        g = parse_graph(_read(args.graph))
        d = load_table(args.data)
        report = mediation_effects_data(
            d, g, args.exposure, args.mediator, args.outcome, args.x0, args.x1
        )
    else:
        raise ValueError("mediate needs --scm, or --graph together with --data")
    frac = (
        "NA" if report.mediated_fraction is None else _fmt(report.mediated_fraction)
    )
    if args.porcelain:
        print(
            "\t".join(
                [_fmt(report.te), _fmt(report.nde), _fmt(report.nie),
                 _fmt(report.nie_reversed), frac]
            ),
            file=out,
        )
        return EXIT_OK
    print(f"te: {_fmt(report.te)}", file=out)
    print(f"nde: {_fmt(report.nde)}", file=out)
    print(f"nie: {_fmt(report.nie)}", file=out)
    print(f"nie_reversed: {_fmt(report.nie_reversed)}", file=out)
    if report.mediated_fraction is None:
        print("mediated_fraction: undefined", file=out)
    else:
        print(f"mediated_fraction: {frac}", file=out)
    return EXIT_OK


def _parse_target(text: str) -> dict[str, str]:
    target: dict[str, str] = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ValueError(f"target entry {part!r} must look like VAR=VALUE")
        var, value = part.split("=", 1)
        target[var.strip()] = value.strip()
    if not target:
        raise ValueError("empty target")
    return target


def _cmd_recover(args, out, err) -> int:
    mg = parse_mgraph(_read(args.graph))
    d = load_table(args.data)
    target = _parse_target(args.target)
    decision = recoverability(mg, frozenset(target))
    if isinstance(decision, NotRecoverable):
        print(f"NOT RECOVERABLE: {decision.reason}", file=err)
        return EXIT_DATA
    est = recover_estimate(mg, d, target)
    if args.porcelain:
        print(f"{_fmt(est.value)}\t{est.n}", file=out)
        return EXIT_OK
    print(f"criterion: {decision.criterion}", file=out)
    print(f"estimand: {render(decision.estimand)}", file=out)
    print(f"estimate: {_fmt(est.value)}", file=out)
    print(f"n: {est.n}", file=out)
    return EXIT_OK


def _cmd_discover(args, out, err) -> int:
    if args.graph and not args.data:
        g = parse_graph(_read(args.graph))
        oracle = GraphOracle(g)
        variables = sorted(g.nodes)
    elif args.data and not args.graph:
        d = load_table(args.data)
        oracle = DataOracle(d, alpha=args.alpha)
        variables = list(d.columns)
    else:
        raise ValueError("discover needs exactly one of --graph or --data")
    cpdag = discover_cpdag(oracle, variables)
    print(render_cpdag(cpdag), end="", file=out)
    return EXIT_OK
