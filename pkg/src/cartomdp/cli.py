"""``carto-mdp``: command-line front end.

Exit codes: 0 success, 1 invalid input or usage, 2 a required cycle-sign
assumption does not hold, 3 a resource limit was hit.
"""
from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from .analysis import AssumptionNotMet, compute_kappa, compute_N0, cycle_report, ssp_solve
from .cartography import GlobalInfeasible, classify_epsilon, completeness_check, run_cartography, to_csv, to_svg
from .evgen import EvScenario, generate
from .model import W1, W2, MdpError, MdpFormatError, load_mdp, serialize_mdp, to_fraction, validate
from .optimize import LP, ProblemTooLarge
from .problem_zero import decide_p0
from .semantics import DEFAULT_BUDGET, BudgetExceeded

EXIT_OK, EXIT_INPUT, EXIT_ASSUMPTION, EXIT_RESOURCE = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _rational(text: str) -> Fraction:
    try:
        return to_fraction(text)
    except (TypeError, ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def _query(args, mdp, key: str) -> Fraction:
    val = getattr(args, key)
    if val is None:
        val = mdp.query.get(key)
    if val is None:
        raise MdpError(f"--{key} is required (the model has no query.{key})")
    return Fraction(val)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


# commands -----------------------------------------------------------------------------


def cmd_validate(args) -> int:
    mdp = load_mdp(args.model)
    problems = validate(mdp)
    if problems:
        for v in problems:
            print(v)
        return EXIT_INPUT
    print(f"ok: {mdp.n_states} states, {sum(len(es) for es in mdp.edges)} edges")
    return EXIT_OK


def cmd_ssp(args) -> int:
    mdp = load_mdp(args.model)
    i = W1 if args.weight == "w1" else W2
    sol = ssp_solve(mdp, i)
    print(json.dumps({mdp.states[s]: str(v) for s, v in sorted(sol.values.items())}, indent=2))
    return EXIT_OK


def cmd_assumptions(args) -> int:
    mdp = load_mdp(args.model)
    out = {}
    for name, i in (("w1", W1), ("w2", W2)):
        rep = cycle_report(mdp, i)
        out[name] = {
            "has_cycles": rep.has_cycles,
            "all_positive": rep.all_positive,
            "all_nonnegative": rep.all_nonnegative,
            "all_nonpositive": rep.all_nonpositive,
            "min_cycle_weight": None if rep.min_cycle_weight is None else str(rep.min_cycle_weight),
            "min_cycle_mean": None if rep.min_cycle_mean is None else str(rep.min_cycle_mean),
        }
    nu1 = args.nu1 if args.nu1 is not None else mdp.query.get("nu1")
    nu2 = args.nu2 if args.nu2 is not None else mdp.query.get("nu2")
    if nu2 is not None and out["w2"]["all_positive"]:
        out["kappa"] = str(compute_kappa(mdp, nu2))
    if nu1 is not None and out["w1"]["all_positive"]:
        out["N0"] = compute_N0(mdp, nu1).n0
    if nu1 is not None and nu2 is not None:
        rep = completeness_check(mdp, nu1, nu2)
        out["completeness"] = {"kind": rep.kind, "detail": rep.detail}
    print(json.dumps(out, indent=2))
    return EXIT_OK


def cmd_carto(args) -> int:
    mdp = load_mdp(args.model)
    nu1, nu2 = _query(args, mdp, "nu1"), _query(args, mdp, "nu2")
    kw = {"alpha": args.alpha}
    if args.method == "brute":
        kw = {"grid": args.grid}
    elif args.method == "gradient":
        kw = {"restarts": args.restarts, "seed": args.seed, "alpha": args.alpha}
    try:
        carto = run_cartography(mdp, nu1, nu2, args.nmax, args.method, args.budget_nodes, **kw)
    except GlobalInfeasible as exc:
        print(f"no solution for any epsilon: {exc}")
        return EXIT_OK
    csv_text = to_csv(carto)
    sys.stdout.write(csv_text)
    lo, hi = carto.bracket
    print(f"# bracket: [{lo}, {hi}]  completeness: {carto.completeness.kind}", file=sys.stderr)
    if carto.partial:
        print(f"# partial: {carto.note}", file=sys.stderr)
    verdicts = []
    for eps in args.epsilon or []:
        v = classify_epsilon(carto, eps)
        entry = {"epsilon": str(eps), "verdict": v.verdict, "N": v.N, "reason": v.reason}
        if v.strategy is not None:
            entry["k"] = v.assembly.k
            entry["strategy"] = v.strategy.export(carto.context.model)
        verdicts.append(entry)
        print(f"# epsilon={eps}: {v.verdict} ({v.reason})", file=sys.stderr)
    if args.out:
        out = Path(args.out)
        _write(out / "cartography.csv", csv_text)
        _write(out / "cartography.svg", to_svg(carto))
        if verdicts:
            _write(out / "verdicts.json", json.dumps(verdicts, indent=2) + "\n")
    return EXIT_OK


def _export_p0(res) -> dict:
    """Witness as product-state tables (``state@counter``), the switch step and the scale."""
    strat = res.assembly.strategy
    names = {s: res.product.model.states[full] for s, full in res.strategy.inner.to_full.items()}

    def table(pol):
        return {names[s]: {lab: str(p) for lab, p in sorted(d.items())} for s, d in sorted(pol.table.items())}

    return {
        "kind": "counter-product",
        "scale": res.product.scale,
        "counter_domain": list(res.product.domain),
        "k": strat.k,
        "first": table(strat.first),
        "tail": table(strat.tail),
    }


def cmd_p0(args) -> int:
    mdp = load_mdp(args.model)
    nu1, nu2 = _query(args, mdp, "nu1"), _query(args, mdp, "nu2")
    res = decide_p0(mdp, nu1, nu2, budget=args.budget_nodes)
    print(res.verdict)
    print(f"value: {res.value}")
    print(f"product_states: {res.product.size}")
    print(f"mode: {res.product.mode}")
    if res.answer:
        print(f"k: {res.assembly.k}")
        print(f"expectation: {res.assembly.expectation}")
        if args.out:
            _write(Path(args.out), json.dumps(_export_p0(res), indent=2) + "\n")
    return EXIT_OK


def cmd_evgen(args) -> int:
    sc = EvScenario.random(args.T, args.levels, args.capacity, args.target, args.ageing, args.seed)
    text = serialize_mdp(generate(sc))
    if args.out:
        _write(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# parser ---------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="carto-mdp", description="Percentile-reachability cartography for two-weight MDPs.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def model_cmd(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("model", help="model file, or - for standard input")
        return sp

    model_cmd("validate", "check a model file").set_defaults(func=cmd_validate)

    sp = model_cmd("ssp", "stochastic shortest-path values per state")
    sp.add_argument("--weight", choices=["w1", "w2"], default="w2")
    sp.set_defaults(func=cmd_ssp)

    sp = model_cmd("assumptions", "cycle signs, kappa, N0 and the applicable guarantee")
    sp.add_argument("--nu1", type=_rational)
    sp.add_argument("--nu2", type=_rational)
    sp.set_defaults(func=cmd_assumptions)

    sp = model_cmd("carto", "lower/upper sequences and epsilon verdicts")
    sp.add_argument("--nu1", type=_rational)
    sp.add_argument("--nu2", type=_rational)
    sp.add_argument("--nmax", type=int, default=6)
    sp.add_argument("--alpha", type=_rational, default=Fraction(1, 10**4))
    sp.add_argument("--method", choices=["lp", "brute", "gradient"], default=LP)
    sp.add_argument("--grid", type=int, default=16)
    sp.add_argument("--restarts", type=int, default=4)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--epsilon", type=_rational, action="append")
    sp.add_argument("--budget-nodes", type=int, default=DEFAULT_BUDGET)
    sp.add_argument("--out", help="directory for CSV, SVG and verdict files")
    sp.set_defaults(func=cmd_carto)

    sp = model_cmd("p0", "decide the zero-threshold problem")
    sp.add_argument("--nu1", type=_rational)
    sp.add_argument("--nu2", type=_rational)
    sp.add_argument("--budget-nodes", type=int, default=DEFAULT_BUDGET)
    sp.add_argument("--out", help="file for the witness strategy")
    sp.set_defaults(func=cmd_p0)

    sp = sub.add_parser("evgen", help="generate a charging-schedule model")
    sp.add_argument("--T", type=int, default=4, help="horizon (time steps)")
    sp.add_argument("--levels", type=int, default=3, help="flexible load levels 0..levels-1")
    sp.add_argument("--capacity", type=int)
    sp.add_argument("--target", type=int, help="charge target (nu1 of the generated query)")
    sp.add_argument("--ageing", type=_rational, default=Fraction(1, 10))
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_evgen)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MdpFormatError as exc:
        where = f"{exc.line}:{exc.column}: " if exc.line is not None else ""
        print(f"error: {where}{exc}", file=sys.stderr)
        return EXIT_INPUT
    except AssumptionNotMet as exc:
        print(f"assumption not met: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except (BudgetExceeded, ProblemTooLarge) as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (MdpError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
