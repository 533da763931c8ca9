"""``mcdc-opf`` command line.

Exit codes: 0 success, 1 input error (unreadable, malformed or invalid case,
unsupported model, mismatched solution), 2 solver did not reach Optimal,
3 audit found violations.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import _jsonfmt, cases, case_io
from .analysis import (compare_balanced, embedding_study, loop_flow_converters, solve_network,
                       solver_options, sweep)
from .formulation.solution import Solution
from .network import NetworkError, NotBalanceable, derive_balanced_equivalent
from .oracle import DimensionMismatch, audit
from .report import (comparison_table, solution_json, solution_summary, sweep_json, sweep_table,
                     write_solve_outputs, write_sweep_outputs)

EXIT_OK, EXIT_INPUT, EXIT_SOLVER, EXIT_AUDIT = 0, 1, 2, 3


class InputError(Exception):
    pass


def _emit(args, text: str | None = None, data: dict | None = None) -> None:
    if args.json:
        if data is not None:
            sys.stdout.write(_jsonfmt.dumps(data))
    elif text is not None:
        print(text)


def _fail(args, code: int, message: str) -> int:
    if args.json:
        sys.stdout.write(_jsonfmt.dumps({"error": message, "exit_code": code}))
    else:
        print(f"error: {message}", file=sys.stderr)
    return code


def _load_case(ref: str) -> case_io.CaseFile:
    """Case from a path, or from a bundled case name when no such file exists."""
    path = Path(ref)
    if not path.exists() and ref in cases.NAMES:
        path = cases.path(ref)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {ref}: {exc.strerror}") from None
    try:
        return case_io.parse(raw)
    except (case_io.ParseError, case_io.SchemaError) as exc:
        raise InputError(f"{ref}: {exc}") from None


def _network(case: case_io.CaseFile):
    try:
        return case_io.to_network(case)
    except NetworkError as exc:
        raise InputError(str(exc)) from None


def _options(args, case):
    return solver_options(case.options, tol_kkt=getattr(args, "tol", None),
                          max_iter=getattr(args, "max_iter", None))


# ---------------------------------------------------------------------------


def cmd_solve(args) -> int:
    case = _load_case(args.case)
    net = _network(case)
    try:
        out = solve_network(net, args.model, _options(args, case))
    except NotBalanceable as exc:
        raise InputError(f"case has no balanced equivalent: {exc}") from None
    sol = out.solution
    written = []
    if args.out:
        written = [str(p) for p in write_solve_outputs(sol, args.out, figures=not args.no_plots)]
    data = solution_json(sol)
    data["files"] = written
    data["loop_flow"] = loop_flow_converters(sol)
    text = solution_summary(sol)
    if data["loop_flow"]:
        text += "\n\nopposite-sign pole powers at: " + ", ".join(data["loop_flow"])
    _emit(args, text, data)
    return EXIT_OK if out.ok else EXIT_SOLVER


def cmd_compare(args) -> int:
    case = _load_case(args.case)
    net = _network(case)
    opts = _options(args, case)
    try:
        derive_balanced_equivalent(net)
        balanced = True
    except NotBalanceable as exc:
        balanced = False
        reason = str(exc)
    if balanced:
        cmp = compare_balanced(net, opts)
        _emit(args, comparison_table(cmp), cmp.to_dict())
        return EXIT_OK if cmp.converged else EXIT_SOLVER
    if not args.embed_split:
        raise InputError(f"case is not balanced ({reason}); pass --embed-split to audit the "
                         "equal pole split of the single-conductor solution instead")
    st = embedding_study(net, opts, tol=args.tol_audit)
    if not (st.mcdc.ok and st.single.ok):
        return _fail(args, EXIT_SOLVER, f"solver status mcdc={st.mcdc.result.status.value} "
                                        f"single-conductor={st.single.result.status.value}")
    kcl = {f"{b}/{t}": v for (b, t), v in sorted(st.tapped_kcl().items())}
    data = {"objective_mcdc": st.mcdc.solution.objective,
            "objective_single_conductor": st.single.solution.objective,
            "mcdc_audit": st.mcdc_audit.to_dict(), "embedded_audit": st.embedded_audit.to_dict(),
            "kcl_violations": kcl}
    text = "\n".join([
        f"multi-conductor optimum: objective {st.mcdc.solution.objective:.6f}, "
        f"audit {'clean' if st.mcdc_audit.ok else 'FLAGGED'}",
        f"single-conductor optimum: objective {st.single.solution.objective:.6f}",
        "equal pole split of the single-conductor optimum:",
        st.embedded_audit.table()])
    _emit(args, text, data)
    return EXIT_OK


def cmd_sweep(args) -> int:
    case = _load_case(args.case)
    net = _network(case)
    spec = dict(case.options.get("sweep", {}))
    load = args.entity or spec.get("load")
    gen = args.generator or spec.get("generator")
    start = args.start if args.start is not None else spec.get("from")
    stop = args.stop if args.stop is not None else spec.get("to")
    step = args.step if args.step is not None else spec.get("step")
    if load is None or start is None or stop is None or step is None:
        raise InputError("sweep needs --entity, --from, --to and --step "
                         "(or a sweep entry in the case options)")
    try:
        res = sweep(net, load, start, stop, step, generator=gen, options=_options(args, case),
                    workers=args.threads)
    except (KeyError, ValueError) as exc:
        raise InputError(str(exc).strip("'\"")) from None
    written = []
    if args.out:
        written = [str(p) for p in write_sweep_outputs(res, args.out, figures=not args.no_plots)]
    data = sweep_json(res)
    data["files"] = written
    _emit(args, sweep_table(res), data)
    return EXIT_OK


def cmd_audit(args) -> int:
    case = _load_case(args.case)
    net = _network(case)
    try:
        sol = Solution.from_json(Path(args.solution).read_bytes())
    except OSError as exc:
        raise InputError(f"cannot read {args.solution}: {exc.strerror}") from None
    except (ValueError, TypeError, json.JSONDecodeError) as exc:
        raise InputError(f"{args.solution}: {exc}") from None
    if sol.model not in ("mcdc", "equal-split", "brute-force"):
        # single-conductor results live on the aggregate network
        from .network import single_conductor_view
        net = single_conductor_view(net)
    try:
        rep = audit(net, sol, args.tol)
    except (DimensionMismatch, KeyError, TypeError) as exc:
        raise InputError(f"solution does not match the case: {exc}") from None
    _emit(args, rep.table(), rep.to_dict())
    return EXIT_OK if rep.ok else EXIT_AUDIT


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mcdc-opf", description=(
        "Multi-conductor AC/DC optimal power flow: solve cases, compare with the "
        "single-conductor model, sweep a load, audit solutions."))
    p.add_argument("--json", action="store_true", help="machine-readable output on stdout")
    sub = p.add_subparsers(dest="command", required=True)

    def case_arg(sp):
        sp.add_argument("case", help=f"case file, or a bundled case ({', '.join(cases.NAMES)})")

    def solver_args(sp):
        sp.add_argument("--tol", type=float, default=None, help="KKT tolerance (default 1e-8)")
        sp.add_argument("--max-iter", type=int, default=None, help="iteration limit (default 300)")

    sp = sub.add_parser("solve", help="solve one case")
    case_arg(sp)
    sp.add_argument("--model", choices=("mcdc", "balanced"), default="mcdc")
    sp.add_argument("--out", help="directory for solution.json, CSV tables and figures")
    sp.add_argument("--no-plots", action="store_true", help="skip the PNG figures")
    solver_args(sp)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("compare", help="multi-conductor against single-conductor model")
    case_arg(sp)
    sp.add_argument("--embed-split", action="store_true",
                    help="for unbalanced cases: audit the equal pole split of the "
                         "single-conductor optimum")
    sp.add_argument("--tol-audit", type=float, default=1e-6)
    solver_args(sp)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("sweep", help="solve over a range of one load's demand")
    case_arg(sp)
    sp.add_argument("--entity", help="load id to vary")
    sp.add_argument("--generator", help="generator whose output is tabulated")
    sp.add_argument("--from", dest="start", type=float)
    sp.add_argument("--to", dest="stop", type=float)
    sp.add_argument("--step", type=float)
    sp.add_argument("--out", help="directory for sweep.csv, sweep.dat and sweep.png")
    sp.add_argument("--threads", type=int, default=None,
                    help="parallel solves (default: MCDC_OPF_THREADS or 1)")
    sp.add_argument("--no-plots", action="store_true")
    solver_args(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("audit", help="check a solution JSON against a case")
    case_arg(sp)
    sp.add_argument("solution", help="solution.json written by 'solve --out'")
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.set_defaults(func=cmd_audit)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        return _fail(args, EXIT_INPUT, str(exc))


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
