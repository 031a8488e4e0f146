"""Command-line interface: ``stochsdp {check,solve,export,stability}``.

Exit codes: 0 success, 1 assumption failure, 2 usage or parse error,
3 solver did not converge.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .core import ProblemData, ScenarioSet, Spectrahedron, validate_problem
from .risk import Kind, parse_risk

FORMAT_VERSION = 1
EXIT_OK, EXIT_ASSUMPTION, EXIT_USAGE, EXIT_NOT_CONVERGED = 0, 1, 2, 3

log = logging.getLogger("stochsdp.cli")


class ParseError(ValueError):
    """Malformed input file; the message carries the location."""


def _load_json(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror or exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top level must be an object")
    ver = doc.get("format_version")
    if ver != FORMAT_VERSION:
        raise ParseError(f"{path}: format_version must be {FORMAT_VERSION}, got {ver!r}")
    return doc


def _matrix(doc, key, where, k=None) -> np.ndarray:
    try:
        a = np.array(doc[key], dtype=float)
    except KeyError:
        raise ParseError(f"{where}: missing key {key!r}") from None
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{where}.{key}: {exc}") from None
    if a.ndim != 2 or a.shape[0] != a.shape[1] or (k is not None and a.shape[0] != k):
        raise ParseError(f"{where}.{key}: expected a square {k or ''} matrix, got shape {a.shape}")
    return a


def problem_from_dict(doc: dict, where: str = "problem") -> ProblemData:
    try:
        dims = doc["dims"]
        n, m, s = int(dims["n"]), int(dims["m"]), int(dims["s"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{where}.dims: need integer n, m, s ({exc})") from None
    c = _matrix(doc, "c", where, n)
    q = _matrix(doc, "q", where, m)
    mats = {}
    for key, k in (("T", n), ("W", m)):
        lst = doc.get(key)
        if not isinstance(lst, list) or len(lst) != s:
            raise ParseError(f"{where}.{key}: expected a list of s={s} matrices")
        mats[key] = [_matrix({key: a}, key, f"{where}.{key}[{j}]", k) for j, a in enumerate(lst)]
    xd = doc.get("X", {}) or {}
    try:
        eq = [(_matrix(e, "G", f"{where}.X.eq[{i}]", n), float(e["g"])) for i, e in enumerate(xd.get("eq", []))]
        ineq = [(_matrix(e, "H", f"{where}.X.ineq[{i}]", n), float(e["h"])) for i, e in enumerate(xd.get("ineq", []))]
    except KeyError as exc:
        raise ParseError(f"{where}.X: missing key {exc}") from None
    cap = xd.get("trace_cap")
    X = Spectrahedron(dim=n, eq=tuple(eq), ineq=tuple(ineq), trace_cap=cap, compact=cap is not None)
    try:
        return ProblemData(c=c, q=q, T=mats["T"], W=mats["W"], X=X)
    except ValueError as exc:
        raise ParseError(f"{where}: {exc}") from None


def problem_to_dict(p: ProblemData) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "dims": {"n": p.n, "m": p.m, "s": p.s},
        "c": p.c.array.tolist(),
        "q": p.q.array.tolist(),
        "T": [b.array.tolist() for b in p.T.blocks],
        "W": [b.array.tolist() for b in p.W.blocks],
        "X": {
            "eq": [{"G": G.array.tolist(), "g": g} for G, g in p.X.eq],
            "ineq": [{"H": H.array.tolist(), "h": h} for H, h in p.X.ineq],
            "trace_cap": p.X.trace_cap,
        },
    }


def scenarios_from_dict(doc: dict, where: str = "scenarios") -> ScenarioSet:
    lst = doc.get("scenarios")
    if not isinstance(lst, list) or not lst:
        raise ParseError(f"{where}: expected a nonempty list under 'scenarios'")
    pairs = []
    for i, e in enumerate(lst):
        try:
            pairs.append((float(e["pi"]), [float(v) for v in e["z"]]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{where}.scenarios[{i}]: need 'pi' and a list 'z' ({exc})") from None
    if len({len(z) for _, z in pairs}) != 1:
        raise ParseError(f"{where}: all z must have the same length")
    return ScenarioSet.from_pairs(pairs)


def scenarios_to_dict(scen: ScenarioSet) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "scenarios": [{"pi": float(p), "z": [float(v) for v in z]} for p, z in scen],
    }


def load_inputs(problem_path, scen_path) -> tuple[ProblemData, ScenarioSet]:
    p = problem_from_dict(_load_json(problem_path), str(problem_path))
    sc = scenarios_from_dict(_load_json(scen_path), str(scen_path))
    rep = validate_problem(p, sc)
    for w in rep.warnings:
        log.warning(w)
    if not rep.ok:
        raise ParseError("; ".join(rep.errors))
    return p, sc


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def _fmt_mat(a) -> str:
    return "[" + "; ".join(" ".join(_fmt(v) for v in row) for row in np.asarray(a)) + "]"


def _solver_opts(args):
    from .sdp import SolverOptions

    return SolverOptions.from_env()


def _check(p, opts, out) -> tuple[bool, object]:
    from .recourse import RecourseOracle

    o = RecourseOracle(p, opts)
    o.verify()
    a2 = o.a2
    print(f"A2 strict dual feasibility: {'OK' if a2.holds else 'FAIL'} (margin {a2.margin:.6g})", file=out)
    if not a2.holds:
        print("A1 complete recourse: not checked (the boundedness test needs A2)", file=out)
        return False, o
    a1 = o.a1
    cert = a1.certificate if a1.holds else f"{a1.certificate}, direction {np.array2string(a1.direction)}"
    print(f"A1 complete recourse: {'OK' if a1.holds else 'FAIL'} ({cert})", file=out)
    if a1.holds:
        print(f"Lipschitz bound L: {o.lipschitz_bound():.6g}", file=out)
    return a1.holds, o


def cmd_check(args) -> int:
    p, sc = load_inputs(args.problem, args.scenarios)
    ok, _ = _check(p, _solver_opts(args), sys.stdout)
    return EXIT_OK if ok else EXIT_ASSUMPTION


def cmd_solve(args) -> int:
    from .decompose import BendersOptions, RunStatus, benders_solve, bnb_solve_var
    from .extensive import build_for_spec, solve_extensive

    spec = _parse_spec(args.risk)
    is_var = spec.kind == Kind.MEAN_RISK and spec.base.kind == Kind.VAR
    if is_var and args.method != "bnb":
        raise ParseError("V@R models carry binary variables; use --method bnb")
    if args.method == "bnb" and not is_var:
        raise ParseError("--method bnb applies only to E+rho*VaR(alpha)")
    if args.method == "benders" and spec.kind == Kind.MEAN_UPPER_SEMIDEV:
        raise ParseError("--method benders supports E, E+rho*EE and E+rho*CVaR")
    p, sc = load_inputs(args.problem, args.scenarios)
    if is_var and not p.X.is_compact:
        raise ParseError("V@R models need a trace_cap on X")
    opts = _solver_opts(args)
    oracle = None
    if not args.skip_check:
        ok, oracle = _check(p, opts, sys.stderr)
        if not ok:
            print("assumptions A1/A2 do not hold; pass --skip-check to solve anyway", file=sys.stderr)
            return EXIT_ASSUMPTION
    result: dict = {"format_version": FORMAT_VERSION, "risk": str(spec), "method": args.method}
    code = EXIT_OK
    if args.method == "extensive":
        r = solve_extensive(build_for_spec(p, sc, spec, literal=args.literal_constraints), opts)
        result.update(status=str(r.status), value=r.value, x=r.x.tolist(), costs=r.costs.tolist())
        if r.eta is not None:
            result["eta"] = r.eta
        if not r.status.solved:
            code = EXIT_NOT_CONVERGED
            result["bounds"] = [r.solution.dobj, r.solution.pobj]
    elif args.method == "benders":
        from .recourse import RecourseOracle

        oracle = oracle or RecourseOracle(p, opts, override=True)
        r = benders_solve(p, sc, spec, BendersOptions(tol=args.tol, threads=args.threads, solver=opts), oracle=oracle)
        costs = oracle.costs(sc, r.x)
        result.update(status=str(r.status), value=r.value, x=r.x.tolist(), costs=costs.tolist(), iterations=r.iterations)
        if args.cut_log:
            r.write_cut_log(args.cut_log)
        if r.status != RunStatus.CONVERGED:
            code = EXIT_NOT_CONVERGED
            result["bounds"] = [r.lower, r.value]
    else:
        from .recourse import RecourseOracle

        oracle = oracle or RecourseOracle(p, opts, override=True)
        r = bnb_solve_var(p, sc, spec.base.alpha, spec.rho, opts, literal=args.literal_constraints, oracle=oracle)
        result.update(status=str(r.status), value=r.value, nodes=r.nodes, big_M=r.big_M)
        if r.x is not None:
            result.update(x=r.x.tolist(), costs=oracle.costs(sc, r.x).tolist(), eta=r.eta, delta=r.delta.tolist())
        if r.status != RunStatus.CONVERGED:
            code = EXIT_NOT_CONVERGED
            lo = min((b[0] for b in r.bounds), default=-math.inf)
            result["bounds"] = [lo, r.value]
    print(f"status: {result['status']}")
    print(f"value: {_fmt(result['value'])}")
    if "x" in result:
        print(f"x: {_fmt_mat(result['x'])}")
        print("costs: " + " ".join(_fmt(v) for v in result["costs"]))
    if "eta" in result:
        print(f"eta: {_fmt(result['eta'])}")
    if "delta" in result:
        print("delta: " + " ".join(f"{v:g}" for v in result["delta"]))
    if "bounds" in result:
        print(f"bounds: [{_fmt(result['bounds'][0])}, {_fmt(result['bounds'][1])}]")
    if args.out:
        Path(args.out).write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    return code


def cmd_export(args) -> int:
    from .extensive import build_for_spec, export_sdpa
    from .sdp import read_sdpa

    spec = _parse_spec(args.risk)
    p, sc = load_inputs(args.problem, args.scenarios)
    kw = {"opts": _solver_opts(args)} if _is_var(spec) else {}
    ef = build_for_spec(p, sc, spec, literal=args.literal_constraints, **kw)
    try:
        path, side = export_sdpa(ef, args.out)
    except OSError as exc:
        raise ParseError(f"{args.out}: {exc.strerror or exc}") from None
    back = read_sdpa(path)
    if not back.structurally_equal(ef.sdp):
        print("warning: re-imported SDPA file differs from the exported model", file=sys.stderr)
    print(f"wrote {path} ({len(ef.sdp.block_dims)} PSD blocks, {ef.sdp.n_rows} rows) and {side}")
    return EXIT_OK


def cmd_stability(args) -> int:
    from .stability import PerturbationPlan, stability_sweep

    spec = _parse_spec(args.risk)
    p, sc = load_inputs(args.problem, args.scenarios)
    doc = _load_json(args.plan)
    try:
        plan = PerturbationPlan(
            mode=doc["mode"],
            magnitudes=tuple(doc["magnitudes"]),
            replications=int(doc.get("replications", 5)),
            seed=int(doc.get("seed", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{args.plan}: {exc}") from None
    rep = stability_sweep(p, sc, spec, plan, _solver_opts(args), threads=args.threads)
    text = rep.to_csv()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    for w in rep.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


def _is_var(spec) -> bool:
    return spec.kind == Kind.MEAN_RISK and spec.base.kind == Kind.VAR


def _parse_spec(text):
    try:
        return parse_risk(text)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stochsdp", description="Risk-averse two-stage stochastic SDP toolkit.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log solver progress to stderr")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(sp):
        sp.add_argument("problem", help="problem file (JSON)")
        sp.add_argument("scenarios", help="scenario file (JSON)")

    sp = sub.add_parser("check", help="verify complete recourse and strict dual feasibility")
    common(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("solve", help="solve a mean-risk model")
    common(sp)
    sp.add_argument("--risk", default="E", help='risk model, e.g. "E", "E+1*CVaR(0.5)", "E+0.5*Mad(2)"')
    sp.add_argument("--method", choices=("extensive", "benders", "bnb"), default="extensive")
    sp.add_argument("--out", help="write a JSON result file")
    sp.add_argument("--threads", type=int, default=1, help="concurrent subproblem solves (1 = reproducible)")
    sp.add_argument("--tol", type=float, default=1e-7, help="relative gap for cutting planes")
    sp.add_argument("--cut-log", help="write the cutting-plane log here")
    sp.add_argument("--literal-constraints", action="store_true", help="use the printed big-M and semideviation rows")
    sp.add_argument("--skip-check", action="store_true", help="solve without verifying A1/A2")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("export", help="write the extensive form in SDPA format")
    common(sp)
    sp.add_argument("--risk", default="E")
    sp.add_argument("--format", choices=("sdpa",), default="sdpa")
    sp.add_argument("--out", required=True, help="SDPA output path; the sidecar goes next to it")
    sp.add_argument("--literal-constraints", action="store_true")
    sp.set_defaults(func=cmd_export)

    sp = sub.add_parser("stability", help="perturb the distribution and report value changes as CSV")
    common(sp)
    sp.add_argument("--risk", default="E")
    sp.add_argument("--plan", required=True, help="perturbation plan file (JSON)")
    sp.add_argument("--out", help="CSV output path (default stdout)")
    sp.add_argument("--threads", type=int, default=1)
    sp.set_defaults(func=cmd_stability)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.verbose:
        logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
