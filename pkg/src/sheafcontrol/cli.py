"""Command-line front end.

Subcommands ``validate``, ``solve``, ``boolify`` and ``report`` read a JSON
problem file (or ``bundled:<name>``) and print aligned text tables; with
``--output`` the same report is written as JSON.

Exit codes: 0 success, 1 validation or scheme failure (or a failed
``--verify``), 2 unreadable problem file, 3 solver budget exhausted.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import problems
from .affine import build_boolean_scheme
from .boolrelax import build_thresholded_sheaves, error_budget, theorem_bound
from .encode import build_S
from .errors import InconsistentDynamics, InfeasibleProblem, ParseError, SchemeInvalid
from .netmodel import validate
from .optimize import SolveRequest, relaxation_gap, solve_constrained, solve_relaxed
from .problemfile import LoadedProblem, load
from .sheaf import consistency_radius, is_global_section

EXIT_OK, EXIT_INVALID, EXIT_PARSE, EXIT_BUDGET = 0, 1, 2, 3
EPS_ZERO_TOL = 1e-12
VERIFY_TOL = 1e-9


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "pass" if x else "FAIL"
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def _table(headers, rows) -> list:
    cells = [[_fmt(c) for c in r] for r in rows]
    widths = [max(len(h), *(len(r[i]) for r in cells)) if cells else len(h) for i, h in enumerate(headers)]
    line = "  ".join(h.ljust(w) for h, w in zip(headers, widths))
    out = [line, "  ".join("-" * w for w in widths)]
    out += ["  ".join(c.rjust(w) if _numeric(c) else c.ljust(w) for c, w in zip(r, widths)) for r in cells]
    return out


def _numeric(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def _open(path: str) -> LoadedProblem:
    if path.startswith("bundled:"):
        try:
            return problems.load_bundled(path.split(":", 1)[1])
        except KeyError as exc:
            raise ParseError(str(exc)) from None
    return load(path)


def _settings(lp: LoadedProblem, args) -> dict:
    s = {"mode": "constrained", "budget": 20000, "seed": 0, "tolerance": 1e-6, "starts": 8}
    s.update(lp.solver)
    for key in ("mode", "budget", "seed", "tolerance"):
        val = getattr(args, key, None)
        if val is not None:
            s[key] = val
    s["threads"] = args.threads
    return s


def _request(enc, s, mode, reference=None) -> SolveRequest:
    return SolveRequest(enc, mode=mode, budget=int(s["budget"]), seed=int(s["seed"]), tolerance=float(s["tolerance"]),
                        starts=int(s["starts"]), threads=int(s["threads"]), reference=reference)


def _values(step_dict) -> dict:
    return {v: float(x[0]) if len(x) == 1 else [float(c) for c in x] for v, x in step_dict.items()}


# -- report sections -------------------------------------------------------

def _validation(lp: LoadedProblem):
    found = list(lp.violations) + validate(lp.problem)
    data = {"valid": not found, "violations": [v.as_dict() for v in found]}
    text = ["validation: " + ("valid" if not found else f"{len(found)} violation(s)")]
    text += [f"  {v}" for v in found]
    return data, text


def _result_dict(res, enc) -> dict:
    d = {"objective": res.objective, "local_cr_N": list(res.local_cr_N), "converged": res.converged,
         "exhaustive": res.exhaustive, "evaluations": res.evaluations, "candidates": res.candidates}
    if res.controls is not None:
        d["controls"] = [_values(c) for c in res.controls]
        d["states"] = [_values(s) for s in enc.states_of(res.assignment)]
    return d


def _solve_section(lp: LoadedProblem, s: dict, enc):
    mode = s["mode"]
    data, text, results = {"settings": dict(s)}, [], {}
    if mode in ("constrained", "both"):
        results["constrained"] = solve_constrained(_request(enc, s, "constrained"))
    if mode in ("relaxed", "both"):
        results["relaxed"] = solve_relaxed(_request(enc, s, "relaxed", results.get("constrained")))
    for name, res in results.items():
        data[name] = _result_dict(res, enc)
        flag = "exhaustive" if res.exhaustive else ("converged" if res.converged else "budget exhausted")
        text.append(f"{name}: objective {_fmt(res.objective)} ({flag}, {res.evaluations} evaluations)")
        text += ["  " + ln for ln in _table(["step", "local_cr_N"], [[n, c] for n, c in enumerate(res.local_cr_N)])]
        if res.controls is not None:
            vs = list(lp.problem.vertices)
            rows = [[n] + [_values(c)[v] for v in vs] for n, c in enumerate(res.controls)]
            text += ["  controls:"] + ["    " + ln for ln in _table(["step"] + vs, rows)]
    if "relaxed" in results and "constrained" in results:
        gap = results["relaxed"].gap
        data["gap"] = [g.as_dict() for g in gap]
        data["gap_passed"] = all(g.passed for g in gap)
        text.append("relaxation certificate: c_N(relaxed) <= 2 d_N <= 2 d_M")
        text += ["  " + ln for ln in _table(["step", "c_N", "2 d_N", "2 d_M", "check"],
                                              [[g.step, g.c_N, g.bound, 2 * g.d_M, g.passed] for g in gap])]
    exhausted = any(not r.converged for r in results.values())
    return data, text, results, exhausted


def _boolify_section(lp: LoadedProblem, s: dict, enc, constrained=None):
    p = lp.problem
    scheme = build_boolean_scheme(p, lp.nominal, lp.dynamics, strict=lp.is_affine)
    budget = error_budget(scheme, seed=int(s["seed"]), threads=int(s["threads"]))
    system = build_thresholded_sheaves(enc, scheme, seed=int(s["seed"]))
    real = constrained or solve_constrained(_request(enc, s, "constrained"))
    boolean = solve_constrained(_request(system.boolean, s, "constrained"))
    triples = theorem_bound(boolean.assignment, real.assignment, system, budget)
    data = {"dynamics": "affine" if lp.is_affine else "saturating-affine", "budget": budget.as_dict(),
            "eps_zero": budget.eps <= EPS_ZERO_TOL, "defects": dict(system.defects),
            "boolean_objective": boolean.objective, "real_objective": real.objective,
            "boolean_controls": [_values(c) for c in boolean.controls],
            "triples": [t.as_dict() for t in triples]}
    text = [f"Boolean scheme ({data['dynamics']} dynamics, evaluation {budget.evaluation_mode})"]
    rows = [[b.vertex, b.omega1, b.omega2, b.norm_sigma, b.norm_tau_f, b.eps_v, b.lhs, b.lhs <= b.eps_v + EPS_ZERO_TOL]
            for b in budget.vertices.values()]
    text += ["  " + ln for ln in _table(["vertex", "omega1", "omega2", "|sigma|", "|tau f|", "eps_v", "lhs", "check"], rows)]
    text.append(f"  eps = {_fmt(budget.eps)}  K = {_fmt(budget.K)}  C = {_fmt(budget.C)}")
    text.append("  morphism defects: " + ", ".join(f"{k}={_fmt(v)}" for k, v in system.defects.items()))
    text.append(f"  optimal objective: real {_fmt(real.objective)}, Boolean {_fmt(boolean.objective)}")
    text.append("  bound chain c(r) <= K c(Gamma r) + C eps <= 2K d(s, Gamma r) + C eps")
    text += ["    " + ln for ln in _table(["step", "lhs", "mid", "rhs", "check"],
                                            [[t.step, t.lhs, t.mid, t.rhs, t.passed] for t in triples])]
    exhausted = not (real.converged and boolean.converged)
    return data, text, (scheme, budget, system, real, boolean, triples), exhausted


# -- verification ------------------------------------------------------------

def _verify_solve(enc, results) -> list:
    bad = []
    for name, res in results.items():
        if abs(consistency_radius(enc.S, res.assignment) - res.objective) > VERIFY_TOL:
            bad.append(f"{name}: objective does not match the recomputed consistency radius")
        if name == "constrained":
            for n in range(enc.horizon):
                if not is_global_section(enc.N[n], res.assignment, VERIFY_TOL):
                    bad.append(f"constrained: step {n} is not a section")
    if "relaxed" in results and "constrained" in results:
        for g in relaxation_gap(enc, results["constrained"], results["relaxed"]):
            if not g.passed:
                bad.append(f"relaxation certificate fails at step {g.step}")
        if results["relaxed"].objective > results["constrained"].objective + VERIFY_TOL:
            bad.append("relaxed objective exceeds the constrained one")
    return bad


def _verify_boolify(lp, parts) -> list:
    scheme, budget, system, real, boolean, _ = parts
    bad = []
    for b in budget.vertices.values():
        if abs(b.eps_v - (b.omega1 * b.norm_sigma + b.omega2 * b.norm_tau_f)) > EPS_ZERO_TOL:
            bad.append(f"{b.vertex}: eps_v does not match its parts")
        if b.lhs > b.eps_v + EPS_ZERO_TOL:
            bad.append(f"{b.vertex}: thresholding error exceeds eps_v")
    if lp.is_affine and budget.eps > EPS_ZERO_TOL:
        bad.append("affine problem with nonzero eps")
    for t in theorem_bound(boolean.assignment, real.assignment, system, budget):
        if not t.passed:
            bad.append(f"bound chain fails at step {t.step}")
    return bad


# -- commands ----------------------------------------------------------------

def _emit(report: dict, text: list, args):
    print("\n".join(text))
    if args.output:
        Path(args.output).write_text(json.dumps(report, indent=2) + "\n")


def _header(lp, args, command) -> tuple[dict, list]:
    report = {"command": command, "problem": lp.problem.name, "source": args.problem,
              "vertices": list(lp.problem.vertices), "horizon": lp.problem.horizon}
    text = [f"{command}: {lp.problem.name or args.problem} ({len(lp.problem.vertices)} vertices, horizon {lp.problem.horizon})"]
    return report, text


def cmd_validate(args) -> int:
    lp = _open(args.problem)
    report, text = _header(lp, args, "validate")
    data, t = _validation(lp)
    report["validation"] = data
    _emit(report, text + t, args)
    return EXIT_OK if data["valid"] else EXIT_INVALID


def _run(args, command: str) -> int:
    lp = _open(args.problem)
    report, text = _header(lp, args, command)
    vdata, vtext = _validation(lp)
    report["validation"] = vdata
    text += vtext
    if not vdata["valid"]:
        _emit(report, text, args)
        return EXIT_INVALID
    s = _settings(lp, args)
    if command == "report" and getattr(args, "mode", None) is None:
        s["mode"] = "both"
    enc = build_S(lp.problem)
    exhausted, verify = False, []
    results = {}
    if command in ("solve", "report"):
        try:
            data, t, results, ex = _solve_section(lp, s, enc)
        except InfeasibleProblem as exc:
            report["error"] = str(exc)
            _emit(report, text + [f"error: {exc}"], args)
            return EXIT_INVALID
        report["solve"] = data
        text += t
        exhausted |= ex
        if args.verify:
            verify += _verify_solve(enc, results)
    if command in ("boolify", "report"):
        if lp.nominal is None:
            if command == "boolify":
                report["error"] = "problem has no nominal block"
                _emit(report, text + ["error: problem has no nominal block"], args)
                return EXIT_INVALID
        else:
            try:
                data, t, parts, ex = _boolify_section(lp, s, enc, results.get("constrained"))
            except (SchemeInvalid, InconsistentDynamics) as exc:
                report["error"] = str(exc)
                _emit(report, text + [f"error: {exc}"], args)
                return EXIT_INVALID
            report["boolify"] = data
            text += t
            exhausted |= ex
            if args.verify:
                verify += _verify_boolify(lp, parts)
    if args.verify:
        report["verify"] = {"passed": not verify, "failures": verify}
        text.append("verify: " + ("all checks pass" if not verify else "; ".join(verify)))
    _emit(report, text, args)
    if verify:
        return EXIT_INVALID
    return EXIT_BUDGET if exhausted else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("problem", help="problem file (JSON) or bundled:<name>")
    common.add_argument("--output", help="write the report as JSON to this path")
    common.add_argument("--seed", type=int, default=None, help="random seed of the multi-start solvers and sampling")
    common.add_argument("--budget", type=int, default=None, help="evaluation budget of each solve")
    common.add_argument("--tolerance", type=float, default=None, help="step size at which local search stops")
    common.add_argument("--threads", type=int, default=1, help="worker threads; results do not depend on it")
    common.add_argument("--verify", action="store_true", help="recompute every pass flag and fail on any violation")
    parser = argparse.ArgumentParser(prog="sheafcontrol", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="check the modeling assumptions")
    for name, helptext in (("solve", "minimize consistency radius"),
                           ("boolify", "Boolean scheme, error budget and bound checks"),
                           ("report", "validation, both solves and the Boolean analysis")):
        sp = sub.add_parser(name, parents=[common], help=helptext)
        if name != "boolify":
            sp.add_argument("--mode", choices=["constrained", "relaxed", "both"], default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "validate":
            return cmd_validate(args)
        return _run(args, args.command)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
