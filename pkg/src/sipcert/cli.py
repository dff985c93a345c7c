"""Command-line front end.

    sipcert certify <file>     certify the file's candidate point
    sipcert tcset <file>       dump the near-active ladder and final hull
    sipcert admissible <file>  admissibility diagnostics at the candidate
    sipcert scan <file> --box lo1,hi1,lo2,hi2 --grid N --top K
    sipcert selftest           run the bundled fixture and property suite

Exit codes: 0 certificate found, 2 no certificate, 3 infeasible candidate,
4 input error.  ``--json`` prints the full machine-readable report; flags
override problem-file options, which override the defaults.
"""

from __future__ import annotations

import argparse
import itertools
import sys
import time

import numpy as np

from .expr import ExprError, evaluate
from .geometry import cone_interior_nonempty
from .model import (
    InfeasibleError,
    ParametricFamily,
    PolyhedralFamily,
    admissible_diagnostics,
    feasibility,
    is_pure_finite,
)
from .multipliers import Certificate, certify_fj, sip_multipliers, tc_approx
from .options import Options
from .problemfile import LoadedProblem, ProblemFileError, emit_json, load_problem
from .reduction import FullCertificate, certify_composed, certify_equality

EXIT_OK = 0
EXIT_NO_CERTIFICATE = 2
EXIT_INFEASIBLE = 3
EXIT_INPUT_ERROR = 4

_VERDICT_EXIT = {
    "KKT": EXIT_OK,
    "FJ": EXIT_OK,
    "Unconstrained": EXIT_OK,
    "EqualityDegenerate": EXIT_OK,
    "NoCertificate": EXIT_NO_CERTIFICATE,
    "Infeasible": EXIT_INFEASIBLE,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ProblemFileError as err:
        _print_error("input", str(err), args)
        return EXIT_INPUT_ERROR
    except ExprError as err:
        _print_error("expression", str(err), args)
        return EXIT_INPUT_ERROR


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="sipcert",
        description="First-order optimality certificates via multiplier-set membership.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("file", help="problem file (JSON)")
        sp.add_argument("--tol", type=float, default=None, help="certificate tolerance")
        sp.add_argument("--eps0", type=float, default=None, help="first ladder rung")
        sp.add_argument("--shrink", type=float, default=None, help="ladder shrink factor")
        sp.add_argument("--max-steps", type=int, default=None, help="ladder length cap")
        sp.add_argument("--grid", type=int, default=None, help="index-set grid override")
        sp.add_argument("--refine", type=int, default=None, help="refinement depth override")
        sp.add_argument("--json", action="store_true", help="print the full JSON report")

    sp = sub.add_parser("certify", help="certify first-order optimality of the candidate")
    common(sp)
    sp.set_defaults(handler=cmd_certify)

    sp = sub.add_parser("tcset", help="dump the multiplier-set ladder")
    common(sp)
    sp.set_defaults(handler=cmd_tcset)

    sp = sub.add_parser("admissible", help="admissibility diagnostics")
    common(sp)
    sp.set_defaults(handler=cmd_admissible)

    sp = sub.add_parser("scan", help="coarse feasible grid search for candidates (not a solver)")
    sp.add_argument("file")
    sp.add_argument(
        "--box",
        required=True,
        help="lo1,hi1,lo2,hi2,... over the decision box (use --box=-1,1,... for negatives)",
    )
    sp.add_argument("--grid", type=int, default=33, help="grid points per axis")
    sp.add_argument("--top", type=int, default=5, help="number of candidates to report")
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(handler=cmd_scan)

    sp = sub.add_parser("selftest", help="run the bundled fixture and property suite")
    sp.add_argument("--tol", type=float, default=None, help="certificate tolerance override")
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(handler=cmd_selftest)
    return parser


def _print_error(kind, message, args):
    report = {"error": {"kind": kind, "message": message}}
    print(emit_json(report) if getattr(args, "json", False) else f"error ({kind}): {message}")


def _load(args) -> tuple[LoadedProblem, Options, int | None]:
    loaded = load_problem(args.file)
    opts = Options().replace(**loaded.options)
    opts = opts.replace(
        tol=args.tol,
        eps0=args.eps0,
        shrink=args.shrink,
        max_steps=getattr(args, "max_steps", None),
        refine_depth=getattr(args, "refine", None),
    )
    flag_grid = getattr(args, "grid", None)
    if flag_grid is not None and flag_grid < 2:
        raise ProblemFileError("--grid must be at least 2", "--grid")
    grid = flag_grid or loaded.grid
    return loaded, opts, grid


def _require_candidate(loaded):
    if loaded.candidate is None:
        raise ProblemFileError("a candidate point is required for this command", "$.candidate")
    return loaded.candidate


def _family_kind(problem):
    family = problem.family
    if family is None:
        return "none"
    if isinstance(family, ParametricFamily):
        return "parametric+finite" if family.extra else "parametric"
    if isinstance(family, PolyhedralFamily):
        return "polyhedral"
    return "finite"


def _assumptions(loaded, cert=None):
    problem = loaded.problem
    notes = list(loaded.notes)
    if problem.family is not None and not is_pure_finite(problem.family):
        notes.append("equi-lower-semicontinuity of inactive members is assumed, not verified")
        notes.append("the index set is sampled on a grid; hulls may under-approximate between points")
    if problem.equality:
        notes.append("Jacobian regularity is tested at the candidate only, not in a neighborhood")
        notes.append("local Lipschitz behaviour of the objective and inner map is assumed")
    if cert is not None and getattr(cert, "approximate", False):
        notes.append("ladder did not stabilize; the certificate is approximate")
    return notes


def _ladder_rows(tc):
    if tc is None:
        return []
    rows = []
    for eps, count, gap in tc.ladder_table():
        rows.append({"eps": eps, "generators": count, "gap": gap})
    return rows


def _tags_for_report(hull):
    return list(hull.tags) if hull.tags is not None else [f"g{i}" for i in range(len(hull))]


def _certificate_payload(cert: Certificate):
    payload = {
        "kind": cert.kind,
        "lambda": cert.lam,
        "beta": cert.beta,
        "witness_x_star": None if cert.x_star is None else list(cert.x_star),
        "coefficients": [
            {"tag": tag, "t": None if param is None else list(param), "weight": w}
            for tag, param, w in cert.coeffs
        ],
        "residual": cert.residual,
        "zero_not_in_tc": cert.zero_not_in_tc,
        "objective_gradient": list(cert.grad_f),
        "approximate": cert.approximate,
    }
    if cert.y_star is not None:
        payload["y_star"] = list(cert.y_star)
    kkt = cert.kkt_weights()
    if kkt is not None:
        payload["kkt_weights"] = [
            {"tag": tag, "t": None if param is None else list(param), "weight": w}
            for tag, param, w in kkt
        ]
    if cert.diagnostics:
        payload["diagnostics"] = {k: _plain(v) for k, v in cert.diagnostics.items()}
    return payload


def _plain(v):
    if isinstance(v, np.ndarray):
        return list(v)
    return v


def _verdict_of(cert) -> str:
    if isinstance(cert, FullCertificate):
        if not cert.found:
            return "NoCertificate"
        if cert.branch == "not_onto":
            return "EqualityDegenerate"
        if cert.branch == "onto_no_a":
            return "KKT"
        inner = cert.inner
        return {"kkt": "KKT", "fj": "FJ", "unconstrained": "Unconstrained"}.get(
            inner.kind if inner else "kkt", "KKT"
        )
    return {
        "kkt": "KKT",
        "fj": "FJ",
        "unconstrained": "Unconstrained",
        "no_certificate": "NoCertificate",
    }[cert.kind]


def cmd_certify(args) -> int:
    loaded, opts, grid = _load(args)
    candidate = _require_candidate(loaded)
    problem = loaded.problem
    started = time.perf_counter()
    try:
        if problem.equality:
            cert = certify_equality(problem, candidate, opts, grid)
        elif problem.inner_map is not None:
            cert = certify_composed(problem, candidate, opts, grid)
        else:
            cert = certify_fj(problem, candidate, opts, grid)
    except InfeasibleError as err:
        return _emit_infeasible(args, loaded, err)
    elapsed = time.perf_counter() - started

    verdict = _verdict_of(cert)
    report = {
        "tool": "sipcert",
        "command": "certify",
        "verdict": verdict,
        "problem": {
            "dimension": problem.p,
            "family": _family_kind(problem),
            "has_inner_map": problem.inner_map is not None,
            "equality_rows": len(problem.equality or ()),
            "candidate": list(candidate),
        },
        "options": _options_payload(opts),
        "assumptions": _assumptions(loaded, cert),
        "exit_code": _VERDICT_EXIT[verdict],
    }
    if isinstance(cert, FullCertificate):
        report["branch"] = cert.branch
        report["lambda0"] = cert.lambda0
        report["z_star"] = None if cert.z_star is None else list(cert.z_star)
        report["w_star"] = None if cert.w_star is None else list(cert.w_star)
        report["residual"] = cert.residual
        report["jacobian"] = {
            "rows": cert.jacobian.matrix.shape[0],
            "rank": cert.jacobian.rank,
            "pivots": list(cert.jacobian.pivots),
            "kernel_dim": cert.jacobian.kernel_basis.shape[0],
        }
        if cert.inner is not None:
            report["inequality_certificate"] = _certificate_payload(cert.inner)
            report["ladder"] = _ladder_rows(cert.inner.tc)
        if cert.diagnostics:
            report["diagnostics"] = {k: _plain(v) for k, v in cert.diagnostics.items()}
    else:
        report["certificate"] = _certificate_payload(cert)
        report["ladder"] = _ladder_rows(cert.tc)
        if cert.tc is not None:
            report["converged"] = cert.tc.converged
            report["stopped_by"] = cert.tc.stopped_by
        if (
            isinstance(problem.family, ParametricFamily)
            and cert.found
            and cert.tc is not None
            and not cert.tc.interior
        ):
            sm = sip_multipliers(problem, candidate, opts, grid, certificate=cert)
            report["sip_multipliers"] = {
                "lambda0": sm.lambda0,
                "entries": [
                    {"tag": tag, "t": None if param is None else list(param), "weight": w}
                    for tag, param, w, _ in sm.entries
                ],
                "k": sm.k,
                "residual": sm.residual,
                "lambda0_nonzero_guaranteed": sm.lambda0_nonzero_guaranteed,
            }
    report["timings"] = {"total_s": elapsed}

    if args.json:
        print(emit_json(report))
    else:
        _print_certify_human(report)
    return report["exit_code"]


def _emit_infeasible(args, loaded, err: InfeasibleError) -> int:
    report = {
        "tool": "sipcert",
        "command": getattr(args, "command", "certify"),
        "verdict": "Infeasible",
        "violations": [
            {"tag": tag, "value": value} for tag, value in getattr(err.report, "violations", ())
        ],
        "min_value": err.report.min_value,
        "min_tag": err.report.min_tag,
        "equality_violation": getattr(err.report, "equality_violation", 0.0),
        "exit_code": EXIT_INFEASIBLE,
    }
    if args.json:
        print(emit_json(report))
    else:
        print("verdict: Infeasible")
        print(f"  worst constraint {err.report.min_tag}: {err.report.min_value:.6g}")
    return EXIT_INFEASIBLE


def _print_certify_human(report):
    print(f"verdict: {report['verdict']}")
    cert = report.get("certificate")
    if cert is not None:
        print(f"  (lambda, beta) = ({cert['lambda']:.12g}, {cert['beta']:.12g})  [lambda + beta = 1]")
        if cert["witness_x_star"] is not None:
            print(f"  witness x* = {_vec_str(cert['witness_x_star'])}")
        for c in cert["coefficients"]:
            print(f"    alpha[{c['tag']}] = {c['weight']:.12g}")
        print(f"  residual = {cert['residual']:.3g}")
        if cert["zero_not_in_tc"] is not None:
            print(f"  0 not in T_C: {cert['zero_not_in_tc']}")
    if "branch" in report:
        print(f"  branch = {report['branch']}, lambda0 = {report['lambda0']:.12g}")
        if report.get("z_star") is not None:
            print(f"  z* = {_vec_str(report['z_star'])}")
        if report.get("w_star") is not None:
            print(f"  w* = {_vec_str(report['w_star'])}")
        print(f"  residual = {report['residual']:.3g}")
    if report.get("assumptions"):
        print("  assumptions:")
        for note in report["assumptions"]:
            print(f"    - {note}")


def _vec_str(v):
    return "[" + ", ".join(format(float(x), ".12g") for x in v) + "]"


def _options_payload(opts: Options):
    return {
        "tol": opts.tol, "tol_lp": opts.tol_lp, "tol_feas": opts.tol_feas,
        "tol_hull": opts.tol_hull, "tol_kink": opts.tol_kink, "eps0": opts.eps0,
        "shrink": opts.shrink, "max_steps": opts.max_steps,
        "refine_depth": opts.refine_depth, "k_max": opts.k_max,
    }


def cmd_tcset(args) -> int:
    loaded, opts, grid = _load(args)
    candidate = _require_candidate(loaded)
    problem = loaded.problem
    if problem.inner_map is not None:
        from .reduction import compose_family

        problem = compose_family(problem, candidate)
    try:
        tc = tc_approx(problem, candidate, opts, grid)
    except InfeasibleError as err:
        return _emit_infeasible(args, loaded, err)
    report = {
        "tool": "sipcert",
        "command": "tcset",
        "interior": tc.interior,
        "family_infimum": tc.inf_value,
        "ladder": _ladder_rows(tc),
        "hausdorff_gaps": list(tc.hausdorff_gaps),
        "converged": tc.converged,
        "stopped_by": tc.stopped_by,
        "final": {
            "generators": [list(g) for g in tc.final.generators],
            "tags": _tags_for_report(tc.final),
        },
        "assumptions": _assumptions(loaded),
        "options": _options_payload(opts),
        "exit_code": EXIT_OK,
    }
    if args.json:
        print(emit_json(report))
    else:
        if tc.interior:
            print(f"interior candidate: family infimum {tc.inf_value:.6g} > 0, empty multiplier set")
        else:
            print(f"ladder ({tc.stopped_by}, converged={tc.converged}):")
            for row in report["ladder"]:
                gap = "-" if row["gap"] is None else format(row["gap"], ".3g")
                print(f"  eps = {row['eps']:<12.6g} generators = {row['generators']:<6d} gap = {gap}")
            print("final generators:")
            for g, tag in zip(report["final"]["generators"], report["final"]["tags"]):
                print(f"  {_vec_str(g)}  [{tag}]")
    return EXIT_OK


def cmd_admissible(args) -> int:
    loaded, opts, grid = _load(args)
    candidate = _require_candidate(loaded)
    problem = loaded.problem
    if problem.inner_map is not None:
        from .reduction import compose_family

        problem = compose_family(problem, candidate)
    try:
        diag = admissible_diagnostics(problem, candidate, opts.eps0, opts, grid)
    except InfeasibleError as err:
        return _emit_infeasible(args, loaded, err)
    report = {
        "tool": "sipcert",
        "command": "admissible",
        "family": _family_kind(problem),
        "zero_in_full_hull": diag.zero_in_full_hull,
        "hull_gap": diag.hull_gap,
        "admissible_style": diag.admissible_style,
        "lipschitz_estimate": diag.lipschitz_estimate,
        "determination": [
            {"normal": list(a), "infimum": inf, "stated_offset": b}
            for a, inf, b in diag.determination
        ],
        "assumptions": list(diag.assumptions),
        "exit_code": EXIT_OK,
    }
    family = problem.family
    if isinstance(family, PolyhedralFamily) and family.poly.is_cone(tol=1e-12):
        interior = cone_interior_nonempty(family.poly, opts.tol_lp)
        report["cone"] = {
            "interior_nonempty": interior.nonempty,
            "witness": list(interior.witness),
            "margin": interior.margin,
        }
    if args.json:
        print(emit_json(report))
    else:
        if problem.family is None:
            print("no inequality family: admissibility diagnostics are vacuous")
        style = "admissible-style" if diag.admissible_style else "weak-admissible only"
        print(f"0 in conv(all gradients): {diag.zero_in_full_hull}  ->  {style}")
        print(f"equi-Lipschitz estimate: {diag.lipschitz_estimate:.6g}")
        for d in report["determination"]:
            print(
                f"  normal {_vec_str(d['normal'])}: inf over A = {d['infimum']:.6g}"
                f" (stated offset {d['stated_offset']:.6g})"
            )
        if "cone" in report:
            cone = report["cone"]
            print(
                f"cone interior nonempty: {cone['interior_nonempty']}"
                f" (margin {cone['margin']:.6g}, witness {_vec_str(cone['witness'])})"
            )
        for note in report["assumptions"]:
            print(f"  - {note}")
    return EXIT_OK


def cmd_scan(args) -> int:
    loaded = load_problem(args.file)
    problem = loaded.problem
    if problem.inner_map is not None:
        from .reduction import compose_family

        problem = compose_family(problem, np.zeros(problem.p))
    bounds = [float(v) for v in args.box.split(",")]
    if len(bounds) != 2 * problem.p:
        raise ProblemFileError(
            f"--box needs {2 * problem.p} comma-separated numbers", "--box"
        )
    axes = [
        np.linspace(bounds[2 * i], bounds[2 * i + 1], args.grid) for i in range(problem.p)
    ]
    candidates = []
    for point in itertools.product(*axes):
        x = np.array(point)
        report = feasibility(problem, x, grid=loaded.grid)
        if not report.feasible:
            continue
        if problem.equality and report.equality_violation > 1e-9:
            continue
        candidates.append((float(evaluate(problem.objective, x)), x))
    candidates.sort(key=lambda item: -item[0])
    top = candidates[: max(args.top, 1)]
    report = {
        "tool": "sipcert",
        "command": "scan",
        "feasible_points": len(candidates),
        "candidates": [{"x": list(x), "objective": value} for value, x in top],
        "exit_code": EXIT_OK if candidates else EXIT_INFEASIBLE,
    }
    if not candidates:
        report["error"] = "empty feasible grid"
    if args.json:
        print(emit_json(report))
    else:
        if not candidates:
            print("empty feasible grid")
        for entry in report["candidates"]:
            print(f"f = {entry['objective']:<14.8g} at {_vec_str(entry['x'])}")
    return report["exit_code"]


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    return run_selftest(tol=args.tol, as_json=args.json)


if __name__ == "__main__":
    sys.exit(main())
