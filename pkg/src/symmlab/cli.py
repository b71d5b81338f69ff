"""Command-line front end.

Every subcommand writes ``<out>/<command>.jsonl`` (one JSON report per
cell) and ``<out>/<command>-summary.txt`` and prints the summary.  Exit
codes: 0 when every cell met its expectation, 1 otherwise, 2 on usage or
config errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import continuum as cont
from . import suite
from .graphs import Order, SpaceSpecError, build_space, parse_space_spec, product, product_candidate_orders
from .rearrange import natural_reflections
from .solver import (
    ComparisonReport,
    compare_elliptic,
    compare_parabolic,
    problem_from_config,
    random_problem,
    solve_elliptic,
)
from .verify import (
    MODES,
    Report,
    SearchConfig,
    check_convolution_rearrangement,
    check_dirichlet_rearrangement,
    check_faber_krahn,
    check_hardy_littlewood,
    check_polarization_convergence,
    check_proposition,
    find_valid_order,
    plateau_thetas,
    sweep_orders_for_violation,
)

COMMANDS = ("verify-hl", "verify-conv", "verify-dirichlet", "counterexample", "valid-order",
            "faber-krahn", "polarize", "proposition", "compare-elliptic", "compare-parabolic",
            "continuum", "all")

# whether the rearrangement inequalities hold for the canonical order of a space type
EXPECTATIONS = {"line": "holds", "cycle": "holds", "tree": "holds", "octahedron": "holds",
                "custom": "holds", "hypercube": "fails", "torus": "fails"}

DEFAULT_SPACE = {"verify-hl": "line:10", "verify-conv": "line:4", "verify-dirichlet": "line:10",
                 "counterexample": "cube", "valid-order": "octahedron", "faber-krahn": "tree:3,6",
                 "polarize": "line:10", "proposition": "line:10", "compare-elliptic": "line:10",
                 "compare-parabolic": "line:10"}


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# parsing
# --------------------------------------------------------------------------

def _float_list(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--space", help="space spec, e.g. line:5, cycle:8, tree:3,2, octahedron, cube")
    common.add_argument("--config", help="JSON config file (or inline JSON object)")
    common.add_argument("--t", type=_float_list, default=[0.1, 1.0, 10.0],
                        help="heat kernel times (comma-separated)")
    common.add_argument("--samples", type=int, default=None, help="random samples / instances")
    common.add_argument("--restarts", type=int, default=None, help="ascent restarts")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tolerance", type=float, default=None)
    common.add_argument("--mode", choices=MODES, default=None)
    common.add_argument("--orders", default="canonical",
                        help="canonical | valid | exhaustive | candidates | v0,v1,... (one explicit order)")
    common.add_argument("--out", default="symmlab-out", help="report directory (SYMMLAB_OUT overrides)")
    common.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    common.add_argument("--expect", choices=("auto", "holds", "fails"), default="auto",
                        help="override the expected outcome")
    common.add_argument("--dt", type=float, default=1e-2, help="parabolic time step")
    common.add_argument("--steps", type=int, default=200, help="parabolic step count")

    parser = argparse.ArgumentParser(prog="symmlab",
                                     description="Numerical checks of rearrangement inequalities on graphs.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=f"run {name}")
    return parser


def _load_config(text: str | None):
    if text is None:
        return None
    src = text if text.lstrip().startswith("{") else Path(text).read_text()
    try:
        return json.loads(src)
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed config: {exc}") from None


def _space(args, cfg):
    if cfg is not None and "type" in cfg:
        return build_space(cfg)
    return build_space(args.space or DEFAULT_SPACE.get(args.command, "line:10"))


def _expectation(args, space) -> str:
    if args.expect != "auto":
        return args.expect
    return EXPECTATIONS.get(space.name.split(":")[0], "holds")


def _search(args, mode: str, samples: int, restarts: int, tol: float) -> SearchConfig:
    return SearchConfig(args.mode or mode, args.samples or samples, args.restarts or restarts,
                        args.seed, args.tolerance or tol)


def _orders(args, space, t_grid, cfg):
    """Resolve ``--orders`` to a list of orders or the string ``"exhaustive"``."""
    spec = args.orders
    if spec == "canonical":
        return [space.order]
    if spec == "exhaustive":
        return "exhaustive"
    if spec == "candidates":
        return product_candidate_orders(space)
    if spec == "valid":
        order = find_valid_order(space, t_grid, SearchConfig("exhaustive-indicators", seed=args.seed,
                                                             tolerance=cfg.tolerance))
        if order is None:
            raise UsageError(f"no valid order exists for {space.name}")
        return [order]
    try:
        return [Order(tuple(int(v) for v in spec.split(",")))]
    except ValueError:
        raise UsageError(f"bad --orders value {spec!r}") from None


# --------------------------------------------------------------------------
# cells
# --------------------------------------------------------------------------

def _cell(check: str, instance: str, expectation: str, report: Report, seed: int,
          ok: bool | None = None) -> dict:
    if ok is None:
        # a "fails" cell is met when the inequality check produced a violation witness
        ok = report.passed if expectation == "holds" else (not report.passed and report.witness is not None)
    return {"check": check, "instance": instance, "expectation": expectation, "seed": seed,
            "ok": bool(ok), "report": json.loads(report.to_json())}


def _comparison_to_report(name: str, r: ComparisonReport, tol: float) -> Report:
    margin = min(r.star_margin, min(r.max_margins), r.plateau_margin)
    return Report(name, 1, margin, r.passed, None, 0.0, tol,
                  {"star_margin": r.star_margin, "max_margins": r.max_margins,
                   "plateau_margin": r.plateau_margin, "symmetric_v": r.symmetric_v,
                   "equivalence_agrees": r.equivalence_agrees, **r.details})


def _problems(args, cfg, parabolic: bool):
    if cfg is not None:
        yield "config", problem_from_config(cfg)
        return
    m_space = build_space(args.space or "line:10")
    sp = product(m_space, build_space("cycle:5").graph)
    rng = np.random.default_rng([args.seed, 6, int(parabolic)])
    for i in range(args.samples or 10):
        phi = ("zero", "reciprocal:1")[i % 2]
        yield f"{m_space.name}xcycle:5 #{i} phi={phi}", random_problem(
            sp, rng, phi, density=(0.6, 0.9, 1.01)[i % 3], psi_scale=0.9, parabolic=parabolic)


def cells_for(args) -> list[dict]:
    cmd = args.command
    cfg = _load_config(args.config) if cmd not in ("proposition", "compare-elliptic",
                                                   "compare-parabolic", "continuum") else None
    seed = args.seed
    if cmd == "verify-hl":
        space = _space(args, cfg)
        rep = check_hardy_littlewood(space, _search(args, "random-functions", 10_000, 1, 1e-12))
        return [_cell("hardy-littlewood", space.name, "holds", rep, seed)]
    if cmd == "verify-conv":
        space = _space(args, cfg)
        sc = _search(args, "exhaustive-indicators", 1000, 1, 1e-10)
        out = []
        for order in _orders(args, space, args.t, sc):
            for t in args.t:
                rep = check_convolution_rearrangement(space, [t], sc, order=order)
                out.append(_cell("convolution-rearrangement", f"{space.name} t={t:g}",
                                 _expectation(args, space), rep, seed))
        return out
    if cmd == "verify-dirichlet":
        space = _space(args, cfg)
        sc = _search(args, "gradient-ascent", 10_000, 100, 1e-9)
        return [_cell("dirichlet-rearrangement", space.name, _expectation(args, space),
                      check_dirichlet_rearrangement(space, sc, order=order), seed)
                for order in _orders(args, space, args.t, sc)]
    if cmd == "counterexample":
        space = _space(args, cfg)
        sc = _search(args, "gradient-ascent", 2000, 20, 1e-6)
        rep = sweep_orders_for_violation(space, _orders(args, space, args.t, sc), sc)
        # the sweep passes when every order has a witness
        expectation = "fails" if args.expect == "auto" else args.expect
        ok = rep.passed if expectation == "fails" else rep.details["orders_without_violation"] == rep.instances_tested
        return [_cell("violation-sweep", f"{space.name} orders={args.orders}", expectation, rep, seed, ok)]
    if cmd == "valid-order":
        space = _space(args, cfg)
        sc = _search(args, "exhaustive-indicators", 1000, 1, 1e-10)
        order = find_valid_order(space, args.t, sc)
        found = order is not None
        rep = Report("valid-order", 1, 0.0 if found else -1.0, found,
                     None if order is None else list(order.permutation), 0.0, sc.tolerance,
                     {"space": space.name, "t": list(args.t)})
        expectation = _expectation(args, space)
        return [_cell("valid-order", space.name, expectation, rep, seed,
                      found if expectation == "holds" else not found)]
    if cmd == "faber-krahn":
        spec = parse_space_spec(cfg if cfg is not None and "type" in cfg else args.space or "tree:3,6")
        if spec["type"] != "tree":
            raise UsageError("faber-krahn needs a tree space (tree:degree,max_size)")
        rep = check_faber_krahn(int(spec["degree"]), int(spec["depth"]), args.tolerance or 1e-9)
        return [_cell("faber-krahn", f"T{spec['degree']} sizes<={spec['depth']}", "holds", rep, seed)]
    if cmd == "polarize":
        space = _space(args, cfg)
        refl = natural_reflections(space)
        if not refl:
            raise UsageError(f"no natural reflections for {space.name}")
        rep = check_polarization_convergence(space, refl, _search(args, "random-functions", 1000, 1, 1e-12))
        ok = rep.passed and rep.details["converged_fraction"] == 1.0 and rep.details["max_sup_error"] < 1e-12
        return [_cell("polarization", space.name, "holds", rep, seed, ok)]
    cfg = _load_config(args.config)
    if cmd == "proposition":
        rng = np.random.default_rng([seed, 8])
        out = []
        for name, p in _problems(args, cfg, False):
            u = solve_elliptic(p)
            rep = check_proposition(u, p, plateau_thetas(p, 5, rng), args.tolerance or 1e-9)
            out.append(_cell("proposition", name, "holds", rep, seed))
        return out
    if cmd == "compare-elliptic":
        tol = args.tolerance or 1e-9
        return [_cell("compare-elliptic", name, "holds",
                      _comparison_to_report("compare-elliptic", compare_elliptic(p, tol), tol), seed)
                for name, p in _problems(args, cfg, False)]
    if cmd == "compare-parabolic":
        tol = args.tolerance or 1e-9
        out = []
        for name, p in _problems(args, cfg, True):
            if p.initial is None:
                raise UsageError("compare-parabolic needs an initial condition")
            r = compare_parabolic(p, args.dt, args.steps, tol)
            out.append(_cell("compare-parabolic", f"{name} dt={args.dt:g}", "holds",
                             _comparison_to_report("compare-parabolic", r, tol), seed))
        return out
    if cmd == "continuum":
        if cfg is None:
            return [json.loads(c.to_json()) for c in suite.criterion_11(seed)]
        dom = cont.parse_domain(cfg)
        rep = cont.compare_continuum(dom, float(cfg.get("lam", 1.0)), cfg.get("slack"),
                                     args.tolerance or 1e-9)
        return [_cell("continuum-max-principle", f"{dom.name} h={dom.h:g}", "holds", rep, seed)]
    raise UsageError(f"unknown command {cmd!r}")


def summary(lines: list[dict]) -> str:
    header = f"{'check':<28} {'instance':<44} {'expect':<6} {'worst_margin':>14} {'n':>9}  result"
    out = [header, "-" * len(header)]
    for d in lines:
        r = d["report"]
        out.append(f"{d['check']:<28} {d['instance']:<44} {d['expectation']:<6} "
                   f"{r['worst_margin']:>14.6e} {r['instances_tested']:>9}  {'PASS' if d['ok'] else 'FAIL'}")
    return "\n".join(out) + "\n"


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    out = Path(os.environ.get("SYMMLAB_OUT") or args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"symmlab: cannot create output directory: {exc}", file=sys.stderr)
        return 2
    if args.command == "all":
        ok, lines = suite.run_suite(out, args.seed, max(1, args.jobs))
        sys.stdout.write(suite.summary_table(lines))
        return 0 if ok else 1
    try:
        lines = cells_for(args)
    except (UsageError, SpaceSpecError, ValueError, KeyError, TypeError, OSError) as exc:
        print(f"symmlab {args.command}: {exc}", file=sys.stderr)
        return 2
    (out / f"{args.command}.jsonl").write_text("".join(json.dumps(d, sort_keys=True) + "\n" for d in lines))
    table = summary(lines)
    (out / f"{args.command}-summary.txt").write_text(table)
    sys.stdout.write(table)
    return 0 if all(d["ok"] for d in lines) else 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
