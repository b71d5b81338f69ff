"""The acceptance suite: one function per criterion, each returning cells.

A cell is one report line: (criterion, check, instance, expectation, report).
``expectation`` is ``"holds"`` when the inequality is asserted to hold and
``"fails"`` when a violation witness is expected; a cell is ``ok`` when
the outcome matches.  Reports carry no timings, so reruns with the same
seed are byte-identical.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import continuum as cont
from .graphs import Graph, build_space, product, product_candidate_orders
from .operators import dirichlet_eigenvalue, heat_kernel, product_kernel
from .rearrange import natural_reflections
from .solver import compare_elliptic, compare_parabolic, random_problem, solve_elliptic
from .verify import (
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

GOLDEN_RATIO = (1 + math.sqrt(5)) / 2


@dataclass
class Cell:
    criterion: int
    check: str
    instance: str
    expectation: str
    report: Report
    seed: int

    @property
    def ok(self) -> bool:
        return self.report.passed

    def to_json(self) -> str:
        d = {"criterion": self.criterion, "check": self.check, "instance": self.instance,
             "expectation": self.expectation, "seed": self.seed, "ok": self.ok,
             "report": json.loads(self.report.to_json())}
        return json.dumps(d, sort_keys=True)


def _aggregate(name: str, margins, tol: float, witness=None, **details) -> Report:
    margins = np.asarray(margins, dtype=float)
    worst = float(margins.min()) if margins.size else 0.0
    passed = worst >= -tol and details.pop("extra_ok", True)
    return Report(name, int(margins.size), worst, passed, None if passed else witness,
                  0.0, tol, details)


# --------------------------------------------------------------------------

def criterion_1(seed: int) -> list[Cell]:
    cfg = SearchConfig("random-functions", samples=10_000, seed=seed, tolerance=1e-12)
    return [Cell(1, "hardy-littlewood", s, "holds", check_hardy_littlewood(build_space(s), cfg), seed)
            for s in ("line:10", "cycle:12", "tree:3,3", "octahedron")]


def criterion_2(seed: int) -> list[Cell]:
    ts = (0.1, 1.0, 10.0)
    cfg = SearchConfig("exhaustive-indicators", seed=seed, tolerance=1e-10)
    cells = []
    for s in ("line:4", "cycle:8", "tree:3,2"):
        cells.append(Cell(2, "convolution-rearrangement", s, "holds",
                          check_convolution_rearrangement(build_space(s), ts, cfg), seed))
    octa = build_space("octahedron")
    default = check_convolution_rearrangement(octa, ts, cfg)
    order = octa.order
    if not default.passed:
        order = find_valid_order(octa, ts, cfg)
    rep = check_convolution_rearrangement(octa, ts, cfg, order=order)
    rep.details["default_order"] = list(octa.order.permutation)
    rep.details["default_order_margin"] = default.worst_margin
    rep.details["chosen_order"] = None if order is None else list(order.permutation)
    cells.append(Cell(2, "convolution-rearrangement", "octahedron", "holds", rep, seed))
    return cells


def criterion_3(seed: int) -> list[Cell]:
    cfg = SearchConfig("gradient-ascent", samples=100_000, restarts=1_000, seed=seed, tolerance=1e-9)
    return [Cell(3, "dirichlet-rearrangement", s, "holds",
                 check_dirichlet_rearrangement(build_space(s), cfg), seed)
            for s in ("line:10", "cycle:12", "tree:3,3")]


def criterion_4(seed: int) -> list[Cell]:
    cfg = SearchConfig("gradient-ascent", samples=200, restarts=20, seed=seed, tolerance=1e-6)
    cube = build_space("cube")
    cells = [Cell(4, "violation-sweep", "cube/all-orders", "fails",
                  sweep_orders_for_violation(cube, "exhaustive", cfg, threshold=1e-6), seed)]
    torus = build_space("torus:3,2")
    cfg_t = SearchConfig("gradient-ascent", samples=2_000, restarts=50, seed=seed, tolerance=1e-6)
    cells.append(Cell(4, "violation-sweep", "torus:3,2/candidate-orders", "fails",
                      sweep_orders_for_violation(torus, product_candidate_orders(torus), cfg_t,
                                                 threshold=1e-6), seed))
    return cells


def criterion_5(seed: int) -> list[Cell]:
    rep = check_faber_krahn(3, 6, tolerance=1e-10)
    tree = build_space({"type": "tree", "degree": 3, "depth": 4})
    star = dirichlet_eigenvalue(tree, [0, 1, 2, 3])
    # path 4 - 1 - 0 - 2 (vertex 4 is a child of 1)
    path = dirichlet_eigenvalue(tree, [4, 1, 0, 2])
    star_err = abs(star - (3 - math.sqrt(3)))
    path_err = abs(path - (3 - GOLDEN_RATIO))
    rep.details.update(star=star, path=path, star_error=star_err, path_error=path_err)
    if max(star_err, path_err) > 1e-10 or not star < path:
        rep.passed = False
    return [Cell(5, "faber-krahn", "tree:3 sizes<=6", "holds", rep, seed)]


def _elliptic_instances(seed: int, count: int, parabolic: bool = False):
    sp = product(build_space("line:10"), build_space("cycle:5").graph)
    rng = np.random.default_rng([seed, 6, int(parabolic)])
    densities = (0.6, 0.9, 1.01)
    for i in range(count):
        yield random_problem(sp, rng, ("zero", "reciprocal:1")[i % 2],
                             density=densities[i % 3], psi_scale=0.9, parabolic=parabolic)


def criterion_6(seed: int) -> list[Cell]:
    margins, sym, agree, res, kinds = [], [], [], [], []
    for p in _elliptic_instances(seed, 100):
        r = compare_elliptic(p)
        kinds.append((r.star_margin, min(r.max_margins), r.plateau_margin))
        margins.append(min(kinds[-1]))
        sym.append(r.symmetric_v)
        agree.append(r.equivalence_agrees)
        res.append(max(r.details["residual_u"], r.details["residual_v"]))
    rep = _aggregate("compare-elliptic", margins, 1e-9, extra_ok=all(sym) and all(agree)
                     and max(res) <= 1e-10, symmetric_v_all=all(sym), equivalence_agrees_all=all(agree),
                     max_residual=max(res), space="line:10 x cycle:5",
                     min_star_margin=min(k[0] for k in kinds),
                     min_max_margin=min(k[1] for k in kinds),
                     min_plateau_margin=min(k[2] for k in kinds))
    return [Cell(6, "compare-elliptic", "line:10xcycle:5 n=100", "holds", rep, seed)]


def criterion_7(seed: int) -> list[Cell]:
    problems = list(_elliptic_instances(seed, 20, parabolic=True))
    cells = []
    slacks = {}
    for dt in (1e-2, 5e-3):
        floors, ok, sl = [], [], []
        for p in problems:
            r = compare_parabolic(p, dt, 200)
            floor = -(1e-9 + r.details["slack"])
            floors.append(min(r.star_margin, min(r.max_margins)) - floor)
            ok.append(r.passed)
            sl.append(r.details["slack"])
        slacks[dt] = sl
        rep = _aggregate("compare-parabolic", floors, 0.0, extra_ok=all(ok), dt=dt, steps=200,
                         max_slack=max(sl))
        cells.append(Cell(7, "compare-parabolic", f"dt={dt:g} n=20", "holds", rep, seed))
    ratios = np.array(slacks[1e-2]) / np.array(slacks[5e-3])
    # first-order slack: halving dt must halve the slack (ratio pinned to [1.8, 2.2])
    margins = np.minimum(ratios - 1.8, 2.2 - ratios)
    cells.append(Cell(7, "parabolic-slack-halving", "dt=1e-2 vs 5e-3", "holds",
                      _aggregate("parabolic-slack-halving", margins, 0.0,
                                 ratios=[float(x) for x in ratios]), seed))
    return cells


def criterion_8(seed: int) -> list[Cell]:
    rng = np.random.default_rng([seed, 8])
    margins, chain = [], []
    for p in _elliptic_instances(seed + 1, 50):
        u = solve_elliptic(p)
        r = check_proposition(u, p, plateau_thetas(p, 5, rng))
        margins.append(r.worst_margin)
        chain.append(r.details["kernel_chain_margin"])
    rep = _aggregate("proposition", margins, 1e-9, thetas_per_instance=5,
                     min_kernel_chain_margin=min(chain))
    rep.instances_tested = 250
    return [Cell(8, "proposition", "line:10xcycle:5 n=50x5", "holds", rep, seed)]


def _path_graph(n: int) -> Graph:
    return Graph(n, tuple((i, i + 1) for i in range(n - 1)))


def criterion_9(seed: int) -> list[Cell]:
    pairs = [("line:2", build_space("cycle:4").graph, "cycle:4"),
             ("tree:3,1", build_space("cycle:3").graph, "cycle:3"),
             ("octahedron", _path_graph(2), "path:2")]
    cells = []
    for a, gb, bname in pairs:
        A = build_space(a)
        B = build_space({"type": "custom", "edges": list(gb.edges), "n": gb.vertex_count})
        errs = []
        for t in (0.1, 1.0, 3.0):
            kp = product_kernel(heat_kernel(A, None, t), heat_kernel(B, None, t))
            kd = heat_kernel(product(A, gb), None, t)
            errs.append(float(np.max(np.abs(kp.entries - kd.entries))))
        rep = _aggregate("product-kernel", [1e-10 - e for e in errs], 0.0, sup_errors=errs)
        cells.append(Cell(9, "product-kernel", f"{a} x {bname}", "holds", rep, seed))
    return cells


def criterion_10(seed: int) -> list[Cell]:
    cfg = SearchConfig("random-functions", samples=1_000, seed=seed, tolerance=1e-12)
    cells = []
    for s in ("line:10", "cycle:9"):
        sp = build_space(s)
        rep = check_polarization_convergence(sp, natural_reflections(sp), cfg)
        if rep.details["converged_fraction"] < 1.0 or rep.details["max_sup_error"] >= 1e-12:
            rep.passed = False
        cells.append(Cell(10, "polarization", s, "holds", rep, seed))
    return cells


def _two_bumps(x, y):
    b = lambda cx: np.maximum(0.0, 1 - ((x - cx) ** 2 + (y - 0.5) ** 2) / 0.18 ** 2) ** 2
    return b(0.28) + b(0.72)


def _disk_errors(hs):
    errs = []
    for h in hs:
        d = cont.GridDomain.disk(h)
        X, Y = d.coords
        r2 = X ** 2 + Y ** 2
        u = cont.solve_poisson_2d(d, lambda x, y: 16 * (x ** 2 + y ** 2))
        errs.append(float(np.max(np.abs(u - np.where(d.mask, 1 - r2 ** 2, 0.0)))))
    return errs


def criterion_11(seed: int) -> list[Cell]:
    cells = []
    hs = (1 / 64, 1 / 128)
    errs = _disk_errors(hs)
    order = math.log2(errs[0] / errs[1])
    cells.append(Cell(11, "poisson-disk-order", "disk u=1-r^4", "holds",
                      _aggregate("poisson-disk-order", [order - 1.9], 0.0, errors=errs,
                                 observed_order=order), seed))
    for h in hs:
        cells.append(Cell(11, "continuum-max-principle", f"square h=1/{round(1 / h)}", "holds",
                          cont.compare_continuum(cont.GridDomain.square(h), 1.0), seed))
    rep = cont.check_polya_szego_grid(_two_bumps, hs)
    ms = rep.details["margins"]
    rel_change = abs(ms[0] - ms[1]) / abs(ms[1])
    rep.details["relative_change"] = rel_change
    if not (min(ms) > 0 and rel_change <= 0.05):
        rep.passed = False
    cells.append(Cell(11, "polya-szego-grid", "two bumps", "holds", rep, seed))
    cells.append(Cell(11, "curvature-limit", "ball_volume r=1 |k|=1e-6", "holds",
                      curvature_limit_report(), seed))
    return cells


def curvature_limit_report(r: float = 1.0, k: float = 1e-6, tol: float = 1e-8) -> Report:
    """Small-curvature consistency of ball_volume against the Euclidean value.

    Two checks per dimension: the symmetric limit estimate
    ``(V_k + V_{-k}) / 2`` and the first-order expansion
    ``V_0 - k * omega (m-1) r^(m+2) / (6 (m+2))`` for each sign of k.
    """
    margins, rows = [], {}
    for m in (1, 2, 3, 4):
        e = cont.ball_volume(cont.ModelSpace(0.0, m), r)
        vp = cont.ball_volume(cont.ModelSpace(k, m), r)
        vm = cont.ball_volume(cont.ModelSpace(-k, m), r)
        omega = cont.ModelSpace(0.0, m).sphere_constant if m > 1 else 2.0
        slope = omega * (m - 1) * r ** (m + 2) / (6 * (m + 2))
        sym = abs((vp + vm) / 2 - e)
        first = max(abs(vp - (e - k * slope)), abs(vm - (e + k * slope)))
        rows[m] = {"euclidean": e, "positive_k": vp, "negative_k": vm,
                   "one_sided_deviation": max(abs(vp - e), abs(vm - e)),
                   "symmetric_error": sym, "first_order_error": first}
        margins += [tol - sym, tol - first]
    return _aggregate("curvature-limit", margins, 0.0, by_dimension=rows)


CRITERIA = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
    6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10,
    11: criterion_11,
}


def _run_one(args) -> list[str]:
    number, seed = args
    return [c.to_json() for c in CRITERIA[number](seed)]


def run_criteria(seed: int = 0, jobs: int = 1, numbers=None) -> list[str]:
    numbers = sorted(CRITERIA) if numbers is None else list(numbers)
    work = [(n, seed) for n in numbers]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            chunks = list(ex.map(_run_one, work))
    else:
        chunks = [_run_one(w) for w in work]
    return [line for chunk in chunks for line in chunk]


def summary_table(lines: list[str]) -> str:
    header = f"{'crit':>4}  {'check':<28} {'instance':<30} {'expect':<6} {'worst_margin':>14} {'n':>8}  result"
    out = [header, "-" * len(header)]
    for line in lines:
        d = json.loads(line)
        r = d["report"]
        out.append(f"{d['criterion']:>4}  {d['check']:<28} {d['instance']:<30} {d['expectation']:<6} "
                   f"{r['worst_margin']:>14.6e} {r['instances_tested']:>8}  {'PASS' if d['ok'] else 'FAIL'}")
    return "\n".join(out) + "\n"


def run_suite(out_dir: str | Path, seed: int = 0, jobs: int = 1, check_determinism: bool = True):
    """Run all criteria, write ``suite.jsonl`` and ``suite-summary.txt``.

    With ``check_determinism`` the suite is run a second time into
    ``out_dir/rerun`` and the report files are compared byte for byte.
    Returns ``(ok, lines)``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = run_criteria(seed, jobs)
    (out / "suite.jsonl").write_text("\n".join(lines) + "\n")
    ok = all(json.loads(line)["ok"] for line in lines)
    if check_determinism:
        rerun = out / "rerun"
        rerun.mkdir(exist_ok=True)
        lines2 = run_criteria(seed, jobs)
        (rerun / "suite.jsonl").write_text("\n".join(lines2) + "\n")
        same = (out / "suite.jsonl").read_bytes() == (rerun / "suite.jsonl").read_bytes()
        cell = Cell(12, "determinism", "suite.jsonl rerun", "holds",
                    Report("determinism", 2, 0.0 if same else -1.0, same, None, 0.0, 0.0,
                           {"files": ["suite.jsonl", "rerun/suite.jsonl"]}), seed)
        lines.append(cell.to_json())
        ok = ok and same
    (out / "suite-summary.txt").write_text(summary_table(lines))
    return ok, lines
