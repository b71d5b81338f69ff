"""Acceptance suite: one test and one PASS/FAIL line per criterion.

The whole suite runs once (including a full rerun for the determinism
criterion); the per-criterion tests then inspect its cells.
"""

import json
import os

import pytest

from symmlab.suite import CRITERIA, run_suite

DESCRIPTIONS = {
    1: "Hardy-Littlewood, 1e4 random pairs on four spaces",
    2: "convolution rearrangement, exhaustive indicator pairs",
    3: "Dirichlet energy rearrangement, random plus ascent",
    4: "failure reproduction on the cube and the 3x3 torus",
    5: "Faber-Krahn on T_3 up to size 6",
    6: "elliptic comparison, 100 random instances",
    7: "parabolic comparison with dt-halving slack",
    8: "distributional inequality, 50 x 5 plateau tests",
    9: "product kernel factorization",
    10: "polarization converges to the rearrangement",
    11: "continuum grid checks",
    12: "byte-identical rerun",
}

RESULTS: dict[int, str] = {}


@pytest.fixture(scope="module")
def suite_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("suite")
    jobs = min(4, os.cpu_count() or 1)
    ok, lines = run_suite(out, seed=0, jobs=jobs, check_determinism=True)
    cells = [json.loads(line) for line in lines]
    return out, ok, cells


def _record(number: int, cells: list[dict]) -> bool:
    passed = bool(cells) and all(c["ok"] for c in cells)
    worst = min((c["report"]["worst_margin"] for c in cells), default=float("nan"))
    line = (f"criterion {number:>2}  {'PASS' if passed else 'FAIL'}  "
            f"cells={len(cells):<2} worst_margin={worst:+.3e}  {DESCRIPTIONS[number]}")
    RESULTS[number] = line
    print(line)
    return passed


@pytest.mark.parametrize("number", sorted(CRITERIA) + [12])
def test_criterion(number, suite_run):
    _, _, cells = suite_run
    mine = [c for c in cells if c["criterion"] == number]
    passed = _record(number, mine)
    failing = [(c["check"], c["instance"], c["report"]["worst_margin"]) for c in mine if not c["ok"]]
    assert passed, failing


def test_report_files_written(suite_run):
    out, ok, cells = suite_run
    assert ok
    assert (out / "suite.jsonl").read_bytes() == (out / "rerun" / "suite.jsonl").read_bytes()
    summary = (out / "suite-summary.txt").read_text()
    assert summary.count("PASS") == len(cells)
    assert all(c["seed"] == 0 for c in cells)
