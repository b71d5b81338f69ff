import json
import subprocess
import sys

import pytest

from symmlab.cli import run


@pytest.fixture
def out(tmp_path, monkeypatch):
    monkeypatch.delenv("SYMMLAB_OUT", raising=False)
    return tmp_path / "out"


def _lines(out, cmd):
    return [json.loads(line) for line in (out / f"{cmd}.jsonl").read_text().splitlines()]


def test_verify_dirichlet_cycle8(out):
    code = run(["verify-dirichlet", "--space", "cycle:8", "--samples", "100000", "--seed", "7",
                "--out", str(out)])
    assert code == 0
    (d,) = _lines(out, "verify-dirichlet")
    assert d["seed"] == 7 and d["ok"] and d["expectation"] == "holds"
    assert d["report"]["worst_margin"] >= -1e-9
    assert "PASS" in (out / "verify-dirichlet-summary.txt").read_text()


def test_counterexample_cube_all_orders(out):
    assert run(["counterexample", "--space", "cube", "--orders", "exhaustive", "--out", str(out)]) == 0
    (d,) = _lines(out, "counterexample")
    r = d["report"]
    assert d["expectation"] == "fails"
    assert r["instances_tested"] == 40320
    assert r["details"]["orders_without_violation"] == 0
    assert r["details"]["smallest_violation"] > 1e-6


def test_typo_flag_is_usage_error(out, capsys):
    code = run(["verify-conv", "--space", "line:5", "--t", "0.1,1,10", "--mode", "exhaustive-indicators",
                "--sampels", "3", "--out", str(out)])
    assert code == 2
    assert "unrecognized" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["frobnicate"],
    [],
    ["verify-hl", "--space", "bogus:1"],
    ["verify-hl", "--config", '{"type": "line"'],
    ["verify-hl", "--config", "/nonexistent/cfg.json"],
    ["verify-conv", "--t", "a,b"],
    ["verify-conv", "--space", "line:2", "--orders", "0,1"],
    ["polarize", "--space", "octahedron"],
    ["faber-krahn", "--space", "cycle:5"],
    ["compare-elliptic", "--config", '{"m_space": "line:2", "omega": [[9, 0]]}'],
])
def test_usage_and_config_errors(argv, out):
    assert run(argv + ["--out", str(out)] if argv and argv[0] != "frobnicate" else argv) == 2


def test_help_exits_zero(capsys):
    assert run(["--help"]) == 0
    assert "verify-dirichlet" in capsys.readouterr().out


def test_env_overrides_out(tmp_path, monkeypatch):
    env_dir = tmp_path / "env"
    monkeypatch.setenv("SYMMLAB_OUT", str(env_dir))
    assert run(["verify-hl", "--space", "line:3", "--samples", "100", "--out", str(tmp_path / "flag")]) == 0
    assert (env_dir / "verify-hl.jsonl").exists()
    assert not (tmp_path / "flag").exists()


def test_expectation_polarity(out):
    assert run(["verify-dirichlet", "--space", "cube", "--samples", "2000", "--out", str(out)]) == 0
    (d,) = _lines(out, "verify-dirichlet")
    assert d["expectation"] == "fails" and d["report"]["witness"]
    assert run(["verify-dirichlet", "--space", "cube", "--samples", "2000", "--expect", "holds",
                "--out", str(out)]) == 1
    assert run(["counterexample", "--space", "line:3", "--samples", "500", "--restarts", "5",
                "--out", str(out)]) == 1


def test_verify_conv_one_cell_per_t(out):
    assert run(["verify-conv", "--space", "octahedron", "--t", "0.1,1,10", "--mode", "exhaustive-indicators",
                "--out", str(out)]) == 0
    lines = _lines(out, "verify-conv")
    assert [d["instance"] for d in lines] == ["octahedron t=0.1", "octahedron t=1", "octahedron t=10"]


def test_verify_conv_explicit_bad_order_fails(out):
    assert run(["verify-conv", "--space", "octahedron", "--orders", "0,2,3,4,5,1", "--t", "1",
                "--out", str(out)]) == 1


def test_valid_order_and_torus(out):
    assert run(["valid-order", "--space", "line:2", "--out", str(out)]) == 0
    (d,) = _lines(out, "valid-order")
    assert d["report"]["witness"] in ([2, 1, 3, 0, 4], [2, 3, 1, 4, 0])
    assert run(["counterexample", "--space", "torus:3,2", "--orders", "candidates", "--out", str(out)]) == 0


def test_space_from_json_config(out, tmp_path):
    cfg = tmp_path / "space.json"
    cfg.write_text(json.dumps({"type": "tree", "degree": 3, "depth": 2}))
    assert run(["verify-conv", "--config", str(cfg), "--mode", "exhaustive-indicators", "--out", str(out)]) == 0
    assert _lines(out, "verify-conv")[0]["instance"].startswith("tree:3,2")


def test_solver_commands(out, tmp_path):
    cfg = tmp_path / "problem.json"
    cfg.write_text(json.dumps({"m_space": "line:2", "n_space": "point", "omega": [[-1, 0], [1, 0]],
                               "lam": [0, 1, 0, 1, 0]}))
    assert run(["compare-elliptic", "--config", str(cfg), "--out", str(out)]) == 0
    (d,) = _lines(out, "compare-elliptic")
    assert abs(d["report"]["details"]["max_margins"][0] - 0.5) < 1e-12
    assert run(["compare-elliptic", "--samples", "3", "--out", str(out)]) == 0
    assert run(["proposition", "--samples", "2", "--out", str(out)]) == 0
    assert run(["compare-parabolic", "--samples", "1", "--steps", "20", "--out", str(out)]) == 0
    assert run(["compare-parabolic", "--config", str(cfg), "--out", str(out)]) == 2  # no initial condition


def test_other_commands(out):
    assert run(["faber-krahn", "--space", "tree:3,5", "--out", str(out)]) == 0
    assert run(["polarize", "--space", "cycle:9", "--samples", "200", "--out", str(out)]) == 0
    assert run(["verify-hl", "--space", "tree:3,3", "--out", str(out)]) == 0
    assert run(["continuum", "--config", '{"shape": "l-shape", "h": 0.0625}', "--out", str(out)]) == 0


def test_reports_are_byte_identical(tmp_path, monkeypatch):
    monkeypatch.delenv("SYMMLAB_OUT", raising=False)
    args = ["verify-dirichlet", "--space", "tree:3,2", "--samples", "3000", "--restarts", "10", "--seed", "3"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(args + ["--out", str(a)]) == 0
    assert run(args + ["--out", str(b)]) == 0
    for name in ("verify-dirichlet.jsonl", "verify-dirichlet-summary.txt"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "symmlab", "verify-hl", "--space", "line:2", "--samples", "50",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "hardy-littlewood" in proc.stdout
