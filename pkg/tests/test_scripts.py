import importlib.util
import json
from pathlib import Path

SCRIPTS = Path(__file__).resolve().parent.parent / "scripts"


def load(name):
    spec = importlib.util.spec_from_file_location(name, SCRIPTS / f"{name}.py")
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


def test_run_benchmark_rules_engine(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert load("run_benchmark").main(["--n", "12", "--seed", "2", "--multi-stage", "--out", str(out)]) == 0
    summary = json.loads(out.read_text())["summary"]
    assert summary["cases"] == 12 and summary["errors"] == 0
    assert summary["params_exact"] == summary["tools_match"] == 12
    for comps in summary["codebleu_by_tool"].values():
        assert comps["total"] == 100.0


def test_framework_example(tmp_path, capsys):
    assert load("framework_example").main(["--root", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "set MAX_FANOUT 4.74" in out and '"tools_used"' in out


def test_combo_sweep(capsys):
    assert load("combo_sweep").main(["--json"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert [r["combo"] for r in rows] == ["S", "P", "C", "R", "S+P", "P+C", "C+R", "S+P+C", "P+C+R", "S+P+C+R"]
    assert all(r["status"] == "success" for r in rows)
