"""The eleven acceptance criteria, one test each.

Run ``pytest tests/test_acceptance.py`` to get a PASS/FAIL line per criterion
in the terminal summary.
"""
import json
import math
import random
import time
from pathlib import Path

import pytest

import edaflow
from conftest import EXAMPLE_PROMPT
from edaflow.agent import Orchestrator, SessionStore, decompose, extract_parameters
from edaflow.benchgen import generate_dataset, param_count, stage_params
from edaflow.catalog import STAGES, TOOL_NAMES
from edaflow.codebleu import (
    STAGE_WEIGHTS,
    dataflow_match,
    detect_stage,
    evaluate,
    extract_dfg,
    report_from_components,
    syntax_match,
)
from edaflow.executor import ROUTE_REPORTS, ExecutionBackend
from edaflow.services import StageServices, make_impl_ver

from test_codebleu import DFG_ANNOTATIONS, dataflow_oracle, script_pairs, syntax_oracle

GOLDEN = Path(edaflow.__file__).parent / "data" / "golden"
FIXTURES = sorted(GOLDEN.glob("*.tcl"))


@pytest.mark.acceptance(1, "self-match scores 100 for every stage and fixture script")
def test_01_self_match():
    start = time.perf_counter()
    for path in FIXTURES:
        text = path.read_text()
        for stage in STAGES:
            assert abs(evaluate(text, text, stage).total - 100.0) <= 1e-9, (path.name, stage)
    per_pair = (time.perf_counter() - start) / (len(FIXTURES) * len(STAGES))
    assert per_pair < 1.0
    print(f"self-match over {len(FIXTURES)} scripts x 4 stages, {per_pair * 1000:.1f} ms per pair")


@pytest.mark.acceptance(2, "stage weight vectors equal the published table and sum to 1")
def test_02_weights():
    table = {"synthesis": (0.20, 0.30, 0.25, 0.25), "placement": (0.15, 0.25, 0.30, 0.30),
             "cts": (0.20, 0.25, 0.30, 0.25), "route": (0.20, 0.25, 0.25, 0.30)}
    assert {s: w.as_tuple() for s, w in STAGE_WEIGHTS.items()} == table
    for w in STAGE_WEIGHTS.values():
        assert abs(math.fsum(w.as_tuple()) - 1.0) <= 1e-12


@pytest.mark.acceptance(3, "synthesis components recombine to 80.19")
def test_03_recombination():
    total = report_from_components("synthesis", 24.81, 89.04, 96.79, 97.30).total
    assert abs(total - 80.19) <= 0.05
    print(f"recombined synthesis total {total:.4f}")


@pytest.mark.acceptance(4, "syntax and dataflow match equal brute-force oracles")
def test_04_formula_oracles():
    start = time.perf_counter()
    pairs = script_pairs()
    assert len(pairs) >= 50
    for ref, cand in pairs:
        assert max(len(ref.splitlines()), len(cand.splitlines())) <= 15
        assert syntax_match(ref, cand) == syntax_oracle(ref, cand)
        rg, cg = extract_dfg(ref), extract_dfg(cand)
        assert dataflow_match(rg, cg) == dataflow_oracle(rg, cg)
    assert time.perf_counter() - start < 10


@pytest.mark.acceptance(5, "DFG extraction equals hand annotations")
def test_05_dfg_annotations():
    assert len(DFG_ANNOTATIONS) >= 30
    for snippet, expected in DFG_ANNOTATIONS.items():
        assert [tuple(n) for n in extract_dfg(snippet).nodes] == expected, snippet
    relations = {n[2] for nodes in DFG_ANNOTATIONS.values() for n in nodes}
    assert relations == {"computedFrom", "comesFrom"}


@pytest.mark.acceptance(6, "end-to-end fixture: synth + placement from the example prompt")
def test_06_end_to_end(tmp_path):
    start = time.perf_counter()
    orch = Orchestrator(StageServices(tmp_path / "ws", ExecutionBackend()), SessionStore())
    resp = orch.run(EXAMPLE_PROMPT).to_dict()
    elapsed = time.perf_counter() - start
    assert resp["status"] == "success"
    assert resp["tools_used"] == ["synth", "placement"]
    synth, place = (r["tcl_script"] for r in resp["results"])
    assert "set MAX_FANOUT 4.74" in synth
    assert 'set TOP_NAME "b14"' in synth
    assert 'set PLACE_GLOBAL_TIMING_EFFORT "high"' in place
    assert 'set PLACE_GLOBAL_CONG_EFFORT "low"' in place
    assert resp["results"][1]["provenance"]["PLACE_GLOBAL_CONG_EFFORT"] == "default"
    assert elapsed < 5
    print(f"end-to-end run in {elapsed:.2f} s")


COMBOS = ["S", "P", "C", "R", "S+P", "P+C", "C+R", "S+P+C", "P+C+R", "S+P+C+R"]
_CLAUSE = {"S": "synthesize it with fanout limit 5", "P": "run placement with high timing driven global placer effort",
           "C": "run cts with target skew 0.08", "R": "route it with top routing layer 8"}
_STAGE = dict(zip("SPCR", STAGES))


@pytest.mark.acceptance(7, "all ten stage combinations plan and execute with version threading")
def test_07_combinations(tmp_path):
    for n, combo in enumerate(COMBOS):
        letters = combo.split("+")
        svc = StageServices(tmp_path / f"ws{n}", ExecutionBackend())
        # upstream stages the plan builds on, run directly on a non-default version
        first = STAGES.index(_STAGE[letters[0]])
        if first >= 1:
            svc.run_synthesis({"design": "b14", "syn_version": "v7"})
        if first >= 2:
            svc.run_placement({"design": "b14", "syn_ver": "v7", "g_idx": 1, "p_idx": 2})
        if first >= 3:
            svc.run_cts({"design": "b14", "impl_ver": "v7__g1__p2"})
        prompt = 'For design "b14": ' + ", then ".join(_CLAUSE[x] for x in letters) + "."
        plan = decompose(extract_parameters(prompt))
        expected = [TOOL_NAMES[_STAGE[x]] for x in letters]
        assert plan.stages == expected, (combo, plan.stages)
        resp = Orchestrator(svc, SessionStore()).run(prompt)
        assert resp.status == "success" and resp.tools_used == expected
        versions = {r.tool: r.version for r in resp.results}
        syn_ver = versions.get("synth", "v7")
        impl_ver = make_impl_ver(syn_ver, 0, 0) if "placement" in versions else "v7__g1__p2"
        if "placement" in versions:
            assert versions["placement"] == impl_ver
            place = next(r for r in resp.results if r.tool == "placement")
            assert f"/b14/synthesis/{syn_ver}/results/b14.mapped.v" in place.tcl_script
        for tool in ("cts", "route"):
            if tool in versions:
                assert versions[tool] == impl_ver, (combo, versions)
        print(f"{combo:<8} -> {resp.tools_used} versions {versions}")


@pytest.mark.acceptance(8, "make_impl_ver is injective over a 10x10x10 grid and stable")
def test_08_versioning():
    grid = [(f"v{s}", g, p) for s in range(10) for g in range(10) for p in range(10)]
    labels = [make_impl_ver(*t) for t in grid]
    assert len(set(labels)) == 1000
    assert labels == [make_impl_ver(*t) for t in grid]
    assert make_impl_ver("v1", 0, 2) == "v1__g0__p2"


@pytest.mark.acceptance(9, "benchmark generation: quotas, parameter counts, closed loop 100/100")
def test_09_benchgen():
    cases = generate_dataset(100, seed=0)
    counts = {d: sum(c.design == d for c in cases) for d in ("des", "b14", "leon2")}
    assert counts == {"des": 33, "b14": 33, "leon2": 34}
    for c in cases:
        assert 6 <= param_count(c) <= 10
        assert {"design", "tech"} <= set(c.ground_truth["params"])
    recovered = 0
    for c in cases:
        ex = extract_parameters(c.prompt)
        p = c.ground_truth["params"]
        if ex.params == stage_params(c) and (ex.design, ex.tech) == (p["design"], p["tech"]):
            recovered += 1
    assert recovered == 100
    print(f"closed loop recovered {recovered}/100")


@pytest.mark.acceptance(10, "golden scripts classified to their stage; empty script falls back")
def test_10_stage_detection():
    for stage in STAGES:
        got, confidence = detect_stage((GOLDEN / f"{stage}.tcl").read_text())
        assert got == stage and confidence >= 0.8, (stage, got, confidence)
        print(f"{stage:<9} detected {got} ({confidence:.3f})")
    assert detect_stage("") == ("synthesis", 0.0)


def _strip_timestamp(text):
    return "\n".join(line for line in text.splitlines() if not line.startswith("# timestamp"))


@pytest.mark.acceptance(11, "mock reports and archives are byte-identical across runs")
def test_11_executor_determinism(tmp_path):
    runs = []
    for name in ("a", "b"):
        svc = StageServices(tmp_path / name, ExecutionBackend())
        out = {}
        for stage, req in (("synthesis", {"design": "b14"}),
                           ("placement", {"design": "b14", "syn_ver": "v1"}),
                           ("cts", {"design": "b14", "impl_ver": "v1__g0__p0"}),
                           ("route", {"design": "b14", "impl_ver": "v1__g0__p0", "collect_artifacts": True})):
            r = svc.run(stage, req)
            out[stage] = {Path(p).name: _strip_timestamp(Path(r.workspace, "reports", Path(p).name).read_text())
                          for p in r.report_paths}
            if stage == "route":
                assert [Path(p).name for p in r.report_paths] == list(ROUTE_REPORTS)
                assert list(ROUTE_REPORTS) == ["route_summary.rpt", "postRoute_drc_max1M.rpt", "congestion.rpt"]
                out["archive"] = Path(r.workspace, r.artifacts[0]).read_bytes()
        runs.append(out)
    a, b = runs
    # workspace paths differ between the two roots; everything else must match
    norm = json.dumps(a, default=str, sort_keys=True).replace(str(tmp_path / "a"), "<root>")
    assert norm == json.dumps(b, default=str, sort_keys=True).replace(str(tmp_path / "b"), "<root>")
    assert a["archive"] == b["archive"]
