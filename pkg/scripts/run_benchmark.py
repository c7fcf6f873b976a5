#!/usr/bin/env python3
"""Score the agent on a generated benchmark.

For every case the ground-truth tool call is executed directly (reference
scripts) and the prompt is run through the agent (candidate scripts); the
pair is scored with the stage-weighted CodeBLEU and the extracted
parameters are compared with the ground truth.

    python3 scripts/run_benchmark.py --n 100 --seed 0 --out results.json
    python3 scripts/run_benchmark.py --dataset cases.jsonl --engine model

With ``--engine model`` the agent uses the model client configured through
EDAFLOW_LLM_BASE_URL / EDAFLOW_LLM_MODEL / EDAFLOW_LLM_API_KEY.
"""
import argparse
import json
import statistics
import sys
import tempfile
from collections import defaultdict
from pathlib import Path

from edaflow.agent import Extraction, Orchestrator, SessionStore, decompose, execute_plan
from edaflow.benchgen import generate_dataset, read_dataset, stage_params
from edaflow.catalog import STAGES, TOOL_TO_STAGE
from edaflow.codebleu import evaluate
from edaflow.errors import EdaFlowError
from edaflow.executor import ExecutionBackend
from edaflow.llm import LlmClient
from edaflow.services import StageServices


def seed_upstream(services, case):
    """Run the stages before the case's first stage with default settings."""
    p = case.ground_truth["params"]
    first = STAGES.index(TOOL_TO_STAGE[case.stages[0]])
    base = {"design": p["design"], "tech": p["tech"]}
    if first >= 1:
        services.run_synthesis(base)
    if first >= 2:
        services.run_placement({**base, "syn_ver": "v1"})
    if first >= 3:
        services.run_cts({**base, "impl_ver": "v1__g0__p0"})
    return services


def reference_scripts(case, root):
    """Execute the ground truth directly, bypassing prompt understanding."""
    p = case.ground_truth["params"]
    ex = Extraction(design=p["design"], tech=p["tech"], stages=[TOOL_TO_STAGE[t] for t in case.stages])
    for tool, params in stage_params(case).items():
        for key, value in params.items():
            ex.add(TOOL_TO_STAGE[tool], key, value)
    plan = decompose(ex)
    store = SessionStore()
    resp = execute_plan(plan, store.create(), seed_upstream(StageServices(root, ExecutionBackend()), case))
    return {r.tool: r.tcl_script for r in resp.results}


def relocate(text, root):
    # workspace paths differ between the two runs and are not what is being scored
    return text.replace(str(root), "<ws>")


def run_case(case, llm):
    with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
        ref = {t: relocate(s, a) for t, s in reference_scripts(case, Path(a)).items()}
        orch = Orchestrator(seed_upstream(StageServices(Path(b), ExecutionBackend()), case), SessionStore(), llm)
        try:
            resp = orch.run(case.prompt)
        except EdaFlowError as e:
            return {"case_id": case.case_id, "status": "error", "error": e.kind, "scores": {}}
        cand = {r.tool: relocate(r.tcl_script, b) for r in resp.results}
        scores = {}
        for tool, ref_text in ref.items():
            stage = TOOL_TO_STAGE[tool]
            if tool in cand:
                scores[tool] = evaluate(ref_text, cand[tool], stage).to_dict()
        truth = stage_params(case)
        got = {r.tool: {k: v for k, v in r.params.items() if k != "design"} for r in resp.results}
        exact = all(got.get(t, {}) == v for t, v in truth.items() if v)
        return {"case_id": case.case_id, "tone": case.tone, "design": case.design, "stages": case.stages,
                "status": resp.status, "params_exact": exact,
                "tools_match": resp.tools_used == case.stages, "scores": scores}


def summarise(rows):
    by_tool = defaultdict(lambda: defaultdict(list))
    for row in rows:
        for tool, rep in row["scores"].items():
            for k, v in rep["components"].items():
                by_tool[tool][k].append(v)
            by_tool[tool]["total"].append(rep["total"])
    table = {t: {k: round(statistics.fmean(v), 3) for k, v in comps.items()} for t, comps in by_tool.items()}
    n = len(rows)
    return {
        "cases": n,
        "errors": sum(r["status"] != "success" for r in rows),
        "params_exact": sum(bool(r.get("params_exact")) for r in rows),
        "tools_match": sum(bool(r.get("tools_match")) for r in rows),
        "codebleu_by_tool": table,
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dataset", help="JSONL file from `edaflow benchgen`; generated when omitted")
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--multi-stage", action="store_true")
    ap.add_argument("--engine", choices=["rules", "model"], default="rules")
    ap.add_argument("--out", help="write per-case rows and the summary as JSON")
    args = ap.parse_args(argv)

    cases = read_dataset(args.dataset) if args.dataset else generate_dataset(
        args.n, seed=args.seed, multi_stage=args.multi_stage)
    llm = None
    if args.engine == "model":
        llm = LlmClient.from_env()
        if llm is None:
            sys.exit("model engine selected but EDAFLOW_LLM_BASE_URL / EDAFLOW_LLM_MODEL are not set")
    rows = [run_case(c, llm) for c in cases]
    summary = summarise(rows)
    print(json.dumps(summary, indent=2))
    if args.out:
        Path(args.out).write_text(json.dumps({"summary": summary, "cases": rows}, indent=1, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
