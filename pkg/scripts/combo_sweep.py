#!/usr/bin/env python3
"""Run every contiguous stage combination through the agent.

For each of S, P, C, R, S+P, P+C, C+R, S+P+C, P+C+R and S+P+C+R the script
builds a request, runs it against the mock executor (seeding upstream
stages where the combination starts later in the flow), and reports the
stages executed, version labels, wall time and the CodeBLEU of each
rendered script against the bundled golden script for its stage.

    python3 scripts/combo_sweep.py [--design b14] [--json]
"""
import argparse
import json
import sys
import tempfile
import time
from pathlib import Path

import edaflow
from edaflow.agent import Orchestrator, SessionStore
from edaflow.catalog import STAGES, TOOL_TO_STAGE
from edaflow.codebleu import evaluate
from edaflow.executor import ExecutionBackend
from edaflow.services import StageServices

COMBOS = ["S", "P", "C", "R", "S+P", "P+C", "C+R", "S+P+C", "P+C+R", "S+P+C+R"]
CLAUSES = {
    "S": "synthesize it with fanout limit 4.74 and clock period 2 ns",
    "P": "run placement with high timing driven global placer effort and medium wire length optimization effort",
    "C": "run cts with cts cell density 0.7 and target skew 0.08",
    "R": "route it with top routing layer 8 and timing driven routing enabled",
}
LETTER = dict(zip("SPCR", STAGES))
GOLDEN = Path(edaflow.__file__).parent / "data" / "golden"


def seed(services, design, first):
    if first >= 1:
        services.run_synthesis({"design": design})
    if first >= 2:
        services.run_placement({"design": design, "syn_ver": "v1"})
    if first >= 3:
        services.run_cts({"design": design, "impl_ver": "v1__g0__p0"})


def sweep(design):
    rows = []
    for combo in COMBOS:
        letters = combo.split("+")
        with tempfile.TemporaryDirectory() as root:
            services = StageServices(Path(root), ExecutionBackend())
            seed(services, design, STAGES.index(LETTER[letters[0]]))
            prompt = f'For design "{design}": ' + ", then ".join(CLAUSES[x] for x in letters) + "."
            start = time.perf_counter()
            resp = Orchestrator(services, SessionStore()).run(prompt)
            elapsed = time.perf_counter() - start
            scores = {}
            for r in resp.results:
                stage = TOOL_TO_STAGE[r.tool]
                golden = (GOLDEN / f"{stage}.tcl").read_text()
                scores[r.tool] = round(evaluate(golden, r.tcl_script, stage).total, 3)
            rows.append({"combo": combo, "tools_used": resp.tools_used, "status": resp.status,
                         "versions": [r.version for r in resp.results], "seconds": round(elapsed, 3),
                         "codebleu_vs_golden": scores})
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--design", default="b14")
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args(argv)
    rows = sweep(args.design)
    if args.json:
        print(json.dumps(rows, indent=2))
        return 0
    print(f"{'combo':<9} {'status':<8} {'time':>6}  versions / CodeBLEU vs golden")
    for r in rows:
        detail = ", ".join(f"{t}={v}@{s}" for (t, s), v in zip(r["codebleu_vs_golden"].items(), r["versions"]))
        print(f"{r['combo']:<9} {r['status']:<8} {r['seconds']:>5.2f}s  {detail}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
