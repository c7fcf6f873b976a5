#!/usr/bin/env python3
"""Walk one request through the whole flow and print each step.

    python3 scripts/framework_example.py [--root DIR] [PROMPT]

Shows the extracted parameters, the plan, the rendered synthesis and
placement scripts and the client response, using the mock executor.
"""
import argparse
import json
import sys
import tempfile
from pathlib import Path

from edaflow.agent import Orchestrator, SessionStore, decompose, detect_conflicts, extract_parameters
from edaflow.executor import ExecutionBackend
from edaflow.services import StageServices

DEFAULT_PROMPT = (
    'Synthesize design "b14" on FreePDK45 with fanout limit 4.74. Then run placement with high '
    "level of effort for timing driven global placer and medium wire length optimization effort level."
)


def show(title, body):
    print(f"\n== {title} ==")
    print(body if isinstance(body, str) else json.dumps(body, indent=2, default=str))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("prompt", nargs="?", default=DEFAULT_PROMPT)
    ap.add_argument("--root", help="workspace root (a temporary directory by default)")
    args = ap.parse_args(argv)

    root = Path(args.root) if args.root else Path(tempfile.mkdtemp(prefix="edaflow-"))
    services = StageServices(root, ExecutionBackend())
    show("prompt", args.prompt)
    ex = extract_parameters(args.prompt)
    show("extracted", {"params": ex.params, "unresolved": ex.unresolved, "design": ex.design, "tech": ex.tech})
    plan = decompose(ex)
    show("plan", plan.to_dict())
    show("conflicts", [c.to_dict() for c in detect_conflicts(plan, services=services)])

    resp = Orchestrator(services, SessionStore(root / ".sessions")).run(args.prompt)
    for r in resp.results:
        show(f"{r.tool} script ({r.version})", r.tcl_script)
    client_view = {"status": resp.status, "tools_used": resp.tools_used,
                   "results": [{"tool": r.tool, "params": r.params, "reports": r.reports} for r in resp.results]}
    show("client response", client_view)
    print(f"\nworkspace: {root}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
