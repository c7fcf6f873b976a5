"""Command line entry point.

    edaflow serve     [--config FILE] [--root DIR]
    edaflow run       PROMPT [--session ID] [--remote] [--root DIR] [--backend FILE]
    edaflow evaluate  --reference FILE --candidate FILE [--stage S]   (alias: score)
    edaflow benchgen  --n N --seed S --out FILE [--engine hermetic|model]

Every subcommand takes ``--json``. Exit status: 0 success, 1 user error,
2 internal error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import CliConfig
from .errors import EdaFlowError, StageFailed

EXIT_OK, EXIT_USER, EXIT_INTERNAL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _emit(args, payload, text=None, stream=None):
    stream = stream or sys.stdout
    if args.json or text is None:
        stream.write(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")
    else:
        stream.write(text.rstrip("\n") + "\n")


def _config(args) -> CliConfig:
    cfg = CliConfig.load(getattr(args, "config", None))
    if getattr(args, "root", None):
        cfg.workspace_root = Path(args.root)
    if getattr(args, "backend", None):
        cfg.backend_config = Path(args.backend)
    return cfg


# -- subcommands -------------------------------------------------------------

def cmd_serve(args):
    from .server import serve

    cfg = _config(args)

    def ready(group):
        _emit(args, {"status": "serving", "ports": cfg.ports, "root": str(cfg.workspace_root)},
              "serving " + ", ".join(f"{n}:{p}" for n, p in cfg.ports.items()))
        sys.stdout.flush()

    return serve(cfg, ready=ready)


def _summary(resp) -> str:
    lines = [f"status: {resp['status']}  session: {resp['session_id']}",
             "tools_used: " + ", ".join(resp["tools_used"])]
    for r in resp["results"]:
        lines.append(f"  {r['tool']:<9} {r['status']:<7} version={r['version']} reports={','.join(r['reports'])}")
        lines.append(f"            params={json.dumps(r['params'], sort_keys=True)}")
    for u in resp.get("unresolved", []):
        lines.append(f"  unresolved: {u[0]} ({u[1]})")
    return "\n".join(lines)


def cmd_run(args):
    from .agent import Orchestrator, SessionStore
    from .executor import ExecutionBackend
    from .llm import LlmClient
    from .services import StageServices

    cfg = _config(args)
    cfg.validate()
    if args.remote:
        from .server import StageHttpClient

        services = StageHttpClient.from_config(cfg)
    else:
        backend = ExecutionBackend.from_file(cfg.backend_config) if cfg.backend_config else ExecutionBackend()
        services = StageServices(cfg.workspace_root, backend)
    llm = None if args.rules else LlmClient.from_env(cfg.model_environ())
    orch = Orchestrator(services, SessionStore(cfg.workspace_root / ".sessions"), llm)
    try:
        resp = orch.run(args.prompt, args.session).to_dict()
    except StageFailed as e:
        resp = e.response.to_dict()
        _emit(args, resp, _summary(resp))
        return EXIT_USER
    _emit(args, resp, _summary(resp))
    return EXIT_OK


def cmd_evaluate(args):
    from .codebleu import evaluate

    ref = Path(args.reference).read_text("utf-8")
    cand = Path(args.candidate).read_text("utf-8")
    report = evaluate(ref, cand, args.stage).to_dict()
    c = report["components"]
    text = (f"stage: {report['stage_detected']['stage']} (confidence {report['stage_detected']['confidence']:.3f})\n"
            f"ngram {c['ngram']:.3f}  weighted {c['weighted_ngram']:.3f}  "
            f"syntax {c['syntax']:.3f}  dataflow {c['dataflow']:.3f}\n"
            f"total {report['total']:.3f}")
    _emit(args, report, text)
    return EXIT_OK


def cmd_benchgen(args):
    from .benchgen import generate_dataset, write_dataset
    from .llm import LlmClient

    client = None
    if args.engine == "model":
        client = LlmClient.from_env(_config(args).model_environ())
        if client is None:
            from .errors import ModelClientUnavailable

            raise ModelClientUnavailable("model engine needs the model-client environment variables")
    cases = generate_dataset(args.n, seed=args.seed, engine=args.engine, client=client,
                             multi_stage=args.multi_stage)
    write_dataset(cases, args.out)
    counts = {}
    for c in cases:
        counts[c.design] = counts.get(c.design, 0) + 1
    _emit(args, {"status": "success", "out": str(args.out), "n": len(cases), "designs": counts},
          f"wrote {len(cases)} cases to {args.out} ({counts})")
    return EXIT_OK


def build_parser():
    p = _Parser(prog="edaflow", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--json", action="store_true", help="machine-readable output")
        sp.add_argument("--config", help="config file (default: $EDAFLOW_CONFIG)")
        return sp

    s = common(sub.add_parser("serve", help="start the four stage services and the agent"))
    s.add_argument("--root", help="workspace root")
    s.add_argument("--backend", help="backend config file")
    s.set_defaults(func=cmd_serve)

    s = common(sub.add_parser("run", help="run a natural-language request end to end"))
    s.add_argument("prompt")
    s.add_argument("--session", help="continue an existing session")
    s.add_argument("--root", help="workspace root")
    s.add_argument("--backend", help="backend config file")
    s.add_argument("--remote", action="store_true", help="call running services over HTTP")
    s.add_argument("--rules", action="store_true", help="force the rule engine even if a model is configured")
    s.set_defaults(func=cmd_run)

    for name in ("evaluate", "score"):
        s = common(sub.add_parser(name, help="CodeBLEU of a candidate script against a reference"))
        s.add_argument("--reference", required=True)
        s.add_argument("--candidate", required=True)
        s.add_argument("--stage", choices=["synthesis", "placement", "cts", "route"])
        s.set_defaults(func=cmd_evaluate)

    s = common(sub.add_parser("benchgen", help="generate a benchmark dataset"))
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--engine", choices=["hermetic", "model"], default="hermetic")
    s.add_argument("--multi-stage", action="store_true")
    s.set_defaults(func=cmd_benchgen)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    want_json = "--json" in (sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        _fail(want_json, "UsageError", str(e))
        return EXIT_USER
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except EdaFlowError as e:
        _fail(args.json, e.kind, str(e), e.to_dict())
        return EXIT_USER
    except OSError as e:
        _fail(args.json, "OSError", str(e))
        return EXIT_USER
    except Exception as e:  # noqa: BLE001 - last-resort reporting
        logging.getLogger(__name__).debug("internal error", exc_info=True)
        _fail(args.json, "InternalError", f"{type(e).__name__}: {e}")
        return EXIT_INTERNAL


def _fail(as_json, kind, detail, error=None):
    if as_json:
        sys.stdout.write(json.dumps({"status": "error", "error": error or {"type": kind, "detail": detail}},
                                    indent=2, sort_keys=True) + "\n")
    else:
        sys.stderr.write(f"error: {kind}: {detail}\n")


if __name__ == "__main__":
    sys.exit(main())
