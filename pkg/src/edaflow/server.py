"""HTTP front ends: one app per stage service plus the orchestrator.

Each stage app serves ``POST /run`` (body mirrors the stage request),
``GET /health``, ``GET /tools`` (tool manifest), ``GET /versions`` and
``POST /mcp`` (JSON-RPC tool protocol). The orchestrator app serves
``POST /agent/run``. ``StageHttpClient`` is the matching client, usable
wherever ``StageServices`` is.
"""
from __future__ import annotations

import logging
import signal
import socket
import threading
import time

import httpx
import uvicorn
from fastapi import Body, FastAPI, Request
from fastapi.responses import JSONResponse

from . import protocol
from .agent import Orchestrator, SessionStore
from .catalog import STAGES, TOOL_NAMES
from .config import CliConfig
from .errors import (
    ERROR_TYPES,
    EdaFlowError,
    ExecutorFailure,
    InvalidRequest,
    PortInUse,
)
from .executor import ExecutionBackend
from .llm import LlmClient
from .services import StageResponse, StageServices

log = logging.getLogger(__name__)

_STATUS = {
    "InvalidRequest": 422, "NegativeIndex": 422, "EmptyPrompt": 422, "NoStageDetected": 422,
    "PlanConflict": 409, "WorkspaceConflict": 409, "MissingUpstream": 424, "SessionUnknown": 404,
    "ExecutorFailure": 500, "StageFailed": 500, "BackendUnavailable": 503, "Timeout": 504,
}


def _error_response(e: EdaFlowError):
    return JSONResponse({"status": "error", "error": e.to_dict()}, status_code=_STATUS.get(e.kind, 500))


def _install_handlers(app):
    @app.exception_handler(EdaFlowError)
    async def _handle(request: Request, exc: EdaFlowError):
        return _error_response(exc)


def create_stage_app(stage: str, services: StageServices) -> FastAPI:
    app = FastAPI(title=f"{stage} service")
    _install_handlers(app)
    manifest = protocol.tool_manifest(stage)

    def call(name, args):
        return services.run(stage, args).model_dump()

    @app.post("/run")
    def run(body: dict = Body(...)):
        return services.run(stage, body).model_dump()

    @app.get("/health")
    def health():
        return {"status": "ok", "service": stage}

    @app.get("/tools")
    def tools():
        return {"tools": [manifest]}

    @app.get("/versions")
    def versions(design: str, stage_name: str | None = None):
        s = stage_name or stage
        return {"design": design, "stage": s,
                "latest": services.latest_version(design, s),
                "next_syn_version": services.next_syn_version(design)}

    @app.post("/mcp")
    async def mcp(request: Request):
        raw = await request.body()
        res = protocol.handle_message(raw, [manifest], call)
        return JSONResponse(res) if res is not None else JSONResponse(None, status_code=204)

    return app


def create_agent_app(orchestrator: Orchestrator) -> FastAPI:
    app = FastAPI(title="flow agent")
    _install_handlers(app)

    def call(name, args):
        extra = set(args) - {"prompt", "session_id"}
        if extra or not isinstance(args.get("prompt"), str):
            raise InvalidRequest([("arguments", "expected {prompt, session_id?}")])
        return orchestrator.run(args["prompt"], args.get("session_id")).to_dict()

    @app.post("/agent/run")
    def agent_run(body: dict = Body(...)):
        prompt = body.get("prompt")
        if not isinstance(prompt, str):
            raise InvalidRequest([("prompt", "required string")])
        return orchestrator.run(prompt, body.get("session_id")).to_dict()

    @app.get("/health")
    def health():
        return {"status": "ok", "service": "agent"}

    @app.get("/tools")
    def tools():
        return {"tools": [protocol.AGENT_TOOL]}

    @app.post("/mcp")
    async def mcp(request: Request):
        raw = await request.body()
        res = protocol.handle_message(raw, [protocol.AGENT_TOOL], call)
        return JSONResponse(res) if res is not None else JSONResponse(None, status_code=204)

    return app


# -- client ------------------------------------------------------------------

def _raise_remote(doc):
    err = (doc or {}).get("error") or {}
    kind, detail = err.get("type", "EdaFlowError"), err.get("detail", "remote error")
    if kind == "InvalidRequest":
        raise InvalidRequest([tuple(p) for p in err.get("problems", [])] or [("body", detail)])
    if kind == "ExecutorFailure":
        resp = err.get("response")
        raise ExecutorFailure(detail, StageResponse(**resp) if resp else None)
    cls = ERROR_TYPES.get(kind)
    if cls is not None:
        try:
            raise cls(detail)
        except TypeError:
            pass
    e = EdaFlowError(detail)
    e.kind = kind
    raise e


class StageHttpClient:
    """Calls the stage services over HTTP with the ``StageServices`` interface."""

    def __init__(self, urls: dict, timeout: float = 600.0, transport=None):
        self.urls = {s: u.rstrip("/") for s, u in urls.items()}
        self._http = httpx.Client(timeout=timeout, transport=transport)

    @classmethod
    def from_config(cls, cfg: CliConfig, **kw):
        return cls({s: f"http://{cfg.host}:{cfg.ports[s]}" for s in STAGES}, **kw)

    def close(self):
        self._http.close()

    def _post(self, stage, body):
        r = self._http.post(self.urls[stage] + "/run", json=body)
        doc = r.json()
        if r.status_code >= 400:
            _raise_remote(doc)
        return StageResponse(**doc)

    def run(self, stage, req):
        if hasattr(req, "model_dump"):
            req = req.model_dump()
        return self._post(stage, req)

    def run_synthesis(self, req):
        return self.run("synthesis", req)

    def run_placement(self, req):
        return self.run("placement", req)

    def run_cts(self, req):
        return self.run("cts", req)

    def run_route(self, req):
        return self.run("route", req)

    def _versions(self, design, stage):
        r = self._http.get(self.urls["synthesis"] + "/versions", params={"design": design, "stage_name": stage})
        if r.status_code >= 400:
            _raise_remote(r.json())
        return r.json()

    def latest_version(self, design, stage):
        return self._versions(design, stage)["latest"]

    def next_syn_version(self, design):
        return self._versions(design, "synthesis")["next_syn_version"]

    def health(self):
        return {s: self._http.get(u + "/health").json() for s, u in self.urls.items()}


# -- serving -----------------------------------------------------------------

def check_ports_free(host, ports):
    for name, port in ports.items():
        with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as s:
            s.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            try:
                s.bind((host, port))
            except OSError:
                raise PortInUse(f"port {port} for {name} is already in use") from None


def build_apps(cfg: CliConfig, services: StageServices | None = None, llm=None) -> dict:
    if services is None:
        backend = ExecutionBackend.from_file(cfg.backend_config) if cfg.backend_config else ExecutionBackend()
        services = StageServices(cfg.workspace_root, backend)
    apps = {s: create_stage_app(s, services) for s in STAGES}
    # the agent reaches the stages through their HTTP endpoints, as a remote client would
    client = StageHttpClient.from_config(cfg)
    store = SessionStore(cfg.workspace_root / ".sessions")
    if llm is None:
        llm = LlmClient.from_env(cfg.model_environ())
    apps["agent"] = create_agent_app(Orchestrator(client, store, llm))
    return apps


class ServerGroup:
    """Runs several uvicorn servers on background threads."""

    def __init__(self, cfg: CliConfig, apps: dict):
        self.cfg = cfg
        self.servers = {}
        self.threads = []
        for name, app in apps.items():
            conf = uvicorn.Config(app, host=cfg.host, port=cfg.ports[name], log_level="warning",
                                  timeout_graceful_shutdown=cfg.shutdown_timeout)
            server = uvicorn.Server(conf)
            server.install_signal_handlers = lambda: None  # handled by the group
            self.servers[name] = server

    def start(self, wait=10.0):
        for name, server in self.servers.items():
            t = threading.Thread(target=server.run, name=f"serve-{name}", daemon=True)
            t.start()
            self.threads.append(t)
        deadline = time.monotonic() + wait
        while not all(s.started for s in self.servers.values()):
            if time.monotonic() > deadline or not all(t.is_alive() for t in self.threads):
                self.stop()
                raise PortInUse("servers failed to start")
            time.sleep(0.02)
        return self

    def stop(self):
        for s in self.servers.values():
            s.should_exit = True
        for t in self.threads:
            t.join(self.cfg.shutdown_timeout + 1)

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


def serve(cfg: CliConfig, services=None, ready=None, stop_event: threading.Event | None = None):
    """Start all five services and block until SIGINT/SIGTERM or ``stop_event``."""
    cfg.validate()
    check_ports_free(cfg.host, cfg.ports)
    group = ServerGroup(cfg, build_apps(cfg, services))
    stop_event = stop_event or threading.Event()
    if threading.current_thread() is threading.main_thread():
        for sig in (signal.SIGINT, signal.SIGTERM):
            signal.signal(sig, lambda *_: stop_event.set())
    group.start()
    log.info("serving %s", {n: cfg.ports[n] for n in group.servers})
    if ready is not None:
        ready(group)
    try:
        stop_event.wait()
    finally:
        group.stop()
    return 0


__all__ = ["StageHttpClient", "ServerGroup", "build_apps", "check_ports_free", "create_agent_app",
           "create_stage_app", "serve", "TOOL_NAMES"]
