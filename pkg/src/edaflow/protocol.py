"""JSON-RPC 2.0 tool protocol.

Each service publishes one tool. A client discovers it with ``tools/list``
and invokes it with ``tools/call``; the stage request travels as the call
``arguments``. Tool failures are returned as a result with ``isError`` set,
protocol failures as JSON-RPC errors.
"""
from __future__ import annotations

import json
from typing import Callable

from .catalog import TOOL_NAMES
from .errors import EdaFlowError, InvalidRequest
from .services import REQUEST_TYPES

PROTOCOL_VERSION = "2024-11-05"
SERVER_NAME = "edaflow"

PARSE_ERROR = -32700
INVALID_REQUEST = -32600
METHOD_NOT_FOUND = -32601
INVALID_PARAMS = -32602
INTERNAL_ERROR = -32603

_DESCRIPTIONS = {
    "synthesis": "Logic synthesis of an RTL design into a mapped netlist; returns the rendered TCL and reports.",
    "placement": "Floorplan, power plan, placement and pre-CTS optimisation of a synthesised netlist.",
    "cts": "Clock tree synthesis minimising skew under a transition limit, with post-CTS optimisation.",
    "route": "Global and detailed routing; returns route reports and optionally a deliverable archive.",
}

AGENT_TOOL = {
    "name": "agent",
    "description": "Run a natural-language flow request through the stage services.",
    "inputSchema": {
        "type": "object",
        "properties": {"prompt": {"type": "string"}, "session_id": {"type": ["string", "null"]}},
        "required": ["prompt"],
        "additionalProperties": False,
    },
}


def tool_manifest(stage: str) -> dict:
    return {
        "name": TOOL_NAMES[stage],
        "description": _DESCRIPTIONS[stage],
        "inputSchema": REQUEST_TYPES[stage].model_json_schema(),
    }


def _error(id_, code, message, data=None):
    err = {"code": code, "message": message}
    if data is not None:
        err["data"] = data
    return {"jsonrpc": "2.0", "id": id_, "error": err}


def _result(id_, result):
    return {"jsonrpc": "2.0", "id": id_, "result": result}


def handle_message(message, tools: list[dict], call: Callable[[str, dict], dict]):
    """Answer one JSON-RPC message (a dict or a JSON string).

    ``call(name, arguments)`` runs a tool and returns a JSON-able dict; it
    may raise EdaFlowError. Notifications (no ``id``) get ``None`` back.
    """
    if isinstance(message, (str, bytes)):
        try:
            message = json.loads(message)
        except json.JSONDecodeError as e:
            return _error(None, PARSE_ERROR, f"parse error: {e}")
    if isinstance(message, list):
        out = [r for r in (handle_message(m, tools, call) for m in message) if r is not None]
        return out or None
    if not isinstance(message, dict) or message.get("jsonrpc") != "2.0" or not isinstance(message.get("method"), str):
        return _error(message.get("id") if isinstance(message, dict) else None, INVALID_REQUEST, "invalid request")
    id_ = message.get("id")
    notification = "id" not in message
    method = message["method"]
    params = message.get("params") or {}

    if method == "initialize":
        res = _result(id_, {
            "protocolVersion": PROTOCOL_VERSION,
            "serverInfo": {"name": SERVER_NAME, "version": "0.1.0"},
            "capabilities": {"tools": {"listChanged": False}},
        })
    elif method == "ping":
        res = _result(id_, {})
    elif method == "notifications/initialized":
        return None
    elif method == "tools/list":
        res = _result(id_, {"tools": tools})
    elif method == "tools/call":
        if not isinstance(params, dict) or not isinstance(params.get("name"), str):
            return _error(id_, INVALID_PARAMS, "tools/call needs a tool name")
        name = params["name"]
        if name not in {t["name"] for t in tools}:
            return _error(id_, INVALID_PARAMS, f"unknown tool {name!r}")
        args = params.get("arguments") or {}
        if not isinstance(args, dict):
            return _error(id_, INVALID_PARAMS, "arguments must be an object")
        try:
            payload = call(name, args)
            is_error = False
        except InvalidRequest as e:
            return _error(id_, INVALID_PARAMS, str(e), e.to_dict())
        except EdaFlowError as e:
            payload = e.to_dict()
            is_error = True
        res = _result(id_, {
            "content": [{"type": "text", "text": json.dumps(payload, default=str)}],
            "structuredContent": payload,
            "isError": is_error,
        })
    else:
        return _error(id_, METHOD_NOT_FOUND, f"method {method!r} not found")
    return None if notification else res
