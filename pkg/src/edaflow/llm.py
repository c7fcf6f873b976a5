"""Minimal client for an OpenAI-compatible chat completions endpoint.

Configured from the environment; when the variables are absent the callers
use their deterministic engines instead, so nothing here is needed offline.
"""
from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass

import httpx

from .errors import ModelClientUnavailable

ENV_BASE_URL = "EDAFLOW_LLM_BASE_URL"
ENV_MODEL = "EDAFLOW_LLM_MODEL"
ENV_API_KEY = "EDAFLOW_LLM_API_KEY"


@dataclass
class LlmClient:
    base_url: str
    model: str
    api_key: str | None = None
    timeout: float = 60.0
    transport: httpx.BaseTransport | None = None

    @classmethod
    def from_env(cls, environ=None) -> "LlmClient | None":
        env = os.environ if environ is None else environ
        base, model = env.get(ENV_BASE_URL), env.get(ENV_MODEL)
        if not base or not model:
            return None
        return cls(base, model, env.get(ENV_API_KEY))

    def chat(self, messages, **sampling) -> str:
        """Send one chat request and return the assistant text."""
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        body = {"model": self.model, "messages": list(messages), **sampling}
        url = self.base_url.rstrip("/") + "/chat/completions"
        try:
            with httpx.Client(timeout=self.timeout, transport=self.transport) as http:
                r = http.post(url, json=body, headers=headers)
                r.raise_for_status()
                doc = r.json()
            return doc["choices"][0]["message"]["content"]
        except (httpx.HTTPError, KeyError, IndexError, TypeError, ValueError) as e:
            raise ModelClientUnavailable(f"model request failed: {e}") from e

    def chat_json(self, messages, **sampling) -> dict:
        text = self.chat(messages, **sampling)
        # models like to wrap JSON in a fenced block
        m = re.search(r"\{.*\}", text, re.S)
        try:
            return json.loads(m.group(0) if m else text)
        except json.JSONDecodeError as e:
            raise ModelClientUnavailable(f"model returned non-JSON output: {e}") from e
