"""Runtime configuration shared by the CLI and the servers."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigInvalid
from .llm import ENV_API_KEY, ENV_BASE_URL, ENV_MODEL

CONFIG_ENV = "EDAFLOW_CONFIG"
DEFAULT_PORTS = {"synthesis": 13333, "placement": 13340, "cts": 13338, "route": 13341, "agent": 13300}


@dataclass
class CliConfig:
    workspace_root: Path = Path("./eda_workspace")
    ports: dict = field(default_factory=lambda: dict(DEFAULT_PORTS))
    host: str = "127.0.0.1"
    backend_config: Path | None = None
    model_env: dict = field(default_factory=lambda: {
        "base_url": ENV_BASE_URL, "model": ENV_MODEL, "api_key": ENV_API_KEY})
    shutdown_timeout: float = 10.0

    def __post_init__(self):
        self.workspace_root = Path(self.workspace_root)
        if self.backend_config is not None:
            self.backend_config = Path(self.backend_config)
        self.ports = {**DEFAULT_PORTS, **dict(self.ports)}

    def validate(self, check_writable=True):
        unknown = set(self.ports) - set(DEFAULT_PORTS)
        if unknown:
            raise ConfigInvalid(f"unknown services in ports: {sorted(unknown)}")
        for name, port in self.ports.items():
            if not isinstance(port, int) or isinstance(port, bool) or not 0 < port < 65536:
                raise ConfigInvalid(f"port for {name} must be an integer in 1..65535, got {port!r}")
        values = list(self.ports.values())
        dup = sorted({p for p in values if values.count(p) > 1})
        if dup:
            raise ConfigInvalid(f"ports must be distinct; repeated: {dup}")
        if check_writable:
            try:
                self.workspace_root.mkdir(parents=True, exist_ok=True)
            except OSError as e:
                raise ConfigInvalid(f"workspace root {self.workspace_root} is not writable: {e}") from None
            if not os.access(self.workspace_root, os.W_OK):
                raise ConfigInvalid(f"workspace root {self.workspace_root} is not writable")
        return self

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigInvalid(f"unknown config keys: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path):
        try:
            doc = json.loads(Path(path).read_text("utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigInvalid(f"cannot read config {path}: {e}") from None
        if not isinstance(doc, dict):
            raise ConfigInvalid("config must be a JSON object")
        return cls.from_dict(doc)

    @classmethod
    def load(cls, path=None):
        path = path or os.environ.get(CONFIG_ENV)
        return cls.from_file(path) if path else cls()

    def model_environ(self) -> dict:
        """The model-client variables, renamed to the names LlmClient reads."""
        canon = {"base_url": ENV_BASE_URL, "model": ENV_MODEL, "api_key": ENV_API_KEY}
        return {canon[k]: os.environ[v] for k, v in self.model_env.items() if k in canon and v in os.environ}
