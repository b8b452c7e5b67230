"""Service configuration: flat key=value file, DEFEMBED_* env, CLI flags.

Precedence (lowest to highest): config file, environment variables,
explicit overrides.  Startup validation checks that every referenced
file exists and that model and store dimensions are mutually consistent.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import DefembedError, FormatError

ENV_PREFIX = "DEFEMBED_"

_INT_KEYS = {"port", "default_k", "max_query_tokens"}


@dataclass
class ServiceConfig:
    checkpoint: str = ""
    target_embeddings: str = ""
    input_embeddings: str = ""  # required for pretrained_fixed checkpoints
    bilingual_embeddings: str = ""  # optional cross-lingual store
    host: str = "127.0.0.1"
    port: int = 8000
    default_k: int = 10
    max_query_tokens: int = 64

    def validate_paths(self) -> None:
        if not self.checkpoint:
            raise DefembedError("config: checkpoint path is required")
        if not self.target_embeddings:
            raise DefembedError("config: target_embeddings path is required")
        for key in ("checkpoint", "target_embeddings", "input_embeddings", "bilingual_embeddings"):
            value = getattr(self, key)
            if value and not Path(value).is_file():
                raise DefembedError(f"config: {key} file not found: {value}")


def _parse_kv_file(path: str | Path) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise FormatError("expected key=value", str(path), lineno)
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


def load_service_config(
    path: str | Path | None = None,
    env: dict[str, str] | None = None,
    overrides: dict[str, object] | None = None,
) -> ServiceConfig:
    env = os.environ if env is None else env
    known = {f.name for f in fields(ServiceConfig)}
    merged: dict[str, object] = {}
    if path is not None:
        for key, value in _parse_kv_file(path).items():
            if key not in known:
                raise DefembedError(f"config: unknown key {key!r} in {path}")
            merged[key] = value
    for key in known:
        env_key = ENV_PREFIX + key.upper()
        if env_key in env:
            merged[key] = env[env_key]
    for key, value in (overrides or {}).items():
        if key not in known:
            raise DefembedError(f"config: unknown override {key!r}")
        if value is not None:
            merged[key] = value
    for key in list(merged):
        if key in _INT_KEYS and not isinstance(merged[key], int):
            try:
                merged[key] = int(merged[key])
            except ValueError:
                raise DefembedError(f"config: {key} must be an integer") from None
    return ServiceConfig(**merged)
