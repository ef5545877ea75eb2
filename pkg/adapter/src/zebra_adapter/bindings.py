"""Model bindings: which backend to call, with which credentials and knobs.

A binding never stores a secret. The ``credential_env`` field names an
environment variable; the key itself is read from the process environment
at call time and is excluded from anything the adapter writes to disk.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field

from .errors import ConfigError

_ENV_NAME = re.compile(r"^[A-Z_][A-Z0-9_]*$")

TOKEN_REPORT_MODES = ("model_reported", "estimator")


@dataclass(frozen=True)
class ModelBinding:
    """Everything needed to call one model: backend, id, decoding, credentials.

    ``params`` holds decoding parameters (temperature, max_tokens, ...) passed
    through to the backend verbatim. ``token_report`` selects whether the
    backend's reported usage is forwarded to the environment
    (``model_reported``) or withheld so the environment falls back to its
    own estimator (``estimator``).
    """

    backend: str
    model: str
    params: dict = field(default_factory=dict)
    credential_env: str | None = None
    token_report: str = "model_reported"
    base_url: str | None = None

    def __post_init__(self):
        if not self.backend:
            raise ConfigError("binding needs a backend name")
        if not self.model:
            raise ConfigError("binding needs a model id")
        if self.token_report not in TOKEN_REPORT_MODES:
            raise ConfigError(
                f"token_report must be one of {TOKEN_REPORT_MODES}, "
                f"got {self.token_report!r}"
            )
        if self.credential_env is not None and not _ENV_NAME.match(self.credential_env):
            raise ConfigError(
                f"credential_env must be an environment-variable name "
                f"(like MY_API_KEY), got {self.credential_env!r}; "
                f"never put the secret itself in a binding"
            )
        if not isinstance(self.params, dict):
            raise ConfigError("params must be a mapping of decoding parameters")

    def resolve_credential(self) -> str | None:
        """Read the API key from the environment, or None if no env var is named."""
        if self.credential_env is None:
            return None
        value = os.environ.get(self.credential_env)
        if value is None:
            raise ConfigError(
                f"environment variable {self.credential_env} is not set"
            )
        return value

    def to_record(self) -> dict:
        """Manifest-safe description: names and knobs only, never key material."""
        return {
            "backend": self.backend,
            "model": self.model,
            "params": dict(self.params),
            "credential_env": self.credential_env,
            "token_report": self.token_report,
            "base_url": self.base_url,
        }


_BINDING_KEYS = {"backend", "model", "params", "credential_env", "token_report", "base_url"}


def binding_from_dict(raw: dict) -> ModelBinding:
    if not isinstance(raw, dict):
        raise ConfigError(f"binding must be an object, got {type(raw).__name__}")
    unknown = set(raw) - _BINDING_KEYS
    if unknown:
        raise ConfigError(f"unknown binding keys: {sorted(unknown)}")
    missing = {"backend", "model"} - set(raw)
    if missing:
        raise ConfigError(f"binding is missing keys: {sorted(missing)}")
    return ModelBinding(**raw)


def load_bindings(path: str) -> dict[str, ModelBinding]:
    """Load a config file mapping condition names to bindings."""
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected an object mapping condition -> binding")
    bindings = {}
    for condition, spec in raw.items():
        try:
            bindings[condition] = binding_from_dict(spec)
        except ConfigError as exc:
            raise ConfigError(f"{path}: condition {condition!r}: {exc}") from exc
    return bindings
