"""Exception types for the adapter."""

from __future__ import annotations


class AdapterError(Exception):
    """Base class for all adapter failures."""


class ConfigError(AdapterError):
    """A binding or configuration file is malformed."""


class BackendError(AdapterError):
    """The model backend failed in a way that retrying will not fix."""


class RetryableBackendError(BackendError):
    """A transient backend failure (timeout, rate limit, server error)."""


class TransportError(AdapterError):
    """The episode connection broke or spoke an unexpected message."""


class AgentFault(AdapterError):
    """The backend could not produce a usable turn within the retry budget."""
