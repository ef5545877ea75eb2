"""Language-model adapter for the zebra-puzzle episode server.

Connects chat-completion backends to the newline-JSON wire protocol:
bindings name the model and credentials, transports open episodes,
``play_episode`` runs the loop, and ``replay_episode`` resends a stored
transcript so metrics can be recomputed by a live server.
"""

from .backends import BackendReply, FakeBackend, OpenAIChatBackend, build_backend
from .bindings import ModelBinding, binding_from_dict, load_bindings
from .errors import (
    AdapterError,
    AgentFault,
    BackendError,
    ConfigError,
    RetryableBackendError,
    TransportError,
)
from .play import (
    EpisodeOutcome,
    RateLimiter,
    play_episode,
    replay_episode,
    replay_records,
    run_episodes,
)
from .transport import Endpoint, ServerProcess, StdioServer, connect, spawn_socket_server

__version__ = "0.1.0"

__all__ = [
    "AdapterError",
    "AgentFault",
    "BackendError",
    "BackendReply",
    "ConfigError",
    "Endpoint",
    "EpisodeOutcome",
    "FakeBackend",
    "ModelBinding",
    "OpenAIChatBackend",
    "RateLimiter",
    "RetryableBackendError",
    "ServerProcess",
    "StdioServer",
    "TransportError",
    "binding_from_dict",
    "build_backend",
    "connect",
    "load_bindings",
    "play_episode",
    "replay_episode",
    "replay_records",
    "run_episodes",
    "spawn_socket_server",
]
