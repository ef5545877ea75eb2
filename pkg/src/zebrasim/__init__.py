"""Interactive zebra-puzzle environments with withheld clues.

A generator builds logic-grid puzzles whose visible clues underdetermine
the solution, an exact model counter certifies how many clue queries are
unavoidable, and a turn-based environment lets agents buy information
through a typed query protocol while every answer, count, and metric
stays reproducible.
"""

from .core import (
    Constraint,
    Entity,
    InvalidToken,
    Kind,
    Puzzle,
    PuzzleDims,
    Query,
    SolutionGrid,
    UnknownEntity,
    ZebraSimError,
    canonicalize_token,
    validate_puzzle,
)
from .solver import (
    ConstraintSet,
    CountResult,
    count_solutions,
    enumerate_solutions,
    holds,
    is_unique,
)
from .generator import (
    GeneratorConfig,
    generate_dataset,
    generate_puzzle,
    load_dataset,
    parse_clue_text,
    puzzle_from_record,
    puzzle_to_record,
    render_clue_text,
)
from .environment import (
    ConfigMismatch,
    EnvConfig,
    Pricing,
    SessionState,
    create_session,
    price_table,
    resolve_budget,
)
from .protocol import (
    build_init,
    episode_step,
    finalize_record,
    parse_agent_message,
    render_response_text,
    run_episode,
)
from .agents import AgentSpec, build_agent
from .metrics import aggregate, render_table, score_episode

__version__ = "0.1.0"

__all__ = [
    "AgentSpec",
    "ConfigMismatch",
    "Constraint",
    "ConstraintSet",
    "CountResult",
    "EnvConfig",
    "Entity",
    "GeneratorConfig",
    "InvalidToken",
    "Kind",
    "Pricing",
    "Puzzle",
    "PuzzleDims",
    "Query",
    "SessionState",
    "SolutionGrid",
    "UnknownEntity",
    "ZebraSimError",
    "aggregate",
    "build_agent",
    "build_init",
    "canonicalize_token",
    "count_solutions",
    "create_session",
    "enumerate_solutions",
    "episode_step",
    "finalize_record",
    "generate_dataset",
    "generate_puzzle",
    "holds",
    "is_unique",
    "load_dataset",
    "parse_agent_message",
    "parse_clue_text",
    "price_table",
    "puzzle_from_record",
    "puzzle_to_record",
    "render_clue_text",
    "render_response_text",
    "render_table",
    "resolve_budget",
    "run_episode",
    "score_episode",
    "validate_puzzle",
]
