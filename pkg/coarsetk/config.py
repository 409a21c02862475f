"""
Runtime settings for coarsetk.

Values come from the environment (a ``.env`` file is honoured) and can be
overridden per command from the CLI.
"""

import os
import logging
from dataclasses import dataclass, replace
from typing import Optional

from dotenv import load_dotenv

logger = logging.getLogger(__name__)

DEFAULT_CLIQUE_BUDGET = 1_000_000
DEFAULT_COLORING_BUDGET = 100_000
DEFAULT_SEED = 7


@dataclass(frozen=True)
class Settings:
    """Budgets, parallelism and reproducibility knobs shared by all checkers."""

    clique_budget: int = DEFAULT_CLIQUE_BUDGET
    coloring_budget: int = DEFAULT_COLORING_BUDGET
    threads: int = 1
    seed: int = DEFAULT_SEED
    log_level: str = "INFO"
    progress: bool = False

    def with_overrides(self, **overrides) -> "Settings":
        """Return a copy with every non-None override applied."""
        changes = {key: value for key, value in overrides.items() if value is not None}
        return replace(self, **changes)


def _parse_int(key: str, raw: str) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"{key} must be an integer, got {raw!r}")
    if value < 1:
        raise ValueError(f"{key} must be positive, got {value}")
    return value


def parse_budget(raw: str):
    """Parse ``COARSETK_BUDGET``: ``"CLIQUES"`` or ``"CLIQUES,COLORING_NODES"``."""
    parts = [part.strip() for part in raw.split(",") if part.strip()]
    if not parts or len(parts) > 2:
        raise ValueError(f"COARSETK_BUDGET must be 'N' or 'N,M', got {raw!r}")
    cliques = _parse_int("COARSETK_BUDGET", parts[0])
    coloring = _parse_int("COARSETK_BUDGET", parts[1]) if len(parts) == 2 else DEFAULT_COLORING_BUDGET
    return cliques, coloring


def load_settings(env_file: Optional[str] = None) -> Settings:
    """
    Build Settings from the environment.

    Args:
        env_file: Optional path of a dotenv file; the default lookup is used otherwise.

    Returns:
        Settings instance

    Raises:
        ValueError: if a variable is present but malformed
    """
    load_dotenv(env_file)

    clique_budget, coloring_budget = DEFAULT_CLIQUE_BUDGET, DEFAULT_COLORING_BUDGET
    raw_budget = os.getenv("COARSETK_BUDGET")
    if raw_budget:
        clique_budget, coloring_budget = parse_budget(raw_budget)
        logger.info(f"Budgets overridden from environment: cliques={clique_budget}, coloring={coloring_budget}")

    threads = _parse_int("COARSETK_THREADS", os.getenv("COARSETK_THREADS", "1"))
    seed_raw = os.getenv("COARSETK_SEED", str(DEFAULT_SEED))
    try:
        seed = int(seed_raw)
    except ValueError:
        raise ValueError(f"COARSETK_SEED must be an integer, got {seed_raw!r}")

    return Settings(
        clique_budget=clique_budget,
        coloring_budget=coloring_budget,
        threads=threads,
        seed=seed,
        log_level=os.getenv("COARSETK_LOG_LEVEL", "INFO").upper(),
        progress=os.getenv("COARSETK_PROGRESS", "0") in ("1", "true", "yes"),
    )
