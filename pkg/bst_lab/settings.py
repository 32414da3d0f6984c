"""
settings.py
~~~~~~~~~~~
Environment-driven defaults and the resource-limit error shared by the
search-heavy modules.  Values are read at call time so a ``.env`` file
loaded by the CLI is honoured.
"""

from __future__ import annotations

import logging
import os
from pathlib import Path

logger = logging.getLogger(__name__)

DEFAULT_NODE_CAP = 10_000_000
DEFAULT_GADGET_NODE_CAP = 2_000_000


class ResourceLimitError(RuntimeError):
    """A search exceeded its node or time budget."""


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name, "").strip()
    if not raw:
        return default
    try:
        return int(raw)
    except ValueError:
        logger.warning("Ignoring %s=%r: not an integer, using %d", name, raw, default)
        return default


def _env_flag(name: str, default: bool) -> bool:
    raw = os.environ.get(name, "true" if default else "false").strip().lower()
    return raw not in ("false", "0", "no")


def default_seed() -> int:
    return _env_int("BST_LAB_SEED", 1)


def node_cap() -> int:
    return _env_int("BST_LAB_NODE_CAP", DEFAULT_NODE_CAP)


def gadget_node_cap() -> int:
    return _env_int("BST_LAB_GADGET_NODE_CAP", DEFAULT_GADGET_NODE_CAP)


def verify_traces() -> bool:
    return _env_flag("BST_LAB_VERIFY_TRACES", True)


def output_dir() -> Path:
    return Path(os.environ.get("BST_LAB_OUTPUT_DIR", "output"))


def log_level() -> str:
    return os.environ.get("BST_LAB_LOG_LEVEL", "INFO").strip().upper() or "INFO"


def time_cap_ms() -> int | None:
    value = _env_int("BST_LAB_TIME_CAP_MS", 0)
    return value if value > 0 else None
