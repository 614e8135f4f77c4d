"""Run configuration: YAML files and environment."""

from __future__ import annotations

import logging
import os
from pathlib import Path
from typing import Any

import yaml

from geokit.models import RunConfig

logger = logging.getLogger(__name__)

THREADS_ENV = "GEOKIT_THREADS"
DEFAULT_CONFIG = "configs/default.yaml"


def load_run_config(path: str | Path | None = None, **overrides: Any) -> RunConfig:
    """Load a RunConfig from YAML, then apply non-None overrides.

    A missing file yields the defaults.
    """
    data: dict[str, Any] = {}
    if path is not None:
        config_path = Path(path)
        if config_path.exists():
            logger.info("Loading run config from %s", config_path)
            with open(config_path) as f:
                data = yaml.safe_load(f) or {}
            if not isinstance(data, dict):
                raise ValueError(f"{config_path} must contain a mapping")
        else:
            logger.warning("Config file %s does not exist; using defaults", config_path)

    search = dict(data.get("search") or {})
    for key in ("family", "starts", "k_max", "max_iters", "restarts", "tol"):
        if overrides.get(key) is not None:
            search[key] = overrides.pop(key)
        else:
            overrides.pop(key, None)
    data["search"] = search
    data.update({k: v for k, v in overrides.items() if v is not None})
    config = RunConfig.model_validate(data)
    if "seed" not in search:
        config.search.seed = config.seed
    return config


def thread_count() -> int:
    """Worker cap from GEOKIT_THREADS, default min(8, cpu count)."""
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw == "":
        return max(1, min(8, os.cpu_count() or 1))
    try:
        value = int(raw)
    except ValueError:
        logger.warning("Ignoring %s=%r; not an integer", THREADS_ENV, raw)
        return 1
    return max(1, value)
