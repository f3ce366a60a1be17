"""Configuration loading: CLI flags > config file > environment > defaults.

The config file is TOML (``nudgecast.toml`` in the working directory unless
``--config`` points elsewhere).  Credentials are only ever read from the
environment or the file; they are never printed or logged.
"""

from __future__ import annotations

import os
import sys
from pathlib import Path
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import NudgecastError

DEFAULT_CONFIG_NAME = "nudgecast.toml"

DEFAULTS: dict[str, Any] = {
    "corpus": None,
    "unseen": None,
    "state_dir": ".nudgecast",
    "backend": "mock",
    "base_model": "mock:replay",
    "variant": "P4",
    "seed": 7,
    "counts": [144, 23, 41],
    "n_runs": 10,
    "temperature": 1.0,
    "port": 8000,
    "api_base": "",
    "api_key": "",
    "frontend_dist": None,
}

_ENV_KEYS = {
    "NUDGECAST_API_BASE": "api_base",
    "NUDGECAST_API_KEY": "api_key",
    "NUDGECAST_PORT": "port",
    "NUDGECAST_STATE_DIR": "state_dir",
}


def load_config(explicit_path: Optional[str] = None) -> dict[str, Any]:
    config = dict(DEFAULTS)
    for env_name, key in _ENV_KEYS.items():
        value = os.environ.get(env_name)
        if value:
            config[key] = int(value) if key == "port" else value

    path: Optional[Path] = None
    if explicit_path:
        path = Path(explicit_path)
        if not path.exists():
            raise NudgecastError(f"config file not found: {path}")
    elif Path(DEFAULT_CONFIG_NAME).exists():
        path = Path(DEFAULT_CONFIG_NAME)
    if path is not None:
        with open(path, "rb") as fh:
            loaded = tomllib.load(fh)
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise NudgecastError(
                f"unknown config keys in {path}: {', '.join(sorted(unknown))}"
            )
        config.update(loaded)
    return config
