import os
from pathlib import Path
from typing import Optional

import yaml
from dotenv import load_dotenv

from src.models.run_config import Settings
from src.utils.logger import get_logger

logger = get_logger(__name__)

PROJECT_ROOT = Path(__file__).parent.parent.parent
DEFAULT_SETTINGS_PATH = PROJECT_ROOT / "config" / "settings.yaml"


def _load_env() -> None:
    env_path = PROJECT_ROOT / ".env"
    if env_path.exists():
        load_dotenv(env_path)


def load_settings(path: Optional[Path] = None) -> Settings:
    """
    Load config/settings.yaml (or QSME_SETTINGS / explicit path) into validated Settings.

    A missing file falls back to the built-in defaults; QSME_THREADS overrides `threads`.
    """
    _load_env()
    config_path = Path(path or os.environ.get("QSME_SETTINGS") or DEFAULT_SETTINGS_PATH)

    raw = {}
    if config_path.exists():
        with open(config_path, "r", encoding="utf-8") as f:
            raw = yaml.safe_load(f) or {}
    else:
        logger.warning(f"Settings file not found: {config_path} - using defaults")

    threads = os.environ.get("QSME_THREADS")
    if threads:
        try:
            raw["threads"] = int(threads)
        except ValueError:
            logger.warning(f"Ignoring non-integer QSME_THREADS={threads!r}")

    return Settings.model_validate(raw)
