# src/config.py

import logging
import os
from dataclasses import dataclass
from datetime import datetime
from functools import lru_cache
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

__version__ = "0.4.0"

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


@dataclass(frozen=True)
class Settings:
    log_level: str = 'INFO'
    log_dir: str | None = None
    threads: int = 1
    exhaustive_limit: int = 10


def _int_env(name, default):
    raw = os.getenv(name)
    if raw is None or raw.strip() == '':
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"{name} must be an integer, got {raw!r}") from None
    return max(value, 1)


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Settings read once from the environment (and a local .env file)."""
    return Settings(
        log_level=os.getenv('MOMENTSHEAF_LOG_LEVEL', 'INFO').upper(),
        log_dir=os.getenv('MOMENTSHEAF_LOG_DIR') or None,
        threads=_int_env('MOMENTSHEAF_THREADS', 1),
        exhaustive_limit=_int_env('MOMENTSHEAF_EXHAUSTIVE_LIMIT', 10),
    )


def setup_logging():
    """
    Configure logging.
    Everything goes to stderr so stdout stays pure JSON; a dated log file is
    added only when MOMENTSHEAF_LOG_DIR is set.
    """
    settings = get_settings()
    handlers = [logging.StreamHandler()]

    if settings.log_dir:
        log_dir = Path(settings.log_dir)
        log_dir.mkdir(parents=True, exist_ok=True)
        log_file = log_dir / f"momentsheaf_{datetime.now().strftime('%Y%m%d')}.log"
        handlers.append(logging.FileHandler(log_file, encoding='utf-8'))

    logging.basicConfig(
        level=getattr(logging, settings.log_level, logging.INFO),
        format=LOG_FORMAT,
        handlers=handlers,
    )

    return logging.getLogger(__name__)
