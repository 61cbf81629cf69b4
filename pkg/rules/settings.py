import logging
import os

from dotenv import load_dotenv

# Load environment variables; a missing file is fine, every setting has a default
load_dotenv(os.getenv("ENVIRONMENT", ".env"))


def _env_float(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return float(raw)
    except ValueError as e:
        raise ValueError(f"Environment variable {name}={raw!r} is not a number") from e


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError as e:
        raise ValueError(f"Environment variable {name}={raw!r} is not an integer") from e


def get_top_k() -> int:
    return _env_int("CFIRE_TOP_K", 3)


def get_min_support_fraction() -> float:
    return _env_float("CFIRE_MIN_SUPPORT", 0.05)


def get_min_precision() -> float:
    return _env_float("CFIRE_MIN_PRECISION", 0.5)


def get_cover_target() -> float:
    return _env_float("CFIRE_COVER_TARGET", 1.0)


def get_theta() -> float:
    return _env_float("CFIRE_THETA", 0.0)


def get_seed() -> int:
    return _env_int("CFIRE_SEED", 0)


def get_log_level() -> int:
    name = os.getenv("CFIRE_LOG_LEVEL", "WARNING").strip().upper()
    level = logging.getLevelName(name)
    return level if isinstance(level, int) else logging.WARNING


def configure_logging(level: int | str | None = None) -> None:
    logging.basicConfig(
        level=get_log_level() if level is None else level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
