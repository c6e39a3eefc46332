from pathlib import Path
from functools import lru_cache
from typing import Any, Dict, Type, TypeVar

import yaml
from pydantic import BaseModel, ValidationError

from fusecal.core.errors import ConfigError

CONFIG_DIR = Path(__file__).parent

ModelT = TypeVar("ModelT", bound=BaseModel)


@lru_cache(maxsize=None)
def load_defaults() -> Dict[str, Any]:
    """Load the packaged defaults document (read once per process)."""
    with open(CONFIG_DIR / "defaults.yaml", "r", encoding="utf-8") as f:
        return yaml.safe_load(f)


def default(section: str, key: str) -> Any:
    return load_defaults()[section][key]


def default_mu_grid() -> list[float]:
    """The μ search grid 0.05, 0.10, ..., 0.95, rounded to avoid drift from repeated addition."""
    tuning = load_defaults()["tuning"]
    start, stop, step = tuning["mu_grid_start"], tuning["mu_grid_stop"], tuning["mu_grid_step"]
    count = int(round((stop - start) / step)) + 1
    return [round(start + i * step, 10) for i in range(count)]


def validated(model: Type[ModelT], **data: Any) -> ModelT:
    """Build a pydantic model, reporting schema violations as ConfigError."""
    try:
        return model(**data)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(part) for part in err['loc']) or model.__name__}: {err['msg']}"
            for err in e.errors()
        )
        raise ConfigError(f"invalid {model.__name__}: {problems}") from e


__all__ = ["CONFIG_DIR", "load_defaults", "default", "default_mu_grid", "validated"]
