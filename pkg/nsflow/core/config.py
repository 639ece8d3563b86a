"""
Runtime configuration using Pydantic settings
"""

from functools import lru_cache
from pathlib import Path
from typing import Literal

from pydantic_settings import BaseSettings

PROJECT_ROOT = Path(__file__).resolve().parent.parent.parent


class Settings(BaseSettings):
    """Runtime settings from NSFLOW_* environment variables"""

    # Parallelism
    threads: int = 4

    # Direction grids
    direction_count: int = 256

    # Tolerances
    membership_tol: float = 1e-7
    quad_epsabs: float = 1e-10
    quad_epsrel: float = 1e-10
    quad_limit: int = 200
    ode_rtol: float = 1e-10
    ode_atol: float = 1e-12
    event_tol: float = 1e-10
    surface_tol: float = 1e-9

    # Trajectory output
    output_samples: int = 201

    # Logging
    log_level: str = "WARNING"
    log_format: Literal["text", "json"] = "text"

    # YAML constants
    numerics_config_dir: Path = PROJECT_ROOT / "configs" / "numerics"

    class Config:
        env_prefix = "NSFLOW_"
        env_file = ".env"
        env_file_encoding = "utf-8"
        case_sensitive = False


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance"""
    return Settings()


settings = get_settings()
