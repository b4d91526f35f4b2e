from contextlib import contextmanager
from pydantic_settings import BaseSettings, SettingsConfigDict
import os

class BaseConfig(BaseSettings):

    # Measures
    WEIGHT_SUM_TOL: float = 1e-9
    CANONICAL_SUM_TOL: float = 1e-12

    # Simplex
    FEAS_TOL: float = 1e-9
    PIVOT_TOL: float = 1e-9
    ITERATION_FACTOR: int = 50

    # Order decisions and coupling verification
    ORDER_TOL: float = 1e-9
    VERIFY_TOL: float = 1e-8
    KERNEL_ROW_TOL: float = 1e-10

    # Test families
    FAMILY_COUNT: int = 200
    FAMILY_MAX_PIECES: int = 5
    COEFF_RANGE: int = 4
    RATIONAL_DENOMINATOR: int = 64

    # Randomness and fan-out
    DEFAULT_SEED: int = 0
    MAX_WORKERS: int = 1

    # Logging
    LOG_LEVEL: str = "WARNING"
    LOG_FORMAT: str = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class DevConfig(BaseConfig):
    model_config = SettingsConfigDict(env_file="env/.env.dev", extra="ignore")


class ProdConfig(BaseConfig):
    model_config = SettingsConfigDict(env_file="env/.env.prod", extra="ignore")


configs = {"dev": DevConfig, "prod": ProdConfig}

config: BaseConfig = configs[os.environ.get("ENV", "dev").lower()]()


@contextmanager
def overridden(**kwargs):
    """Apply overrides for the duration of one command, then restore the settings."""
    saved = config.model_dump()
    try:
        apply_overrides(**kwargs)
        yield config
    finally:
        for key, value in saved.items():
            setattr(config, key, value)


def apply_overrides(tol: float | None = None, seed: int | None = None,
                    workers: int | None = None, log_level: str | None = None) -> None:
    """Apply command-line overrides to the process-wide settings."""
    if tol is not None:
        config.ORDER_TOL = tol
        config.FEAS_TOL = tol
        config.WEIGHT_SUM_TOL = tol
    if seed is not None:
        config.DEFAULT_SEED = seed
    if workers is not None:
        config.MAX_WORKERS = workers
    if log_level is not None:
        config.LOG_LEVEL = log_level
