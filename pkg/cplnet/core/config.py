"""
Application configuration using Pydantic Settings
Numerical tolerances, output formatting and logging for every command
"""

from typing import List, Optional
from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    Tool settings with validation
    All settings can be overridden by environment variables (prefix CPLNET_)
    """

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="CPLNET_",
        case_sensitive=False,
        extra="ignore",
    )

    # ============================================================================
    # APPLICATION SETTINGS
    # ============================================================================
    APP_NAME: str = "cplnet"
    APP_VERSION: str = "1.0.0"
    OUTPUT_DIR: str = "./out"
    DEFAULT_JOBS: Optional[int] = Field(default=None, ge=1)

    # ============================================================================
    # OPERATING-POINT SOLVER
    # ============================================================================
    SOLVER_MAX_ITER: int = Field(default=10_000, ge=1)
    SOLVER_RTOL: float = Field(default=1e-9, gt=0.0)
    SOLVER_RELAXATION: float = Field(default=0.7, gt=0.0, le=1.0)

    # ============================================================================
    # ANALYSIS
    # ============================================================================
    BOUNDARY_GRID_POINTS: int = Field(default=1000, ge=2)
    CS_GRID_POINTS: int = Field(default=25, ge=2)
    CS_REL_TOL: float = Field(default=1e-3, gt=0.0)
    DEFAULT_R_SET_MIN: float = Field(default=0.01, gt=0.0)
    DEFAULT_R_SET_MAX: float = Field(default=10.0, gt=0.0)
    DEFAULT_R_SET_POINTS: int = Field(default=20, ge=1)
    # vc modes of an input shunt on an R = 0 feeder decay with C_s times this
    PINNED_NODE_RESISTANCE: float = Field(default=1e-6, gt=0.0)

    # ============================================================================
    # SIMULATION
    # ============================================================================
    DIVERGENCE_FACTOR: float = Field(default=1e6, gt=1.0)
    MIN_STEPS_PER_PERIOD: int = Field(default=50, ge=2)
    SWITCHED_STEPS_PER_PERIOD: int = Field(default=100, ge=2)
    AVERAGED_DT: float = Field(default=1e-6, gt=0.0)

    # Load defaults (the nominal voltage is not a circuit constant, see DESIGN.md)
    DEFAULT_V_NOMINAL: float = Field(default=48.0, gt=0.0)
    DEFAULT_V_MIN: float = Field(default=20.0, gt=0.0)
    DEFAULT_V_MAX: float = Field(default=120.0, gt=0.0)

    # ============================================================================
    # OUTPUT FORMATTING
    # ============================================================================
    CSV_FLOAT_FORMAT: str = "%.17g"
    SVG_WIDTH: int = 960
    SVG_HEIGHT: int = 540

    # ============================================================================
    # LOGGING CONFIGURATION
    # ============================================================================
    LOG_LEVEL: str = Field(default="INFO", pattern="^(DEBUG|INFO|WARNING|ERROR|CRITICAL)$")
    LOG_FORMAT: str = Field(default="text", pattern="^(text|json)$")
    LOG_FILE: Optional[str] = None
    LOG_ROTATION_COUNT: int = 5

    @field_validator("CSV_FLOAT_FORMAT")
    @classmethod
    def validate_float_format(cls, v: str) -> str:
        """Ensure the CSV float format is a printf-style float conversion"""
        try:
            v % 1.0
        except (TypeError, ValueError):
            raise ValueError("CSV_FLOAT_FORMAT must be a printf-style float format")
        return v

    def get_log_config(self, level: Optional[str] = None) -> dict:
        """Get logging configuration for logging.config.dictConfig"""
        formatter = "json" if self.LOG_FORMAT == "json" else "default"
        handlers = {
            "console": {
                "class": "logging.StreamHandler",
                "formatter": formatter,
                "stream": "ext://sys.stderr",
            },
        }
        if self.LOG_FILE:
            handlers["file"] = {
                "class": "logging.handlers.RotatingFileHandler",
                "formatter": formatter,
                "filename": self.LOG_FILE,
                "maxBytes": 10485760,  # 10MB
                "backupCount": self.LOG_ROTATION_COUNT,
            }
        return {
            "version": 1,
            "disable_existing_loggers": False,
            "formatters": {
                "default": {
                    "format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
                },
                "json": {
                    "()": "pythonjsonlogger.jsonlogger.JsonFormatter",
                    "format": "%(asctime)s %(name)s %(levelname)s %(message)s",
                },
            },
            "handlers": handlers,
            "root": {
                "level": level or self.LOG_LEVEL,
                "handlers": list(handlers),
            },
        }

    def validate_config(self) -> List[str]:
        """Validate configuration and return list of warnings"""
        warnings = []

        if self.SWITCHED_STEPS_PER_PERIOD < self.MIN_STEPS_PER_PERIOD:
            warnings.append(
                "SWITCHED_STEPS_PER_PERIOD is below MIN_STEPS_PER_PERIOD - "
                "default switched runs will be rejected"
            )

        if self.SOLVER_RTOL > 1e-6:
            warnings.append("SOLVER_RTOL is loose - operating points may fail residual checks")

        if not self.DEFAULT_V_MIN <= self.DEFAULT_V_NOMINAL <= self.DEFAULT_V_MAX:
            warnings.append("DEFAULT_V_NOMINAL lies outside [DEFAULT_V_MIN, DEFAULT_V_MAX]")

        if self.DEFAULT_R_SET_MIN >= self.DEFAULT_R_SET_MAX:
            warnings.append("DEFAULT_R_SET_MIN should be below DEFAULT_R_SET_MAX")

        return warnings


# Create global settings instance
settings = Settings()

# Validate on startup
config_warnings = settings.validate_config()
if config_warnings:
    import warnings as py_warnings

    for warning in config_warnings:
        py_warnings.warn(f"Configuration Warning: {warning}", UserWarning)
