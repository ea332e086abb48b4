"""Simulation and analysis of SWIPT power-splitting differential DF relaying."""

from .config import ConfigError, DerivedConstants, SystemConfig, derive_constants, load_config

__version__ = "0.1.0"

__all__ = ["ConfigError", "DerivedConstants", "SystemConfig", "derive_constants", "load_config", "__version__"]
