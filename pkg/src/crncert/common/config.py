"""Configuration handling for crncert."""
import copy
import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import psutil
import yaml

from .. import const
from .errors import ConfigError

logger = logging.getLogger(__name__)


def _deep_merge(base: Dict[str, Any], update: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in (update or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


class Config:
    """Configuration handler class."""

    def __init__(self, config_path: Optional[Path] = None):
        """Initialize configuration."""
        self.config_path = config_path
        self.config: Dict[str, Any] = self.get_default_config()
        if config_path is not None:
            self.load()
        self.validate()

    def load(self) -> None:
        """Load configuration from file."""
        try:
            with open(self.config_path, "r", encoding="utf-8") as f:
                data = yaml.safe_load(f) or {}
            if not isinstance(data, dict):
                raise ConfigError(f"{self.config_path}: top level must be a mapping")
            self.config = _deep_merge(self.get_default_config(), data)
            logger.info("Configuration loaded from %s", self.config_path)
        except FileNotFoundError:
            logger.warning("Configuration file not found at %s, using defaults", self.config_path)
            self.config = self.get_default_config()
        except yaml.YAMLError as e:
            logger.error("Error loading configuration: %s", str(e))
            raise ConfigError(f"{self.config_path}: {e}") from e

    def save(self) -> None:
        """Save configuration to file."""
        if self.config_path is None:
            raise ConfigError("no configuration path to save to")
        try:
            with open(self.config_path, "w", encoding="utf-8") as f:
                yaml.dump(self.config, f, default_flow_style=False)
            logger.info("Configuration saved to %s", self.config_path)
        except OSError as e:
            logger.error("Error saving configuration: %s", str(e))
            raise

    def get_default_config(self) -> Dict[str, Any]:
        """Get default configuration."""
        return {
            "analysis": {
                "seed": const.DEFAULT_SEED,
                "trials": const.DEFAULT_TRIALS,
                "siphon_cap": const.DEFAULT_SIPHON_CAP,
                "exhaustive_siphon_limit": const.EXHAUSTIVE_SIPHON_LIMIT,
                "minor_cap": const.DEFAULT_MINOR_CAP,
                "backtrack_branches": const.DEFAULT_BACKTRACK_BRANCHES,
                "search_budget": const.DEFAULT_SEARCH_BUDGET,
                "symbolic_limit": const.SYMBOLIC_SPECIES_LIMIT,
                "p0_trials": const.DEFAULT_P0_TRIALS,
            },
            "dynamics": {
                "horizon": const.DEFAULT_HORIZON,
                "atol": const.DEFAULT_ATOL,
                "rtol": const.DEFAULT_RTOL,
                "initial_conditions": const.DEFAULT_INITIAL_CONDITIONS,
                "families": list(const.KINETICS_FAMILIES),
                "convergence_tol": const.CONVERGENCE_TOL,
            },
            "logging": {
                "level": "INFO",
                "file": None,
            },
        }

    def validate(self) -> None:
        """Reject non-positive budgets and unknown kinetics families."""
        analysis = self.config["analysis"]
        for key in ("trials", "siphon_cap", "minor_cap", "backtrack_branches", "search_budget"):
            value = analysis.get(key)
            if not isinstance(value, int) or value <= 0:
                raise ConfigError(f"analysis.{key} must be a positive integer, got {value!r}")
        seed = analysis.get("seed")
        if not isinstance(seed, int) or seed < 0:
            raise ConfigError(f"analysis.seed must be a non-negative integer, got {seed!r}")
        dynamics = self.config["dynamics"]
        if float(dynamics.get("horizon", 0)) <= 0:
            raise ConfigError("dynamics.horizon must be positive")
        unknown = set(dynamics.get("families", [])) - set(const.KINETICS_FAMILIES)
        if unknown or not dynamics.get("families"):
            raise ConfigError(f"unknown kinetics families: {sorted(unknown)}")

    def get(self, section: str, key: str, default: Any = None) -> Any:
        """Get configuration value."""
        return self.config.get(section, {}).get(key, default)

    def set(self, section: str, key: str, value: Any) -> None:
        """Set configuration value."""
        self.config.setdefault(section, {})[key] = value
        self.validate()

    def override(self, **values: Any) -> "Config":
        """Apply command line overrides to the analysis section; None values are ignored."""
        for key, value in values.items():
            if value is not None:
                self.config["analysis"][key] = value
        self.validate()
        return self

    @property
    def seed(self) -> int:
        """Get the master seed."""
        return self.config["analysis"]["seed"]

    @property
    def trials(self) -> int:
        """Get the number of kinetics samples for validation."""
        return self.config["analysis"]["trials"]

    @property
    def siphon_cap(self) -> int:
        """Get the species cap for complete siphon enumeration."""
        return self.config["analysis"]["siphon_cap"]

    @property
    def exhaustive_siphon_limit(self) -> int:
        """Get the species limit for the exhaustive siphon oracle."""
        return self.config["analysis"]["exhaustive_siphon_limit"]

    @property
    def minor_cap(self) -> int:
        """Get the cap on Cauchy-Binet (I, J) pairs."""
        return self.config["analysis"]["minor_cap"]

    @property
    def backtrack_branches(self) -> int:
        """Get the number of alternatives tried per reduction node."""
        return self.config["analysis"]["backtrack_branches"]

    @property
    def search_budget(self) -> int:
        """Get the node budget of the reduction search."""
        return self.config["analysis"]["search_budget"]

    @property
    def symbolic_limit(self) -> int:
        return self.config["analysis"]["symbolic_limit"]

    @property
    def p0_trials(self) -> int:
        return self.config["analysis"]["p0_trials"]

    @property
    def dynamics(self) -> Dict[str, Any]:
        """Get integration and validation settings."""
        return self.config["dynamics"]

    @property
    def families(self) -> Tuple[str, ...]:
        return tuple(self.config["dynamics"]["families"])

    @property
    def log_level(self) -> int:
        """Get the configured log level."""
        level = str(self.config["logging"].get("level", "INFO")).upper()
        return getattr(logging, level, logging.INFO)

    @property
    def log_file(self) -> Optional[Path]:
        value = self.config["logging"].get("file")
        return Path(value) if value else None

    @property
    def max_workers(self) -> int:
        """Get the worker cap from CRNCERT_THREADS or the physical core count."""
        env = os.environ.get(const.THREADS_ENV)
        if env:
            try:
                workers = int(env)
            except ValueError:
                logger.warning("Ignoring non-integer %s=%r", const.THREADS_ENV, env)
            else:
                if workers > 0:
                    return workers
                logger.warning("Ignoring non-positive %s=%r", const.THREADS_ENV, env)
        return psutil.cpu_count(logical=False) or 1
