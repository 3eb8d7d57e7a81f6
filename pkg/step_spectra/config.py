"""
Configuration loader for the step-spectra toolkit.

Loads configuration from a YAML file deep-merged over DEFAULT_CONFIG.
"""

import copy
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

from step_spectra.specdisc import Discretization

logger = logging.getLogger(__name__)

CONFIG_ENV = "STEP_SPECTRA_CONFIG"
OUTPUT_DIR_ENV = "STEP_SPECTRA_OUTPUT_DIR"

# Default configuration
DEFAULT_CONFIG: Dict[str, Any] = {
    "log_level": "INFO",
    "discretization": {
        "delta": 0.005,
        "margin": 12.0,
        "length": None,
        "tol": 1e-12,
        "max_inverse_iterations": 50,
    },
    "search": {
        "scan_lo": -6.0,
        "scan_hi": 1.0,
        "scan_step": 0.05,
        "xtol": 1e-10,
        "fd_step": 1e-3,
    },
    "curvature": {
        "delta_exp": 1.0 / 24.0,
        "curvature_cap": 1.0,
        "length_cap": 40.0,
        "h_values": [1e-3, 2.5e-4, 6.25e-5, 1.5625e-5],
    },
    "output": {
        "format": "csv",
        "directory": ".",
    },
    "workers": 1,
    "run": {},
}


class ToolkitConfig:
    """Configuration manager for the toolkit."""

    def __init__(self, config_path: Optional[str] = None):
        """
        Initialize configuration.

        Args:
            config_path: Path to a YAML file. If None, checks:
                        1. STEP_SPECTRA_CONFIG environment variable
                        2. config/step_spectra.yaml in the working directory
                        3. config/step_spectra.yaml next to the package
                        4. ~/.step-spectra/config.yaml
                        5. Uses default configuration
        """
        self._config: Dict[str, Any] = copy.deepcopy(DEFAULT_CONFIG)
        self._config_path: Optional[str] = None

        self._load_config(config_path)

    def _load_config(self, config_path: Optional[str] = None):
        """Load configuration from YAML file."""
        explicit = config_path is not None
        if config_path is None:
            config_path = os.getenv(CONFIG_ENV)

        if config_path is None or not Path(config_path).exists():
            if explicit:
                raise FileNotFoundError(f"config file not found: {config_path}")
            possible_paths = [
                Path("config/step_spectra.yaml"),
                Path(__file__).parent.parent / "config" / "step_spectra.yaml",
                Path.home() / ".step-spectra" / "config.yaml",
            ]
            config_path = None
            for path in possible_paths:
                if path.exists():
                    config_path = str(path)
                    break

        if config_path is None:
            logger.info("No config file found, using default configuration")
            return

        self._config_path = config_path
        logger.info(f"Loading configuration from: {config_path}")

        try:
            with open(config_path, "r", encoding="utf-8") as f:
                loaded_config = yaml.safe_load(f) or {}
        except (OSError, yaml.YAMLError) as e:
            if explicit:
                raise
            logger.warning(f"Error loading config file: {e}, using defaults")
            return

        if not isinstance(loaded_config, dict):
            logger.warning(f"Config file {config_path} is not a mapping, using defaults")
            return
        self._config = self._deep_merge(DEFAULT_CONFIG, loaded_config)
        logger.info("Configuration loaded successfully")

    def _deep_merge(self, base: Dict, override: Dict) -> Dict:
        """Deep merge two dictionaries."""
        result = copy.deepcopy(base)

        for key, value in override.items():
            if key in result and isinstance(result[key], dict) and isinstance(value, dict):
                result[key] = self._deep_merge(result[key], value)
            else:
                result[key] = value

        return result

    @property
    def config_path(self) -> Optional[str]:
        return self._config_path

    # Logging
    @property
    def log_level(self) -> str:
        return str(self._config.get("log_level", "INFO")).upper()

    # Discretization settings
    @property
    def delta(self) -> float:
        return float(self._config["discretization"]["delta"])

    @property
    def margin(self) -> float:
        return float(self._config["discretization"]["margin"])

    @property
    def length(self) -> Optional[float]:
        value = self._config["discretization"].get("length")
        return None if value is None else float(value)

    @property
    def tol(self) -> float:
        return float(self._config["discretization"]["tol"])

    @property
    def max_inverse_iterations(self) -> int:
        return int(self._config["discretization"]["max_inverse_iterations"])

    def discretization(self) -> Discretization:
        return Discretization(
            delta=self.delta,
            margin=self.margin,
            length=self.length,
            tol=self.tol,
            max_inverse_iterations=self.max_inverse_iterations,
        )

    # Search settings
    @property
    def scan_lo(self) -> float:
        return float(self._config["search"]["scan_lo"])

    @property
    def scan_hi(self) -> float:
        return float(self._config["search"]["scan_hi"])

    @property
    def scan_step(self) -> float:
        return float(self._config["search"]["scan_step"])

    @property
    def xtol(self) -> float:
        return float(self._config["search"]["xtol"])

    @property
    def fd_step(self) -> float:
        return float(self._config["search"]["fd_step"])

    # Curvature settings
    @property
    def delta_exp(self) -> float:
        return float(self._config["curvature"]["delta_exp"])

    @property
    def curvature_cap(self) -> float:
        return float(self._config["curvature"]["curvature_cap"])

    @property
    def length_cap(self) -> float:
        return float(self._config["curvature"]["length_cap"])

    @property
    def h_values(self) -> List[float]:
        return [float(h) for h in self._config["curvature"]["h_values"]]

    # Output settings
    @property
    def output_format(self) -> str:
        return str(self._config["output"]["format"])

    @property
    def output_directory(self) -> str:
        return os.getenv(OUTPUT_DIR_ENV) or str(self._config["output"]["directory"])

    @property
    def workers(self) -> int:
        return int(self._config.get("workers", 1))

    @property
    def run(self) -> Dict[str, Any]:
        return dict(self._config.get("run") or {})

    def get(self, key: str, default: Any = None) -> Any:
        """Get configuration value by dot-notation key."""
        keys = key.split(".")
        value = self._config

        for k in keys:
            if isinstance(value, dict) and k in value:
                value = value[k]
            else:
                return default

        return value

    def to_dict(self) -> Dict[str, Any]:
        """Return configuration as dictionary."""
        return copy.deepcopy(self._config)


# Global configuration instance
_config: Optional[ToolkitConfig] = None


def get_config() -> ToolkitConfig:
    """Get or create global configuration instance."""
    global _config
    if _config is None:
        _config = ToolkitConfig()
    return _config


def reload_config(config_path: Optional[str] = None) -> ToolkitConfig:
    """Reload configuration from file."""
    global _config
    _config = ToolkitConfig(config_path)
    return _config
