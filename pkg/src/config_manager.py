"""
Configuration Manager
Handles loading, merging, and validation of run settings
"""

import copy
import json
import os
import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from typing import Any, Dict, Optional

# Add parent directory to path for imports
current_dir = os.path.dirname(os.path.abspath(__file__))
parent_dir = os.path.dirname(current_dir)
if parent_dir not in sys.path:
    sys.path.insert(0, parent_dir)

from src.services.simulation_service import ErrorSpec, GraphSpec, SimConfig
from src.utils.constants import SETTINGS_FILE
from src.utils.errors import ValidationError
from src.utils.helpers import ensure_dir, resolve_threads

# Try to import logger, but don't fail if it doesn't exist yet
try:
    from src.utils.logger import logger
except ImportError:
    import logging
    logger = logging.getLogger(__name__)
    logger.addHandler(logging.NullHandler())


DEFAULT_SETTINGS: Dict[str, Any] = {
    "estimate": {
        "alpha": 0.05,
        "vcov": "classical",
        "hc5_k": 0.7,
        "estimator": "full",
        "neighbor_intercept": False,
        "power": 1,
        "normalize": "none",
    },
    "simulate": {
        "n": 400,
        "graph": "er",
        "p": 0.01,
        "power": 0.05,
        "m": 1,
        "nei": 10,
        "p_rewire": 0.05,
        "directed": False,
        "errors": "homo",
        "a": 3.0,
        "b": 1.5,
        "reps": 100,
        "seed": 1,
        "first_rep": 0,
        "estimators": ["full", "partial", "naive"],
        "fixed_graph": False,
        "threads": 0,
    },
    "graph": {
        "directed": False,
        "transpose": False,
    },
    "logging": {
        "level": "INFO",
        "file": "logs/netinterf.log",
    },
}

SECTIONS = tuple(DEFAULT_SETTINGS)


class ConfigManager:
    """
    Settings in three layers: shipped defaults (config/settings.json), an
    optional user file (JSON or TOML), then explicit overrides. Environment
    variables are never read.
    """

    def __init__(self, settings_file: str = SETTINGS_FILE, user_config: Optional[str] = None):
        logger.debug("Initializing ConfigManager...")
        self.settings_file = settings_file
        self.settings = self.load_settings()
        if user_config:
            self.settings = self._merge_dicts(self.settings, self.load_user_config(user_config))
            if not self._validate_settings_schema(self.settings):
                raise ValidationError(f"config file {user_config} does not match the settings layout")
            logger.info(f"Applied user config {user_config}")

    def load_json(self, file_path: str, default: Any = None) -> Any:
        """
        Load JSON file with error handling and logging

        Args:
            file_path: Path to JSON file
            default: Default value if file doesn't exist or is invalid

        Returns:
            Parsed JSON data or default value
        """
        if default is None:
            default = {}

        if not os.path.exists(file_path):
            logger.info(f"Config file not found: {file_path}, using defaults")
            return default

        try:
            with open(file_path, 'r', encoding='utf-8') as f:
                data = json.load(f)
                logger.debug(f"Successfully loaded config: {file_path}")
                return data
        except json.JSONDecodeError as e:
            logger.error(f"Invalid JSON in {file_path}: {e}")
            logger.warning(f"Using default values for {file_path}")
            return default
        except OSError as e:
            logger.error(f"IO error loading {file_path}: {e}")
            return default

    def save_json(self, file_path: str, data: Any):
        """Save data to a JSON file"""
        ensure_dir(os.path.dirname(file_path))
        with open(file_path, 'w', encoding='utf-8') as f:
            json.dump(data, f, indent=2, ensure_ascii=False)
            f.write("\n")
        logger.debug(f"Successfully saved config: {file_path}")

    def load_settings(self) -> Dict[str, Any]:
        """Load the shipped settings, falling back to defaults when malformed"""
        defaults = copy.deepcopy(DEFAULT_SETTINGS)
        settings = self.load_json(self.settings_file, defaults)
        if not isinstance(settings, dict):
            logger.warning("Settings file is not an object, using defaults")
            return defaults

        merged = self._merge_dicts(defaults, settings)
        if not self._validate_settings_schema(merged):
            logger.warning("Settings validation failed, using defaults")
            return copy.deepcopy(DEFAULT_SETTINGS)

        if not os.path.exists(self.settings_file):
            try:
                self.save_json(self.settings_file, merged)
                logger.info(f"Created default settings file: {self.settings_file}")
            except OSError as e:
                logger.debug(f"Could not write {self.settings_file}: {e}")
        return merged

    def load_user_config(self, path: str) -> Dict[str, Any]:
        """
        Read a --config file

        Raises:
            ValidationError if the file is missing or unparseable
        """
        if not os.path.isfile(path):
            raise ValidationError(f"config file not found: {path}")
        try:
            if path.lower().endswith(".toml"):
                with open(path, "rb") as f:
                    data = tomllib.load(f)
            else:
                with open(path, "r", encoding="utf-8") as f:
                    data = json.load(f)
        except (json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
            raise ValidationError(f"could not parse config file {path}: {e}")
        if not isinstance(data, dict):
            raise ValidationError(f"config file {path} must hold a table of sections")
        unknown = [key for key in data if key not in SECTIONS]
        if unknown:
            raise ValidationError(f"unknown config sections in {path}: {', '.join(unknown)}")
        return data

    def apply_overrides(self, section: str, overrides: Dict[str, Any]):
        """Set every non-None override in a section (CLI flags win over files)"""
        if section not in self.settings:
            raise ValidationError(f"unknown settings section {section!r}")
        for key, value in overrides.items():
            if value is not None:
                self.settings[section][key] = value

    def _merge_dicts(self, default: Dict, user: Dict) -> Dict:
        """Recursively merge user dict into default dict"""
        result = default.copy()
        for key, value in user.items():
            if key in result and isinstance(result[key], dict) and isinstance(value, dict):
                result[key] = self._merge_dicts(result[key], value)
            else:
                result[key] = value
        return result

    def get_setting(self, key_path: str, default: Any = None) -> Any:
        """
        Get a setting value using dot notation (e.g., 'estimate.alpha')

        Args:
            key_path: Dot-separated path to setting
            default: Default value if not found

        Returns:
            Setting value or default
        """
        keys = key_path.split('.')
        value = self.settings
        for key in keys:
            if isinstance(value, dict) and key in value:
                value = value[key]
            else:
                return default
        return value

    def _validate_settings_schema(self, settings: Dict[str, Any]) -> bool:
        """
        Validate the settings layout (types of values are checked where they are used)

        Args:
            settings: Settings dictionary to validate

        Returns:
            True if valid, False otherwise
        """
        if not isinstance(settings, dict):
            logger.error("Settings must be a dictionary")
            return False

        for key in SECTIONS:
            if not isinstance(settings.get(key), dict):
                logger.error(f"Missing or malformed settings section: {key}")
                return False

        for key in DEFAULT_SETTINGS["simulate"]:
            if key not in settings["simulate"]:
                logger.warning(f"Missing simulate setting: {key}")
                return False

        estimators = settings["simulate"].get("estimators")
        if isinstance(estimators, str):
            settings["simulate"]["estimators"] = [e.strip() for e in estimators.split(",") if e.strip()]
        elif not isinstance(estimators, list):
            logger.error("simulate.estimators must be a list")
            return False

        return True

    def simulation_config(self) -> SimConfig:
        """SimConfig from the simulate section"""
        sim = self.settings["simulate"]
        try:
            return SimConfig(
                n=int(sim["n"]),
                graph=GraphSpec(
                    kind=str(sim["graph"]),
                    p=float(sim["p"]),
                    power=float(sim["power"]),
                    m=int(sim["m"]),
                    nei=int(sim["nei"]),
                    p_rewire=float(sim["p_rewire"]),
                    directed=bool(sim["directed"]),
                ),
                errors=ErrorSpec(kind=str(sim["errors"]), a=float(sim["a"]), b=float(sim["b"])),
                estimators=tuple(sim["estimators"]),
                reps=int(sim["reps"]),
                base_seed=int(sim["seed"]),
                fixed_graph=bool(sim["fixed_graph"]),
                first_rep=int(sim["first_rep"]),
                alpha=float(self.settings["estimate"]["alpha"]),
            )
        except (TypeError, ValueError) as e:
            if isinstance(e, ValidationError):
                raise
            raise ValidationError(f"invalid simulate setting: {e}")

    def threads(self) -> int:
        return resolve_threads(int(self.settings["simulate"]["threads"]))
