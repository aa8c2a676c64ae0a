from __future__ import annotations

import copy
import os
from typing import Any, Dict, Optional

import yaml
from jsonschema import Draft7Validator

from slln_lab.utils.constants import ALL_VERBS, MAX_FIELD_POINTS
from slln_lab.utils.helpers import SllnLabError, dump_json, get_value_from_dicts

SCHEMA_PATH: str = os.path.join(os.path.dirname(os.path.dirname(__file__)), "config", "schema.yaml")
GLOBAL_DEFAULTS: Dict[str, Any] = {
    "log-level": "INFO",
    "threads": 1,
    "output-dir": "slln-lab-output",
    "max-points": MAX_FIELD_POINTS,
}


class ConfigError(SllnLabError):
    pass


class Config:
    """
    Experiment config: global keys at the top level and one section per verb.

    A key set inside the verb section overrides the same global key. The file is YAML; JSON configs load unchanged.
    """

    def __init__(self, config_path: Optional[str] = None) -> None:
        self.config_path: str = config_path or os.environ.get(
            "SLLN_LAB_CONFIG", os.path.join(os.getcwd(), "config.yaml")
        )
        self.exists()

    def exists(self) -> None:
        if not os.path.isfile(self.config_path):
            raise FileNotFoundError(f"Config file {self.config_path} not found")

    @property
    def data(self) -> Dict[str, Any]:
        with open(self.config_path) as fd:
            try:
                data = yaml.safe_load(fd)
            except yaml.YAMLError as ex:
                raise ConfigError(f"Config file {self.config_path} is not valid YAML/JSON: {ex}") from ex

        if data is None:
            return {}

        if not isinstance(data, dict):
            raise ConfigError(f"Config file {self.config_path} must hold a mapping, got {type(data).__name__}")

        return data

    def verb_data(self, verb: str) -> Dict[str, Any]:
        return self.data.get(verb) or {}

    def get(self, verb: str, key: str, return_on_none: Any = None) -> Any:
        return get_value_from_dicts(
            primary_dict=self.verb_data(verb=verb),
            secondary_dict=self.data,
            key=key,
            return_on_none=GLOBAL_DEFAULTS.get(key) if return_on_none is None else return_on_none,
        )

    def validate(self, verb: str) -> None:
        if verb not in ALL_VERBS:
            raise ConfigError(f"Unknown verb {verb}, expected one of {', '.join(ALL_VERBS)}")

        with open(SCHEMA_PATH) as fd:
            schema = yaml.safe_load(fd)

        errors = sorted(Draft7Validator(schema).iter_errors(self.data), key=lambda _err: list(_err.absolute_path))
        if errors:
            location = "/".join(str(_part) for _part in errors[0].absolute_path) or "<root>"
            raise ConfigError(f"Config {self.config_path} is invalid at {location}: {errors[0].message}")

        if verb not in self.data:
            raise ConfigError(f"Config {self.config_path} has no '{verb}' section")

    def effective(self, verb: str) -> Dict[str, Any]:
        """Global keys with defaults applied plus the verb's own section."""
        data = self.data
        effective: Dict[str, Any] = {_key: _val for _key, _val in data.items() if _key not in ALL_VERBS}
        for key, default in GLOBAL_DEFAULTS.items():
            effective.setdefault(key, default)

        effective[verb] = copy.deepcopy(data.get(verb) or {})
        return effective

    def dump(self, verb: str) -> str:
        return dump_json(self.effective(verb=verb))
