from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import Future, as_completed
from logging import Logger
from typing import Any, Dict, Iterable, List, Optional, Sequence

from colorama import Fore
from simple_logger.logger import get_logger

from slln_lab.utils.constants import (
    CONVERGES_STR,
    DIVERGES_STR,
    FLOAT_FORMAT,
    LOG_FILE_MAX_BYTES,
)


class SllnLabError(Exception):
    pass


def get_value_from_dicts(
    primary_dict: Dict[Any, Any],
    secondary_dict: Dict[Any, Any],
    key: str,
    return_on_none: Optional[Any] = None,
) -> Any:
    """
    Get value from two dictionaries.

    If value is not found in primary_dict, try to get it from secondary_dict, otherwise return return_on_none.
    """
    return primary_dict.get(key, secondary_dict.get(key, return_on_none))


def get_logger_with_params(name: str, config_data: Optional[Dict[str, Any]] = None, verb: str = "") -> Logger:
    """
    Build a logger whose level and file follow the experiment config.

    Verb section values override the global ones; without a config the level comes from SLLN_LAB_LOG_LEVEL.
    """
    config_data = config_data or {}
    verb_data: Dict[str, Any] = config_data.get(verb, {}) if verb else {}

    log_level: str = get_value_from_dicts(
        primary_dict=verb_data,
        secondary_dict=config_data,
        key="log-level",
        return_on_none=os.environ.get("SLLN_LAB_LOG_LEVEL", "INFO"),
    )
    log_file: str = get_value_from_dicts(primary_dict=verb_data, secondary_dict=config_data, key="log-file")
    return get_logger(name=name, filename=log_file, level=log_level, file_max_bytes=LOG_FILE_MAX_BYTES)


def format_float(value: float) -> str:
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"

    return format(value, FLOAT_FORMAT)


def json_safe(value: Any) -> Any:
    """Replace infinities by the strings 'inf' / '-inf' so reports stay strict JSON."""
    if isinstance(value, float) and math.isinf(value):
        return format_float(value)

    if isinstance(value, dict):
        return {_key: json_safe(_val) for _key, _val in value.items()}

    if isinstance(value, (list, tuple)):
        return [json_safe(_val) for _val in value]

    return value


def dump_json(data: Dict[str, Any]) -> str:
    return json.dumps(json_safe(data), sort_keys=True, indent=2)


def write_csv_rows(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)

    with open(path, "w", newline="") as fd:
        writer = csv.writer(fd, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(_val) if isinstance(_val, float) else _val for _val in row])


def colored_verdict(verdict: str) -> str:
    if verdict == CONVERGES_STR:
        return f"{Fore.GREEN}{verdict}{Fore.RESET}"

    if verdict == DIVERGES_STR:
        return f"{Fore.RED}{verdict}{Fore.RESET}"

    return f"{Fore.YELLOW}{verdict}{Fore.RESET}"


def colored_check(passed: bool) -> str:
    return f"{Fore.GREEN}passed{Fore.RESET}" if passed else f"{Fore.RED}failed{Fore.RESET}"


def get_future_results(futures: Dict[Future, int]) -> List[Any]:
    """
    Collect results of futures keyed by task index, returned in index order regardless of completion order.

    Exceptions raised inside a task are re-raised here.
    """
    results: Dict[int, Any] = {}
    for result in as_completed(futures):
        if _exp := result.exception():
            raise _exp

        results[futures[result]] = result.result()

    return [results[_index] for _index in sorted(results)]
