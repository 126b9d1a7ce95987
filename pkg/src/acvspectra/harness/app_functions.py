"""Input checks, config resolution and output writers behind the CLI."""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Union

import pandas as pd

import acvspectra
from acvspectra.config import KNOWN_KEYS, load_config
from acvspectra.errors import ConfigError

logger = logging.getLogger(__name__)

DEFAULT_OUT_DIR = "results"


def config_input_check(path: Optional[str]) -> dict:
    """
    Checks that the --config argument names a readable, well-formed config file.

    Returns a dictionary with:

      - valid (bool): True if the file parsed.
      - value (dict): the parsed key -> raw string mapping ({} without a path).
      - error (str): error message if invalid.
    """
    if path is None:
        return {"valid": True, "value": {}}

    path = path.strip()
    if not path:
        return {"valid": False, "error": "Config path cannot be empty."}

    try:
        return {"valid": True, "value": load_config(path)}
    except ConfigError as exc:
        return {"valid": False, "error": str(exc)}


def n_list_check(values: Optional[Iterable[int]]) -> dict:
    """
    Checks the dimensions passed to the oracle: at least one, all positive, no repeats.

    Returns a dictionary with valid, value (sorted list of n) and error.
    """
    ns = list(values or [])
    if not ns:
        return {"valid": False, "error": "At least one --n is required."}
    if any(n < 1 for n in ns):
        return {"valid": False, "error": f"Every n must be >= 1, got {ns}."}
    if len(set(ns)) != len(ns):
        return {"valid": False, "error": f"Repeated n in {ns}."}
    return {"valid": True, "value": sorted(ns)}


def resolve_config(
    path: Optional[str],
    seed: Optional[int] = None,
    workers: Optional[int] = None,
    out_dir: Optional[str] = None,
) -> Dict[str, str]:
    """
    Parsed config file with command-line flags taking precedence.

    Raises:
        ConfigError: If the file is unreadable or malformed.
    """
    check = config_input_check(path)
    if not check["valid"]:
        raise ConfigError(check["error"])
    config = dict(check["value"])
    for key, value in (("seed", seed), ("workers", workers), ("out_dir", out_dir)):
        if value is not None:
            config[key] = str(value)
    config.setdefault("out_dir", DEFAULT_OUT_DIR)
    return config


def output_dir(config: Dict[str, str]) -> Path:
    path = Path(config.get("out_dir", DEFAULT_OUT_DIR))
    path.mkdir(parents=True, exist_ok=True)
    return path


def _header(config: Dict[str, Any]) -> Dict[str, str]:
    echo = {key: _text(value) for key, value in sorted(config.items()) if key in KNOWN_KEYS and key != "out_dir"}
    echo["version"] = acvspectra.__version__
    return echo


def _text(value: Any) -> str:
    if isinstance(value, (list, tuple)):
        return ",".join(repr(float(v)) for v in value)
    return str(value)


def write_csv(frame: pd.DataFrame, path: Union[str, Path], config: Dict[str, Any]) -> Path:
    """
    Write ``frame`` with a header row, preceded by one ``# key=value`` line per
    resolved config key and the package version.
    """
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as handle:
        for key, value in _header(config).items():
            handle.write(f"# {key}={value}\n")
        frame.to_csv(handle, index=False, lineterminator="\n")
    logger.info("wrote %s (%d rows)", path, len(frame))
    return path


def read_csv(path: Union[str, Path]) -> pd.DataFrame:
    """Read a file written by ``write_csv``, skipping the config header."""
    return pd.read_csv(path, comment="#")


def write_json(payload: Dict[str, Any], path: Union[str, Path], config: Dict[str, Any]) -> Path:
    """Write ``payload`` with the resolved config under a ``config`` key."""
    path = Path(path)
    body = dict(payload)
    body["config"] = _header(config)
    path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info("wrote %s", path)
    return path
