"""
Flat key-value configuration.

Config files are plain text, one ``key = value`` per line; ``#`` starts a comment.
Values stay strings until a typed accessor reads them, so a parsed config is an
ordinary ``dict`` that callers query with ``get_*(config, key, default)``.

Example::

    law = gaussian
    phi = 0.5
    tail_tol = 1e-3
    variant = banded_I
    n = 1000
    m_n = 10
    replicates = 100
    seed = 20240101
"""

from pathlib import Path
from typing import Dict, List, Optional, Union

from acvspectra.errors import ConfigError

KNOWN_KEYS = frozenset({
    # process
    "law", "theta", "phi", "tail_tol", "seed", "support_bound",
    # matrices
    "variant", "n", "alpha", "m_n", "kernel",
    # ensembles and moments
    "replicates", "h_max", "mc_samples", "fu_samples", "kde_grid",
    # runtime
    "out_dir", "workers",
})


def parse_config_text(text: str) -> Dict[str, str]:
    """
    Parse flat key-value text into a dict of raw strings.

    Args:
        text: Config file contents.

    Returns:
        dict: key -> raw string value, in file order.

    Raises:
        ConfigError: On malformed lines, duplicate keys or unknown keys.
    """
    config: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value in {raw!r}")
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        if key in config:
            raise ConfigError(f"line {lineno}: duplicate config key {key!r}")
        config[key] = value
    return config


def load_config(path: Union[str, Path]) -> Dict[str, str]:
    """Read and parse a config file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"))


def format_config(config: Dict[str, object]) -> str:
    """Render a config dict back to key-value text (sorted keys)."""
    return "".join(f"{key} = {_render(value)}\n" for key, value in sorted(config.items()))


def _render(value: object) -> str:
    if isinstance(value, (list, tuple)):
        return ",".join(repr(float(v)) for v in value)
    return str(value)


# --- Typed accessors ---

def get_str(config: Dict[str, str], key: str, default: Optional[str] = None) -> Optional[str]:
    value = config.get(key, default)
    return None if value is None else str(value)


def get_int(config: Dict[str, str], key: str, default: Optional[int] = None) -> Optional[int]:
    value = config.get(key)
    if value is None:
        return default
    try:
        return int(str(value))
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {value!r}") from None


def get_float(config: Dict[str, str], key: str, default: Optional[float] = None) -> Optional[float]:
    value = config.get(key)
    if value is None:
        return default
    try:
        return float(str(value))
    except ValueError:
        raise ConfigError(f"{key} must be a real number, got {value!r}") from None


def get_float_list(config: Dict[str, str], key: str, default: Optional[List[float]] = None) -> Optional[List[float]]:
    value = config.get(key)
    if value is None:
        return default
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    try:
        return [float(part) for part in str(value).split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"{key} must be a comma-separated list of reals, got {value!r}") from None
