"""TOML experiment configuration.

Keys (all top level):

=========================  =========  ========  ==========================================
key                        type       required  meaning
=========================  =========  ========  ==========================================
setup                      str        yes       ``"a"`` or ``"b"`` (initial-claim range)
true_family                str        yes       family generating the triangles
chosen_family              [str]      yes       families used by the bootstraps
n                          [int]      yes       extra accident years; ``A = I_base + n + 1``
methods                    [str]      yes       original / alternative / intermediate
M                          int        yes       simulated triangles per ``n``
B                          int        yes       bootstrap and oracle replications
alpha                      float      yes       prediction-interval and KS level input
seed                       int        yes       master seed; never defaulted
out_dir                    str        no        output directory (default ``"."``)
I_base                     int        no        default 10
sigma2_scale               float      no        multiplies every variance parameter (default 1)
truncnormal_moment_match   bool       no        default false (plain truncation)
backward_variance          str        no        ``"delta"`` (default) or ``"literal"``
=========================  =========  ========  ==========================================
"""
from __future__ import annotations

import sys
from pathlib import Path

from .bootstrap import BACKWARD_VARIANCES, Method
from .exceptions import ConfigError
from .families import FamilyKind
from .simulation import ExperimentGrid, Setup

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = ["load_config", "parse_config"]

_FAMILIES = {k.value for k in FamilyKind}
_METHODS = {m.value for m in Method}

# key -> (python type(s), required)
SCHEMA = {
    "setup": (str, True),
    "true_family": (str, True),
    "chosen_family": (list, True),
    "n": (list, True),
    "methods": (list, True),
    "M": (int, True),
    "B": (int, True),
    "alpha": ((int, float), True),
    "seed": (int, True),
    "out_dir": (str, False),
    "I_base": (int, False),
    "sigma2_scale": ((int, float), False),
    "truncnormal_moment_match": (bool, False),
    "backward_variance": (str, False),
}


def _typecheck(key, value, types):
    # bool is an int subclass; never accept it where a number is expected
    if isinstance(value, bool) and types is not bool:
        raise ConfigError(f"expected {types}, got a boolean", key)
    if not isinstance(value, types):
        raise ConfigError(f"expected {getattr(types, '__name__', types)}, got {type(value).__name__}", key)


def _list_of(key, values, kind, allowed=None):
    if not values:
        raise ConfigError("must be a non-empty list", key)
    for v in values:
        if isinstance(v, bool) or not isinstance(v, kind):
            raise ConfigError(f"entries must be {kind.__name__}, got {v!r}", key)
        if allowed is not None and v not in allowed:
            raise ConfigError(f"{v!r} is not one of {sorted(allowed)}", key)
    if len(set(values)) != len(values):
        raise ConfigError("entries must be unique", key)


def parse_config(data: dict, base_dir=None) -> ExperimentGrid:
    unknown = sorted(set(data) - set(SCHEMA))
    if unknown:
        raise ConfigError("unknown key", unknown[0])
    for key, (types, required) in SCHEMA.items():
        if key not in data:
            if required:
                raise ConfigError("missing required key", key)
            continue
        _typecheck(key, data[key], types)

    Setup.parse(data["setup"])
    if data["true_family"] not in _FAMILIES:
        raise ConfigError(f"{data['true_family']!r} is not one of {sorted(_FAMILIES)}", "true_family")
    _list_of("chosen_family", data["chosen_family"], str, _FAMILIES)
    _list_of("methods", data["methods"], str, _METHODS)
    _list_of("n", data["n"], int)
    if any(v < 0 for v in data["n"]):
        raise ConfigError("entries must be >= 0", "n")
    if data["M"] < 1:
        raise ConfigError("must be >= 1", "M")
    if data["B"] < 1:
        raise ConfigError("must be >= 1", "B")
    alpha = float(data["alpha"])
    if not 0 < alpha < 1:
        raise ConfigError("must lie in (0, 1)", "alpha")
    if data["B"] < 2 / alpha:
        raise ConfigError(f"B must be >= 2/alpha = {2 / alpha:g}", "B")
    if data["seed"] < 0:
        raise ConfigError("must be >= 0", "seed")
    if data.get("I_base", 10) < 1:
        raise ConfigError("must be >= 1", "I_base")
    if not float(data.get("sigma2_scale", 1.0)) >= 0:
        raise ConfigError("must be >= 0", "sigma2_scale")
    if data.get("backward_variance", "delta") not in BACKWARD_VARIANCES:
        raise ConfigError(f"must be one of {list(BACKWARD_VARIANCES)}", "backward_variance")

    out_dir = data.get("out_dir", ".")
    if base_dir is not None and not Path(out_dir).is_absolute():
        out_dir = str(Path(base_dir) / out_dir)
    return ExperimentGrid(
        setup=data["setup"],
        true_family=data["true_family"],
        chosen_family=tuple(data["chosen_family"]),
        n=tuple(data["n"]),
        methods=tuple(data["methods"]),
        M=data["M"],
        B=data["B"],
        alpha=alpha,
        seed=data["seed"],
        I_base=data.get("I_base", 10),
        sigma2_scale=float(data.get("sigma2_scale", 1.0)),
        truncnormal_moment_match=data.get("truncnormal_moment_match", False),
        backward_variance=data.get("backward_variance", "delta"),
        out_dir=out_dir,
    )


def load_config(path) -> ExperimentGrid:
    """Read and validate a TOML config; a relative ``out_dir`` is taken relative to the file."""
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(data, base_dir=path.parent)
