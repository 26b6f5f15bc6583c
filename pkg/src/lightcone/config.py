"""Run configuration: a flat JSON key schema, validation and content hashing.

Every command accepts a fixed set of keys.  Values come from an optional JSON
file and are overridden by ``--key value`` flags; anything outside the
command's key set is rejected.  Defaults are filled in after validation so the
stored config is complete and its hash is stable.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass
from typing import Any

from .bounds import VARIANTS
from .dynamics import METHODS
from .errors import InvalidInput
from .lattice import METRICS
from .model import DEFAULT_SITE_CAP, INTERACTIONS, PAULI_KINDS

COMMANDS = ("simulate", "bound", "front", "verify", "sweep")
WORKERS_ENV = "LIGHTCONE_WORKERS"
# keys that change where or how fast a run happens, never what it computes
UNHASHED_KEYS = ("outdir", "workers")


class ConfigError(InvalidInput):
    """Invalid configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class Key:
    kind: str  # float | int | str | floats | ints | grid
    choices: tuple | None = None
    check: Any = None  # (predicate, description)


def _positive(x):
    return x > 0


def _finite_positive(x):
    return math.isfinite(x) and x > 0


SCHEMA: dict[str, Key] = {
    "command": Key("str", COMMANDS),
    "alpha": Key("float", check=(_positive, "must be > 0")),
    "j0": Key("float", check=(_finite_positive, "must be finite and > 0")),
    "chi": Key("float", check=(lambda x: math.isfinite(x) and x >= 1, "must be finite and >= 1")),
    "outdir": Key("str"),
    "workers": Key("int", check=(_positive, "must be >= 1")),
    "seed": Key("int", check=(lambda x: x >= 0, "must be >= 0")),
    "extents": Key("ints", check=(lambda xs: 1 <= len(xs) <= 3 and all(x >= 2 for x in xs),
                                  "needs 1 to 3 entries, each >= 2")),
    "metric": Key("str", METRICS),
    "dimension": Key("int", (1, 2, 3)),
    "times": Key("floats"),
    "t_min": Key("float", check=(lambda x: x >= 0, "must be >= 0")),
    "t_max": Key("float", check=(_finite_positive, "must be finite and > 0")),
    "t_step": Key("float", check=(_finite_positive, "must be finite and > 0")),
    "t_count": Key("int", check=(lambda x: x >= 2, "must be >= 2")),
    "t_spacing": Key("str", ("linear", "log")),
    "interaction": Key("str", tuple(INTERACTIONS)),
    "part": Key("str", ("full", "short", "long")),
    "a_kind": Key("str", PAULI_KINDS),
    "b_kind": Key("str", PAULI_KINDS),
    "a_site": Key("int"),
    "probes": Key("ints"),
    "method": Key("str", METHODS),
    "site_cap": Key("int", check=(_positive, "must be >= 1")),
    "variant": Key("str", VARIANTS),
    "chi_mode": Key("str", ("numeric", "scaling")),
    "source": Key("str", ("lattice", "chain")),
    "v": Key("float", check=(_finite_positive, "must be finite and > 0")),
    "r_values": Key("floats", check=(lambda xs: len(xs) > 0 and all(x > 0 for x in xs),
                                     "needs at least one entry, all > 0")),
    "r_min": Key("float", check=(_finite_positive, "must be finite and > 0")),
    "r_max": Key("float", check=(_finite_positive, "must be finite and > 0")),
    "r_count": Key("int", check=(lambda x: x >= 2, "must be >= 2")),
    "r_spacing": Key("str", ("linear", "log")),
    "epsilon": Key("float", check=(lambda x: 0 < x < 2, "must lie in (0, 2)")),
    "fit_r_min": Key("float", check=(_finite_positive, "must be finite and > 0")),
    "fit_r_max": Key("float", check=(_finite_positive, "must be finite and > 0")),
    "beta": Key("floats", check=(lambda xs: all(x > 0 for x in xs), "entries must be > 0")),
    "beta_times": Key("floats", check=(lambda xs: len(xs) > 0 and all(x > 0 for x in xs),
                                       "needs at least one entry, all > 0")),
    "R": Key("float", check=(_finite_positive, "must be finite and > 0")),
    "quasilocal_sites": Key("int", check=(lambda x: x >= 2, "must be >= 2")),
    "quasilocal_times": Key("floats", check=(lambda xs: len(xs) > 0 and all(x > 0 for x in xs),
                                             "needs at least one entry, all > 0")),
    "quasilocal_interaction": Key("str", tuple(INTERACTIONS)),
    "lmax": Key("int", check=(lambda x: x >= 0, "must be >= 0")),
    "sweep_command": Key("str", ("simulate", "bound", "front", "verify")),
    "grid": Key("grid"),
}

_BASE = ("command", "alpha", "j0", "chi", "outdir", "workers", "seed")
_LATTICE = ("extents", "metric")
_TIMES = ("times", "t_min", "t_max", "t_step", "t_count", "t_spacing")
_RANGE = ("r_values", "r_min", "r_max", "r_count", "r_spacing")
_CURVE = ("variant", "chi_mode", "source", "v", "dimension")

COMMAND_KEYS = {
    "simulate": _BASE + _LATTICE + _TIMES
    + ("interaction", "part", "a_kind", "a_site", "b_kind", "probes", "method", "site_cap"),
    "bound": _BASE + _LATTICE + _TIMES + _RANGE + _CURVE,
    "front": _BASE + _LATTICE + _TIMES + _RANGE + _CURVE
    + ("epsilon", "fit_r_min", "fit_r_max", "beta", "beta_times"),
    "verify": _BASE + _LATTICE
    + ("R", "quasilocal_sites", "quasilocal_times", "quasilocal_interaction", "lmax", "method"),
}
SWEEP_OWN_KEYS = ("command", "sweep_command", "grid", "outdir", "workers", "seed")

_COMMON_DEFAULTS = {"j0": 1.0, "chi": 1.0, "outdir": "runs", "seed": 0, "metric": "euclidean"}
DEFAULTS = {
    "simulate": {"interaction": "XX", "part": "full", "a_kind": "Z", "a_site": 0, "b_kind": "Z",
                 "probes": None, "method": "dense_expm", "site_cap": DEFAULT_SITE_CAP},
    "bound": {"variant": "paper_optimized", "chi_mode": "numeric", "source": "lattice", "v": 1.0},
    "front": {"variant": "scaling_form", "chi_mode": "numeric", "source": "lattice", "v": 1.0,
              "epsilon": 0.1, "fit_r_min": None, "fit_r_max": None, "beta": [],
              "beta_times": [100.0, 316.22776601683796, 1000.0, 3162.2776601683795, 10000.0]},
    "verify": {"quasilocal_sites": None, "quasilocal_times": [0.1, 0.2, 0.5],
               "quasilocal_interaction": "XY", "lmax": 10, "method": "dense_expm"},
}
_RANGE_DEFAULTS = {
    "bound": {"r_min": 1.0, "r_count": 20, "r_spacing": "linear"},
    "front": {"r_min": 1e4, "r_max": 1e6, "r_count": 41, "r_spacing": "log"},
}


# --------------------------------------------------------------------------
# coercion


def _as_float(key: str, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key, f"expected a number, got {value!r}")
    out = float(value)
    if math.isnan(out):
        raise ConfigError(key, "must not be NaN")
    return out


def _as_int(key: str, value) -> int:
    if isinstance(value, float) and value.is_integer():
        value = int(value)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(key, f"expected an integer, got {value!r}")
    return value


def _as_list(key: str, value) -> list:
    if isinstance(value, (list, tuple)):
        return list(value)
    return [value]


def coerce(key: str, value):
    """Convert one raw value to its schema type and check its constraint."""
    if key not in SCHEMA:
        raise ConfigError(key, "unknown key")
    spec = SCHEMA[key]
    if value is None:
        return None
    if spec.kind == "float":
        out = _as_float(key, value)
    elif spec.kind == "int":
        out = _as_int(key, value)
    elif spec.kind == "str":
        if not isinstance(value, str):
            raise ConfigError(key, f"expected a string, got {value!r}")
        out = value
    elif spec.kind == "floats":
        out = [_as_float(key, v) for v in _as_list(key, value)]
    elif spec.kind == "ints":
        out = [_as_int(key, v) for v in _as_list(key, value)]
    else:
        if not isinstance(value, dict):
            raise ConfigError(key, f"expected an object mapping keys to value lists, got {value!r}")
        out = {str(k): _as_list(key, v) for k, v in value.items()}
    if spec.choices is not None and out not in spec.choices:
        raise ConfigError(key, f"expected one of {list(spec.choices)}, got {out!r}")
    if spec.check is not None:
        predicate, description = spec.check
        if not predicate(out):
            raise ConfigError(key, f"{description}, got {out!r}")
    return out


# --------------------------------------------------------------------------
# normalization


def _require(data: dict, key: str) -> None:
    if data.get(key) is None:
        raise ConfigError(key, "missing required key")


def _conflict(data: dict, key: str, others) -> None:
    clash = [k for k in others if data.get(k) is not None]
    if data.get(key) is not None and clash:
        raise ConfigError(key, f"conflicts with {', '.join(clash)}")


def _normalize_times(data: dict, command: str) -> None:
    _conflict(data, "times", ("t_min", "t_max", "t_step", "t_count", "t_spacing"))
    _conflict(data, "t_step", ("t_count",))
    if data.get("t_step") is not None and data.get("t_spacing") == "log":
        raise ConfigError("t_step", "conflicts with t_spacing=log")
    if data.get("times") is not None:
        times = data["times"]
        if not times or times[0] < 0 or any(b < a for a, b in zip(times, times[1:])):
            raise ConfigError("times", "must be non-empty, ascending and >= 0")
        for k in ("t_min", "t_max", "t_step", "t_count", "t_spacing"):
            data.pop(k, None)
        return
    data.pop("times", None)
    if command == "front":
        # automatic log grid wide enough to hold the front of every r
        if data.get("t_step") is None:
            data["t_count"] = data.get("t_count") or 2000
            data["t_spacing"] = data.get("t_spacing") or "log"
        if data.get("t_min") is None:
            data["t_min"] = 1e-3
        if data.get("t_max") is None:
            r = data["r_values"] if data.get("r_values") else [data["r_max"]]
            data["t_max"] = float(max(r))
    if data.get("t_max") is None:
        raise ConfigError("times", "missing required key (give times, or t_max with t_step or t_count)")
    if data.get("t_step") is None and data.get("t_count") is None:
        raise ConfigError("t_step", "missing required key (t_max needs t_step or t_count)")
    if data.get("t_min") is None:
        data["t_min"] = 0.0
    if data.get("t_step") is not None:
        data.pop("t_count", None)
        data.pop("t_spacing", None)
    else:
        data.pop("t_step", None)
        data["t_spacing"] = data.get("t_spacing") or "linear"
        if data["t_spacing"] == "log" and data["t_min"] <= 0:
            raise ConfigError("t_min", "log spacing needs t_min > 0")
    if data["t_max"] <= data["t_min"]:
        raise ConfigError("t_max", "must exceed t_min")


def _normalize_range(data: dict, command: str) -> None:
    _conflict(data, "r_values", ("r_min", "r_max", "r_count", "r_spacing"))
    if data.get("r_values") is not None:
        for k in ("r_min", "r_max", "r_count", "r_spacing"):
            data.pop(k, None)
        return
    data.pop("r_values", None)
    for k, v in _RANGE_DEFAULTS[command].items():
        if data.get(k) is None:
            data[k] = v
    _require(data, "r_max")
    if data["r_max"] <= data["r_min"]:
        raise ConfigError("r_max", "must exceed r_min")


def _check_lattice(data: dict) -> None:
    _require(data, "extents")
    n_sites = math.prod(data["extents"])
    for key in ("a_site",):
        if key in data and not 0 <= data[key] < n_sites:
            raise ConfigError(key, f"site {data[key]} outside 0..{n_sites - 1}")
    if data.get("probes") is not None:
        bad = [j for j in data["probes"] if not 0 <= j < n_sites]
        if bad or not data["probes"]:
            raise ConfigError("probes", f"need sites within 0..{n_sites - 1}, got {data['probes']}")


def normalize(raw: dict) -> dict:
    """Validate ``raw`` and return the complete config with defaults filled."""
    command = raw.get("command")
    if command not in COMMANDS:
        raise ConfigError("command", f"expected one of {list(COMMANDS)}, got {command!r}")
    if command == "sweep":
        return _normalize_sweep(raw)
    allowed = COMMAND_KEYS[command]
    data = {}
    for key, value in raw.items():
        if key not in allowed:
            raise ConfigError(key, f"unknown key for command {command!r}")
        data[key] = coerce(key, value)
    for k, v in _COMMON_DEFAULTS.items():
        if k in allowed and data.get(k) is None:
            data[k] = v
    for k, v in DEFAULTS[command].items():
        if k not in data:
            data[k] = v
    _require(data, "alpha")
    if data.get("workers") is None:
        data["workers"] = os.cpu_count() or 1

    if command in ("simulate", "verify"):
        _check_lattice(data)
        if command == "verify":
            _require(data, "R")
            if data["quasilocal_sites"] is not None and data["quasilocal_sites"] > DEFAULT_SITE_CAP:
                raise ConfigError("quasilocal_sites", f"dense dynamics capped at {DEFAULT_SITE_CAP} sites")
        data.pop("dimension", None)
    else:
        _normalize_range(data, command)
        needs_lattice = data["source"] == "lattice" and data["variant"] != "scaling_form"
        if needs_lattice:
            _check_lattice(data)
        if data.get("extents") is not None:
            if data.get("dimension") is not None and data["dimension"] != len(data["extents"]):
                raise ConfigError("dimension", "conflicts with extents")
            data["dimension"] = len(data["extents"])
        elif data["source"] == "chain":
            if data.get("dimension") not in (None, 1):
                raise ConfigError("dimension", "source=chain is one-dimensional")
            data["dimension"] = 1
        elif data.get("dimension") is None:
            data["dimension"] = 1
        if data["variant"] == "hastings_koma":
            r = data.get("r_values") or [data["r_min"]]
            if min(r) < 1:
                raise ConfigError("r_min", "hastings_koma needs r >= 1")
        if command == "front":
            if data["fit_r_min"] and data["fit_r_max"] and data["fit_r_max"] <= data["fit_r_min"]:
                raise ConfigError("fit_r_max", "must exceed fit_r_min")
    if command in ("simulate", "bound", "front"):
        _normalize_times(data, command)
    _apply_worker_env(data)
    return {k: data[k] for k in sorted(data)}


def _normalize_sweep(raw: dict) -> dict:
    _require(raw, "sweep_command")
    sub = coerce("sweep_command", raw["sweep_command"])
    allowed = set(SWEEP_OWN_KEYS) | set(COMMAND_KEYS[sub])
    data = {}
    for key, value in raw.items():
        if key not in allowed:
            raise ConfigError(key, f"unknown key for a {sub!r} sweep")
        data[key] = coerce(key, value)
    grid = data.get("grid")
    if not grid:
        raise ConfigError("grid", "sweep needs a non-empty grid")
    for key, values in grid.items():
        if key not in COMMAND_KEYS[sub] or key in SWEEP_OWN_KEYS:
            raise ConfigError("grid", f"key {key!r} cannot be swept for {sub!r}")
        if not values:
            raise ConfigError("grid", f"no values given for {key!r}")
    for k in ("outdir", "seed"):
        if data.get(k) is None:
            data[k] = _COMMON_DEFAULTS[k]
    if data.get("workers") is None:
        data["workers"] = os.cpu_count() or 1
    _apply_worker_env(data)
    return {k: data[k] for k in sorted(data)}


def _apply_worker_env(data: dict) -> None:
    env = os.environ.get(WORKERS_ENV)
    if env is None or env == "":
        return
    try:
        workers = int(env)
    except ValueError:
        raise ConfigError(WORKERS_ENV, f"expected a positive integer, got {env!r}") from None
    if workers < 1:
        raise ConfigError(WORKERS_ENV, f"expected a positive integer, got {env!r}")
    data["workers"] = workers


# --------------------------------------------------------------------------
# config object


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(data: dict) -> str:
    hashed = {k: v for k, v in data.items() if k not in UNHASHED_KEYS}
    return hashlib.sha256(canonical_json(hashed).encode()).hexdigest()


@dataclass(frozen=True)
class RunConfig:
    data: dict

    @classmethod
    def from_raw(cls, raw: dict) -> "RunConfig":
        return cls(normalize(raw))

    @property
    def command(self) -> str:
        return self.data["command"]

    @property
    def hash(self) -> str:
        return config_hash(self.data)

    def __getitem__(self, key: str):
        return self.data[key]

    def get(self, key: str, default=None):
        return self.data.get(key, default)


def parse_flag_value(text: str):
    """JSON when it parses, comma-separated list when it has commas, else a string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    if "," in text:
        return [parse_flag_value(part.strip()) for part in text.split(",")]
    return text


def parse_config(command: str, config_path: str | None = None, flags: dict | None = None) -> RunConfig:
    """Merge a JSON config file with flag overrides and validate."""
    raw: dict = {}
    if config_path is not None:
        try:
            with open(config_path) as fh:
                raw = json.load(fh)
        except FileNotFoundError:
            raise ConfigError("config", f"file not found: {config_path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"not valid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config", "top level must be a JSON object")
    if raw.get("command") not in (None, command):
        raise ConfigError("command", f"file says {raw['command']!r} but {command!r} was requested")
    raw = dict(raw) | dict(flags or {}) | {"command": command}
    return RunConfig.from_raw(raw)
