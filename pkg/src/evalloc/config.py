"""Scenario configuration files: YAML in, validated ScenarioConfig out.

Values resolve in order: built-in defaults, the config file, then dotted
``key=value`` overrides (``weights.delay=0.5``, ``stations.0.price=61``).
A ``summary.json`` written by ``evalloc simulate`` is also accepted; its
embedded ``config`` block is used as the file contents.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path
from typing import Any, Optional

import yaml

from .economics import Station
from .simulation import (
    DEFAULT_SERVICE_RATE,
    EvType,
    ScenarioConfig,
    default_ev_types,
    default_stations,
)


class ConfigError(ValueError):
    """Invalid configuration; the message names the file, line and key."""


def _station_dict(s: Station) -> dict:
    return {"chargers": s.chargers, "service_rate": s.service_rate, "price": s.price, "location": s.location}


DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "epochs": 100,
    "arrival_intensity": 30.0,
    "window": 4,
    "policy": "two_stage",
    "state_update": "quota",
    "weights": {"distance": 1.0, "delay": 0.0, "range_per_soc": 25.0},
    "stage1": {"safety": 0.05, "rate_floor": 1e-6, "tol": 1e-9},
    "stage2": {"overflow_penalty": None},
    "evs": {
        "wtp_range": [80.0, 120.0],
        "position_range": [0.0, 20.0],
        "soc_range": [0.1, 0.9],
        "types": [
            {"base_curvature": t.base_curvature, "anxiety": t.anxiety, "weight": t.weight}
            for t in default_ev_types()
        ],
    },
    "stations": [_station_dict(s) for s in default_stations()],
    "compare": {"policies": ["two_stage", "nearest", "matching"], "seeds": 20},
    "scaling": {
        "station_counts": [3, 5, 8, 12],
        "seeds": 20,
        "policies": ["two_stage", "nearest", "matching"],
        "service_rate": DEFAULT_SERVICE_RATE,
    },
}

# ScenarioConfig field -> dotted path, for mapping validation errors to lines.
_FIELD_PATHS = {
    "stations": "stations",
    "arrival_intensity": "arrival_intensity",
    "epochs": "epochs",
    "window": "window",
    "wtp_range": "evs.wtp_range",
    "position_range": "evs.position_range",
    "soc_range": "evs.soc_range",
    "ev_types": "evs.types",
    "weights": "weights",
    "range_per_soc": "weights.range_per_soc",
    "safety": "stage1.safety",
    "rate_floor": "stage1.rate_floor",
    "state_update": "state_update",
    "policy": "policy",
}


def _line_map(text: str) -> dict[str, int]:
    """Dotted key path -> 1-based line number, from the YAML node tree."""
    lines: dict[str, int] = {}
    root = yaml.compose(text)

    def walk(node, prefix):
        if isinstance(node, yaml.MappingNode):
            for key, value in node.value:
                path = f"{prefix}.{key.value}" if prefix else str(key.value)
                lines[path] = key.start_mark.line + 1
                walk(value, path)
        elif isinstance(node, yaml.SequenceNode):
            for i, item in enumerate(node.value):
                path = f"{prefix}.{i}"
                lines[path] = item.start_mark.line + 1
                walk(item, path)

    if root is not None:
        walk(root, "")
    return lines


class RawConfig:
    """Parsed file contents plus where each key came from."""

    def __init__(self, data: dict, source: str, lines: Optional[dict[str, int]] = None):
        self.data = data
        self.source = source
        self.lines = lines or {}

    def where(self, path: str) -> str:
        probe = path
        while probe:
            if probe in self.lines:
                return f"{self.source}:{self.lines[probe]}"
            probe = probe.rpartition(".")[0]
        return self.source


def read_config(path: Optional[str | Path]) -> RawConfig:
    if path is None:
        return RawConfig({}, "<defaults>")
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"{p}: config file not found")
    text = p.read_text()
    if p.suffix == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}:{exc.lineno}: invalid JSON: {exc.msg}") from None
        if isinstance(data, dict) and "config" in data and isinstance(data["config"], dict):
            data = data["config"]
        return RawConfig(data, str(p))
    try:
        data = yaml.safe_load(text)
        lines = _line_map(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f":{mark.line + 1}" if mark is not None else ""
        raise ConfigError(f"{p}{line}: invalid YAML: {getattr(exc, 'problem', exc)}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{p}:1: top level must be a mapping")
    return RawConfig(data, str(p), lines)


def _merge(base: dict, top: dict, raw: RawConfig, prefix: tuple = ()) -> dict:
    out = copy.deepcopy(base)
    for key, value in top.items():
        path = prefix + (key,)
        dotted = ".".join(map(str, path))
        if key not in base:
            raise ConfigError(f"{raw.where(dotted)}: unknown key '{dotted}'")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{raw.where(dotted)}: '{dotted}' must be a mapping")
            out[key] = _merge(base[key], value, raw, path)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _set_dotted(data: dict, dotted: str, value: Any) -> None:
    parts = dotted.split(".")
    node: Any = data
    for i, part in enumerate(parts):
        last = i == len(parts) - 1
        if isinstance(node, list):
            try:
                idx = int(part)
                node[idx]
            except (ValueError, IndexError):
                raise ConfigError(f"override {dotted}: no list element '{part}'") from None
            if last:
                node[idx] = value
            else:
                node = node[idx]
        elif isinstance(node, dict):
            if part not in node:
                raise ConfigError(f"override {dotted}: unknown key '{'.'.join(parts[: i + 1])}'")
            if last:
                node[part] = value
            else:
                node = node[part]
        else:
            raise ConfigError(f"override {dotted}: '{'.'.join(parts[:i])}' is not a mapping or list")


def parse_override(text: str) -> tuple[str, Any]:
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"override '{text}': expected key=value")
    try:
        parsed = yaml.safe_load(value) if value.strip() else None
    except yaml.YAMLError:
        parsed = value
    return key.strip(), parsed


def resolve(raw: RawConfig, overrides=()) -> dict:
    """Defaults <- file <- overrides, as a plain nested dict."""
    data = _merge(DEFAULTS, raw.data, raw)
    for item in overrides:
        key, value = parse_override(item)
        _set_dotted(data, key, value)
    return data


def _num(data: dict, path: str, raw: RawConfig, kind=float):
    node: Any = data
    for part in path.split("."):
        node = node[int(part)] if isinstance(node, list) else node[part]
    if isinstance(node, str):
        # YAML 1.1 reads exponent literals without a dot (1e-6) as strings.
        try:
            node = float(node)
        except ValueError:
            pass
    if isinstance(node, bool) or not isinstance(node, (int, float)):
        raise ConfigError(f"{raw.where(path)}: '{path}' must be a number, got {node!r}")
    if kind is int:
        if int(node) != node:
            raise ConfigError(f"{raw.where(path)}: '{path}' must be an integer, got {node!r}")
        return int(node)
    return float(node)


def _pair(data: dict, path: str, raw: RawConfig) -> tuple[float, float]:
    group, key = path.split(".")
    value = data[group][key]
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{raw.where(path)}: '{path}' must be a [low, high] pair")
    return (_num(data, f"{path}.0", raw), _num(data, f"{path}.1", raw))


def build_scenario(data: dict, raw: Optional[RawConfig] = None) -> ScenarioConfig:
    raw = raw or RawConfig({}, "<config>")
    stations = []
    if not isinstance(data["stations"], list) or not data["stations"]:
        raise ConfigError(f"{raw.where('stations')}: 'stations' must be a nonempty list")
    for i, st in enumerate(data["stations"]):
        path = f"stations.{i}"
        if not isinstance(st, dict):
            raise ConfigError(f"{raw.where(path)}: '{path}' must be a mapping")
        unknown = set(st) - {"chargers", "service_rate", "price", "location"}
        if unknown:
            raise ConfigError(f"{raw.where(path)}: unknown station key(s) {sorted(unknown)}")
        try:
            stations.append(Station(
                i,
                _num(data, f"{path}.chargers", raw, int),
                _num(data, f"{path}.service_rate", raw) if "service_rate" in st else DEFAULT_SERVICE_RATE,
                _num(data, f"{path}.price", raw),
                _num(data, f"{path}.location", raw),
            ))
        except KeyError as exc:
            raise ConfigError(f"{raw.where(path)}: '{path}' is missing {exc}") from None
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{raw.where(path)}: {exc}") from None
    types = []
    for i, t in enumerate(data["evs"]["types"] or []):
        path = f"evs.types.{i}"
        if not isinstance(t, dict):
            raise ConfigError(f"{raw.where(path)}: '{path}' must be a mapping")
        try:
            types.append(EvType(
                _num(data, f"{path}.base_curvature", raw),
                _num(data, f"{path}.anxiety", raw) if "anxiety" in t else 0.0,
                _num(data, f"{path}.weight", raw) if "weight" in t else 1.0,
            ))
        except KeyError as exc:
            raise ConfigError(f"{raw.where(path)}: '{path}' is missing {exc}") from None
    penalty = data["stage2"]["overflow_penalty"]
    if penalty is not None:
        penalty = _num(data, "stage2.overflow_penalty", raw)
    for key in ("policy", "state_update"):
        if not isinstance(data[key], str):
            raise ConfigError(f"{raw.where(key)}: '{key}' must be a string")
    try:
        return ScenarioConfig(
            stations=stations,
            arrival_intensity=_num(data, "arrival_intensity", raw),
            epochs=_num(data, "epochs", raw, int),
            window=_num(data, "window", raw, int),
            distance_weight=_num(data, "weights.distance", raw),
            delay_weight=_num(data, "weights.delay", raw),
            range_per_soc=_num(data, "weights.range_per_soc", raw),
            safety=_num(data, "stage1.safety", raw),
            rate_floor=_num(data, "stage1.rate_floor", raw),
            tol=_num(data, "stage1.tol", raw),
            seed=_num(data, "seed", raw, int),
            wtp_range=_pair(data, "evs.wtp_range", raw),
            position_range=_pair(data, "evs.position_range", raw),
            soc_range=_pair(data, "evs.soc_range", raw),
            ev_types=tuple(types),
            state_update=data["state_update"],
            policy=data["policy"],
            overflow_penalty=penalty,
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        field_name, _, msg = str(exc).partition(":")
        path = _FIELD_PATHS.get(field_name.strip(), field_name.strip())
        raise ConfigError(f"{raw.where(path)}: '{path}': {msg.strip() or exc}") from None


def scenario_to_dict(cfg: ScenarioConfig, extra: Optional[dict] = None) -> dict:
    """Fully resolved config in file layout; round-trips through build_scenario."""
    data = copy.deepcopy(DEFAULTS)
    data.update(
        seed=cfg.seed,
        epochs=cfg.epochs,
        arrival_intensity=cfg.arrival_intensity,
        window=cfg.window,
        policy=cfg.policy,
        state_update=cfg.state_update,
    )
    data["weights"] = {"distance": cfg.distance_weight, "delay": cfg.delay_weight, "range_per_soc": cfg.range_per_soc}
    data["stage1"] = {"safety": cfg.safety, "rate_floor": cfg.rate_floor, "tol": cfg.tol}
    data["stage2"] = {"overflow_penalty": cfg.overflow_penalty}
    data["evs"] = {
        "wtp_range": list(cfg.wtp_range),
        "position_range": list(cfg.position_range),
        "soc_range": list(cfg.soc_range),
        "types": [{"base_curvature": t.base_curvature, "anxiety": t.anxiety, "weight": t.weight} for t in cfg.ev_types],
    }
    data["stations"] = [_station_dict(s) for s in cfg.stations]
    if extra:
        for key, value in extra.items():
            data[key] = copy.deepcopy(value)
    return data


def load(path=None, overrides=(), seed: Optional[int] = None, policy: Optional[str] = None):
    """Read, merge and validate. Returns ``(ScenarioConfig, resolved_dict)``."""
    raw = read_config(path)
    data = resolve(raw, overrides)
    if seed is not None:
        data["seed"] = seed
    if policy is not None:
        data["policy"] = policy
    cfg = build_scenario(data, raw)
    return cfg, data
