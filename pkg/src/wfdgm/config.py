"""Scenario configuration: presets, YAML loading and schema validation.

A config file is a YAML (or JSON) mapping. Every key is optional when a
``preset`` is named; the file's values are merged over the preset::

    preset: comicon-small
    protocol: [wfdgm, baseline]
    t_d: [5, 30, 60]
    seed: [0, 1, 2, 3, 4]
    scenario: {lattice_spacing: 25}
    weights: {resources: 0.4, peers: 0.2, capacity: 0.2, stability: 0.2}
"""

from __future__ import annotations

import copy
import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Union

import yaml

from .battery import BatteryModelParams
from .context import NormalizationParams, SuitabilityWeights
from .domain import MAX_CAPACITY, MIN_CAPACITY
from .kernel import PROTOCOLS, SimConfig
from .mobility import WorkingDayParams
from .protocol import ProtocolParams
from .scenarios import GridScenario, PoiScenario, WorkingDayScenario

Scenario = Union[GridScenario, PoiScenario, WorkingDayScenario]


class ConfigError(ValueError):
    pass


PRESETS: dict[str, dict[str, Any]] = {
    # 1000 seats; a 20 x 25 grid only has 500 cells, so 40 x 25 keeps the headcount
    "concert": {
        "node_count": 1000,
        "duration": 3 * 3600,
        "scenario": {"kind": "grid", "rows": 40, "cols": 25, "spacing": 0.7},
    },
    "concert-small": {
        "node_count": 200,
        "duration": 3 * 3600,
        "scenario": {"kind": "grid", "rows": 10, "cols": 20, "spacing": 1.0},
    },
    "comicon": {
        "node_count": 2000,
        "duration": 4 * 3600,
        "scenario": {"kind": "poi_walk", "width": 4000.0, "height": 2000.0, "n_pois": 575},
    },
    "comicon-small": {
        "node_count": 200,
        "duration": 2 * 3600,
        "scenario": {"kind": "poi_walk", "width": 800.0, "height": 400.0, "n_pois": 60},
    },
    "helsinki": {
        "node_count": 4000,
        "duration": 24 * 3600,
        "scenario": {
            "kind": "working_day",
            "width": 5000.0,
            "height": 4000.0,
            "n_offices": 40,
            "n_evening_spots": 25,
            "phase_hours": [8.0, 17.0, 20.0],
            "day_hours": 24.0,
        },
    },
    "helsinki-small": {
        "node_count": 200,
        "duration": 8 * 3600,
        "scenario": {"kind": "working_day"},
    },
}

_TOP_KEYS = {
    "preset",
    "name",
    "scenario",
    "node_count",
    "duration",
    "tick",
    "radio_range",
    "capacity_range",
    "protocol",
    "t_d",
    "seed",
    "protocol_params",
    "weights",
    "normalization",
    "battery",
    "output",
    "trace",
}
_PROTOCOL_KEYS = {"res_th", "t_b", "t_b_travel", "p0", "w_st", "t_st"}
_SCENARIO_TYPES = {"grid": GridScenario, "poi_walk": PoiScenario, "working_day": WorkingDayParams}


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    scenario: Scenario
    node_count: int
    duration: float
    protocols: tuple[str, ...] = PROTOCOLS
    t_d: tuple[float, ...] = (30.0,)
    seeds: tuple[int, ...] = (0,)
    tick: float = 1.0
    radio_range: float = 100.0
    capacity_range: tuple[int, int] = (MIN_CAPACITY, MAX_CAPACITY)
    protocol_params: ProtocolParams = ProtocolParams()
    battery: BatteryModelParams = BatteryModelParams()
    output: str = "runs"
    trace: bool = False

    def sim_config(self, t_d: float, seed: int, check_invariants: bool = False) -> SimConfig:
        return SimConfig(
            duration=self.duration,
            node_count=self.node_count,
            tick=self.tick,
            t_d=t_d,
            radio_range=self.radio_range,
            seed=seed,
            capacity_range=self.capacity_range,
            trace=self.trace,
            check_invariants=check_invariants,
        )

    def params_for(self, t_d: float) -> ProtocolParams:
        return dataclasses.replace(self.protocol_params, t_d=t_d)

    def single(self, protocol: str, t_d: float, seed: int) -> "ScenarioConfig":
        return dataclasses.replace(self, protocols=(protocol,), t_d=(t_d,), seeds=(seed,))

    def grid(self) -> list[tuple[str, float, int]]:
        return [(p, td, s) for p in self.protocols for td in self.t_d for s in self.seeds]


# ---------------------------------------------------------------------------
# building from plain mappings


def _check_keys(d: dict, allowed, where: str) -> None:
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(d).__name__}")
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(map(str, unknown))}")


def _dataclass_from(cls, d: dict, where: str):
    names = {f.name for f in dataclasses.fields(cls)}
    _check_keys(d, names, where)
    kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _as_list(v, conv, where: str) -> tuple:
    items = v if isinstance(v, (list, tuple)) else [v]
    if not items:
        raise ConfigError(f"{where}: must not be empty")
    try:
        return tuple(conv(x) for x in items)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _number(v, conv, where: str):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {v!r}")
    return conv(v)


def _scenario_from(d: dict) -> Scenario:
    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in _SCENARIO_TYPES:
        raise ConfigError(f"scenario.kind must be one of {sorted(_SCENARIO_TYPES)}, got {kind!r}")
    built = _dataclass_from(_SCENARIO_TYPES[kind], d, f"scenario ({kind})")
    return WorkingDayScenario(built) if kind == "working_day" else built


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            if k == "scenario" and "kind" in v and v["kind"] != out[k].get("kind"):
                out[k] = copy.deepcopy(v)
            else:
                out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def build_config(raw: dict) -> ScenarioConfig:
    """Validate a mapping (after preset resolution) into a :class:`ScenarioConfig`."""
    _check_keys(raw, _TOP_KEYS, "config")
    raw = dict(raw)
    preset = raw.pop("preset", None)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(sorted(PRESETS))}")
        raw = _merge(PRESETS[preset], raw)
        raw.setdefault("name", preset)
    for key in ("scenario", "node_count", "duration"):
        if key not in raw:
            raise ConfigError(f"config: missing {key!r} (or name a preset)")

    protocols = _as_list(raw.get("protocol", list(PROTOCOLS)), str, "protocol")
    for p in protocols:
        if p not in PROTOCOLS:
            raise ConfigError(f"protocol: unknown {p!r}; choose from {', '.join(PROTOCOLS)}")
    t_d = _as_list(raw.get("t_d", 30.0), float, "t_d")
    seeds = _as_list(raw.get("seed", 0), int, "seed")

    pp_raw = raw.get("protocol_params", {})
    _check_keys(pp_raw, _PROTOCOL_KEYS, "protocol_params")
    weights = _dataclass_from(SuitabilityWeights, raw.get("weights", {}), "weights")
    norm = _dataclass_from(NormalizationParams, raw.get("normalization", {}), "normalization")
    pp = _dataclass_from(
        ProtocolParams,
        {**pp_raw, "t_d": t_d[0], "weights": weights, "norm": norm},
        "protocol_params",
    )
    battery = _dataclass_from(BatteryModelParams, raw.get("battery", {}), "battery")

    cap = _as_list(raw.get("capacity_range", [MIN_CAPACITY, MAX_CAPACITY]), int, "capacity_range")
    if len(cap) != 2:
        raise ConfigError("capacity_range: expected [low, high]")

    cfg = ScenarioConfig(
        name=str(raw.get("name", "custom")),
        scenario=_scenario_from(raw["scenario"]),
        node_count=_number(raw["node_count"], int, "node_count"),
        duration=_number(raw["duration"], float, "duration"),
        protocols=protocols,
        t_d=t_d,
        seeds=seeds,
        tick=_number(raw.get("tick", 1.0), float, "tick"),
        radio_range=_number(raw.get("radio_range", 100.0), float, "radio_range"),
        capacity_range=(cap[0], cap[1]),
        protocol_params=pp,
        battery=battery,
        output=str(raw.get("output", "runs")),
        trace=bool(raw.get("trace", False)),
    )
    # surface kernel-level errors (tick vs t_d, capacities) before any run starts
    for td in cfg.t_d:
        try:
            cfg.sim_config(td, cfg.seeds[0]).validate()
            cfg.params_for(td)
        except ValueError as exc:
            raise ConfigError(f"t_d={td:g}: {exc}") from exc
    return cfg


def read_raw(path) -> dict:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: parse error: {exc}") from exc
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return raw


def load_config(path) -> ScenarioConfig:
    return build_config(read_raw(path))


def preset_config(name: str) -> ScenarioConfig:
    return build_config({"preset": name})


# ---------------------------------------------------------------------------
# echo


def _plain(v):
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    return v


def to_dict(cfg: ScenarioConfig) -> dict:
    """Fully resolved mapping; ``build_config(to_dict(cfg)) == cfg``."""
    sc = cfg.scenario
    if isinstance(sc, WorkingDayScenario):
        scenario = {"kind": "working_day", **dataclasses.asdict(sc.params)}
    else:
        scenario = {"kind": sc.kind, **dataclasses.asdict(sc)}
    pp = cfg.protocol_params
    return {
        "name": cfg.name,
        "scenario": {k: _plain(v) for k, v in scenario.items()},
        "node_count": cfg.node_count,
        "duration": cfg.duration,
        "tick": cfg.tick,
        "radio_range": cfg.radio_range,
        "capacity_range": list(cfg.capacity_range),
        "protocol": list(cfg.protocols),
        "t_d": list(cfg.t_d),
        "seed": list(cfg.seeds),
        "protocol_params": {
            "res_th": pp.res_th,
            "t_b": pp.t_b,
            "t_b_travel": pp.t_b_travel,
            "p0": pp.p0,
            "w_st": list(pp.w_st),
            "t_st": pp.t_st,
        },
        "weights": dataclasses.asdict(pp.weights),
        "normalization": dataclasses.asdict(pp.norm),
        "battery": dataclasses.asdict(cfg.battery),
        "output": cfg.output,
        "trace": cfg.trace,
    }


def dump_config(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=True, default_flow_style=False)
