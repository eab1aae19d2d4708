"""Simulation configuration: dataclasses, JSON loading, scenario presets.

Default topology: serving cell A at the origin, neighbor B 20 m along +x, and
a third base station C well outside the walk's coverage. The walk runs along
y = 10 m from the cell edge (equidistant from A and B) toward B.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

from silent_tracker.channel import ChannelError, ChannelParams, Pose
from silent_tracker.codebook import OMNI, Codebook, CodebookError, make_codebook
from silent_tracker.mobility import MobilityError, MobilityModel, Scenario
from silent_tracker.protocol import ProtocolError, ProtocolParams


class ConfigError(ValueError):
    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


# start pose and motion bearing per scenario; overrides in the JSON win
SCENARIO_PRESETS: dict[str, dict[str, Any]] = {
    "walk": {"start": {"x": 10.0, "y": 7.0, "heading": 0.0}, "direction": 0.0},
    "vehicular": {"start": {"x": 10.0, "y": 7.0, "heading": 0.0}, "direction": 0.0},
    # just past B, where A only clears sensitivity on a well-aligned rx beam
    "rotation": {"start": {"x": 21.5, "y": 5.0, "heading": 0.0}},
    "static": {"start": {"x": 10.0, "y": 10.0, "heading": 0.0}},
}


@dataclass(frozen=True)
class CellConfig:
    id: str
    pose: Pose
    codebook: float | str = 20.0
    ssb_period_s: float = 0.02
    ssb_phase_s: float | None = None  # None: drawn uniformly per trial
    radius_m: float = 25.0  # coverage radius used by the overlap-region test

    @property
    def book(self) -> Codebook:
        return make_codebook(self.codebook)


@dataclass(frozen=True)
class MobileConfig:
    codebook: float | str = 20.0
    mobility: MobilityModel = field(default_factory=lambda: mobility_for("walk"))
    channel: ChannelParams = field(default_factory=ChannelParams)

    @property
    def book(self) -> Codebook:
        return make_codebook(self.codebook)


@dataclass(frozen=True)
class ScheduleConfig:
    meas_period_s: float = 0.02
    serving_to_neighbor_ratio: tuple[int, int] = (3, 1)


@dataclass(frozen=True)
class SimConfig:
    cells: tuple[CellConfig, ...]
    mobile: MobileConfig = field(default_factory=MobileConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    protocol: ProtocolParams = field(default_factory=ProtocolParams)
    rach_threshold_dbm: float | None = None  # None: sensitivity + 3
    ra_retry_period_s: float = 0.01
    duration_s: float = 20.0
    seed: int = 0
    serving_cell: str | None = None  # None: first cell

    @property
    def serving_id(self) -> str:
        return self.serving_cell or self.cells[0].id

    @property
    def rach_threshold(self) -> float:
        if self.rach_threshold_dbm is None:
            return self.mobile.channel.sensitivity + 3.0
        return self.rach_threshold_dbm

    @property
    def scenario(self) -> str:
        return self.mobile.mobility.variant.value

    def with_scenario(self, scenario: str, codebook: float | str | None = None) -> SimConfig:
        mob = mobility_for(scenario)
        mobile = replace(self.mobile, mobility=mob)
        if codebook is not None:
            mobile = replace(mobile, codebook=codebook)
        return replace(self, mobile=mobile)

    def with_seed(self, seed: int) -> SimConfig:
        return replace(self, seed=seed)


def mobility_for(scenario: str, overrides: dict[str, Any] | None = None) -> MobilityModel:
    if scenario not in SCENARIO_PRESETS:
        raise ConfigError("mobile.mobility.scenario", f"unknown scenario {scenario!r}")
    preset = {**SCENARIO_PRESETS[scenario], **(overrides or {})}
    st = preset["start"]
    return MobilityModel(
        Scenario(scenario),
        Pose(float(st.get("x", 0.0)), float(st.get("y", 0.0)), float(st.get("heading", 0.0))),
        speed=preset.get("speed"),
        omega=float(preset.get("omega", 120.0)),
        direction=float(preset.get("direction", 0.0)),
    )


def default_cells() -> tuple[CellConfig, ...]:
    return (
        CellConfig("A", Pose(0.0, 0.0, 0.0)),
        CellConfig("B", Pose(20.0, 0.0, 0.0)),
        CellConfig("C", Pose(10.0, -40.0, 0.0)),
    )


def default_config(scenario: str = "walk", codebook: float | str = 20.0, **kw: Any) -> SimConfig:
    cfg = SimConfig(default_cells(), MobileConfig(codebook, mobility_for(scenario)), **kw)
    validate(cfg)
    return cfg


# --- validation ---------------------------------------------------------------


def _ms(value: float, path: str) -> int:
    ms = value * 1000.0
    if not value > 0 or abs(ms - round(ms)) > 1e-6:
        raise ConfigError(path, f"must be a positive whole number of milliseconds, got {value}")
    return int(round(ms))


def validate(cfg: SimConfig) -> SimConfig:
    if not cfg.cells:
        raise ConfigError("cells", "at least one cell is required")
    ids = [c.id for c in cfg.cells]
    if len(set(ids)) != len(ids):
        raise ConfigError("cells", f"duplicate cell ids {ids}")
    if cfg.serving_id not in ids:
        raise ConfigError("serving_cell", f"{cfg.serving_id!r} is not a configured cell")
    for i, c in enumerate(cfg.cells):
        p = f"cells[{i}]"
        try:
            book = c.book
        except CodebookError as e:
            raise ConfigError(f"{p}.codebook", str(e)) from None
        period = _ms(c.ssb_period_s, f"{p}.ssb_period_s")
        if len(book) > period:
            raise ConfigError(f"{p}.ssb_period_s", f"{len(book)} SSB beams do not fit a {period} ms sweep")
        if c.ssb_phase_s is not None and not 0 <= c.ssb_phase_s < c.ssb_period_s:
            raise ConfigError(f"{p}.ssb_phase_s", "must lie in [0, ssb_period_s)")
        if not c.radius_m > 0:
            raise ConfigError(f"{p}.radius_m", "must be positive")
    try:
        cfg.mobile.book
    except CodebookError as e:
        raise ConfigError("mobile.codebook", str(e)) from None
    if _ms(cfg.schedule.meas_period_s, "schedule.meas_period_s") != cfg.protocol.meas_period_ms:
        raise ConfigError("protocol", "protocol meas_period_ms must match schedule.meas_period_s")
    a, b = cfg.schedule.serving_to_neighbor_ratio
    if a < 1 or b < 1:
        raise ConfigError("schedule.serving_to_neighbor_ratio", "both parts must be >= 1")
    _ms(cfg.ra_retry_period_s, "ra_retry_period_s")
    if not cfg.duration_s > 0:
        raise ConfigError("duration_s", "must be positive")
    if cfg.protocol.sensitivity != cfg.mobile.channel.sensitivity:
        raise ConfigError("protocol", "protocol sensitivity must match mobile.channel.sensitivity")
    return cfg


# --- JSON ---------------------------------------------------------------------


def _num(d: dict, key: str, path: str, default: Any = None, kind: type = float) -> Any:
    if key not in d or d[key] is None:
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}", f"expected a number, got {v!r}")
    if kind is int:
        if float(v) != int(v):
            raise ConfigError(f"{path}.{key}", f"expected an integer, got {v!r}")
        return int(v)
    if not math.isfinite(v):
        raise ConfigError(f"{path}.{key}", "must be finite")
    return float(v)


def _obj(d: Any, path: str) -> dict:
    if not isinstance(d, dict):
        raise ConfigError(path, f"expected an object, got {type(d).__name__}")
    return d


def _codebook(d: Any, path: str) -> float | str:
    if d is None:
        return 20.0
    d = _obj(d, path)
    if d.get("omni"):
        return OMNI
    bw = _num(d, "beamwidth_deg", path)
    if bw is None:
        raise ConfigError(path, "needs beamwidth_deg or omni: true")
    return bw


def _pose(d: Any, path: str) -> Pose:
    d = _obj(d, path)
    try:
        return Pose(_num(d, "x", path, 0.0), _num(d, "y", path, 0.0), _num(d, "heading", path, 0.0))
    except ChannelError as e:
        raise ConfigError(path, str(e)) from None


_TOP_KEYS = {"cells", "mobile", "schedule", "protocol", "duration_s", "seed", "serving_cell"}


def config_from_dict(raw: Any) -> SimConfig:
    raw = _obj(raw, "$")
    extra = set(raw) - _TOP_KEYS
    if extra:
        raise ConfigError(f"$.{sorted(extra)[0]}", "unknown key")
    cells_raw = raw.get("cells")
    if cells_raw is None:
        cells = default_cells()
    else:
        if not isinstance(cells_raw, list):
            raise ConfigError("cells", "expected a list")
        cells = []
        for i, c in enumerate(cells_raw):
            p = f"cells[{i}]"
            c = _obj(c, p)
            if "id" not in c:
                raise ConfigError(f"{p}.id", "missing")
            cells.append(
                CellConfig(
                    str(c["id"]),
                    _pose(c.get("pose", {}), f"{p}.pose"),
                    _codebook(c.get("codebook"), f"{p}.codebook"),
                    _num(c, "ssb_period_s", p, 0.02),
                    _num(c, "ssb_phase_s", p, None),
                    _num(c, "radius_m", p, 25.0),
                )
            )
        cells = tuple(cells)

    m = _obj(raw.get("mobile", {}), "mobile")
    mob = _obj(m.get("mobility", {"scenario": "walk"}), "mobile.mobility")
    scen = mob.get("scenario", "walk")
    overrides: dict[str, Any] = {}
    if "start" in mob:
        st = _pose(mob["start"], "mobile.mobility.start")
        overrides["start"] = {"x": st.x, "y": st.y, "heading": st.heading}
    for k in ("speed", "omega", "direction"):
        if k in mob:
            overrides[k] = _num(mob, k, "mobile.mobility")
    try:
        mobility = mobility_for(scen, overrides)
    except MobilityError as e:
        raise ConfigError("mobile.mobility", str(e)) from None

    ch = _obj(m.get("channel", {}), "mobile.channel")
    dflt = ChannelParams()
    try:
        channel = ChannelParams(
            _num(ch, "carrier_freq", "mobile.channel", dflt.carrier_freq),
            _num(ch, "tx_power", "mobile.channel", dflt.tx_power),
            _num(ch, "noise_floor", "mobile.channel", dflt.noise_floor),
            _num(ch, "sensitivity", "mobile.channel", dflt.sensitivity),
            _num(ch, "shadowing_sigma", "mobile.channel", dflt.shadowing_sigma),
        )
    except ChannelError as e:
        raise ConfigError("mobile.channel", str(e)) from None
    mobile = MobileConfig(_codebook(m.get("codebook"), "mobile.codebook"), mobility, channel)

    sc = _obj(raw.get("schedule", {}), "schedule")
    ratio = sc.get("serving_to_neighbor_ratio", [3, 1])
    if not (isinstance(ratio, list) and len(ratio) == 2 and all(isinstance(r, int) for r in ratio)):
        raise ConfigError("schedule.serving_to_neighbor_ratio", "expected [serving, neighbor] integers")
    schedule = ScheduleConfig(_num(sc, "meas_period_s", "schedule", 0.02), (ratio[0], ratio[1]))

    pr = _obj(raw.get("protocol", {}), "protocol")
    known = {"K", "M", "R_max", "edge_threshold_dbm", "rach_threshold_dbm", "ra_retry_period_s", "search_backoff_s", "ewma_alpha", "drop_db"}
    extra = set(pr) - known
    if extra:
        raise ConfigError(f"protocol.{sorted(extra)[0]}", "unknown key")
    try:
        protocol = ProtocolParams(
            sensitivity=channel.sensitivity,
            drop_db=_num(pr, "drop_db", "protocol", 3.0),
            failure_samples=_num(pr, "K", "protocol", 3, int),
            max_unacked=_num(pr, "M", "protocol", 3, int),
            max_preambles=_num(pr, "R_max", "protocol", 4, int),
            edge_threshold=_num(pr, "edge_threshold_dbm", "protocol", None),
            search_backoff_ms=int(round(1000 * _num(pr, "search_backoff_s", "protocol", 0.06))),
            meas_period_ms=_ms(schedule.meas_period_s, "schedule.meas_period_s"),
            ewma_alpha=_num(pr, "ewma_alpha", "protocol", None),
        )
    except ProtocolError as e:
        raise ConfigError("protocol", str(e)) from None

    cfg = SimConfig(
        cells,
        mobile,
        schedule,
        protocol,
        rach_threshold_dbm=_num(pr, "rach_threshold_dbm", "protocol", None),
        ra_retry_period_s=_num(pr, "ra_retry_period_s", "protocol", 0.01),
        duration_s=_num(raw, "duration_s", "$", 20.0),
        seed=_num(raw, "seed", "$", 0, int),
        serving_cell=raw.get("serving_cell"),
    )
    return validate(cfg)


def load_config(path: str | Path) -> SimConfig:
    p = Path(path)
    try:
        raw = json.loads(p.read_text())
    except FileNotFoundError:
        raise ConfigError(str(p), "config file not found") from None
    except OSError as e:
        raise ConfigError(str(p), f"cannot read config ({e.strerror or e})") from None
    except json.JSONDecodeError as e:
        raise ConfigError(str(p), f"invalid JSON at line {e.lineno}: {e.msg}") from None
    return config_from_dict(raw)


def config_to_dict(cfg: SimConfig) -> dict[str, Any]:
    def book(cb):
        return {"omni": True} if cb == OMNI else {"beamwidth_deg": cb}

    mob = cfg.mobile.mobility
    return {
        "cells": [
            {
                "id": c.id,
                "pose": asdict(c.pose),
                "codebook": book(c.codebook),
                "ssb_period_s": c.ssb_period_s,
                "ssb_phase_s": c.ssb_phase_s,
                "radius_m": c.radius_m,
            }
            for c in cfg.cells
        ],
        "serving_cell": cfg.serving_id,
        "mobile": {
            "codebook": book(cfg.mobile.codebook),
            "mobility": {
                "scenario": mob.variant.value,
                "start": asdict(mob.start_pose),
                "speed": mob.speed,
                "omega": mob.omega,
                "direction": mob.direction,
            },
            "channel": asdict(cfg.mobile.channel),
        },
        "schedule": {
            "meas_period_s": cfg.schedule.meas_period_s,
            "serving_to_neighbor_ratio": list(cfg.schedule.serving_to_neighbor_ratio),
        },
        "protocol": {
            "K": cfg.protocol.failure_samples,
            "M": cfg.protocol.max_unacked,
            "R_max": cfg.protocol.max_preambles,
            "edge_threshold_dbm": cfg.protocol.edge,
            "rach_threshold_dbm": cfg.rach_threshold,
            "ra_retry_period_s": cfg.ra_retry_period_s,
            "search_backoff_s": cfg.protocol.search_backoff_ms / 1000.0,
            "ewma_alpha": cfg.protocol.ewma_alpha,
            "drop_db": cfg.protocol.drop_db,
        },
        "duration_s": cfg.duration_s,
        "seed": cfg.seed,
    }
