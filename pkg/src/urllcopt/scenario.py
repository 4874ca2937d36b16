"""Scenario description and its INI-style file format.

Files carry human units (dBm, ms, MHz); everything is converted to linear SI
once, here. Unknown keys are rejected so typos do not silently fall back to
defaults.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .fbl_channel import DomainError, LinkParams
from .queueing import ArrivalSpec
from .solver import SolverConfig
from .units import dbm_to_watts, path_gain

SPLIT_MODES = ("equal", "grid", "explicit")

# stream identifiers for seeded randomness
STREAM_PLACEMENT = 1
STREAM_QUEUE = 2
STREAM_LINK = 3
STREAM_TRACE = 4
STREAM_AVAILABILITY = 5


class ScenarioError(ValueError):
    """Malformed scenario file; the message names the offending line and field."""


@dataclass(frozen=True)
class QosBudget:
    max_delay: float = 1.1e-3
    backhaul_delay: float = 1e-4
    loss_max: float = 1e-7
    overflow: float = 1e-15
    split_mode: str = "equal"
    split_step: float = 0.05
    explicit_split: Optional[tuple[float, float, float]] = None

    def __post_init__(self) -> None:
        if not self.max_delay > 0 or self.backhaul_delay < 0:
            raise DomainError("delays must be positive")
        if not 0 < self.loss_max < 0.5:
            raise DomainError("loss_max must lie in (0, 0.5)")
        if not 0 < self.overflow < 1:
            raise DomainError("overflow probability must lie in (0, 1)")
        if self.split_mode not in SPLIT_MODES:
            raise DomainError(f"split mode must be one of {SPLIT_MODES}")
        if not 0 < self.split_step <= 1:
            raise DomainError("split step must lie in (0, 1]")
        if self.split_mode == "explicit":
            if self.explicit_split is None or len(self.explicit_split) != 3:
                raise DomainError("explicit split needs eps_u, eps_d and eps_q")
            if any(not e > 0 for e in self.explicit_split):
                raise DomainError("every split component must be positive")
            if math.fsum(self.explicit_split) > self.loss_max * (1 + 1e-12):
                raise DomainError("split components exceed loss_max")

    def budget_frames(self, frame_duration: float) -> int:
        """Frames available to uplink, queueing and downlink together."""
        return math.floor((self.max_delay - self.backhaul_delay) / frame_duration + 1e-9)


@dataclass(frozen=True)
class SimConfig:
    frames: int = 1_000_000
    drops: int = 10_000
    seed: int = 1
    shadowing_db: float = 8.0
    relaxed_eps: Optional[float] = None

    def __post_init__(self) -> None:
        if self.frames < 1 or self.drops < 1:
            raise DomainError("frames and drops must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if self.shadowing_db < 0:
            raise DomainError("shadowing deviation must be non-negative")
        if self.relaxed_eps is not None and not 0 < self.relaxed_eps < 1:
            raise DomainError("relaxed eps must lie in (0, 1)")


@dataclass(frozen=True)
class ScenarioConfig:
    bs_count: int = 3
    antennas: int = 8
    cell_radius: float = 250.0
    min_distance: float = 50.0
    reuse_inverse: float = 3.0
    coherence_bandwidth: float = 0.5e6
    bandwidth_unit: float = 1e3
    frame_duration: float = 1e-4
    n_max: int = 10
    sensors: int = 3000
    packet_rate: float = 100.0
    packet_bits: float = 160.0
    ul_power: float = dbm_to_watts(23.0)
    dl_power: float = dbm_to_watts(46.0)
    noise_density: float = dbm_to_watts(-174.0)
    snr_loss_factor: float = 1.0
    qos: QosBudget = field(default_factory=QosBudget)
    sim: SimConfig = field(default_factory=SimConfig)
    sweep: tuple[tuple[str, tuple[float, ...]], ...] = ()

    def __post_init__(self) -> None:
        if self.sensors < 0:
            raise DomainError("sensor count must be non-negative")
        if not 0 < self.min_distance <= self.cell_radius:
            raise DomainError("need 0 < min_distance <= cell_radius")
        if not self.reuse_inverse >= 1:
            raise DomainError("inverse reuse factor must be >= 1")
        if not 0 <= self.arrival_probability <= 1:
            raise DomainError("per-frame arrival probability must lie in [0, 1]")
        if self.n_max < 1 or self.antennas < 1 or self.bs_count < 1:
            raise DomainError("counts must be positive")

    # derived quantities -------------------------------------------------
    @property
    def arrival_probability(self) -> float:
        return self.packet_rate * self.frame_duration

    @property
    def aggregate_rate(self) -> float:
        """Packets per frame generated by all sensors."""
        return self.sensors * self.arrival_probability

    @property
    def budget_frames(self) -> int:
        return self.qos.budget_frames(self.frame_duration)

    def arrivals(self) -> ArrivalSpec:
        return ArrivalSpec.uniform(self.sensors, self.arrival_probability)

    def solver_config(self) -> SolverConfig:
        return SolverConfig(n_max=self.n_max, coherence_bandwidth=self.coherence_bandwidth,
                            bandwidth_unit=self.bandwidth_unit)

    def ul_link(self, gain: float) -> LinkParams:
        return LinkParams(gain, self.ul_power, self.noise_density, self.snr_loss_factor,
                          self.antennas, self.packet_bits, self.frame_duration)

    def dl_link(self) -> LinkParams:
        """Link of the worst user, placed at the cell edge."""
        return LinkParams(path_gain(self.cell_radius), self.dl_power, self.noise_density,
                          self.snr_loss_factor, self.antennas, self.packet_bits, self.frame_duration)

    def sensor_distances(self, seed: int) -> np.ndarray:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(STREAM_PLACEMENT,))))
        return rng.uniform(self.min_distance, self.cell_radius, self.sensors)

    def sensor_gains(self, seed: int) -> np.ndarray:
        d = self.sensor_distances(seed)
        return np.array([path_gain(float(x)) for x in d], dtype=np.float64)

    def with_updates(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def with_qos(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, qos=dataclasses.replace(self.qos, **changes))

    # identity -------------------------------------------------------------
    def canonical(self) -> dict:
        """Plain-dict form; simulation settings are left out of the identity."""
        d = dataclasses.asdict(self)
        d.pop("sim")
        d["sweep"] = {k: list(v) for k, v in self.sweep}
        return d

    def scenario_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# file format

def _num(text: str) -> float:
    if "/" in text:
        return float(Fraction(text))
    return float(text)


def _floats(text: str) -> tuple[float, ...]:
    parts = [p.strip() for p in text.replace(";", ",").split(",")]
    return tuple(_num(p) for p in parts if p)


def _int(text: str) -> int:
    v = _num(text)
    if v != int(v):
        raise ValueError(f"{text!r} is not an integer")
    return int(v)


# section -> key -> (dataclass field, converter)
_SCHEMA: dict[str, dict[str, tuple[str, object]]] = {
    "system": {
        "bs_count": ("bs_count", _int),
        "antennas": ("antennas", _int),
        "cell_radius_m": ("cell_radius", _num),
        "min_distance_m": ("min_distance", _num),
        "reuse_factor": ("reuse_inverse", lambda s: 1.0 / _num(s)),
        "coherence_bandwidth_mhz": ("coherence_bandwidth", lambda s: _num(s) * 1e6),
        "bandwidth_unit_khz": ("bandwidth_unit", lambda s: _num(s) * 1e3),
        "frame_ms": ("frame_duration", lambda s: _num(s) * 1e-3),
        "max_subchannels": ("n_max", _int),
    },
    "devices": {
        "sensors": ("sensors", _int),
        "packet_rate_per_s": ("packet_rate", _num),
        "arrival_probability": ("arrival_probability", _num),
        "packet_bits": ("packet_bits", _num),
        "ul_power_dbm": ("ul_power", lambda s: dbm_to_watts(_num(s))),
    },
    "bs": {
        "dl_power_dbm": ("dl_power", lambda s: dbm_to_watts(_num(s))),
        "noise_dbm_per_hz": ("noise_density", lambda s: dbm_to_watts(_num(s))),
        "snr_loss_factor": ("snr_loss_factor", _num),
    },
    "qos": {
        "max_delay_ms": ("max_delay", lambda s: _num(s) * 1e-3),
        "backhaul_delay_ms": ("backhaul_delay", lambda s: _num(s) * 1e-3),
        "loss_max": ("loss_max", _num),
        "overflow": ("overflow", _num),
        "split": ("split_mode", lambda s: s.strip().lower()),
        "split_step": ("split_step", _num),
        "eps_u": ("eps_u", _num),
        "eps_d": ("eps_d", _num),
        "eps_q": ("eps_q", _num),
    },
    "sim": {
        "frames": ("frames", _int),
        "drops": ("drops", _int),
        "seed": ("seed", _int),
        "shadowing_db": ("shadowing_db", _num),
        "relaxed_eps": ("relaxed_eps", lambda s: None if s.strip().lower() in ("", "none") else _num(s)),
    },
}

SWEEP_KEYS = ("delay_frames", "eps_u_fraction", "antennas", "distance_m", "cell_radius_m")


def _line_of(text: str, section: str, key: str) -> int:
    current = None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            if current == section and not key:
                return i
        elif current == section and line.split("=", 1)[0].strip().lower() == key:
            return i
    return 0


def parse_scenario(text: str, source: str = "<string>") -> ScenarioConfig:
    """Parse scenario text; missing keys keep the built-in defaults."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ScenarioError(f"{source}: {exc}") from None

    values: dict[str, dict[str, object]] = {s: {} for s in list(_SCHEMA) + ["sweep"]}
    for section in cp.sections():
        sec = section.lower()
        if sec not in values:
            raise ScenarioError(f"{source}:{_line_of(text, sec, '')}: unknown section [{section}]")
        for key, raw in cp.items(section):
            line = _line_of(text, sec, key)
            where = f"{source}:{line}: [{sec}] {key}"
            if sec == "sweep":
                if key not in SWEEP_KEYS:
                    raise ScenarioError(f"{where}: unknown sweep axis (known: {', '.join(SWEEP_KEYS)})")
                try:
                    values["sweep"][key] = _floats(raw)
                except (ValueError, ZeroDivisionError) as exc:
                    raise ScenarioError(f"{where}: {exc}") from None
                continue
            if key not in _SCHEMA[sec]:
                raise ScenarioError(f"{where}: unknown key")
            name, conv = _SCHEMA[sec][key]
            try:
                values[sec][name] = conv(raw)  # type: ignore[operator]
            except (ValueError, ZeroDivisionError) as exc:
                raise ScenarioError(f"{where}: cannot parse {raw!r} ({exc})") from None

    top: dict[str, object] = {}
    for sec in ("system", "devices", "bs"):
        top.update(values[sec])
    prob = top.pop("arrival_probability", None)
    if prob is not None:
        if "packet_rate" in top:
            raise ScenarioError(f"{source}: [devices] give packet_rate_per_s or arrival_probability, not both")
        frame = float(top.get("frame_duration", ScenarioConfig.frame_duration))  # type: ignore[arg-type]
        top["packet_rate"] = float(prob) / frame
    qos = dict(values["qos"])
    eps = [qos.pop(k, None) for k in ("eps_u", "eps_d", "eps_q")]
    if any(e is not None for e in eps):
        if any(e is None for e in eps):
            raise ScenarioError(f"{source}: [qos] explicit split needs eps_u, eps_d and eps_q")
        qos["explicit_split"] = tuple(eps)
    try:
        return ScenarioConfig(
            **top,  # type: ignore[arg-type]
            qos=QosBudget(**qos),  # type: ignore[arg-type]
            sim=SimConfig(**values["sim"]),  # type: ignore[arg-type]
            sweep=tuple(sorted(values["sweep"].items())),  # type: ignore[arg-type]
        )
    except DomainError as exc:
        raise ScenarioError(f"{source}: {exc}") from None


def load_scenario(path: str) -> ScenarioConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc.strerror}") from None
    return parse_scenario(text, source=path)


def default_scenario_text() -> str:
    """Reference scenario with every key spelled out."""
    return DEFAULT_TEXT


DEFAULT_TEXT = """\
[system]
bs_count = 3
antennas = 8
cell_radius_m = 250
min_distance_m = 50
reuse_factor = 1/3
coherence_bandwidth_mhz = 0.5
bandwidth_unit_khz = 1
frame_ms = 0.1
max_subchannels = 10

[devices]
sensors = 3000
packet_rate_per_s = 100
packet_bits = 160
ul_power_dbm = 23

[bs]
dl_power_dbm = 46
noise_dbm_per_hz = -174
snr_loss_factor = 1

[qos]
max_delay_ms = 1.1
backhaul_delay_ms = 0.1
loss_max = 1e-7
overflow = 1e-15
split = equal
split_step = 0.05

[sim]
frames = 1000000
drops = 10000
seed = 1
shadowing_db = 8
relaxed_eps = none
"""
