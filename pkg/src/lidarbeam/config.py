"""Run configuration: one YAML document with scenario/model/training/evaluation sections.

Unknown keys are rejected. Angles are given in degrees in the file.
"""
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Tuple

import numpy as np
import yaml

from .beam import SignalConfig
from .scene import Rect, ScenarioConfig
from .tracker import TrackerConfig, TrainConfig


class ConfigError(ValueError):
    pass


def _rect_list():
    return [[r.cx, r.cy, r.length, r.width, float(np.degrees(r.heading))]
            for r in ScenarioConfig().clutter]


@dataclass
class ScenarioSection:
    num_sequences: int = 200
    num_bins: int = 180
    lidar_fov_deg: Tuple[float, float] = (-90.0, 90.0)
    max_range: float = 60.0
    road_offset: float = 15.0
    road_span: Tuple[float, float] = (-24.0, 24.0)
    speed_range: Tuple[float, float] = (6.0, 12.0)
    dt: float = 0.1
    vehicle_length: float = 4.5
    vehicle_width: float = 1.8
    clutter: List[List[float]] = field(default_factory=_rect_list)
    transmit_power: float = 1.0
    noise_variance: float = 1e-5
    spacing: float = 1.0
    channel_gain: float = 1.0
    num_elements: int = 16
    num_beams: int = 64
    codebook_fov_deg: Tuple[float, float] = (-60.0, 60.0)


@dataclass
class ModelSection:
    W: int = 8
    V: int = 3
    gamma: int = 4
    D_e: int = 64
    M_e: int = 64
    H: int = 64


@dataclass
class TrainingSection:
    epochs: int = 30
    batch_size: int = 32
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    train_fraction: float = 0.8


@dataclass
class EvaluationSection:
    ks: List[int] = field(default_factory=lambda: [1, 2, 3, 5])
    L_max: int = 10
    k: int = 1


@dataclass
class GradcheckSection:
    D: int = 16
    M: int = 8
    N: int = 4
    W: int = 3
    V: int = 1
    H: int = 8
    D_e: int = 8
    M_e: int = 8
    eps: float = 1e-5
    samples: int = 1
    tolerance: float = 1e-4


_SECTIONS = {
    "scenario": ScenarioSection,
    "model": ModelSection,
    "training": TrainingSection,
    "evaluation": EvaluationSection,
    "gradcheck": GradcheckSection,
}


@dataclass
class RunConfig:
    seed: int = 7
    scenario: ScenarioSection = field(default_factory=ScenarioSection)
    model: ModelSection = field(default_factory=ModelSection)
    training: TrainingSection = field(default_factory=TrainingSection)
    evaluation: EvaluationSection = field(default_factory=EvaluationSection)
    gradcheck: GradcheckSection = field(default_factory=GradcheckSection)

    # ------------------------------------------------------------ building

    def scenario_config(self) -> ScenarioConfig:
        s = self.scenario
        rad = np.radians
        return ScenarioConfig(
            num_bins=s.num_bins,
            lidar_fov=tuple(float(a) for a in rad(s.lidar_fov_deg)),
            max_range=s.max_range,
            road_offset=s.road_offset,
            road_span=tuple(s.road_span),
            speed_range=tuple(s.speed_range),
            dt=s.dt,
            vehicle_length=s.vehicle_length,
            vehicle_width=s.vehicle_width,
            clutter=tuple(Rect(cx, cy, ln, wd, float(rad(hd))) for cx, cy, ln, wd, hd in s.clutter),
            signal=SignalConfig(s.transmit_power, s.noise_variance, s.spacing),
            channel_gain=s.channel_gain,
            num_elements=s.num_elements,
            num_beams=s.num_beams,
            codebook_fov=tuple(float(a) for a in rad(s.codebook_fov_deg)),
            min_steps=self.model.W + self.model.V,
        )

    def tracker_config(self, mode) -> TrackerConfig:
        m = self.model
        return TrackerConfig(mode=mode, W=m.W, V=m.V, gamma=m.gamma, D=self.scenario.num_bins,
                             D_e=m.D_e, M=self.scenario.num_beams, M_e=m.M_e, H=m.H)

    def train_config(self) -> TrainConfig:
        t = self.training
        return TrainConfig(epochs=t.epochs, batch_size=t.batch_size, seed=self.seed,
                           lr=t.lr, beta1=t.beta1, beta2=t.beta2, eps=t.eps)

    def validate(self):
        try:
            self.scenario_config()
            for mode in ("lidar", "baseline"):
                self.tracker_config(mode)
            self.train_config()
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        if self.scenario.num_sequences < 1:
            raise ConfigError("scenario.num_sequences must be at least 1")
        if self.training.epochs < 0 or self.training.batch_size < 1:
            raise ConfigError("training.epochs must be >= 0 and batch_size >= 1")
        if not 0 < self.training.train_fraction < 1:
            raise ConfigError("training.train_fraction must lie in (0, 1)")
        if self.evaluation.L_max < 1 or self.evaluation.k < 1:
            raise ConfigError("evaluation.L_max and evaluation.k must be positive")
        if any(k < 1 or k > self.scenario.num_beams for k in self.evaluation.ks):
            raise ConfigError("evaluation.ks must lie in 1..num_beams")
        if not 1e-7 <= self.gradcheck.eps <= 1e-3:
            raise ConfigError("gradcheck.eps must lie in [1e-7, 1e-3]")
        return self

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(_plain(self.to_dict()), sort_keys=True)


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _coerce(name, default, value):
    # YAML 1.1 reads "1e-5" as a string, so numbers are coerced by field type
    try:
        if isinstance(default, bool):
            return bool(value)
        if isinstance(default, int):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if isinstance(default, float):
            return float(value)
        if isinstance(default, tuple):
            if len(value) != len(default):
                raise ValueError
            return tuple(float(v) for v in value)
        if isinstance(default, list):
            if name.endswith("clutter"):
                out = [[float(v) for v in r] for r in value]
                if any(len(r) != 5 for r in out):
                    raise ValueError
                return out
            return [int(v) for v in value]
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {name}: {value!r}") from None
    return value


def _build_section(cls, data, prefix):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"section {prefix} must be a mapping")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in {prefix}: {sorted(unknown)}")
    sec = cls()
    for k, v in data.items():
        setattr(sec, k, _coerce(f"{prefix}.{k}", getattr(sec, k), v))
    return sec


def from_dict(data) -> RunConfig:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    unknown = set(data) - set(_SECTIONS) - {"seed"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    cfg = RunConfig()
    if "seed" in data:
        cfg.seed = _coerce("seed", 0, data["seed"])
    for name, cls in _SECTIONS.items():
        setattr(cfg, name, _build_section(cls, data.get(name), name))
    return cfg.validate()


def load_config(path=None) -> RunConfig:
    if path is None:
        return RunConfig().validate()
    try:
        data = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    return from_dict(data)


def from_json(text) -> RunConfig:
    return from_dict(json.loads(text))


def default_yaml() -> str:
    return yaml.safe_dump(_plain(RunConfig().to_dict()), sort_keys=False)
