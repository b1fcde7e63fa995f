"""Pipeline configuration and its JSON form.

Every tunable lives here so a run is fully described by one JSON file plus
a seed. Unknown keys are rejected rather than ignored.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace

from ..ballistics import GRAVITY, Z_PLANE
from ..controller import BASKET_RADIUS, HOME, RobotState
from ..scenario import PROFILES, NoiseProfile, SensorSuite, ThrowDistribution
from ..sensors import CameraModel, HsvRange, RadarModel

LOCALIZERS = ("color", "cnn")
PREDICTORS = ("ballistic", "cnn")
DEFAULT_LATENCY = (0.128, 0.176)


class ConfigError(ValueError):
    pass


def parse_pipeline(text: str) -> tuple[str, str]:
    """``color+ballistic`` style name to (localizer, predictor); a bare name sets both halves."""
    parts = text.strip().lower().split("+")
    if len(parts) == 1:
        loc = parts[0]
        pred = "ballistic" if loc == "color" else loc
    elif len(parts) == 2:
        loc, pred = parts
    else:
        raise ConfigError(f"bad pipeline {text!r}")
    if loc not in LOCALIZERS or pred not in PREDICTORS:
        raise ConfigError(f"bad pipeline {text!r}; use <color|cnn>+<ballistic|cnn>")
    return loc, pred


def _merge(cls, base, overrides: dict, what: str):
    if not overrides:
        return base
    names = {f.name for f in fields(cls)}
    bad = sorted(set(overrides) - names)
    if bad:
        raise ConfigError(f"unknown {what} keys: {bad}")
    conv = {k: tuple(v) if isinstance(v, list) else v for k, v in overrides.items()}
    try:
        return replace(base, **conv)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad {what}: {e}") from None


@dataclass
class PipelineConfig:
    localizer: str = "color"
    predictor: str = "ballistic"
    latency: tuple = DEFAULT_LATENCY
    noise: str = "realistic"
    noise_overrides: dict = field(default_factory=dict)
    throw: dict = field(default_factory=dict)  # ThrowDistribution fields
    camera: dict = field(default_factory=dict)  # CameraModel fields
    radar: dict = field(default_factory=dict)  # RadarModel fields
    hsv: dict = field(default_factory=dict)  # HsvRange fields
    object_radius: float = 0.12
    min_pixels: int = 10
    camera_phase: float = 0.0
    radar_phase: float = 0.05
    robot: dict = field(default_factory=dict)  # v_max, a_max, gain, deadband, workspace
    home: tuple = HOME
    basket_radius: float = BASKET_RADIUS
    z_plane: float = Z_PLANE
    gravity: float = GRAVITY
    fit_mode: str = "pinned_gravity"
    min_points: int = 3
    localizer_weights: str | None = None
    interceptor_weights: str | None = None
    seed: int = 0

    def __post_init__(self):
        self.latency = tuple(float(v) for v in self.latency)
        self.home = tuple(float(v) for v in self.home)
        self.validate()

    def validate(self):
        if self.localizer not in LOCALIZERS:
            raise ConfigError(f"localizer must be one of {LOCALIZERS}")
        if self.predictor not in PREDICTORS:
            raise ConfigError(f"predictor must be one of {PREDICTORS}")
        if len(self.latency) != 2 or not 0 <= self.latency[0] <= self.latency[1]:
            raise ConfigError("latency must be [min, max] with 0 <= min <= max")
        if self.noise not in PROFILES:
            raise ConfigError(f"unknown noise profile {self.noise!r}; choose from {sorted(PROFILES)}")
        if self.fit_mode not in ("pinned_gravity", "free_quadratic"):
            raise ConfigError("fit_mode must be pinned_gravity or free_quadratic")
        if self.min_points < 1:
            raise ConfigError("min_points must be at least 1")
        suite = self.sensor_suite()
        if suite.camera.rate <= 0 or suite.radar.rate <= 0:
            raise ConfigError("sensor rates must be positive")
        self.profile()
        self.throw_distribution()
        self.make_robot()

    @property
    def pipeline(self) -> str:
        return f"{self.localizer}+{self.predictor}"

    def with_pipeline(self, name: str) -> "PipelineConfig":
        loc, pred = parse_pipeline(name)
        return replace(self, localizer=loc, predictor=pred)

    def profile(self) -> NoiseProfile:
        return _merge(NoiseProfile, PROFILES[self.noise], self.noise_overrides, "noise_overrides")

    def throw_distribution(self) -> ThrowDistribution:
        base = ThrowDistribution(home=self.home)
        return _merge(ThrowDistribution, base, self.throw, "throw")

    def sensor_suite(self) -> SensorSuite:
        return SensorSuite(camera=_merge(CameraModel, CameraModel(), self.camera, "camera"),
                           radar=_merge(RadarModel, RadarModel(), self.radar, "radar"),
                           hsv=_merge(HsvRange, HsvRange(), self.hsv, "hsv"),
                           object_radius=self.object_radius, min_pixels=self.min_pixels,
                           camera_phase=self.camera_phase, radar_phase=self.radar_phase)

    def make_robot(self) -> RobotState:
        allowed = {"v_max", "a_max", "gain", "deadband", "workspace"}
        bad = sorted(set(self.robot) - allowed)
        if bad:
            raise ConfigError(f"unknown robot keys: {bad}")
        kw = dict(self.robot)
        if "workspace" in kw:
            kw["workspace"] = tuple(tuple(c) for c in kw["workspace"])
        try:
            return RobotState(position=self.home, **kw)
        except ValueError as e:
            raise ConfigError(str(e)) from None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["latency"] = list(self.latency)
        d["home"] = list(self.home)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        names = {f.name for f in fields(cls)}
        bad = sorted(set(d) - names - {"pipeline"})
        if bad:
            raise ConfigError(f"unknown config keys: {bad}")
        d = dict(d)
        if "pipeline" in d:
            d["localizer"], d["predictor"] = parse_pipeline(d.pop("pipeline"))
        return cls(**d)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        with open(path) as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(f"{path}: {e}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(data)

