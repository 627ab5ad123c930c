"""실행 설정: dataclass 트리, JSON 읽기/쓰기, 기본 제공 파라미터 세트."""

import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

log = logging.getLogger(__name__)

DEFAULT_TOLERANCES = {
    "exponent": 0.1,
    "gaussian_exponent": 0.05,
    "im_exponent": 0.02,
    "r_squared": 0.995,
    "amplitude_shift": 0.05,
    "im_ratio": 0.01,
    "acoustic_speed": 1e-3,
    "limit_mode": 1e-3,
    "defect_band": 3.0,
    "cross_validation": 1e-6,
    "transversal_drop": 3.0,
    "amplitude_slope": 0.1,
    "macro_exponent": 0.1,
    "kappa": 0.05,
    "boussinesq_drop_fraction": 0.8,
    "incompressibility_growth": 10.0,
    "rotation": 1e-10,
    "spectral_rate": 1e-6,
}

# 하한으로 쓰이는 값: --fast 에서 두 배가 아니라 절반으로 완화
_LOWER_BOUNDS = {"transversal_drop", "boussinesq_drop_fraction"}

PARAMETER_SET_NAMES = ("gaussian", "poly-8-0", "poly-5.5-0", "poly-5.5-2")


@dataclass
class EquilibriumConfig:
    kind: str = "gaussian"
    alpha: float | None = None
    beta: float = 0.0


@dataclass
class GridConfig:
    n_radial: int = 64
    n_angular: int = 32
    radial_map: str = "algebraic"
    radial_scale: float = 1.0


@dataclass
class SpectralConfig:
    eta_min: float = 1e-4
    eta_max: float = 0.1
    n_eta: int = 40
    r_bar: float = 0.5
    trust_factor: float = 10.0


@dataclass
class MacroConfig:
    xi: list = field(default_factory=lambda: [0.1, 0.15, 0.2, 0.3, 0.4, 0.5, 0.7, 1.0])
    epsilon: list = field(default_factory=lambda: [0.01, 0.001, 0.0001])
    seed: int = 0
    n_radial: int = 32
    n_angular: int = 16
    n_times: int = 64
    direction_angle: float = 0.7


@dataclass
class AmplitudeConfig:
    r_values: list = field(default_factory=lambda: [8.0, 16.0, 32.0, 64.0, 128.0, 256.0])
    n_radial: int = 256


_SECTIONS = {
    "equilibrium": EquilibriumConfig,
    "grid": GridConfig,
    "spectral": SpectralConfig,
    "macro": MacroConfig,
    "amplitude": AmplitudeConfig,
}


def _coerce(section, name, value, expected):
    """JSON 값을 필드 타입에 맞춘다. bool은 숫자로 받지 않는다."""
    where = f"{section}.{name}"
    if isinstance(value, bool):
        raise ConfigError(f"{where}: booleans are not accepted.")
    if expected is int:
        if not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}.")
        return value
    if expected is float or expected == (float | None):
        if value is None and expected != float:
            return None
        if not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}.")
        return float(value)
    if expected is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}.")
        return value
    if expected is list:
        if not isinstance(value, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
        ):
            raise ConfigError(f"{where}: expected a list of numbers, got {value!r}.")
        return [float(v) for v in value]
    return value


def _section_from_dict(name, cls, data):
    if not isinstance(data, dict):
        raise ConfigError(f"Section '{name}' must be an object.")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(fields)
    if unknown:
        raise ConfigError(f"Unknown keys in '{name}': {sorted(unknown)}.")
    values = {key: _coerce(name, key, value, fields[key].type) for key, value in data.items()}
    return cls(**values)


@dataclass
class RunConfig:
    name: str = "gaussian"
    equilibrium: EquilibriumConfig = field(default_factory=EquilibriumConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    spectral: SpectralConfig = field(default_factory=SpectralConfig)
    macro: MacroConfig = field(default_factory=MacroConfig)
    amplitude: AmplitudeConfig = field(default_factory=AmplitudeConfig)
    output_dir: str = "results"
    tolerances: dict = field(default_factory=dict)

    @property
    def eta_bar(self):
        return self.spectral.eta_max

    @property
    def merged_tolerances(self):
        merged = dict(DEFAULT_TOLERANCES)
        merged.update(self.tolerances)
        return merged

    def validate(self):
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ConfigError(f"Unknown tolerance keys: {sorted(unknown)}.")
        for key, value in self.merged_tolerances.items():
            if not isinstance(value, (int, float)) or isinstance(value, bool) or not value > 0.0:
                raise ConfigError(f"Tolerance '{key}' must be a positive number, got {value!r}.")
        s = self.spectral
        if not 0.0 < s.eta_min < s.eta_max:
            raise ConfigError(f"Need 0 < eta_min < eta_max, got {s.eta_min}, {s.eta_max}.")
        if s.n_eta < 0:
            raise ConfigError(f"n_eta must be non-negative, got {s.n_eta}.")
        if not 0.0 < s.r_bar < 1.0:
            raise ConfigError(f"r_bar must lie in (0, 1), got {s.r_bar}.")
        if s.eta_max > 0.5 * s.r_bar:
            raise ConfigError(f"eta_max = {s.eta_max} exceeds r_bar / 2 = {0.5 * s.r_bar}.")
        if s.trust_factor <= 1.0:
            raise ConfigError(f"trust_factor must exceed 1, got {s.trust_factor}.")
        if self.equilibrium.kind == "polynomial" and self.equilibrium.alpha is None:
            raise ConfigError("Polynomial equilibria need a finite alpha.")
        if self.macro.n_times < 4:
            raise ConfigError(f"macro.n_times must be at least 4, got {self.macro.n_times}.")
        return self

    @property
    def alpha(self):
        alpha = self.equilibrium.alpha
        return math.inf if alpha is None else alpha

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("Configuration root must be an object.")
        allowed = set(_SECTIONS) | {"name", "output_dir", "tolerances"}
        unknown = set(data) - allowed
        if unknown:
            raise ConfigError(f"Unknown top-level keys: {sorted(unknown)}.")
        kwargs = {
            name: _section_from_dict(name, section, data[name])
            for name, section in _SECTIONS.items()
            if name in data
        }
        for key in ("name", "output_dir"):
            if key in data:
                kwargs[key] = _coerce("config", key, data[key], str)
        if "tolerances" in data:
            if not isinstance(data["tolerances"], dict):
                raise ConfigError("'tolerances' must be an object.")
            kwargs["tolerances"] = dict(data["tolerances"])
        return cls(**kwargs).validate()

    def to_dict(self):
        return dataclasses.asdict(self)


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config {path} is not valid JSON: {e}") from e
    config = RunConfig.from_dict(data)
    log.debug("loaded config %s from %s", config.name, path)
    return config


def dump_config(config, path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(config.to_dict(), f, indent=2)
            f.write("\n")
    except OSError as e:
        raise ConfigError(f"Cannot write config {path}: {e}") from e
    return path


def parameter_set(name):
    """기본 제공 세트. 분수 영역 세트는 로그 반경 맵을 쓴다."""
    if name == "gaussian":
        config = RunConfig(name=name)
    elif name == "poly-8-0":
        config = RunConfig(name=name, equilibrium=EquilibriumConfig("polynomial", 8.0, 0.0))
    elif name in ("poly-5.5-0", "poly-5.5-2"):
        beta = 0.0 if name.endswith("-0") else 2.0
        config = RunConfig(
            name=name,
            equilibrium=EquilibriumConfig("polynomial", 5.5, beta),
            grid=GridConfig(n_radial=96, n_angular=32, radial_map="logarithmic"),
            macro=MacroConfig(n_radial=64),
        )
        if beta > 0.0:
            # 음향 쌍이 eta ~ 0.03 에서 B(0, r_bar) 밖으로 나간다
            config.spectral.eta_max = 0.02
    else:
        raise ConfigError(
            f"Unknown parameter set '{name}'. Choose one of {', '.join(PARAMETER_SET_NAMES)}."
        )
    return config.validate()


def _relaxed(key, value):
    if key == "r_squared":
        return 1.0 - 2.0 * (1.0 - value)
    if key in _LOWER_BOUNDS:
        return 0.5 * value
    return 2.0 * value


def apply_fast(config):
    """축소 격자와 짧은 sweep, 두 배로 완화한 허용오차를 가진 사본."""
    fast = RunConfig.from_dict(config.to_dict())
    fast.grid.n_radial = max(32, fast.grid.n_radial // 2)
    fast.grid.n_angular = max(16, fast.grid.n_angular // 2)
    fast.spectral.n_eta = min(fast.spectral.n_eta, 20)
    xi = sorted(fast.macro.xi)
    if len(xi) > 4:
        picks = sorted({0, len(xi) // 4, len(xi) // 2, len(xi) - 1})
        fast.macro.xi = [xi[i] for i in picks]
    fast.macro.n_radial = max(24, fast.macro.n_radial // 2)
    fast.macro.n_angular = max(8, fast.macro.n_angular // 2)
    fast.amplitude.n_radial = max(64, fast.amplitude.n_radial // 2)
    fast.tolerances = {key: _relaxed(key, value) for key, value in fast.merged_tolerances.items()}
    return fast.validate()
