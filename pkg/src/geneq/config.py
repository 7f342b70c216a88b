"""Run configuration: presets, YAML loading and aggregated validation."""

from __future__ import annotations

import copy
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ValidationError

RUN_MODES = ("ltas-eq", "babe2", "babe2-ltas-init", "babe2-ltas-obj")
SAMPLER_MODE = {"babe2": "plain", "babe2-ltas-init": "ltas_init", "babe2-ltas-obj": "ltas_objective"}


@dataclass
class ScheduleSettings:
    sigma_start: float = 0.5
    sigma_min: float = 4e-5
    rho: float = 13.0
    steps: int = 51
    s_churn: float = 10.0
    order: int = 2


@dataclass
class GuidanceSettings:
    xi_prime: float = 1.0
    noise_reg_gamma: float = 0.25
    weighting: str = "inverse"
    regularize_filter_fit: bool = False


@dataclass
class InnerSettings:
    iterations: int = 100
    learning_rate: float = 10.0
    slope_lr_scale: float = 0.1
    beta: float = 0.1
    gamma_bcr: float = 10.0


@dataclass
class BlockSettings:
    segment_length: float = 1.486
    overlap_fraction: float = 0.10
    reestimate_filter_per_block: bool = True
    carry_filter: bool = True


@dataclass
class RunConfig:
    input: str | None = None
    output: str | None = None
    # reference LTAS: a CSV, an .npz cache, a WAV file or a directory of WAVs
    reference: str | None = None
    mode: str = "babe2"
    seed: int = 0
    filter_init: str | None = None
    subtype: str = "float32"
    jobs: int = 1
    schedule: ScheduleSettings = field(default_factory=ScheduleSettings)
    guidance: GuidanceSettings = field(default_factory=GuidanceSettings)
    inner: InnerSettings = field(default_factory=InnerSettings)
    block: BlockSettings = field(default_factory=BlockSettings)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @property
    def sampler_mode(self) -> str | None:
        return SAMPLER_MODE.get(self.mode)


PRESETS = {
    "piano": {
        "schedule": {"sigma_start": 0.5, "sigma_min": 4e-5, "rho": 13.0, "steps": 51, "s_churn": 10.0},
        "guidance": {"xi_prime": 1.0, "noise_reg_gamma": 0.25},
        "inner": {"iterations": 100, "learning_rate": 10.0, "beta": 0.1, "gamma_bcr": 10.0},
    },
    "vocals": {
        "schedule": {"sigma_start": 10.0, "sigma_min": 1e-3, "rho": 13.0, "steps": 51, "s_churn": 10.0},
        "guidance": {"xi_prime": 0.5, "noise_reg_gamma": 1.0},
        "inner": {"iterations": 100, "learning_rate": 10.0, "beta": 0.1, "gamma_bcr": 10.0},
    },
}

_SECTIONS = {
    "schedule": ScheduleSettings,
    "guidance": GuidanceSettings,
    "inner": InnerSettings,
    "block": BlockSettings,
}


def merge(base: dict, update: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in (update or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _coerce(value, default, name, problems):
    """Match the type of the dataclass default; record a problem on mismatch."""
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
    elif isinstance(default, int):
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        if isinstance(value, float) and value.is_integer():
            return int(value)
    elif isinstance(default, float):
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    elif isinstance(value, str) or value is None:
        return value
    problems.append(f"{name}: expected {type(default).__name__}, got {value!r}")
    return default


def _build(cls, data: dict, prefix: str, problems: list):
    kwargs = {}
    defaults = cls()
    names = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            problems.append(f"{prefix}{key}: unknown setting")
    for f in dataclasses.fields(cls):
        if f.name not in data:
            continue
        if f.name in _SECTIONS and cls is RunConfig:
            sub = data[f.name]
            if not isinstance(sub, dict):
                problems.append(f"{f.name}: expected a mapping")
                continue
            kwargs[f.name] = _build(_SECTIONS[f.name], sub, f"{f.name}.", problems)
        else:
            kwargs[f.name] = _coerce(data[f.name], getattr(defaults, f.name), prefix + f.name, problems)
    return cls(**kwargs)


def _check_ranges(cfg: RunConfig, problems: list, check_paths: bool):
    s, g, i, b = cfg.schedule, cfg.guidance, cfg.inner, cfg.block
    if cfg.mode not in RUN_MODES:
        problems.append(f"mode: must be one of {', '.join(RUN_MODES)}, got {cfg.mode!r}")
    if not s.sigma_start > s.sigma_min > 0:
        problems.append(f"schedule: need sigma_start > sigma_min > 0, got {s.sigma_start}, {s.sigma_min}")
    if s.steps < 2:
        problems.append(f"schedule.steps: need >= 2, got {s.steps}")
    if s.rho < 1:
        problems.append(f"schedule.rho: need >= 1, got {s.rho}")
    if s.s_churn < 0:
        problems.append(f"schedule.s_churn: need >= 0, got {s.s_churn}")
    if s.order not in (1, 2):
        problems.append(f"schedule.order: must be 1 or 2, got {s.order}")
    if g.xi_prime < 0:
        problems.append(f"guidance.xi_prime: need >= 0, got {g.xi_prime}")
    if g.noise_reg_gamma < 0:
        problems.append(f"guidance.noise_reg_gamma: need >= 0, got {g.noise_reg_gamma}")
    if g.weighting not in ("inverse", "flat"):
        problems.append(f"guidance.weighting: must be 'inverse' or 'flat', got {g.weighting!r}")
    if i.iterations < 0:
        problems.append(f"inner.iterations: need >= 0, got {i.iterations}")
    if not i.learning_rate > 0:
        problems.append(f"inner.learning_rate: need > 0, got {i.learning_rate}")
    if not i.slope_lr_scale > 0:
        problems.append(f"inner.slope_lr_scale: need > 0, got {i.slope_lr_scale}")
    if not i.beta > 0:
        problems.append(f"inner.beta: need > 0, got {i.beta}")
    if i.gamma_bcr < 0:
        problems.append(f"inner.gamma_bcr: need >= 0, got {i.gamma_bcr}")
    if not 0 < b.overlap_fraction < 0.5:
        problems.append(f"block.overlap_fraction: must lie in (0, 0.5), got {b.overlap_fraction}")
    if not b.segment_length > 0:
        problems.append(f"block.segment_length: need > 0 seconds, got {b.segment_length}")
    if cfg.jobs < 1:
        problems.append(f"jobs: need >= 1, got {cfg.jobs}")
    if cfg.subtype not in ("pcm16", "pcm24", "float32"):
        problems.append(f"subtype: must be pcm16, pcm24 or float32, got {cfg.subtype!r}")
    for name in ("input", "output", "reference"):
        if getattr(cfg, name) is None:
            problems.append(f"{name}: required")
    if check_paths:
        for name in ("input", "reference", "filter_init"):
            p = getattr(cfg, name)
            if p is not None and not Path(p).exists():
                problems.append(f"{name}: path does not exist: {p}")


def build_config(data: dict, check_paths: bool = True) -> RunConfig:
    """Build and validate; every problem is collected into one :class:`ValidationError`."""
    problems: list[str] = []
    if not isinstance(data, dict):
        raise ValidationError(["configuration must be a mapping"])
    cfg = _build(RunConfig, data, "", problems)
    _check_ranges(cfg, problems, check_paths)
    if problems:
        raise ValidationError(problems)
    return cfg


def load_config_file(path) -> dict:
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ValidationError([f"{path}: not valid YAML ({exc})"]) from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ValidationError([f"{path}: top level must be a mapping"])
    return data


def resolve_config(config_path=None, preset: str | None = None, overrides: dict | None = None,
                   check_paths: bool = True) -> RunConfig:
    """Defaults, then the preset, then the config file, then command-line overrides."""
    data: dict = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ValidationError([f"preset: must be one of {', '.join(PRESETS)}, got {preset!r}"])
        data = merge(data, PRESETS[preset])
    if config_path is not None:
        file_data = load_config_file(config_path)
        file_preset = file_data.pop("preset", None)
        if file_preset is not None and preset is None:
            if file_preset not in PRESETS:
                raise ValidationError([f"preset: must be one of {', '.join(PRESETS)}, got {file_preset!r}"])
            data = merge(data, PRESETS[file_preset])
        data = merge(data, file_data)
    data = merge(data, {k: v for k, v in (overrides or {}).items() if v is not None})
    return build_config(data, check_paths)
