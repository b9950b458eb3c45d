"""Experiment configuration: a flat ``key = value`` file with dotted sections.

Example::

    framework = proposed_serial
    num_devices = 10
    scheduler.policy = best_channel
    scheduler.ratio = 0.5
    net.shadowing_std_db = 8
    model.gen_hidden = 64, 64

Lines starting with ``#`` are comments. Unknown keys are errors. Every
value is coerced to the field's declared type and range-checked; errors name
the dotted field path.
"""
from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from dgan.net import NetworkConfig
from dgan.scheduler import POLICIES

FRAMEWORKS = ("proposed_parallel", "proposed_serial", "fedgan", "centralized")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SchedulerConfig:
    policy: str = "all"
    ratio: float = 1.0
    pf_beta: float = 0.1


@dataclass(frozen=True)
class ModelConfig:
    noise_dim: int = 2
    gen_hidden: tuple[int, ...] = (64, 64)
    disc_hidden: tuple[int, ...] = (64, 64)
    hidden_activation: str = "leaky_relu"
    leaky_slope: float = 0.2


@dataclass(frozen=True)
class TrainConfig:
    n_d: int = 5
    n_g: int = 5
    eta_d: float = 0.01
    eta_g: float = 0.005
    m_k: int = 128
    M: int = 128


@dataclass(frozen=True)
class DataConfig:
    n_modes: int = 8
    ring_radius: float = 2.0
    mode_std: float = 0.05
    points_per_device: int = 4000
    heldout_points: int = 2000


@dataclass(frozen=True)
class TimingConfig:
    device_step_s: float = 0.005
    server_step_s: float = 0.005


@dataclass(frozen=True)
class RunConfig:
    master_seed: int = 0
    max_rounds: int = 2000
    eval_every: int = 10
    eval_samples: int = 2000
    target_metric: Optional[float] = None
    coverage_radius: Optional[float] = None
    p_fail: float = 0.0
    workers: int = 1
    trace_messages: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    framework: str = "proposed_serial"
    num_devices: int = 10
    scheduler: SchedulerConfig = field(default_factory=SchedulerConfig)
    net: NetworkConfig = field(default_factory=NetworkConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataConfig = field(default_factory=DataConfig)
    timing: TimingConfig = field(default_factory=TimingConfig)
    run: RunConfig = field(default_factory=RunConfig)

    @property
    def coverage_radius(self) -> float:
        r = self.run.coverage_radius
        return 3.0 * self.data.mode_std if r is None else r


def _hints(cls) -> dict[str, typing.Any]:
    return typing.get_type_hints(cls)


def _is_section(tp) -> bool:
    return dataclasses.is_dataclass(tp)


def field_paths(cls=ExperimentConfig, prefix: str = "") -> dict[str, typing.Any]:
    """Map every leaf dotted path to its declared type."""
    out = {}
    for name, tp in _hints(cls).items():
        path = prefix + name
        if _is_section(tp):
            out.update(field_paths(tp, path + "."))
        else:
            out[path] = tp
    return out


def _coerce(path: str, raw: str, tp):
    text = raw.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        text = text[1:-1]
    origin = typing.get_origin(tp)
    if origin is typing.Union:
        inner = [a for a in typing.get_args(tp) if a is not type(None)][0]
        if text.lower() in ("", "none", "null"):
            return None
        return _coerce(path, text, inner)
    try:
        if tp is bool:
            low = text.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(text)
        if tp is int:
            return int(text)
        if tp is float:
            return float(text)
        if tp is str:
            return text
        if origin is tuple:
            items = [s.strip() for s in text.strip("()[]").split(",") if s.strip()]
            return tuple(int(s) for s in items)
    except ValueError:
        raise ConfigError(f"{path}: cannot parse {raw.strip()!r} as {getattr(tp, '__name__', tp)}") from None
    raise ConfigError(f"{path}: unsupported field type {tp}")


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(str(v) for v in value)
    return str(value)


def _build(cls, flat: dict[str, typing.Any], prefix: str = ""):
    kwargs = {}
    for name, tp in _hints(cls).items():
        path = prefix + name
        if _is_section(tp):
            kwargs[name] = _build(tp, flat, path + ".")
        elif path in flat:
            kwargs[name] = flat[path]
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{prefix.rstrip('.') or 'config'}: {exc}") from None


def _check(cond: bool, path: str, msg: str, value) -> None:
    if not cond:
        raise ConfigError(f"{path}: {msg}, got {value!r}")


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    _check(cfg.framework in FRAMEWORKS, "framework", f"must be one of {FRAMEWORKS}", cfg.framework)
    _check(cfg.num_devices >= 1, "num_devices", "must be >= 1", cfg.num_devices)
    s = cfg.scheduler
    _check(s.policy in POLICIES, "scheduler.policy", f"must be one of {POLICIES}", s.policy)
    _check(0 < s.ratio <= 1, "scheduler.ratio", "must be in (0, 1]", s.ratio)
    _check(0 < s.pf_beta <= 1, "scheduler.pf_beta", "must be in (0, 1]", s.pf_beta)
    m = cfg.model
    _check(m.noise_dim >= 1, "model.noise_dim", "must be >= 1", m.noise_dim)
    _check(all(h >= 1 for h in m.gen_hidden), "model.gen_hidden", "sizes must be >= 1", m.gen_hidden)
    _check(all(h >= 1 for h in m.disc_hidden), "model.disc_hidden", "sizes must be >= 1", m.disc_hidden)
    _check(m.hidden_activation in ("tanh", "relu", "leaky_relu"), "model.hidden_activation",
           "must be tanh, relu or leaky_relu", m.hidden_activation)
    _check(m.leaky_slope >= 0, "model.leaky_slope", "must be >= 0", m.leaky_slope)
    t = cfg.train
    for name in ("n_d", "n_g", "m_k", "M"):
        _check(getattr(t, name) >= 1, f"train.{name}", "must be >= 1", getattr(t, name))
    _check(t.eta_d >= 0, "train.eta_d", "must be >= 0", t.eta_d)
    _check(t.eta_g >= 0, "train.eta_g", "must be >= 0", t.eta_g)
    d = cfg.data
    _check(d.n_modes >= 1, "data.n_modes", "must be >= 1", d.n_modes)
    _check(d.ring_radius >= 0, "data.ring_radius", "must be >= 0", d.ring_radius)
    _check(d.mode_std > 0, "data.mode_std", "must be > 0", d.mode_std)
    _check(d.points_per_device >= 1, "data.points_per_device", "must be >= 1", d.points_per_device)
    _check(d.heldout_points >= 3, "data.heldout_points", "must be >= 3", d.heldout_points)
    tm = cfg.timing
    _check(tm.device_step_s >= 0, "timing.device_step_s", "must be >= 0", tm.device_step_s)
    _check(tm.server_step_s >= 0, "timing.server_step_s", "must be >= 0", tm.server_step_s)
    r = cfg.run
    _check(r.master_seed >= 0, "run.master_seed", "must be >= 0", r.master_seed)
    _check(r.max_rounds >= 0, "run.max_rounds", "must be >= 0", r.max_rounds)
    _check(r.eval_every >= 1, "run.eval_every", "must be >= 1", r.eval_every)
    _check(r.eval_samples >= 3, "run.eval_samples", "must be >= 3", r.eval_samples)
    _check(r.target_metric is None or r.target_metric >= 0, "run.target_metric", "must be >= 0", r.target_metric)
    _check(r.coverage_radius is None or r.coverage_radius > 0, "run.coverage_radius", "must be > 0",
           r.coverage_radius)
    _check(0 <= r.p_fail <= 1, "run.p_fail", "must be in [0, 1]", r.p_fail)
    _check(r.workers >= 1, "run.workers", "must be >= 1", r.workers)
    return cfg


def from_flat(flat: dict[str, str]) -> ExperimentConfig:
    paths = field_paths()
    typed = {}
    for key, raw in flat.items():
        if key not in paths:
            raise ConfigError(f"{key}: unknown config key")
        typed[key] = _coerce(key, raw, paths[key])
    return validate(_build(ExperimentConfig, typed))


def parse_text(text: str) -> ExperimentConfig:
    flat: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in flat:
            raise ConfigError(f"{key}: duplicate key on line {lineno}")
        flat[key] = value
    return from_flat(flat)


def parse_config(source: str | Path) -> ExperimentConfig:
    """Parse a config file path; raises :class:`ConfigError` on any problem."""
    path = Path(source)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_text(text)


def flatten_config(cfg: ExperimentConfig, prefix: str = "") -> dict[str, typing.Any]:
    out = {}
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if dataclasses.is_dataclass(value):
            out.update(flatten_config(value, prefix + f.name + "."))
        else:
            out[prefix + f.name] = value
    return out


def to_text(cfg: ExperimentConfig) -> str:
    return "".join(f"{k} = {_format(v)}\n" for k, v in flatten_config(cfg).items())


def override(cfg: ExperimentConfig, path: str, raw) -> ExperimentConfig:
    """Return a copy of ``cfg`` with one dotted field replaced (``raw`` may be text)."""
    paths = field_paths()
    if path not in paths:
        raise ConfigError(f"{path}: unknown config key")
    flat = {k: _format(v) for k, v in flatten_config(cfg).items()}
    flat[path] = raw if isinstance(raw, str) else _format(raw)
    return from_flat(flat)
