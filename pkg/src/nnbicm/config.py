"""Experiment specifications stored as INI files, and the bundled figure presets.

A file has an ``[experiment]`` section (preset name, sweep, frames, output
paths), a ``[system]`` section mirroring SystemConfig, and optional
``[train.net1]`` / ``[train.net2]`` sections for the training recipes.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

from .mathcore import ConfigurationError
from .pipelines import RECEIVERS, SystemConfig

PRESET_KINDS = ("fig4", "fig5", "fig6", "fig7", "fig8", "custom")
STAGES = ("net1", "net2")


@dataclass
class TrainRecipe:
    """Training parameters for one network stage."""

    hidden: tuple[int, ...] = (32, 16, 8)
    gamma_t_db: float = 13.0
    optimizer: str = "scg"
    epochs: int = 200
    learning_rate: float = 0.5
    seed: int = 1
    init_scheme: str = "symmetric-uniform"
    scale_inputs: bool = False
    out: str = ""


@dataclass
class ExperimentSpec:
    system: SystemConfig = field(default_factory=SystemConfig)
    sweep: tuple[float, ...] = (13.0,)
    frames: int = 1000
    batch_size: int = 100
    csv: str = "results.csv"
    curves_dir: str = ""
    preset: str = "custom"
    kind: str = "custom"
    receivers: tuple[str, ...] = ()  # empty: just system.receiver
    train: dict = field(default_factory=dict)  # stage -> TrainRecipe

    def __post_init__(self):
        self.sweep = tuple(float(g) for g in self.sweep)
        self.receivers = tuple(self.receivers)
        if not self.sweep:
            raise ConfigurationError("sweep is empty")
        if any(b <= a for a, b in zip(self.sweep, self.sweep[1:])):
            raise ConfigurationError(f"sweep values must be strictly increasing: {list(self.sweep)}")
        for r in self.receivers:
            if r not in RECEIVERS:
                raise ConfigurationError(f"unknown receiver {r!r}")
        if self.frames < 1:
            raise ConfigurationError("frames must be >= 1")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if self.kind not in PRESET_KINDS:
            raise ConfigurationError(f"kind must be one of {PRESET_KINDS}, got {self.kind!r}")
        for stage in self.train:
            if stage not in STAGES:
                raise ConfigurationError(f"unknown training stage {stage!r}")

    @property
    def receiver_list(self) -> tuple[str, ...]:
        return self.receivers or (self.system.receiver,)


_TUPLE_TYPES = {"hidden": int, "sweep": float, "receivers": str}


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return " ".join(_fmt(x) for x in v)
    return str(v)


def _coerce(raw: str, proto, key: str):
    try:
        if isinstance(proto, bool):
            low = raw.strip().lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if isinstance(proto, int):
            return int(raw)
        if isinstance(proto, float):
            return float(raw)
        if isinstance(proto, tuple):
            items = raw.replace(",", " ").split()
            cast = _TUPLE_TYPES.get(key.rsplit(".", 1)[-1], float)
            return tuple(cast(x) for x in items)
    except ValueError as exc:
        raise ConfigurationError(f"bad value for {key}: {raw!r}") from exc
    return raw


def _read_dataclass(section, cls, where: str):
    proto = cls()
    kw = {}
    names = {f.name for f in fields(cls)}
    for key, raw in section.items():
        if key not in names:
            raise ConfigurationError(f"[{where}] unknown key {key!r}")
        kw[key] = _coerce(raw, getattr(proto, key), f"{where}.{key}")
    return cls(**kw)


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keep "N" distinct from "n"
    return cp


def to_ini(spec: ExperimentSpec) -> str:
    cp = _parser()
    cp["experiment"] = {
        "preset": spec.preset, "kind": spec.kind, "sweep": _fmt(spec.sweep),
        "receivers": _fmt(spec.receivers), "frames": _fmt(spec.frames), "batch_size": _fmt(spec.batch_size),
        "csv": spec.csv, "curves_dir": spec.curves_dir,
    }
    cp["system"] = {f.name: _fmt(getattr(spec.system, f.name)) for f in fields(SystemConfig)}
    for stage in STAGES:
        if stage in spec.train:
            r = spec.train[stage]
            cp[f"train.{stage}"] = {f.name: _fmt(getattr(r, f.name)) for f in fields(TrainRecipe)}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def from_ini(text: str, source: str = "<string>") -> ExperimentSpec:
    cp = _parser()
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigurationError(f"{source}: {exc}") from exc
    for name in cp.sections():
        if name not in ("experiment", "system") and name not in (f"train.{s}" for s in STAGES):
            raise ConfigurationError(f"{source}: unknown section [{name}]")
    system = _read_dataclass(cp["system"], SystemConfig, "system") if cp.has_section("system") else SystemConfig()
    train = {s: _read_dataclass(cp[f"train.{s}"], TrainRecipe, f"train.{s}")
             for s in STAGES if cp.has_section(f"train.{s}")}
    exp = dict(cp["experiment"]) if cp.has_section("experiment") else {}
    proto = ExperimentSpec()
    kw = {}
    for key, raw in exp.items():
        if key not in {"preset", "kind", "sweep", "receivers", "frames", "batch_size", "csv", "curves_dir"}:
            raise ConfigurationError(f"[experiment] unknown key {key!r}")
        kw[key] = _coerce(raw, getattr(proto, key), f"experiment.{key}")
    return ExperimentSpec(system=system, train=train, **kw)


def load_spec(path) -> ExperimentSpec:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"config file not found: {p}")
    return from_ini(p.read_text(), str(p))


def save_spec(spec: ExperimentSpec, path) -> None:
    Path(path).write_text(to_ini(spec))


def preset_names() -> list[str]:
    files = resources.files("nnbicm.presets").iterdir()
    return sorted(f.name[:-4] for f in files if f.name.endswith(".ini"))


def load_preset(name: str) -> tuple[ExperimentSpec, str | None]:
    """Resolve ``fig4`` or ``fig4-net1`` style names; returns (spec, stage or None)."""
    stage = None
    base = name
    for s in STAGES:
        if name.endswith("-" + s):
            base, stage = name[: -len(s) - 1], s
    res = resources.files("nnbicm.presets").joinpath(base + ".ini")
    if not res.is_file():
        raise ConfigurationError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    spec = from_ini(res.read_text(), f"preset {base}")
    if stage is not None and stage not in spec.train:
        raise ConfigurationError(f"preset {base!r} has no {stage} training recipe")
    return spec, stage

