"""Strict run configuration (YAML or JSON document)."""

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .approximators import FAMILIES
from .errors import ConfigError
from .training import LmConfig, SchemeSpec

SYSTEMS = ("bioreactor", "ln_example", "car_following")
SCHEMES = ("pse", "poly", "nn", "hybrid")


@dataclass
class SystemConfig:
    name: str = "bioreactor"
    params: dict = field(default_factory=dict)


@dataclass
class SchemeConfig:
    type: str = "hybrid"
    h: int | None = None
    family: str = "power"
    L: int | None = None
    r: list | None = None
    poly_init: str = "parsimonious"


@dataclass
class SamplingConfig:
    Q: int | None = None
    S: int = 10_000
    n_ic: int | None = None
    k_trans: int | None = None
    seed: int = 0


@dataclass
class LmSection:
    lambda0: float = 1e-2
    tol_f: float = 1e-8
    tol_r: float = 1e-4
    k_max: int = 1000


@dataclass
class EnsembleConfig:
    n_real: int = 1


@dataclass
class RunConfig:
    system: SystemConfig = field(default_factory=SystemConfig)
    scheme: SchemeConfig = field(default_factory=SchemeConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    lm: LmSection = field(default_factory=LmSection)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    output_dir: str = "run"

    def to_dict(self) -> dict:
        return asdict(self)

    def lm_config(self) -> LmConfig:
        return LmConfig(**asdict(self.lm))

    def scheme_spec(self) -> SchemeSpec:
        s = self.scheme
        return SchemeSpec(s.type, s.family, s.h or 0, s.L or 0, tuple(s.r or ()))


_SECTIONS = {"system": SystemConfig, "scheme": SchemeConfig, "sampling": SamplingConfig,
             "lm": LmSection, "ensemble": EnsembleConfig}

_TYPES = {
    ("scheme", "h"): int, ("scheme", "L"): int, ("sampling", "Q"): int, ("sampling", "S"): int,
    ("sampling", "n_ic"): int, ("sampling", "k_trans"): int, ("sampling", "seed"): int,
    ("lm", "lambda0"): float, ("lm", "tol_f"): float, ("lm", "tol_r"): float, ("lm", "k_max"): int,
    ("ensemble", "n_real"): int, ("system", "name"): str, ("scheme", "type"): str,
    ("scheme", "family"): str, ("scheme", "poly_init"): str, ("system", "params"): dict, ("scheme", "r"): list,
}


def _coerce(section, key, value):
    want = _TYPES.get((section, key))
    if value is None or want is None:
        return value
    if want is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{section}.{key} must be an integer, got {value!r}")
        return value
    if want is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{section}.{key} must be a number, got {value!r}")
        return float(value)
    if want is list:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return [float(value)]
        if not isinstance(value, list) or not all(isinstance(v, (int, float)) for v in value):
            raise ConfigError(f"{section}.{key} must be a number or list of numbers")
        return [float(v) for v in value]
    if not isinstance(value, want):
        raise ConfigError(f"{section}.{key} must be of type {want.__name__}")
    return value


def parse_config(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a key-value mapping")
    unknown = set(doc) - set(_SECTIONS) - {"output_dir"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kw = {}
    for name, cls in _SECTIONS.items():
        sec = doc.get(name) or {}
        if not isinstance(sec, dict):
            raise ConfigError(f"section {name!r} must be a mapping")
        allowed = {f.name for f in fields(cls)}
        bad = set(sec) - allowed
        if bad:
            raise ConfigError(f"unknown keys in {name}: {sorted(bad)}")
        kw[name] = cls(**{k: _coerce(name, k, v) for k, v in sec.items()})
    out = doc.get("output_dir", "run")
    if not isinstance(out, str):
        raise ConfigError("output_dir must be a string")
    cfg = RunConfig(**kw, output_dir=out)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig):
    s = cfg.scheme
    if cfg.system.name not in SYSTEMS:
        raise ConfigError(f"unknown system {cfg.system.name!r}; expected one of {SYSTEMS}")
    if s.type not in SCHEMES:
        raise ConfigError(f"unknown scheme {s.type!r}; expected one of {SCHEMES}")
    if s.family not in FAMILIES:
        raise ConfigError(f"unknown family {s.family!r}; expected one of {FAMILIES}")
    if s.poly_init not in ("parsimonious", "naive"):
        raise ConfigError("poly_init must be 'parsimonious' or 'naive'")
    if s.type in ("pse", "poly", "hybrid") and (s.h is None or s.h < (1 if s.type == "pse" else 0)):
        raise ConfigError(f"scheme {s.type} needs a degree h")
    if s.type in ("nn", "hybrid") and (s.L is None or s.L < 1):
        raise ConfigError(f"scheme {s.type} needs a width L >= 1")
    if s.type == "hybrid":
        if not s.r or any(v <= 0 for v in s.r):
            raise ConfigError("hybrid scheme needs a positive radius r")
        if s.family != "power" and any(v > 1 for v in s.r):
            raise ConfigError("Legendre/Chebyshev hybrids require r_m <= 1")
    if s.type == "pse" and s.family != "power":
        raise ConfigError("pse uses the power family")
    if cfg.sampling.S < 1 or (cfg.sampling.Q is not None and cfg.sampling.Q < 1):
        raise ConfigError("sample counts must be positive")
    if cfg.ensemble.n_real < 1:
        raise ConfigError("ensemble.n_real must be >= 1")
    try:
        cfg.lm_config()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
        doc = yaml.safe_load(text)
    except (OSError, UnicodeDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    return parse_config(doc if doc is not None else {})


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True)
