"""Experiment configuration: an INI file with three sections.

Grammar (every key is optional unless marked)::

    [experiment]
    kind     = conditions | density-bound | cdf-lipschitz | stable-counterexample
               | polya | matrix-normal | wishart-oracle          (required)
    seed     = non-negative integer below 2**64                  (required)
    reps     = integer >= 100                                    (default 10000)
    schedule = comma-separated strictly increasing dimensions    (default 64)
    j, k, l  = positive integers                                 (default 2, 2, 2)
    workers  = positive integer                                  (default 1)
    y_grid   = comma-separated floats; empty means the default grid
    pairs    = comma-separated a:y pairs, e.g. -1:1, 0:1
    t        = comma-separated floats                            (default 1)
    output   = report path without extension                     (default: kind)
    format   = csv | json                                        (default csv)

    [model]       any DataModelSpec field: family, sigma, radius_shift, ...
    [modulator]   family, nu, cf_index

Unknown sections or keys are errors. ``#`` and ``;`` start comment lines.
"""
from __future__ import annotations

import configparser
import hashlib
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

from .datamodels import DataModelSpec
from .modulators import ModulatorSpec

KINDS = (
    "conditions",
    "density-bound",
    "cdf-lipschitz",
    "stable-counterexample",
    "polya",
    "matrix-normal",
    "wishart-oracle",
)
FORMATS = ("csv", "json")
MIN_REPS = 100
SEED_LIMIT = 1 << 64


class ConfigError(ValueError):
    """Invalid configuration; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: Optional[int] = None, source: str = "<config>"):
        self.line = line
        self.source = source
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seed: int
    model: DataModelSpec = field(default_factory=DataModelSpec)
    modulator: ModulatorSpec = field(default_factory=ModulatorSpec)
    reps: int = 10_000
    schedule: tuple[int, ...] = (64,)
    j: int = 2
    k: int = 2
    l: int = 2
    workers: int = 1
    y_grid: Optional[tuple[float, ...]] = None
    pairs: tuple[tuple[float, float], ...] = ()
    t: tuple[float, ...] = (1.0,)
    output: str = ""
    format: str = "csv"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        if not 0 <= self.seed < SEED_LIMIT:
            raise ConfigError("seed must be a non-negative 64-bit integer")
        if self.reps < MIN_REPS:
            raise ConfigError(f"reps must be at least {MIN_REPS}, got {self.reps}")
        if not self.schedule:
            raise ConfigError("schedule must list at least one dimension")
        if any(d < 1 for d in self.schedule):
            raise ConfigError("dimensions must be positive")
        if any(b <= a for a, b in zip(self.schedule, self.schedule[1:])):
            raise ConfigError("schedule must be strictly increasing")
        for name in ("j", "k", "l", "workers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if any(y < a for a, y in self.pairs):
            raise ConfigError("pairs must satisfy a <= y")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}")

    @property
    def output_stem(self) -> str:
        return self.output or self.kind

    def with_(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)


_EXPERIMENT_KEYS = {f.name for f in fields(ExperimentConfig)} - {"model", "modulator"}
_MODEL_KEYS = {f.name: f for f in fields(DataModelSpec)}
_MOD_KEYS = {f.name: f for f in fields(ModulatorSpec)}
_SECTIONS = ("experiment", "model", "modulator")


def _key_line(text: str, section: str, key: str) -> Optional[int]:
    current = None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = re.match(r"\[(.+)\]$", line)
        if m:
            current = m.group(1).strip()
        elif current == section and re.match(rf"{re.escape(key)}\s*[=:]", line, re.IGNORECASE):
            return no
    return None


def _section_line(text: str, section: str) -> Optional[int]:
    for no, raw in enumerate(text.splitlines(), 1):
        if raw.strip() == f"[{section}]":
            return no
    return None


def _floats(raw: str) -> tuple[float, ...]:
    return tuple(float(x) for x in raw.split(",") if x.strip())


def _ints(raw: str) -> tuple[int, ...]:
    return tuple(int(x) for x in raw.split(",") if x.strip())


def _pairs(raw: str) -> tuple[tuple[float, float], ...]:
    out = []
    for item in raw.split(","):
        if not item.strip():
            continue
        a, _, y = item.partition(":")
        if not _:
            raise ValueError(f"pair {item.strip()!r} is not of the form a:y")
        out.append((float(a), float(y)))
    return tuple(out)


_EXPERIMENT_PARSERS = {
    "kind": str.strip,
    "seed": int,
    "reps": int,
    "schedule": _ints,
    "j": int,
    "k": int,
    "l": int,
    "workers": int,
    "y_grid": lambda s: _floats(s) or None,
    "pairs": _pairs,
    "t": _floats,
    "output": str.strip,
    "format": str.strip,
}


def _coerce_field(f, raw: str):
    # dataclass annotations are strings under postponed evaluation
    ann = str(f.type)
    if "float" in ann:
        return float(raw)
    if "int" in ann:
        return int(raw)
    return raw.strip()


def loads(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse and validate configuration text."""
    cp = configparser.ConfigParser(interpolation=None, strict=True, default_section="\0none")
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        if line is None and getattr(exc, "errors", None):
            line = exc.errors[0][0]
        raise ConfigError(str(exc).splitlines()[0], line, source) from None

    for sec in cp.sections():
        if sec not in _SECTIONS:
            raise ConfigError(f"unknown section [{sec}]", _section_line(text, sec), source)
    if "experiment" not in cp:
        raise ConfigError("missing [experiment] section", None, source)

    def parse_section(sec, allowed, convert):
        out = {}
        if sec not in cp:
            return out
        for key, raw in cp[sec].items():
            if key not in allowed:
                raise ConfigError(f"unknown key {key!r} in [{sec}]", _key_line(text, sec, key), source)
            try:
                out[key] = convert(key, raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key!r}: {exc}", _key_line(text, sec, key), source) from None
        return out

    exp = parse_section("experiment", _EXPERIMENT_KEYS, lambda k, v: _EXPERIMENT_PARSERS[k](v))
    model = parse_section("model", _MODEL_KEYS, lambda k, v: _coerce_field(_MODEL_KEYS[k], v))
    mod = parse_section("modulator", _MOD_KEYS, lambda k, v: _coerce_field(_MOD_KEYS[k], v))
    for key in ("kind", "seed"):
        if key not in exp:
            raise ConfigError(f"[experiment] requires {key!r}", _section_line(text, "experiment"), source)

    try:
        model_spec = DataModelSpec(**model)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[model]: {exc}", _section_line(text, "model"), source) from None
    try:
        mod_spec = ModulatorSpec(**mod)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[modulator]: {exc}", _section_line(text, "modulator"), source) from None
    try:
        return ExperimentConfig(model=model_spec, modulator=mod_spec, **exp)
    except ConfigError as exc:
        raise ConfigError(str(exc).split(": ", 1)[1], _section_line(text, "experiment"), source) from None


def load(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, str(p)) from None
    return loads(text, str(p))


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dumps(cfg: ExperimentConfig) -> str:
    """Serialize so that ``loads(dumps(cfg)) == cfg``; every field is written."""
    lines = ["[experiment]"]
    for f in fields(ExperimentConfig):
        if f.name in ("model", "modulator"):
            continue
        v = getattr(cfg, f.name)
        if f.name == "pairs":
            text = ", ".join(f"{_fmt(a)}:{_fmt(y)}" for a, y in v)
        elif f.name == "y_grid":
            text = "" if v is None else ", ".join(_fmt(x) for x in v)
        elif isinstance(v, tuple):
            text = ", ".join(_fmt(x) for x in v)
        else:
            text = _fmt(v)
        lines.append(f"{f.name} = {text}".rstrip())
    for sec, spec in (("model", cfg.model), ("modulator", cfg.modulator)):
        lines += ["", f"[{sec}]"]
        for f in fields(spec):
            v = getattr(spec, f.name)
            if v is not None:
                lines.append(f"{f.name} = {_fmt(v)}")
    return "\n".join(lines) + "\n"


def config_hash(cfg: ExperimentConfig) -> str:
    """SHA-256 of the canonical serialization."""
    return hashlib.sha256(dumps(cfg).encode()).hexdigest()
