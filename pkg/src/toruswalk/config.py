"""Flat ``key = value`` experiment configuration."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
from dataclasses import dataclass, field

from .steps import build_lazy_srw, build_poisson_jump, build_srw

OUT_ENV = "TORUSWALK_OUT"


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str = "cover"
    walk: str = "srw"
    K: int = 64
    K_list: tuple = (32, 64, 128)
    r: float = 8.0
    R: float = 10.0
    s: float = 1.0
    n: int = 8
    m_list: tuple = (2, 4, 8)
    alpha: tuple = (0.25, 0.5, 0.75)
    a: float = 1.0
    a_list: tuple = (0.5, 1.0, 1.5)
    rho: float = 0.1
    gamma_bar: float = 10.0
    trials: int = 20
    seed: int = 0
    excursions: int = 2000
    N_list: tuple = (250, 500, 1000, 2000)
    delta: float = 0.3
    b_list: tuple = tuple(round(2 / math.pi * f, 12) for f in (0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0))
    cap_multiplier: float = 64.0
    coupling_cap: int = 100_000
    max_K: int = 10_000
    tolerances: dict = field(default_factory=dict)
    out: str = field(default_factory=lambda: os.environ.get(OUT_ENV, "results"))
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1 (got {self.trials})")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1 (got {self.workers})")

    def dist(self):
        return parse_walk(self.walk)

    def tol(self, name, default):
        return self.tolerances.get(name, default)

    def as_dict(self):
        d = dataclasses.asdict(self)
        d["tolerances"] = dict(sorted(self.tolerances.items()))
        return d

    def payload_dict(self):
        """Config fields that determine results (parallelism and output location excluded)."""
        d = self.as_dict()
        d.pop("workers")
        d.pop("out")
        return d

    def hash(self):
        text = json.dumps(self.payload_dict(), sort_keys=True, default=list)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_TUPLE_TYPES = {"K_list": int, "m_list": int, "N_list": int, "alpha": float, "a_list": float,
                "b_list": float}


def parse_walk(text):
    """'srw', 'lazy:<eps>' or 'poisson:<lambda>:<K>'."""
    parts = str(text).strip().split(":")
    try:
        if parts[0] == "srw" and len(parts) == 1:
            return build_srw()
        if parts[0] == "lazy" and len(parts) == 2:
            return build_lazy_srw(float(parts[1]))
        if parts[0] == "poisson" and len(parts) == 3:
            return build_poisson_jump(float(parts[1]), int(parts[2]))
    except ValueError as e:
        raise ConfigError(f"bad walk spec {text!r}: {e}") from e
    raise ConfigError(f"unknown walk spec {text!r} (srw | lazy:<eps> | poisson:<lambda>:<K>)")


def _coerce(key, raw):
    if key in _TUPLE_TYPES:
        conv = _TUPLE_TYPES[key]
        if isinstance(raw, (list, tuple)):
            return tuple(conv(v) for v in raw)
        return tuple(conv(v) for v in str(raw).replace(" ", "").split(",") if v)
    default = _FIELDS[key].default
    if isinstance(default, bool):
        return str(raw).lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return str(raw)


def apply_overrides(values: dict, overrides: dict):
    """Merge ``key -> raw`` pairs into ``values``; 'tol.<metric>' keys set tolerances."""
    out = dict(values)
    tol = dict(out.get("tolerances", {}))
    for key, raw in overrides.items():
        if raw is None:
            continue
        if key.startswith("tol."):
            tol[key[4:]] = float(raw)
            continue
        if key not in _FIELDS or key == "tolerances":
            raise ConfigError(f"unknown config key {key!r}")
        try:
            out[key] = _coerce(key, raw)
        except ValueError as e:
            raise ConfigError(f"bad value for {key!r}: {raw!r}") from e
    out["tolerances"] = tol
    return out


def parse_config_text(text, source="<config>"):
    pairs = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, val = (p.strip() for p in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if not (key in _FIELDS or key.startswith("tol.")) or key == "tolerances":
            raise ConfigError(f"{source}:{lineno}: unknown config key {key!r}")
        pairs[key] = val
    return pairs


def load_config(path=None, overrides=None, **defaults) -> ExperimentConfig:
    """Read a flat config file, then apply command-line overrides on top."""
    values = {}
    values = apply_overrides(values, defaults)
    if path is not None:
        with open(path) as fh:
            values = apply_overrides(values, parse_config_text(fh.read(), str(path)))
    values = apply_overrides(values, overrides or {})
    try:
        return ExperimentConfig(**values)
    except TypeError as e:
        raise ConfigError(str(e)) from e
