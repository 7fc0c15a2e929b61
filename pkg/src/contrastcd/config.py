"""Run configuration, the flat ``key = value`` file format, and seed derivation.

A file holds one dotted key per line (``sampler.k = 5``); ``#`` starts a
comment. Every field of :class:`RunConfig` serializes, and parsing the
serialized text gives back an equal object.
"""

from __future__ import annotations

import dataclasses
import types
import typing
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .io import ParseError

MASK64 = (1 << 64) - 1


def module_tag(name: str) -> int:
    """Stable per-module tag; shifted clear of item indices below 2**24."""
    return zlib.crc32(name.encode()) << 24


def derive_seed(master: int, module: str, index: int = 0) -> int:
    """``master XOR tag(module) XOR index`` truncated to 64 bits."""
    return (int(master) ^ module_tag(module) ^ int(index)) & MASK64


def derive_rng(master: int, module: str, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, module, index))


@dataclass
class DataConfig:
    nodes: int = 20
    edges: float = 20.0
    family: str = "polynomial"
    count: int = 10
    samples: int = 1000
    p_interv: float = 0.4


@dataclass
class SamplerConfig:
    k: int = 5
    subsets: int | None = None  # None: 10 * (n / k) ** 2
    q: float = 2.0
    r: float = 2.0
    rho: float = 0.3
    lam: float = 0.5
    beta_cov: float = 1.0
    w1: float = 1.0
    w2: float = 1.0


@dataclass
class EnsembleConfig:
    r_boot: int = 10
    degree: int = 2
    epsilon: float = 0.05
    tau: float = 0.55
    ridge: float = 1e-3
    temperature: float | None = None
    pattern: bool = True


@dataclass
class TestsConfig:
    alpha: float = 0.01
    sep_alpha: float = 0.01

    __test__ = False


@dataclass
class RulesConfig:
    enabled: tuple[str, ...] = ("SSI", "CVT", "DPT")
    max_len: int = 3


@dataclass
class AggregationConfig:
    dominance: float = 1.5
    k_env: int = 0
    cap: int | None = None
    adjacency: str = "majority"


@dataclass
class OracleSection:
    n: int = 4
    mode: str = "pc-pattern"
    max_len: int = 3


@dataclass
class PathsConfig:
    out: str = "out"


@dataclass
class RunConfig:
    seed: int = 0
    data: DataConfig = field(default_factory=DataConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    tests: TestsConfig = field(default_factory=TestsConfig)
    rules: RulesConfig = field(default_factory=RulesConfig)
    aggregation: AggregationConfig = field(default_factory=AggregationConfig)
    oracle: OracleSection = field(default_factory=OracleSection)
    paths: PathsConfig = field(default_factory=PathsConfig)

    def subset_count(self, n: int) -> int:
        if self.sampler.subsets is not None:
            return self.sampler.subsets
        return int(np.ceil(10 * (n / self.sampler.k) ** 2))


# ---------------------------------------------------------------------------
# (de)serialization


def _hints(cls) -> dict:
    return typing.get_type_hints(cls)


def _fmt_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    return str(v)


def _parse_value(text: str, tp):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin in (typing.Union, types.UnionType) and type(None) in args:
        if text.lower() == "none":
            return None
        inner = next(a for a in args if a is not type(None))
        return _parse_value(text, inner)
    if tp is bool:
        low = text.lower()
        if low not in ("true", "false"):
            raise ValueError(f"expected true/false, got {text!r}")
        return low == "true"
    if tp is int:
        return int(text)
    if tp is float:
        return float(text)
    if tp is str:
        return text
    if origin is tuple:
        return tuple(x.strip() for x in text.split(",") if x.strip())
    raise ValueError(f"unsupported field type {tp}")


def to_text(cfg: RunConfig) -> str:
    lines = [f"seed = {cfg.seed}"]
    for f in dataclasses.fields(cfg):
        if f.name == "seed":
            continue
        section = getattr(cfg, f.name)
        for sf in dataclasses.fields(section):
            lines.append(f"{f.name}.{sf.name} = {_fmt_value(getattr(section, sf.name))}")
    return "\n".join(lines) + "\n"


def from_text(text: str, path="<string>", base: RunConfig | None = None) -> RunConfig:
    """Parse config text; unspecified keys keep the values of ``base``."""
    cfg = dataclasses.replace(base) if base is not None else RunConfig()
    sections = {f.name: dataclasses.replace(getattr(cfg, f.name)) for f in dataclasses.fields(cfg) if f.name != "seed"}
    seed = cfg.seed
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ParseError(path, lineno, f"expected 'key = value', got {raw!r}")
        key, val = key.strip(), val.strip()
        try:
            if key == "seed":
                seed = int(val)
                continue
            sec, dot, name = key.partition(".")
            if not dot or sec not in sections:
                raise ValueError(f"unknown key {key!r}")
            obj = sections[sec]
            hints = _hints(type(obj))
            if name not in hints:
                raise ValueError(f"unknown key {key!r}")
            setattr(obj, name, _parse_value(val, hints[name]))
        except ValueError as e:
            raise ParseError(path, lineno, str(e)) from e
    return RunConfig(seed=seed, **sections)


def load(path) -> RunConfig:
    return from_text(Path(path).read_text(), path)


def save(path, cfg: RunConfig) -> None:
    Path(path).write_text(to_text(cfg))
