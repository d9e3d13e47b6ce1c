"""Run configuration: TOML tables with defaults for every key.

Units: energies and rates in cm^-1, temperatures in Kelvin, times in
internal units (cm^-1)^-1.
"""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import tomli
import tomli_w

from .bath import BathSpec
from .evolve import BathSet, Region, RegionSchedule
from .model import PROBE_KINDS, ModelParams


class ConfigError(ValueError):
    pass


def _key(name: str, toml_key: Optional[str] = None, **kw):
    return field(metadata={"key": toml_key or name}, **kw)


@dataclass(frozen=True)
class SystemConfig:
    eps: tuple = (250.0, 200.0, 200.0, 0.0, 200.0, 200.0)
    hopping: float = -60.0


@dataclass(frozen=True)
class BathConfig:
    lam: float = _key("lam", "lambda", default=35.0)
    cutoff: float = 106.0
    temperature: float = 300.0
    matsubara_terms: int = 1000
    tail_tol: float = 1e-10


@dataclass(frozen=True)
class ProbeConfig:
    lam: float = _key("lam", "lambda", default=10.0)
    cutoff: float = 106.0
    temperature: float = 300.0
    matsubara_terms: int = 1000
    tail_tol: float = 1e-10
    chi: float = 1.0
    kind: str = "number_conserving"
    custom_matrix: str = ""


@dataclass(frozen=True)
class SinkConfig:
    gamma: float = 0.1
    site: int = 4


@dataclass(frozen=True)
class ProtocolConfig:
    region1_duration: float = 0.5
    region1_sample: float = 0.01
    region2_cap: float = 50.0
    region2_residual_tol: float = 0.0  # 0 selects 1e-10 * ||H||_F
    region2_sample: float = 0.05
    region3_cap: float = 500.0
    region3_n_threshold: float = 1e-4
    region3_sample: float = 0.5
    rtol: float = 1e-8
    atol: float = 1e-10


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "qbl_out"
    emit_plot_script: bool = True
    render_figures: bool = True


@dataclass(frozen=True)
class Toggles:
    include_lamb_shift: bool = True
    secular: bool = False
    bath_convention: str = "rate"


@dataclass(frozen=True)
class RunConfig:
    system: SystemConfig = SystemConfig()
    bath1: BathConfig = BathConfig()
    bath4: BathConfig = BathConfig()
    probe: ProbeConfig = ProbeConfig()
    sink: SinkConfig = SinkConfig()
    protocol: ProtocolConfig = ProtocolConfig()
    output: OutputConfig = OutputConfig()
    toggles: Toggles = Toggles()

    def model_params(self, custom_probe=None) -> ModelParams:
        if self.probe.kind == "custom" and custom_probe is None:
            from .io import read_matrix

            custom_probe = read_matrix(self.probe.custom_matrix)
        return ModelParams(
            eps=self.system.eps,
            hopping=self.system.hopping,
            chi=self.probe.chi,
            gamma_sink=self.sink.gamma,
            sink_site=self.sink.site,
            probe_kind=self.probe.kind,
            custom_probe=custom_probe,
        )

    def bath_spec(self, section: str) -> BathSpec:
        c = getattr(self, section)
        return BathSpec(
            lam=c.lam,
            cutoff=c.cutoff,
            temperature=c.temperature,
            matsubara_terms=c.matsubara_terms,
            tail_tol=c.tail_tol,
            convention=self.toggles.bath_convention,
        )

    def baths(self) -> BathSet:
        return BathSet(self.bath_spec("bath1"), self.bath_spec("bath4"), self.bath_spec("probe"))

    def schedule(self) -> RegionSchedule:
        pc = self.protocol
        chi = self.probe.chi
        return RegionSchedule(
            (
                Region("I", 0.0, False, duration=pc.region1_duration, sample_interval=pc.region1_sample),
                Region("II", chi, False, stop="residual", stop_tol=pc.region2_residual_tol or None,
                       cap=pc.region2_cap, sample_interval=pc.region2_sample),
                Region("III", chi, True, stop="n_expect", stop_tol=pc.region3_n_threshold,
                       cap=pc.region3_cap, sample_interval=pc.region3_sample),
            ),
            rtol=pc.rtol,
            atol=pc.atol,
        )


def _line_of(text: str, section: str, key: Optional[str] = None) -> Optional[int]:
    lines = text.splitlines()
    header = re.compile(r"^\s*\[\s*" + re.escape(section) + r"\s*\]")
    in_section = False
    for no, line in enumerate(lines, start=1):
        if header.match(line):
            if key is None:
                return no
            in_section = True
            continue
        if re.match(r"^\s*\[", line):
            in_section = False
        if in_section and key is not None and re.match(r"^\s*" + re.escape(key) + r"\s*=", line):
            return no
        dotted = r"^\s*" + re.escape(section) + r"\s*\.\s*" + re.escape(key or "") + r"\s*="
        if key is not None and re.match(dotted, line):
            return no
    return None


def _where(path, text, section, key=None) -> str:
    no = _line_of(text, section, key)
    loc = f"{path}:{no}" if no else str(path)
    name = f"{section}.{key}" if key else section
    return f"{loc}: {name}"


def _coerce(value, typ, where):
    if typ is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if typ is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if typ is tuple:
        if not isinstance(value, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
        ):
            raise ConfigError(f"{where}: expected a list of numbers, got {value!r}")
        return tuple(float(v) for v in value)
    raise TypeError(typ)


_TYPES = {"float": float, "int": int, "bool": bool, "str": str, "tuple": tuple}


def _section_from(cls, data: dict, path, text, section):
    kwargs = {}
    by_key = {f.metadata.get("key", f.name): f for f in dataclasses.fields(cls)}
    for key, value in data.items():
        if key not in by_key:
            raise ConfigError(
                f"{_where(path, text, section, key)}: unknown key; "
                f"allowed keys are {sorted(by_key)}"
            )
        f = by_key[key]
        kwargs[f.name] = _coerce(value, _TYPES[f.type], _where(path, text, section, key))
    return cls(**kwargs)


def _validate(cfg: RunConfig, path, text):
    def fail(section, key, msg):
        raise ConfigError(f"{_where(path, text, section, key)}: {msg}")

    if len(cfg.system.eps) != 6:
        fail("system", "eps", f"needs 6 on-site energies, got {len(cfg.system.eps)}")
    if not 0.0 <= cfg.probe.chi <= 1.0:
        fail("probe", "chi", f"out of range [0, 1]: {cfg.probe.chi}")
    if cfg.probe.kind not in PROBE_KINDS:
        fail("probe", "kind", f"must be one of {list(PROBE_KINDS)}")
    if cfg.probe.kind == "custom" and not cfg.probe.custom_matrix:
        fail("probe", "custom_matrix", "required when kind = \"custom\"")
    if cfg.sink.gamma < 0:
        fail("sink", "gamma", f"must be >= 0, got {cfg.sink.gamma}")
    if not 1 <= cfg.sink.site <= 6:
        fail("sink", "site", f"must be in 1..6, got {cfg.sink.site}")
    if cfg.toggles.bath_convention not in ("rate", "reorganization"):
        fail("toggles", "bath_convention", "must be \"rate\" or \"reorganization\"")
    for section in ("bath1", "bath4", "probe"):
        c = getattr(cfg, section)
        for key, val in (("lambda", c.lam), ("cutoff", c.cutoff), ("temperature", c.temperature)):
            if not val > 0:
                fail(section, key, f"must be > 0, got {val}")
        if c.matsubara_terms < 1:
            fail(section, "matsubara_terms", "must be >= 1")
    pc = cfg.protocol
    for name in ("region1_duration", "region1_sample", "region2_cap", "region2_sample",
                 "region3_cap", "region3_n_threshold", "region3_sample", "rtol", "atol"):
        if not getattr(pc, name) > 0:
            fail("protocol", name, f"must be > 0, got {getattr(pc, name)}")
    if pc.region2_residual_tol < 0:
        fail("protocol", "region2_residual_tol", "must be >= 0")


def parse_config_text(text: str, path="<config>") -> RunConfig:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: syntax error: {exc}") from None
    sections = {f.name: f.type for f in dataclasses.fields(RunConfig)}
    kwargs = {}
    for section, body in data.items():
        if section not in sections:
            raise ConfigError(
                f"{_where(path, text, section)}: unknown section; allowed are {sorted(sections)}"
            )
        if not isinstance(body, dict):
            raise ConfigError(f"{_where(path, text, section)}: expected a table")
        cls = globals()[sections[section]]
        kwargs[section] = _section_from(cls, body, path, text, section)
    cfg = RunConfig(**kwargs)
    _validate(cfg, path, text)
    return cfg


def parse_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: no such config file")
    return parse_config_text(path.read_text(), path)


def to_dict(cfg: RunConfig) -> dict:
    out = {}
    for sf in dataclasses.fields(cfg):
        sec = getattr(cfg, sf.name)
        out[sf.name] = {
            f.metadata.get("key", f.name): list(getattr(sec, f.name)) if f.type == "tuple" else getattr(sec, f.name)
            for f in dataclasses.fields(sec)
        }
    return out


def serialize(cfg: RunConfig) -> str:
    return tomli_w.dumps(to_dict(cfg))
