"""Run configuration: INI-style file with complete defaults.

An empty (or missing) config runs the default low-SNR scenario: 20x20 grid,
325 scans, two conditions, noise variance 7.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields

from .balloon import PhysioParams
from .design import Paradigm, default_paradigm
from .inference import ChainConfig
from .sampler import PriorConfig
from .simulate import TruthConfig


class ConfigError(ValueError):
    """Malformed or invalid run configuration."""


@dataclass(frozen=True)
class PhysioSection:
    eta: float = 0.5
    tau_psi: float = 1.25
    tau_f: float = 2.5
    tau_m: float = 1.0
    w_tilde: float = 0.2
    e0: float = 0.8
    v0: float = 0.02


@dataclass(frozen=True)
class ParadigmSection:
    n_scans: int = 325
    tr: float = 1.0
    dt: float = 0.5
    response_length: int = 50
    n_conditions: int = 2
    mean_isi: float = 5.03


@dataclass(frozen=True)
class SimulateSection:
    grid_height: int = 20
    grid_width: int = 20
    noise_var: float = 7.0
    bold_active_mean: float = 2.2
    bold_active_var: float = 0.3
    bold_inactive_var: float = 0.3
    perf_active_mean: float = 0.48
    perf_active_var: float = 0.1
    perf_inactive_var: float = 0.1
    drift_var: float = 10.0
    drift_order: int = 4
    baseline_var: float = 0.5


@dataclass(frozen=True)
class PriorSection:
    v_h: float = 0.1
    v_g: float = 0.1
    ising_beta: float = 0.7
    active_mean_loc: float = 1.0
    active_mean_var: float = 10.0
    var_shape: float = 2.1
    var_scale: float = 0.5


@dataclass(frozen=True)
class SamplerSection:
    iterations: int = 1000
    burn_in: int = 300
    seed: int = 0
    log_every: int = 100


@dataclass(frozen=True)
class SweepSection:
    noise_grid: tuple = (0.5, 1.0, 2.0, 7.0, 15.0, 30.0)
    n_seeds: int = 5
    methods: tuple = ("basic", "physio-2step")


@dataclass(frozen=True)
class PathsSection:
    out_dir: str = "."
    dataset_dir: str = ""


@dataclass(frozen=True)
class RunConfig:
    physio: PhysioSection = field(default_factory=PhysioSection)
    paradigm: ParadigmSection = field(default_factory=ParadigmSection)
    simulate: SimulateSection = field(default_factory=SimulateSection)
    priors: PriorSection = field(default_factory=PriorSection)
    sampler: SamplerSection = field(default_factory=SamplerSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    paths: PathsSection = field(default_factory=PathsSection)

    # -- conversions into the library objects --------------------------------

    def physio_params(self) -> PhysioParams:
        p = self.physio
        try:
            return PhysioParams(eta=p.eta, tau_psi=p.tau_psi, tau_f=p.tau_f,
                                tau_m=p.tau_m, w_tilde=p.w_tilde, e0=p.e0,
                                v0=p.v0)
        except ValueError as exc:
            raise ConfigError(f"invalid physiological parameters: {exc}") from exc

    def paradigm_obj(self) -> Paradigm:
        p = self.paradigm
        try:
            return default_paradigm(n_scans=p.n_scans, tr=p.tr, dt=p.dt,
                                    response_length=p.response_length,
                                    n_conditions=p.n_conditions,
                                    mean_isi=p.mean_isi)
        except ValueError as exc:
            raise ConfigError(f"invalid paradigm: {exc}") from exc

    def truth_config(self) -> TruthConfig:
        s = self.simulate
        return TruthConfig(
            grid_shape=(s.grid_height, s.grid_width),
            bold_active_mean=s.bold_active_mean,
            bold_active_var=s.bold_active_var,
            bold_inactive_var=s.bold_inactive_var,
            perf_active_mean=s.perf_active_mean,
            perf_active_var=s.perf_active_var,
            perf_inactive_var=s.perf_inactive_var,
            drift_var=s.drift_var, drift_order=s.drift_order,
            baseline_var=s.baseline_var, noise_var=s.noise_var)

    def prior_config(self, variant: str = "basic") -> PriorConfig:
        p = self.priors
        try:
            return PriorConfig(v_h=p.v_h, v_g=p.v_g, ising_beta=p.ising_beta,
                               active_mean_loc=p.active_mean_loc,
                               active_mean_var=p.active_mean_var,
                               var_shape=p.var_shape, var_scale=p.var_scale,
                               variant=variant, physio=self.physio_params())
        except ValueError as exc:
            raise ConfigError(f"invalid priors: {exc}") from exc

    def chain_config(self) -> ChainConfig:
        s = self.sampler
        if not 0 <= s.burn_in < s.iterations:
            raise ConfigError("need 0 <= burn_in < iterations")
        return ChainConfig(iterations=s.iterations, burn_in=s.burn_in,
                           log_every=s.log_every)


_SECTIONS = {
    "physio": PhysioSection,
    "paradigm": ParadigmSection,
    "simulate": SimulateSection,
    "priors": PriorSection,
    "sampler": SamplerSection,
    "sweep": SweepSection,
    "paths": PathsSection,
}


def _parse_value(raw: str, kind):
    raw = raw.strip()
    if kind is float:
        return float(raw)
    if kind is int:
        return int(raw)
    if kind is str:
        return raw
    if kind is tuple:
        items = [v.strip() for v in raw.split(",") if v.strip()]
        try:
            return tuple(float(v) for v in items)
        except ValueError:
            return tuple(items)
    raise ConfigError(f"unsupported config value type {kind}")


def _format_value(value) -> str:
    if isinstance(value, tuple):
        return ",".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def loads_config(text: str) -> RunConfig:
    """Parse config text; unknown sections or keys are errors."""
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    out = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        cls = _SECTIONS[section]
        spec = {f.name: f.type for f in fields(cls)}
        defaults = cls()
        kwargs = {}
        for key, raw in parser.items(section):
            if key not in spec:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            kind = type(getattr(defaults, key))
            try:
                kwargs[key] = _parse_value(raw, kind)
            except ValueError as exc:
                raise ConfigError(
                    f"bad value for {section}.{key}: {raw!r}") from exc
        out[section] = cls(**kwargs)
    return RunConfig(**out)


def load_config(path=None) -> RunConfig:
    """Load a config file; None yields the built-in defaults."""
    if path is None:
        return RunConfig()
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return loads_config(text)


def dumps_config(config: RunConfig) -> str:
    """Serialize a RunConfig; round-trips through loads_config exactly."""
    lines = []
    for section, cls in _SECTIONS.items():
        lines.append(f"[{section}]")
        value = getattr(config, section)
        for f in fields(cls):
            lines.append(f"{f.name} = {_format_value(getattr(value, f.name))}")
        lines.append("")
    return "\n".join(lines)
