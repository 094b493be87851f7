"""Run configuration: a YAML document with one mapping per section.

Key names carry their units (``_m``, ``_nm``, ``_urad``, ``_deg``,
``_mps``, ``_per_m``).  Unknown sections or keys are rejected so typos
cannot silently fall back to defaults.
"""

import dataclasses
import math
from dataclasses import dataclass, field, fields

import yaml

from . import scan
from .channel import AtmosphereParams, DetectorModel, LinkGeometry, extinction_for_wavelength
from .errors import ConfigError
from .protocol import ProtocolConfig
from .solver import SolverOptions

# config-file sweep variable -> (scan variable, factor to SI)
SWEEP_VARIABLES = {
    "altitude_m": (scan.ALTITUDE, 1.0),
    "zenith_deg": (scan.ZENITH, math.pi / 180),
    "alpha": (scan.ALPHA, 1.0),
    "delta_c": (scan.DELTA_C, 1.0),
    "delta_a_delta_p": (scan.DELTA_AP, 1.0),
    "xi_ch": (scan.XI_CH, 1.0),
}


@dataclass
class LinkSection:
    altitude_m: float = 500e3
    zenith_deg: float = 0.0
    direction: str = "downlink"
    wavelength_nm: float = 1550.0
    w0_m: float = 0.2
    aperture_m: float = 0.75
    pointing_urad: float = 1.0


@dataclass
class AtmosphereSection:
    wind_mps: float = 21.0
    c0: float = 9.6e-14
    alpha0_per_m: float | None = None  # None: tabulated value for the wavelength
    scale_height_m: float = 6600.0


@dataclass
class DetectorSection:
    trust: str = "ideal"
    eta_dev: float = 0.6
    xi_det: float = 0.01


@dataclass
class NoiseSection:
    xi_ch: float = 0.01


@dataclass
class ProtocolSection:
    detection: str = "homodyne"
    alpha: float = 0.72
    delta_c: float | None = None
    delta_a: float | None = None
    delta_p: float | None = None
    cutoff: int = 10
    beta: float = 0.95


@dataclass
class SolverSection:
    max_iterations: int = 300
    fw_gap_tolerance: float = 1e-6
    perturbation: float = 1e-10
    subproblem_tolerance: float = 1e-9
    log_floor: float = 1e-12


@dataclass
class SweepSection:
    variable: str | None = None
    grid: list | None = None


@dataclass
class RunConfig:
    link: LinkSection = field(default_factory=LinkSection)
    atmosphere: AtmosphereSection = field(default_factory=AtmosphereSection)
    detector: DetectorSection = field(default_factory=DetectorSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    protocol: ProtocolSection = field(default_factory=ProtocolSection)
    solver: SolverSection = field(default_factory=SolverSection)
    sweep: SweepSection = field(default_factory=SweepSection)

    # -- construction ------------------------------------------------------

    @classmethod
    def from_dict(cls, data):
        data = {} if data is None else data
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a mapping of sections")
        cfg = cls()
        for name, values in data.items():
            if name not in SECTIONS:
                raise ConfigError(f"unknown section {name!r}; expected one of {', '.join(SECTIONS)}")
            if values is None:
                continue
            if not isinstance(values, dict):
                raise ConfigError(f"section {name!r} must be a mapping")
            section = getattr(cfg, name)
            for key, value in values.items():
                set_key(section, name, key, value)
        return cfg

    @classmethod
    def load(cls, path):
        try:
            with open(path, encoding="utf-8") as fh:
                data = yaml.safe_load(fh)
        except OSError as err:
            raise ConfigError(f"cannot read config {path}: {err}") from None
        except yaml.YAMLError as err:
            raise ConfigError(f"malformed config {path}: {err}") from None
        return cls.from_dict(data)

    def to_dict(self):
        return dataclasses.asdict(self)

    def dump(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def override(self, key, text):
        """Set ``key`` (unique across sections) from a command-line string."""
        section_name = KEY_INDEX.get(key)
        if section_name is None:
            raise ConfigError(f"unknown option {key!r}")
        try:
            value = yaml.safe_load(text)
        except yaml.YAMLError as err:
            raise ConfigError(f"cannot parse value {text!r} for {key}: {err}") from None
        set_key(getattr(self, section_name), section_name, key, value)

    # -- domain objects ----------------------------------------------------

    def geometry(self):
        ln = self.link
        return LinkGeometry(
            altitude=ln.altitude_m,
            zenith=math.radians(ln.zenith_deg),
            direction=ln.direction,
            wavelength=ln.wavelength_nm * 1e-9,
            w0=ln.w0_m,
            aperture=ln.aperture_m,
            pointing=ln.pointing_urad * 1e-6,
        )

    def atmosphere_params(self):
        at = self.atmosphere
        alpha0 = at.alpha0_per_m
        if alpha0 is None:
            alpha0 = extinction_for_wavelength(self.link.wavelength_nm * 1e-9)
        return AtmosphereParams(wind_speed=at.wind_mps, c0=at.c0, alpha0=alpha0, scale_height=at.scale_height_m)

    def detector_model(self):
        d = self.detector
        return DetectorModel(trust=d.trust, eta_dev=d.eta_dev, xi_det=d.xi_det)

    def protocol_config(self):
        p = self.protocol
        return ProtocolConfig(
            detection=p.detection,
            alpha=p.alpha,
            delta_c=p.delta_c,
            delta_a=p.delta_a,
            delta_p=p.delta_p,
            cutoff=p.cutoff,
            beta=p.beta,
        )

    def solver_options(self):
        s = self.solver
        try:
            return SolverOptions(
                max_iterations=s.max_iterations,
                fw_gap_tolerance=s.fw_gap_tolerance,
                perturbation=s.perturbation,
                subproblem_tolerance=s.subproblem_tolerance,
                log_floor=s.log_floor,
            )
        except ValueError as err:
            raise ConfigError(str(err)) from None

    def scenario(self):
        return scan.Scenario(
            geometry=self.geometry(),
            atmosphere=self.atmosphere_params(),
            detector=self.detector_model(),
            xi_ch=self.noise.xi_ch,
            protocol=self.protocol_config(),
            solver=self.solver_options(),
        )

    def sweep_spec(self):
        sw = self.sweep
        if sw.variable is None or sw.grid is None:
            raise ConfigError("scan needs a sweep section with variable and grid")
        if sw.variable not in SWEEP_VARIABLES:
            raise ConfigError(f"sweep variable must be one of {', '.join(SWEEP_VARIABLES)}")
        variable, factor = SWEEP_VARIABLES[sw.variable]
        try:
            if variable == scan.DELTA_AP:
                grid = tuple((float(a), float(p)) for a, p in sw.grid)
            else:
                grid = tuple(float(v) * factor for v in sw.grid)
        except (TypeError, ValueError):
            raise ConfigError(f"malformed grid for {sw.variable}") from None
        return scan.SweepSpec(self.scenario(), variable, grid)


SECTIONS = {f.name: f.default_factory for f in fields(RunConfig)}
KEY_INDEX = {f.name: name for name, factory in SECTIONS.items() for f in fields(factory())}


def _coerce(value, annotation, where):
    # annotations are plain types or "T | None"
    kinds = getattr(annotation, "__args__", (annotation,))
    if value is None:
        if type(None) in kinds:
            return None
        raise ConfigError(f"{where} may not be null")
    if isinstance(value, str) and str not in kinds and (float in kinds or int in kinds):
        # YAML 1.1 reads exponent forms without a dot ("500e3") as strings
        try:
            value = float(value)
        except ValueError:
            raise ConfigError(f"{where}: expected a number, got {value!r}") from None
    if bool in kinds or isinstance(value, bool):
        if isinstance(value, bool) and bool in kinds:
            return value
        raise ConfigError(f"{where}: booleans are not accepted here")
    if float in kinds and isinstance(value, (int, float)):
        return float(value)
    if int in kinds and isinstance(value, int):
        return value
    if int in kinds and isinstance(value, float) and value.is_integer():
        return int(value)
    if str in kinds and isinstance(value, str):
        return value
    if list in kinds and isinstance(value, (list, tuple)):
        return list(value)
    raise ConfigError(f"{where}: unexpected value {value!r}")


def set_key(section, section_name, key, value):
    types = {f.name: f.type for f in fields(section)}
    if key not in types:
        raise ConfigError(f"unknown key {key!r} in section {section_name!r}")
    setattr(section, key, _coerce(value, types[key], f"{section_name}.{key}"))
