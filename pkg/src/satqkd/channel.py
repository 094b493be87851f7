"""Satellite-ground optical channel: transmittance chain and excess noise.

Path geometry is a flat slab: a point at distance ``y`` from the
transmitter sits at altitude ``y cos(theta_z)`` on an uplink and
``H - y cos(theta_z)`` on a downlink, with total path length
``L = H / cos(theta_z)``.  The mapping is only trusted up to 70 degrees
from zenith.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.special import i0e

from .errors import (
    InvalidEfficiencyError,
    NegativeAltitudeError,
    PhysicsDomainError,
    WrongDirectionError,
    ZenithOutOfRangeError,
)

MAX_ZENITH = math.radians(70.0)
YURA_WARN_RATIO = 0.3
QUAD_RTOL = 1e-8
QUAD_LIMIT = 2000

# sea-level extinction coefficients (1/m) by wavelength in nm
SEA_LEVEL_EXTINCTION = {1550: 4e-7, 800: 5e-6}

UPLINK = "uplink"
DOWNLINK = "downlink"
IDEAL = "ideal"
UNTRUSTED = "untrusted"
HOMODYNE = "homodyne"
HETERODYNE = "heterodyne"


def extinction_for_wavelength(wavelength):
    nm = int(round(wavelength * 1e9))
    try:
        return SEA_LEVEL_EXTINCTION[nm]
    except KeyError:
        raise PhysicsDomainError(
            f"no tabulated sea-level extinction at {nm} nm; pass alpha0 explicitly"
        ) from None


@dataclass(frozen=True)
class LinkGeometry:
    """One satellite-ground link; SI units, angles in radians."""

    altitude: float
    zenith: float = 0.0
    direction: str = DOWNLINK
    wavelength: float = 1550e-9
    w0: float = 0.2
    aperture: float = 0.75
    pointing: float = 1e-6

    def __post_init__(self):
        if self.altitude <= 0:
            raise NegativeAltitudeError(f"altitude must be positive, got {self.altitude}")
        if self.direction not in (UPLINK, DOWNLINK):
            raise PhysicsDomainError(f"direction must be uplink or downlink, got {self.direction!r}")
        if not 0 <= self.zenith < math.pi / 2:
            raise ZenithOutOfRangeError(f"zenith angle must lie in [0, pi/2), got {self.zenith}")
        if self.w0 <= 0 or self.aperture <= 0 or self.wavelength <= 0:
            raise PhysicsDomainError("waist, aperture and wavelength must be positive")
        if self.pointing < 0:
            raise PhysicsDomainError("pointing error must be non-negative")

    @property
    def path_length(self):
        return self.altitude / math.cos(self.zenith)

    @property
    def wavenumber(self):
        return 2 * math.pi / self.wavelength

    @property
    def rayleigh_range(self):
        return self.wavenumber * self.w0 ** 2 / 2

    def height(self, y):
        """Altitude of the point a distance ``y`` from the transmitter."""
        rise = y * math.cos(self.zenith)
        if self.direction == UPLINK:
            return rise
        return max(self.altitude - rise, 0.0)

    def check_slab(self):
        if self.zenith > MAX_ZENITH + 1e-12:
            raise ZenithOutOfRangeError(
                f"zenith angle {math.degrees(self.zenith):.1f} deg exceeds the 70 deg "
                "validity limit of the flat-slab path model"
            )


@dataclass(frozen=True)
class AtmosphereParams:
    """Hufnagel-Valley turbulence profile and exponential extinction."""

    wind_speed: float = 21.0
    c0: float = 9.6e-14
    alpha0: float = 4e-7
    scale_height: float = 6600.0
    hv_high: float = 8.1481e-56
    hv_mid: float = 2.7e-16
    hv_lengths: tuple = (1000.0, 1500.0, 100.0)

    def __post_init__(self):
        values = (self.wind_speed, self.c0, self.scale_height, self.hv_high, self.hv_mid) + tuple(self.hv_lengths)
        if any(v <= 0 for v in values) or self.alpha0 < 0:
            raise PhysicsDomainError("atmosphere parameters must be positive")

    @classmethod
    def for_wavelength(cls, wavelength, **kw):
        return cls(alpha0=extinction_for_wavelength(wavelength), **kw)


@dataclass(frozen=True)
class DetectorModel:
    trust: str = IDEAL
    eta_dev: float = 0.6
    xi_det: float = 0.01

    def __post_init__(self):
        if self.trust not in (IDEAL, UNTRUSTED):
            raise PhysicsDomainError(f"trust must be ideal or untrusted, got {self.trust!r}")
        if not 0 < self.eta_dev <= 1:
            raise InvalidEfficiencyError(f"device efficiency must lie in (0, 1], got {self.eta_dev}")
        if self.xi_det < 0:
            raise PhysicsDomainError("detector noise must be non-negative")

    @property
    def efficiency(self):
        return 1.0 if self.trust == IDEAL else self.eta_dev

    def noise(self, detection):
        """Detector excess noise in shot-noise units for the given scheme."""
        if self.trust == IDEAL:
            return 0.0
        return 2 * self.xi_det if detection == HETERODYNE else self.xi_det


@dataclass(frozen=True)
class ChannelReport:
    eta_ext: float
    w_rx: float
    sigma_r: float
    eta_geo: float
    eta_dev: float
    eta_total: float
    xi_ch: float
    xi_effective: float
    r_s: float = math.inf
    yura_ratio: float = 0.0
    sigma_tb: float = 0.0
    extras: dict = field(default_factory=dict)

    @property
    def eta_atmospheric(self):
        return self.eta_ext * self.eta_geo


def _quad(f, a, b, points=None):
    val, _ = quad(f, a, b, epsrel=QUAD_RTOL, epsabs=0.0, limit=QUAD_LIMIT, points=points)
    return val


def cn2(h, atm=AtmosphereParams()):
    """Refractive-index structure parameter (m^-2/3) at altitude ``h``."""
    if h < 0:
        raise NegativeAltitudeError(f"altitude must be non-negative, got {h}")
    l1, l2, l3 = atm.hv_lengths
    return (
        atm.hv_high * atm.wind_speed ** 2 * h ** 10 * math.exp(-h / l1)
        + atm.hv_mid * math.exp(-h / l2)
        + atm.c0 * math.exp(-h / l3)
    )


def _breakpoints(geom, scales):
    # distances along the path where the integrand changes character
    cos = math.cos(geom.zenith)
    L = geom.path_length
    pts = []
    for h in scales:
        y = h / cos if geom.direction == UPLINK else L - h / cos
        if 0 < y < L:
            pts.append(y)
    return sorted(pts) or None


_CN2_SCALES = (100.0, 500.0, 1500.0, 5000.0, 1e4, 2e4, 4e4)


def extinction(geom, atm=AtmosphereParams()):
    """Beer-Lambert transmittance along the slant path."""
    geom.check_slab()
    if atm.alpha0 == 0:
        return 1.0

    def alpha(y):
        return atm.alpha0 * math.exp(-geom.height(y) / atm.scale_height)

    pts = _breakpoints(geom, [atm.scale_height * s for s in (0.5, 2, 5, 10, 20)])
    return math.exp(-_quad(alpha, 0.0, geom.path_length, points=pts))


def coherence_rs(geom, atm=AtmosphereParams()):
    """Turbulence coherence scale ``r_s`` of an uplink; ``inf`` without turbulence."""
    if geom.direction != UPLINK:
        raise WrongDirectionError("the coherence scale is defined for uplink propagation only")
    geom.check_slab()
    L = geom.path_length

    def integrand(z):
        return cn2(geom.height(z), atm) * ((L - z) / L) ** (5 / 3)

    total = _quad(integrand, 0.0, L, points=_breakpoints(geom, _CN2_SCALES))
    if total <= 0:
        return math.inf
    return (0.42 * geom.wavenumber ** 2 * total) ** (-3 / 5)


def yura_ratio(r_s, w0):
    """Validity indicator ``0.26 (r_s / W0)^(1/3)``; must be << 1."""
    if math.isinf(r_s):
        return 0.0
    return 0.26 * (r_s / w0) ** (1 / 3)


def _waist(geom, z, r_s):
    diffraction = geom.w0 ** 2 * (1 + (z / geom.rayleigh_range) ** 2)
    if geom.direction == DOWNLINK or math.isinf(r_s):
        return math.sqrt(diffraction)
    bracket = (1 - yura_ratio(r_s, geom.w0)) ** 2
    turbulent = 35.28 * z ** 2 / (geom.wavenumber ** 2 * r_s ** 2) * bracket
    return math.sqrt(diffraction + turbulent)


def beam_waist(geom, atm=AtmosphereParams(), z=None, r_s=None):
    """Short-term beam waist after propagating ``z`` metres (default: full path).

    Uplinks use Yura's turbulent broadening; downlinks are diffraction
    limited because the turbulence sits in the last few kilometres.
    """
    L = geom.path_length
    z = L if z is None else z
    if not 0 <= z <= L * (1 + 1e-12):
        raise PhysicsDomainError(f"propagation distance must lie in [0, {L}], got {z}")
    if geom.direction == UPLINK and r_s is None:
        r_s = coherence_rs(geom, atm)
    return _waist(geom, z, math.inf if r_s is None else r_s)


def turbulent_wander_variance(geom, atm=AtmosphereParams(), r_s=None):
    """Turbulence contribution ``sigma_TB^2`` (m^2) to the uplink beam wander."""
    if geom.direction != UPLINK:
        return 0.0
    L = geom.path_length
    if r_s is None:
        r_s = coherence_rs(geom, atm)

    def integrand(z):
        return cn2(geom.height(z), atm) * (L - z) ** 2 * _waist(geom, z, r_s) ** (-1 / 3)

    return 1.035 * _quad(integrand, 0.0, L, points=_breakpoints(geom, _CN2_SCALES))


def downlink_wander_estimate(geom, atm=AtmosphereParams(), z=None):
    """Rough downlink turbulence wander ``1.919 Cn2(0) z^3 (2 W0)^(-1/3)``.

    Diagnostic only.  Ground-level ``Cn2`` is treated as constant over
    ``z``, so the value is only meaningful when ``z`` is the thickness of
    the turbulent layer, not the full path.
    """
    z = geom.path_length if z is None else z
    return 1.919 * cn2(0.0, atm) * z ** 3 * (2 * geom.w0) ** (-1 / 3)


def wander_sigma(geom, atm=AtmosphereParams(), r_s=None):
    """Beam-centroid wander standard deviation at the receiver (m)."""
    geom.check_slab()
    pointing = geom.path_length * geom.pointing
    return math.sqrt(pointing ** 2 + turbulent_wander_variance(geom, atm, r_s))


def aperture_eta(r, w, a):
    """Fraction of a Gaussian beam of waist ``w`` offset by ``r`` caught by a disc of radius ``a``.

    Written with the exponentially scaled Bessel function so the
    integrand never overflows for large ``r rho / w^2``.
    """
    if w <= 0 or a <= 0 or r < 0:
        raise PhysicsDomainError("aperture_eta needs w > 0, a > 0, r >= 0")
    w2 = w * w
    if r == 0:
        return -math.expm1(-2 * a * a / w2)
    # beyond ~9 waists the overlap underflows double precision
    if r - a > 9 * w:
        return 0.0

    def integrand(rho):
        return rho * math.exp(-2 * (rho - r) ** 2 / w2) * i0e(4 * r * rho / w2)

    pts = [r] if 0 < r < a else None
    return 4 / w2 * _quad(integrand, 0.0, a, points=pts)


def mean_eta(sigma, w, a):
    """Aperture efficiency averaged over Gaussian beam wander of std ``sigma``."""
    if sigma < 0:
        raise PhysicsDomainError("wander deviation must be non-negative")
    if sigma == 0:
        return aperture_eta(0.0, w, a)
    s2 = sigma * sigma
    upper = min(10 * sigma, a + 9 * w)

    def integrand(r):
        return aperture_eta(r, w, a) * r / s2 * math.exp(-r * r / (2 * s2))

    pts = [p for p in (sigma, a, a + w) if 0 < p < upper] or None
    return _quad(integrand, 0.0, upper, points=pts)


def effective_noise(xi_ch, eta, det, detection):
    """Total excess noise referred to the channel input: ``xi_ch + xi_det / eta``."""
    if not 0 < eta <= 1:
        raise InvalidEfficiencyError(f"efficiency must lie in (0, 1], got {eta}")
    return xi_ch + det.noise(detection) / eta


def link_report(geom, atm=AtmosphereParams(), det=DetectorModel(), xi_ch=0.01, detection=HOMODYNE):
    geom.check_slab()
    eta_ext = extinction(geom, atm)
    if geom.direction == UPLINK:
        r_s = coherence_rs(geom, atm)
        ratio = yura_ratio(r_s, geom.w0)
        if ratio > YURA_WARN_RATIO:
            warnings.warn(f"Yura waist approximation outside its validity range (ratio {ratio:.3f})", stacklevel=2)
    else:
        r_s, ratio = math.inf, 0.0
    w_rx = _waist(geom, geom.path_length, r_s)
    sigma_tb2 = turbulent_wander_variance(geom, atm, r_s)
    sigma = math.sqrt((geom.path_length * geom.pointing) ** 2 + sigma_tb2)
    eta_geo = mean_eta(sigma, w_rx, geom.aperture)
    eta_total = eta_ext * eta_geo * det.efficiency
    return ChannelReport(
        eta_ext=eta_ext,
        w_rx=w_rx,
        sigma_r=sigma,
        eta_geo=eta_geo,
        eta_dev=det.efficiency,
        eta_total=eta_total,
        xi_ch=xi_ch,
        xi_effective=effective_noise(xi_ch, eta_total, det, detection),
        r_s=r_s,
        yura_ratio=ratio,
        sigma_tb=math.sqrt(sigma_tb2),
    )
