"""Preset sweeps behind the ``figure`` subcommand.

Each figure is a list of named curves; each curve is one
:class:`~satqkd.scan.SweepSpec`.  ``fast`` presets use a cutoff of 6 and
coarse grids, ``full`` presets use a cutoff of 10 and the 0.02 grids.
"""

import math
from dataclasses import replace

from . import scan
from .channel import DOWNLINK, HETERODYNE, HOMODYNE, IDEAL, UNTRUSTED, UPLINK
from .errors import ConfigError
from .protocol import ProtocolConfig

FIDELITIES = ("fast", "full")

# amplitudes used for the post-selection panels, one per altitude
ALPHA_OPT = {500e3: 0.86, 1000e3: 0.72}
SWEEP_ALPHA = 0.72
SWEEP_DELTA_C = 0.42
SWEEP_DELTA_A = 0.52


def _protocol(detection, cutoff, alpha=SWEEP_ALPHA, **kw):
    if detection == HOMODYNE:
        kw.setdefault("delta_c", SWEEP_DELTA_C)
    else:
        kw.setdefault("delta_a", SWEEP_DELTA_A)
        kw.setdefault("delta_p", 0.0)
    return ProtocolConfig(detection=detection, alpha=alpha, cutoff=cutoff, beta=0.95, **kw)


def _scenario(base, *, altitude, direction=DOWNLINK, trust=IDEAL, xi_ch=0.01, protocol):
    return replace(
        base,
        geometry=replace(base.geometry, altitude=altitude, direction=direction, zenith=0.0),
        detector=replace(base.detector, trust=trust),
        xi_ch=xi_ch,
        protocol=protocol,
    )


def _zenith_grid(fidelity):
    step = 20.0 if fidelity == "fast" else 10.0
    return tuple(math.radians(z) for z in scan.linear_grid(0.0, 60.0, step))


def _altitude_grid(fidelity):
    step = 300e3 if fidelity == "fast" else 100e3
    return scan.linear_grid(100e3, 1000e3, step)


def _fig3_alpha(base, altitude, cutoff, fidelity):
    return [
        (det, scan.SweepSpec(_scenario(base, altitude=altitude, protocol=_protocol(det, cutoff)), scan.ALPHA,
                             scan.alpha_grid(fidelity)))
        for det in (HOMODYNE, HETERODYNE)
    ]


def _fig3_delta(base, altitude, cutoff, fidelity):
    proto = _protocol(HOMODYNE, cutoff, alpha=ALPHA_OPT[altitude])
    return [("homodyne", scan.SweepSpec(_scenario(base, altitude=altitude, protocol=proto), scan.DELTA_C,
                                        scan.delta_c_grid(fidelity)))]


def _fig4(base, direction, trusts, cutoff, fidelity):
    curves = []
    for det in (HOMODYNE, HETERODYNE):
        for trust in trusts:
            for xi in (0.01, 0.03):
                sc = _scenario(base, altitude=300e3, direction=direction, trust=trust, xi_ch=xi,
                               protocol=_protocol(det, cutoff))
                curves.append((f"{det}_{trust}_xi{xi:g}", scan.SweepSpec(sc, scan.ZENITH, _zenith_grid(fidelity))))
    return curves


def _fig5(base, direction, det, trusts, cutoff, fidelity):
    curves = []
    for trust in trusts:
        for xi in (0.01, 0.03, 0.05):
            sc = _scenario(base, altitude=100e3, direction=direction, trust=trust, xi_ch=xi,
                           protocol=_protocol(det, cutoff))
            curves.append((f"{det}_{trust}_xi{xi:g}", scan.SweepSpec(sc, scan.ALTITUDE, _altitude_grid(fidelity))))
    return curves


FIGURES = {
    "fig3a": lambda b, c, f: _fig3_alpha(b, 500e3, c, f),
    "fig3b": lambda b, c, f: _fig3_alpha(b, 1000e3, c, f),
    "fig3c": lambda b, c, f: _fig3_delta(b, 500e3, c, f),
    "fig3d": lambda b, c, f: _fig3_delta(b, 1000e3, c, f),
    "fig4a": lambda b, c, f: _fig4(b, DOWNLINK, (IDEAL, UNTRUSTED), c, f),
    "fig4b": lambda b, c, f: _fig4(b, UPLINK, (IDEAL,), c, f),
    "fig5a": lambda b, c, f: _fig5(b, UPLINK, HOMODYNE, (IDEAL,), c, f),
    "fig5b": lambda b, c, f: _fig5(b, UPLINK, HETERODYNE, (IDEAL,), c, f),
    "fig5c": lambda b, c, f: _fig5(b, DOWNLINK, HOMODYNE, (IDEAL, UNTRUSTED), c, f),
    "fig5d": lambda b, c, f: _fig5(b, DOWNLINK, HETERODYNE, (IDEAL, UNTRUSTED), c, f),
}


def figure_curves(name, fidelity, base):
    """``[(curve name, SweepSpec), ...]`` for a named figure.

    ``base`` supplies everything the preset does not fix: wavelength,
    beam and aperture, atmosphere, detector calibration and solver options.
    """
    if name not in FIGURES:
        raise ConfigError(f"unknown figure {name!r}; choose from {', '.join(FIGURES)}")
    if fidelity not in FIDELITIES:
        raise ConfigError(f"fidelity must be fast or full, got {fidelity!r}")
    cutoff = scan.FAST_CUTOFF if fidelity == "fast" else scan.FULL_CUTOFF
    return FIGURES[name](base, cutoff, fidelity)
