"""Asymptotic key rates of QPSK continuous-variable QKD over satellite-ground links."""

from .channel import AtmosphereParams, ChannelReport, DetectorModel, LinkGeometry, link_report
from .protocol import KeyRateReport, ProtocolConfig, keyrate
from .solver import SolverOptions, SolverReport

__version__ = "0.1.0"

__all__ = [
    "AtmosphereParams",
    "ChannelReport",
    "DetectorModel",
    "KeyRateReport",
    "LinkGeometry",
    "ProtocolConfig",
    "SolverOptions",
    "SolverReport",
    "keyrate",
    "link_report",
]
