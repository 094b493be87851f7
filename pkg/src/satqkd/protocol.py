"""QPSK discrete-modulated CV-QKD: constraints, key maps, error correction and key rate.

Bob's observations are summarised by first and second quadrature
moments conditioned on Alice's signal; Alice's reduced state is pinned
to the Gram matrix of the four coherent states.  The key rate is the
certified relative-entropy bound minus the reconciliation leakage.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import dblquad

from . import fockspace as fs
from .channel import HETERODYNE, HOMODYNE
from .errors import ConfigError, InvalidEfficiencyError, PhysicsDomainError
from .solver import KeyMap, SolverOptions, SpectrahedronProblem, minimize


@dataclass(frozen=True)
class ProtocolConfig:
    detection: str = HOMODYNE
    alpha: float = 0.72
    delta_c: float | None = None
    delta_a: float | None = None
    delta_p: float | None = None
    px: tuple = (0.25, 0.25, 0.25, 0.25)
    cutoff: int = 10
    beta: float = 0.95

    def __post_init__(self):
        if self.detection == HOMODYNE:
            if self.delta_c is None:
                object.__setattr__(self, "delta_c", 0.42)
            if self.delta_a is not None or self.delta_p is not None:
                raise ConfigError("homodyne protocol takes delta_c only")
            if self.delta_c < 0:
                raise ConfigError("delta_c must be non-negative")
        elif self.detection == HETERODYNE:
            if self.delta_a is None:
                object.__setattr__(self, "delta_a", 0.52)
            if self.delta_p is None:
                object.__setattr__(self, "delta_p", 0.0)
            if self.delta_c is not None:
                raise ConfigError("heterodyne protocol takes delta_a and delta_p only")
            if self.delta_a < 0 or not 0 <= self.delta_p < math.pi / 4:
                raise ConfigError("need delta_a >= 0 and 0 <= delta_p < pi/4")
        else:
            raise ConfigError(f"detection must be homodyne or heterodyne, got {self.detection!r}")
        if self.alpha < 0:
            raise ConfigError("amplitude must be non-negative")
        px = tuple(float(p) for p in self.px)
        if len(px) != 4 or min(px) <= 0 or abs(sum(px) - 1) > 1e-12:
            raise ConfigError("px must be four positive probabilities summing to one")
        object.__setattr__(self, "px", px)
        if int(self.cutoff) != self.cutoff or self.cutoff < 2:
            raise ConfigError(f"photon-number cutoff must be an integer >= 2, got {self.cutoff}")
        if not 0 < self.beta <= 1:
            raise ConfigError("reconciliation efficiency must lie in (0, 1]")

    @property
    def key_dim(self):
        return 4 if self.detection == HETERODYNE else 2

    def amplitudes(self):
        return fs.qpsk_amplitudes(self.alpha)


def _check_channel(eta, xi):
    if not 0 < eta <= 1:
        raise InvalidEfficiencyError(f"efficiency must lie in (0, 1], got {eta}")
    if xi < 0:
        raise PhysicsDomainError(f"excess noise must be non-negative, got {xi}")


def moment_targets(alpha, eta, xi):
    """Expected ``(<q>, <p>, <n>, <d>)`` of Bob's state for each QPSK signal.

    Returns a ``(4, 4)`` array, one row per signal.
    """
    _check_channel(eta, xi)
    ax = fs.qpsk_amplitudes(alpha)
    q = np.sqrt(2 * eta) * ax.real
    p = np.sqrt(2 * eta) * ax.imag
    n = eta * np.abs(ax) ** 2 + eta * xi / 2
    d = eta * 2 * np.real(ax ** 2)
    return np.stack([q, p, n, d], axis=1)


@dataclass
class ConstraintSet:
    operators: np.ndarray
    targets: np.ndarray
    labels: list
    alice_marginal: np.ndarray


def alice_marginal(alpha, px=(0.25,) * 4):
    sq = np.sqrt(np.asarray(px))
    return np.outer(sq, sq) * fs.qpsk_gram(alpha)


def build_constraints(cfg, eta, xi):
    """Moment, Alice-marginal and trace constraints on ``rho_AB`` (A outermost)."""
    nc = cfg.cutoff
    dim_b = nc + 1
    q, p = fs.quadratures(nc)
    n, d = fs.second_moment_ops(nc)
    moments = moment_targets(cfg.alpha, eta, xi)
    ops, targets, labels = [], [], []
    eye_b = np.eye(dim_b)
    for x in range(4):
        proj = np.zeros((4, 4))
        proj[x, x] = 1
        for k, (name, op) in enumerate((("q", q), ("p", p), ("n", n), ("d", d))):
            ops.append(np.kron(proj, op))
            targets.append(cfg.px[x] * moments[x, k])
            labels.append(f"{name}|{x}")

    rho_a = alice_marginal(cfg.alpha, cfg.px)
    for i in range(4):
        for j in range(i, 4):
            if i == j:
                e = np.zeros((4, 4))
                e[i, i] = 1
                ops.append(np.kron(e, eye_b))
                targets.append(rho_a[i, i].real)
                labels.append(f"A[{i},{i}]")
                continue
            re = np.zeros((4, 4), dtype=complex)
            re[i, j] = re[j, i] = 0.5
            im = np.zeros((4, 4), dtype=complex)
            im[i, j], im[j, i] = 0.5j, -0.5j
            # Tr[rho (re x 1)] = Re rho_A[i,j];  Tr[rho (im x 1)] = Im rho_A[i,j]
            ops.append(np.kron(re, eye_b))
            targets.append(rho_a[i, j].real)
            labels.append(f"ReA[{i},{j}]")
            ops.append(np.kron(im, eye_b))
            targets.append(rho_a[i, j].imag)
            labels.append(f"ImA[{i},{j}]")

    ops.append(np.eye(4 * dim_b))
    targets.append(1.0)
    labels.append("trace")
    return ConstraintSet(np.array(ops, dtype=complex), np.array(targets), labels, rho_a)


def _kraus_from_elements(elements):
    """Stack ``|z>_R (x) 1_A (x) sqrt(E_z)`` into one Kraus operator."""
    eye_a = np.eye(4)
    return np.vstack([np.kron(eye_a, fs.psd_sqrt(e)) for e in elements])


def build_gmap_het(delta_a, delta_p, cutoff):
    regions = fs.region_operators(delta_a, delta_p, cutoff)
    return KeyMap([_kraus_from_elements(regions)], key_dim=4)


def build_gmap_hom(delta_c, cutoff):
    """Key maps for the ``q`` and ``p`` quadratures, in that order."""
    iq = fs.interval_operators(delta_c, cutoff)
    u = fs.quarter_rotation(cutoff)
    ip = [u @ e @ u.conj().T for e in iq]
    return [KeyMap([_kraus_from_elements(iq)], key_dim=2), KeyMap([_kraus_from_elements(ip)], key_dim=2)]


def binary_entropy(x):
    if x <= 0 or x >= 1:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def shannon(probs):
    probs = np.asarray(probs, dtype=float).ravel()
    probs = probs[probs > 0]
    return float(-np.sum(probs * np.log2(probs)))


@dataclass
class ECReport:
    """Error-correction bookkeeping on the pass-conditioned distribution."""

    p_pass: float
    h_z: float
    h_z_given_x: float
    delta_ec: float
    table: np.ndarray = field(repr=False)

    @property
    def mutual_information(self):
        return self.h_z - self.h_z_given_x


def _ec_from_table(table, px, beta):
    # table[x, z] = P(z | x) including the discarded mass
    px = np.asarray(px)
    joint = px[:, None] * table
    p_pass = float(joint.sum())
    if p_pass <= 0:
        return ECReport(0.0, 0.0, 0.0, 0.0, table)
    cond = joint / p_pass
    h_z = shannon(cond.sum(axis=0))
    h_xz = shannon(cond)
    h_x = shannon(cond.sum(axis=1))
    h_z_x = max(h_xz - h_x, 0.0)
    delta = (1 - beta) * h_z + beta * h_z_x
    return ECReport(p_pass, h_z, h_z_x, delta, table)


def homodyne_bins(mean, var, delta_c):
    """``(P(0), P(1), P(discard))`` for a Gaussian outcome with bins ``(dc, inf)``, ``(-inf, -dc)``."""
    s = math.sqrt(2 * var)
    p0 = 0.5 * math.erfc((delta_c - mean) / s)
    p1 = 0.5 * math.erfc((delta_c + mean) / s)
    return p0, p1, max(0.0, 1 - p0 - p1)


def ec_cost_hom(alpha, eta, xi, delta_c, beta, px=(0.25,) * 4):
    """Reports for the ``q`` and ``p`` quadratures."""
    _check_channel(eta, xi)
    ax = fs.qpsk_amplitudes(alpha)
    var = (eta * xi + 1) / 2
    reports = []
    for comp in (ax.real, ax.imag):
        table = np.array([homodyne_bins(math.sqrt(2 * eta) * m, var, delta_c)[:2] for m in comp])
        reports.append(_ec_from_table(table, px, beta))
    return reports


def heterodyne_table(alpha, eta, xi, delta_a, delta_p, epsabs=1e-11, epsrel=1e-10):
    """``P(z = j | x = k)`` from the displaced-thermal Husimi function, by 2-D quadrature."""
    _check_channel(eta, xi)
    spread = 1 + eta * xi / 2
    centres = math.sqrt(eta) * fs.qpsk_amplitudes(alpha)
    gmax = math.sqrt(eta) * alpha + 10 * math.sqrt(spread)
    table = np.zeros((4, 4))
    for k, beta in enumerate(centres):
        br, bi = beta.real, beta.imag

        def kernel(g, th):
            dx = g * math.cos(th) - br
            dy = g * math.sin(th) - bi
            return math.exp(-(dx * dx + dy * dy) / spread) * g / (math.pi * spread)

        for j in range(4):
            lo = j * math.pi / 2 + delta_p
            hi = (j + 1) * math.pi / 2 - delta_p
            if gmax <= delta_a:
                continue
            val, _ = dblquad(kernel, lo, hi, delta_a, gmax, epsabs=epsabs, epsrel=epsrel)
            table[k, j] = val
    return table


def ec_cost_het(alpha, eta, xi, delta_a, delta_p, beta, px=(0.25,) * 4):
    return _ec_from_table(heterodyne_table(alpha, eta, xi, delta_a, delta_p), px, beta)


@dataclass
class KeyRateReport:
    rate: float
    lower_bound: float
    primal_value: float
    gap: float
    p_pass: float
    delta_ec: float
    leakage: float
    secure: bool
    ec: list = field(repr=False)
    solver: object = field(repr=False)

    @property
    def iterations(self):
        return self.solver.iterations

    @property
    def status(self):
        return self.solver.status


def build_problem(cfg, eta, xi):
    cons = build_constraints(cfg, eta, xi)
    if cfg.detection == HETERODYNE:
        maps = [build_gmap_het(cfg.delta_a, cfg.delta_p, cfg.cutoff)]
    else:
        maps = build_gmap_hom(cfg.delta_c, cfg.cutoff)
    return SpectrahedronProblem(cons.operators, cons.targets, maps, cons.labels)


def keyrate(cfg, eta, xi, options=None, problem=None):
    """Asymptotic key rate in bits per channel use.

    Heterodyne: ``bound - p_pass delta_EC``.  Homodyne: half of the summed
    bound over both quadratures minus the summed leakage.  Negative rates
    are returned as computed with ``secure=False``.
    """
    _check_channel(eta, xi)
    problem = problem or build_problem(cfg, eta, xi)
    report = minimize(problem, options or SolverOptions())
    if cfg.detection == HETERODYNE:
        ec = [ec_cost_het(cfg.alpha, eta, xi, cfg.delta_a, cfg.delta_p, cfg.beta, cfg.px)]
        scale = 1.0
    else:
        ec = ec_cost_hom(cfg.alpha, eta, xi, cfg.delta_c, cfg.beta, cfg.px)
        scale = 0.5
    leakage = sum(r.p_pass * r.delta_ec for r in ec)
    rate = scale * (report.lower_bound - leakage)
    return KeyRateReport(
        rate=rate,
        lower_bound=scale * report.lower_bound,
        primal_value=scale * report.primal_value,
        gap=scale * report.gap,
        p_pass=float(np.mean([r.p_pass for r in ec])),
        delta_ec=float(np.mean([r.delta_ec for r in ec])),
        leakage=scale * leakage,
        secure=rate > 0,
        ec=ec,
        solver=report,
    )
