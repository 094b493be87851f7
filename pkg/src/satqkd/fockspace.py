"""Truncated Fock-space operator algebra.

All operators are dense ``(N_c + 1) x (N_c + 1)`` complex arrays in the
number basis.  Quadratures follow the shot-noise convention
``q = (a + a^dag) / sqrt(2)``, so the vacuum has ``<q^2> = 1/2``.
"""

import math

import numpy as np
from scipy.integrate import quad_vec

from .errors import (
    InvalidCutoffError,
    InvalidSectorError,
    NegativeAmplitudeError,
    NonHermitianInputError,
)
from .special import upper_gamma

# QPSK constellation phases: alpha_x = alpha * exp(i (2x + 1) pi / 4)
QPSK_PHASES = np.array([np.pi / 4, 3 * np.pi / 4, 5 * np.pi / 4, 7 * np.pi / 4])

LOG_FLOOR = 1e-12
# Half-width (in quadrature units) beyond the threshold over which
# Hermite-Gaussian overlaps are integrated.
_HERMITE_WINDOW = 12.0


def _check_cutoff(cutoff, minimum=1):
    if int(cutoff) != cutoff or cutoff < minimum:
        raise InvalidCutoffError(f"photon-number cutoff must be an integer >= {minimum}, got {cutoff}")
    return int(cutoff)


def annihilation(cutoff):
    """Truncated annihilation operator with ``<n-1|a|n> = sqrt(n)``."""
    cutoff = _check_cutoff(cutoff)
    return np.diag(np.sqrt(np.arange(1, cutoff + 1)), k=1).astype(complex)


def quadratures(cutoff):
    """Return the Hermitian pair ``(q, p)``."""
    a = annihilation(cutoff)
    ad = a.conj().T
    q = (a + ad) / np.sqrt(2)
    p = (a - ad) / (1j * np.sqrt(2))
    return q, p


def second_moment_ops(cutoff):
    """Photon number and quadrature-difference operators ``(n, d)``.

    Both are assembled from products of the *truncated* quadrature
    matrices, ``n = (q^2 + p^2 - 1) / 2`` and ``d = q^2 - p^2``, so the
    top diagonal entry of ``n`` is ``(N_c - 1) / 2`` instead of ``N_c``.
    Keeping everything inside one truncated algebra makes the moment
    constraints self-consistent.
    """
    cutoff = _check_cutoff(cutoff, minimum=2)
    q, p = quadratures(cutoff)
    q2 = q @ q
    p2 = p @ p
    n = 0.5 * (q2 + p2 - np.eye(cutoff + 1))
    d = q2 - p2
    return n, d


def coherent_ket(alpha, cutoff):
    """Truncated coherent state; the norm is below one by the tail mass."""
    cutoff = _check_cutoff(cutoff)
    alpha = complex(alpha)
    amps = np.empty(cutoff + 1, dtype=complex)
    amps[0] = np.exp(-abs(alpha) ** 2 / 2)
    for n in range(1, cutoff + 1):
        amps[n] = amps[n - 1] * alpha / np.sqrt(n)
    return amps


def qpsk_amplitudes(alpha):
    return alpha * np.exp(1j * QPSK_PHASES)


def qpsk_gram(alpha):
    """Exact overlaps of the four QPSK coherent states.

    Entry ``[i, j]`` is ``<phi_j|phi_i> = exp(-alpha^2 + alpha^2 e^{i(i-j)pi/2})``,
    which is the ``|i><j|`` coefficient of Alice's reduced state (up to the
    ``sqrt(p_i p_j)`` weights).
    """
    if alpha < 0:
        raise NegativeAmplitudeError(f"amplitude must be non-negative, got {alpha}")
    idx = np.arange(4)
    diff = idx[:, None] - idx[None, :]
    a2 = alpha * alpha
    return np.exp(-a2 + a2 * np.exp(1j * diff * np.pi / 2))


def _sector_phase_integral(k, lo, hi):
    # integral of exp(i k theta) over [lo, hi]
    if k == 0:
        return hi - lo
    return (np.exp(1j * k * hi) - np.exp(1j * k * lo)) / (1j * k)


def region_operator(z, delta_a, delta_p, cutoff):
    """Heterodyne POVM element for quadrant ``z`` with post-selection.

    Integrates ``|gamma e^{i theta}><gamma e^{i theta}| / pi`` over
    ``gamma > delta_a`` and ``theta`` in
    ``[z pi/2 + delta_p, (z + 1) pi/2 - delta_p]``.  The radial integral is
    an upper incomplete gamma function and the angular one is elementary.
    """
    cutoff = _check_cutoff(cutoff)
    if z not in (0, 1, 2, 3):
        raise InvalidSectorError(f"quadrant index must be 0..3, got {z}")
    if not 0 <= delta_p < np.pi / 4:
        raise InvalidSectorError(f"phase threshold must lie in [0, pi/4), got {delta_p}")
    if delta_a < 0:
        raise InvalidSectorError(f"amplitude threshold must be non-negative, got {delta_a}")
    lo = z * np.pi / 2 + delta_p
    hi = (z + 1) * np.pi / 2 - delta_p
    x = delta_a * delta_a
    dim = cutoff + 1
    logfact = [math.lgamma(n + 1) for n in range(dim)]
    out = np.empty((dim, dim), dtype=complex)
    for m in range(dim):
        for n in range(m, dim):
            radial = 0.5 * upper_gamma((m + n) / 2 + 1, x)
            radial *= math.exp(-0.5 * (logfact[m] + logfact[n]))
            val = _sector_phase_integral(m - n, lo, hi) * radial / np.pi
            out[m, n] = val
            out[n, m] = np.conj(val)
    return out


def region_operators(delta_a, delta_p, cutoff):
    return [region_operator(z, delta_a, delta_p, cutoff) for z in range(4)]


def hermite_functions(t, cutoff):
    """Quadrature wavefunctions ``psi_n(t)``, ``n = 0..cutoff``.

    Eigenfunctions of the number operator in the ``q`` representation with
    ``|psi_0|^2 = exp(-t^2) / sqrt(pi)``; built by the stable three-term
    recurrence rather than from explicit Hermite polynomials.
    """
    t = np.asarray(t, dtype=float)
    psi = np.empty((cutoff + 1,) + t.shape)
    psi[0] = np.pi ** -0.25 * np.exp(-t * t / 2)
    if cutoff >= 1:
        psi[1] = np.sqrt(2.0) * t * psi[0]
    for n in range(1, cutoff):
        psi[n + 1] = np.sqrt(2.0 / (n + 1)) * t * psi[n] - np.sqrt(n / (n + 1)) * psi[n - 1]
    return psi


def interval_operators(delta_c, cutoff):
    """Projections of ``q`` onto ``(delta_c, inf)`` and ``(-inf, -delta_c)``.

    Returns ``(I0, I1)`` as real symmetric matrices (stored complex) of
    Hermite-Gaussian overlap integrals.
    """
    cutoff = _check_cutoff(cutoff)
    if delta_c < 0:
        raise InvalidSectorError(f"homodyne threshold must be non-negative, got {delta_c}")

    def integrand(t):
        psi = hermite_functions(t, cutoff)
        return np.outer(psi, psi)

    upper, _ = quad_vec(integrand, delta_c, delta_c + _HERMITE_WINDOW, epsrel=1e-10, epsabs=1e-14)
    lower, _ = quad_vec(integrand, -delta_c - _HERMITE_WINDOW, -delta_c, epsrel=1e-10, epsabs=1e-14)
    upper = 0.5 * (upper + upper.T)
    lower = 0.5 * (lower + lower.T)
    return upper.astype(complex), lower.astype(complex)


def quarter_rotation(cutoff):
    """Phase rotation ``exp(i pi n / 2)``; maps ``q`` to ``p`` by conjugation."""
    return np.diag(1j ** np.arange(cutoff + 1))


def p_interval_operators(delta_c, cutoff):
    """Interval operators for the ``p`` quadrature."""
    i0, i1 = interval_operators(delta_c, cutoff)
    u = quarter_rotation(cutoff)
    return u @ i0 @ u.conj().T, u @ i1 @ u.conj().T


def is_hermitian(m, atol=1e-12):
    return np.allclose(m, m.conj().T, rtol=0, atol=atol)


def hermitian_log(m, floor=LOG_FLOOR):
    """Base-2 matrix logarithm with eigenvalues clipped at ``floor``."""
    m = np.asarray(m)
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    if not is_hermitian(m, atol=1e-10 * scale):
        raise NonHermitianInputError("hermitian_log requires a Hermitian matrix")
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    logw = np.log2(np.maximum(w, floor))
    return (v * logw) @ v.conj().T


def psd_sqrt(m, clip=-1e-10):
    """Hermitian square root; eigenvalues in ``[clip, 0)`` are set to zero.

    More negative eigenvalues indicate a genuinely indefinite input.
    """
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    if w.min() < clip:
        raise NonHermitianInputError(f"matrix is not positive semi-definite (min eigenvalue {w.min():.3e})")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T
