import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special
from scipy.linalg import expm, logm

from satqkd import fockspace as fs
from satqkd.errors import InvalidCutoffError, InvalidSectorError, NegativeAmplitudeError, NonHermitianInputError
from satqkd.special import gammainc, gammaincc, upper_gamma


def min_eig(m):
    return np.linalg.eigvalsh(0.5 * (m + m.conj().T)).min()


# --- operators -------------------------------------------------------------

def test_annihilation_entries():
    a1 = fs.annihilation(1)
    assert a1[0, 1] == 1 and np.count_nonzero(a1) == 1
    assert fs.annihilation(2)[1, 2] == pytest.approx(math.sqrt(2))
    a = fs.annihilation(10)
    np.testing.assert_allclose(a.conj().T @ a, np.diag(np.arange(11)), atol=1e-14)


@pytest.mark.parametrize("bad", [0, -1, 2.5])
def test_invalid_cutoff(bad):
    with pytest.raises(InvalidCutoffError):
        fs.annihilation(bad)
    with pytest.raises(InvalidCutoffError):
        fs.quadratures(bad)


def test_second_moment_ops_need_two_levels():
    with pytest.raises(InvalidCutoffError):
        fs.second_moment_ops(1)


def test_vacuum_quadrature_moments():
    q, p = fs.quadratures(10)
    assert q[0, 0] == 0
    assert (q @ q)[0, 0].real == pytest.approx(0.5)
    assert fs.is_hermitian(q) and fs.is_hermitian(p)


def test_coherent_mean_quadrature():
    ket = fs.coherent_ket(0.3, 20)
    q, _ = fs.quadratures(20)
    assert np.vdot(ket, q @ ket).real == pytest.approx(math.sqrt(2) * 0.3, abs=1e-8)


def test_truncated_commutator():
    nc = 7
    q, p = fs.quadratures(nc)
    comm = q @ p - p @ q
    expected = 1j * np.eye(nc + 1)
    expected[nc, nc] = 1j * (1 - (nc + 1))
    np.testing.assert_allclose(comm, expected, atol=1e-13)


def test_number_and_difference_operators():
    nc = 10
    n, d = fs.second_moment_ops(nc)
    np.testing.assert_allclose(np.diag(n)[:nc].real, np.arange(nc), atol=1e-13)
    assert n[nc, nc].real == pytest.approx((nc - 1) / 2)
    a = fs.annihilation(nc)
    np.testing.assert_allclose(d, a @ a + a.conj().T @ a.conj().T, atol=1e-13)
    assert d[0, 0] == 0


# --- coherent states ------------------------------------------------------

def test_coherent_vacuum():
    ket = fs.coherent_ket(0, 5)
    np.testing.assert_array_equal(ket, np.eye(6)[0])


def test_coherent_norm_partial_sum():
    a = 0.86
    ket = fs.coherent_ket(a, 10)
    oracle = math.exp(-a * a) * sum(a ** (2 * n) / math.factorial(n) for n in range(11))
    assert np.vdot(ket, ket).real == pytest.approx(oracle, rel=1e-13)


@given(st.floats(0, 1), st.floats(0, 2 * math.pi))
def test_coherent_truncation_norm(r, phi):
    ket = fs.coherent_ket(r * np.exp(1j * phi), 10)
    assert 0.999 <= np.vdot(ket, ket).real <= 1 + 1e-12


def test_coherent_overlap_identity():
    a, b = 0.7 + 0.2j, -0.3 + 0.5j
    overlap = np.vdot(fs.coherent_ket(b, 40), fs.coherent_ket(a, 40))
    expected = np.exp(-abs(a) ** 2 / 2 - abs(b) ** 2 / 2 + np.conj(b) * a)
    assert overlap == pytest.approx(expected, abs=1e-13)


# --- Gram matrix -----------------------------------------------------------

def test_gram_basic():
    g = fs.qpsk_gram(0.9)
    np.testing.assert_allclose(np.diag(g), 1)
    np.testing.assert_allclose(g, g.conj().T, atol=1e-15)
    assert min_eig(g) > 0
    np.testing.assert_allclose(fs.qpsk_gram(0.0), np.ones((4, 4)))


def test_gram_matches_truncated_overlaps():
    a = 0.72
    g = fs.qpsk_gram(a)
    # entry [1, 0] is <phi_0|phi_1>
    assert g[1, 0] == pytest.approx(np.exp(-0.5184 * (1 - 1j)), abs=1e-15)
    kets = [fs.coherent_ket(x, 40) for x in fs.qpsk_amplitudes(a)]
    oracle = np.array([[np.vdot(kets[j], kets[i]) for j in range(4)] for i in range(4)])
    np.testing.assert_allclose(g, oracle, atol=1e-13)


def test_gram_negative_amplitude():
    with pytest.raises(NegativeAmplitudeError):
        fs.qpsk_gram(-0.1)


# --- incomplete gamma ------------------------------------------------------

@pytest.mark.parametrize("a", [0.5, 1.0, 1.5, 3.0, 6.5, 11.0, 16.0, 31.0])
@pytest.mark.parametrize("x", [0.0, 0.01, 0.2704, 1.0, 2.5, 9.0, 30.0])
def test_gammaincc_against_scipy(a, x):
    assert gammaincc(a, x) == pytest.approx(special.gammaincc(a, x), rel=1e-10, abs=1e-14)
    assert gammainc(a, x) + gammaincc(a, x) == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("a,x", [(1.0, 0.2704), (3.5, 0.64), (7.0, 2.0)])
def test_upper_gamma_against_quadrature(a, x):
    oracle, _ = integrate.quad(lambda t: t ** (a - 1) * math.exp(-t), x, np.inf, epsabs=1e-14, epsrel=1e-13)
    assert upper_gamma(a, x) == pytest.approx(oracle, rel=1e-10)


def test_upper_gamma_integer_closed_form():
    # Gamma(n, x) = (n-1)! e^-x sum_{k<n} x^k / k!
    for n in range(1, 12):
        x = 0.7
        closed = math.factorial(n - 1) * math.exp(-x) * sum(x ** k / math.factorial(k) for k in range(n))
        assert upper_gamma(n, x) == pytest.approx(closed, rel=1e-12)


def test_gamma_argument_checks():
    with pytest.raises(ValueError):
        gammaincc(0, 1)
    with pytest.raises(ValueError):
        gammaincc(1, -1)


# --- region operators ------------------------------------------------------

def test_region_completeness():
    total = sum(fs.region_operators(0.0, 0.0, 10))
    np.testing.assert_allclose(total, np.eye(11), atol=1e-10)


@pytest.mark.parametrize("da,dp", [(0.0, 0.0), (0.52, 0.0), (0.3, 0.2)])
def test_region_vacuum_element(da, dp):
    r0 = fs.region_operator(0, da, dp, 6)
    expected = (np.pi / 2 - 2 * dp) / (2 * np.pi) * math.exp(-da * da)
    assert r0[0, 0].real == pytest.approx(expected, abs=1e-14)
    # 2-D quadrature of the defining integral
    oracle, _ = integrate.dblquad(
        lambda g, th: g * math.exp(-g * g) / math.pi, dp, np.pi / 2 - dp, da, 12, epsabs=1e-13
    )
    assert r0[0, 0].real == pytest.approx(oracle, abs=1e-10)


def _region_element_quadrature(m, n, z, da, dp):
    lo, hi = z * np.pi / 2 + dp, (z + 1) * np.pi / 2 - dp
    norm = math.sqrt(math.factorial(m) * math.factorial(n))

    def f(g, th, part):
        val = math.exp(-g * g) * g ** (m + n + 1) * np.exp(1j * (m - n) * th) / (math.pi * norm)
        return val.real if part == 0 else val.imag

    re, _ = integrate.dblquad(lambda g, th: f(g, th, 0), lo, hi, da, 12, epsabs=1e-12, epsrel=1e-11)
    im, _ = integrate.dblquad(lambda g, th: f(g, th, 1), lo, hi, da, 12, epsabs=1e-12, epsrel=1e-11)
    return re + 1j * im


@pytest.mark.parametrize("m,n,z", [(0, 0, 0), (1, 0, 0), (2, 5, 1), (3, 3, 2), (10, 7, 3), (4, 9, 0), (10, 10, 1)])
def test_region_closed_form_vs_quadrature(m, n, z):
    r = fs.region_operator(z, 0.52, 0.0, 10)
    assert r[m, n] == pytest.approx(_region_element_quadrature(m, n, z, 0.52, 0.0), abs=1e-8)


@pytest.mark.parametrize("da,dp", [(0.0, 0.0), (0.52, 0.0), (0.8, 0.4), (0.1, 0.7)])
def test_region_operator_bounds(da, dp):
    ops = fs.region_operators(da, dp, 10)
    for r in ops:
        assert fs.is_hermitian(r)
        assert min_eig(r) >= -1e-10
        assert min_eig(np.eye(11) - r) >= -1e-10
    if da > 0 or dp > 0:
        assert min_eig(np.eye(11) - sum(ops)) >= -1e-10


def test_region_monotone_in_amplitude_threshold():
    prev = None
    for da in np.linspace(0, 1.2, 7):
        diag = np.diag(fs.region_operator(1, da, 0.1, 8)).real
        if prev is not None:
            assert np.all(diag <= prev + 1e-14)
        prev = diag


def test_region_invalid_sector():
    with pytest.raises(InvalidSectorError):
        fs.region_operator(0, 0.1, np.pi / 4, 5)
    with pytest.raises(InvalidSectorError):
        fs.region_operator(4, 0.1, 0.0, 5)


# --- interval operators ----------------------------------------------------

def test_interval_half_gaussian():
    i0, i1 = fs.interval_operators(0.0, 10)
    assert i0[0, 0].real == pytest.approx(0.5, abs=1e-12)
    np.testing.assert_allclose(i0 + i1, np.eye(11), atol=1e-9)


def test_interval_erf_closed_form():
    i0, _ = fs.interval_operators(0.42, 10)
    assert i0[0, 0].real == pytest.approx((1 - math.erf(0.42)) / 2, abs=1e-10)


def test_hermite_functions_orthonormal():
    t = np.linspace(-15, 15, 6001)
    psi = fs.hermite_functions(t, 12)
    gram = integrate.simpson(psi[:, None, :] * psi[None, :, :], x=t)
    np.testing.assert_allclose(gram, np.eye(13), atol=1e-10)
    # analytic Hermite form for a few orders
    for n in (0, 3, 7):
        ref = special.eval_hermite(n, t) * np.exp(-t * t / 2) / math.sqrt(2 ** n * math.factorial(n) * math.sqrt(math.pi))
        np.testing.assert_allclose(psi[n], ref, atol=1e-12)


@pytest.mark.parametrize("dc", [0.0, 0.42, 1.0])
def test_interval_bounds_and_parity(dc):
    i0, i1 = fs.interval_operators(dc, 10)
    for op in (i0, i1):
        assert fs.is_hermitian(op)
        assert min_eig(op) >= -1e-10
        assert min_eig(np.eye(11) - op) >= -1e-10
    sign = (-1.0) ** np.add.outer(np.arange(11), np.arange(11))
    np.testing.assert_allclose(i1, sign * i0, atol=1e-12)
    if dc > 0:
        assert min_eig(np.eye(11) - i0 - i1) >= -1e-10


def test_interval_monotone_in_threshold():
    prev = None
    for dc in (0.0, 0.2, 0.42, 0.8):
        diag = np.diag(fs.interval_operators(dc, 8)[0]).real
        if prev is not None:
            assert np.all(diag <= prev + 1e-12)
        prev = diag


def test_p_intervals_are_rotated_q_intervals():
    q, p = fs.quadratures(8)
    u = fs.quarter_rotation(8)
    np.testing.assert_allclose(u @ q @ u.conj().T, p, atol=1e-14)
    pi0, _ = fs.p_interval_operators(0.3, 8)
    assert fs.is_hermitian(pi0) and min_eig(pi0) > -1e-10


# --- logarithm -------------------------------------------------------------

def test_hermitian_log_basic():
    np.testing.assert_allclose(fs.hermitian_log(np.eye(3)), np.zeros((3, 3)), atol=1e-15)
    np.testing.assert_allclose(fs.hermitian_log(np.eye(2) / 2), -np.eye(2), atol=1e-15)


def test_hermitian_log_roundtrip():
    rng = np.random.default_rng(3)
    g = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    m = g @ g.conj().T + 0.1 * np.eye(8)
    back = expm(fs.hermitian_log(m) * math.log(2))
    np.testing.assert_allclose(back, m, atol=1e-9)
    np.testing.assert_allclose(fs.hermitian_log(m), logm(m) / math.log(2), atol=1e-9)


def test_hermitian_log_floor_and_errors():
    out = fs.hermitian_log(np.diag([1.0, 0.0]), floor=1e-12)
    assert out[1, 1] == pytest.approx(math.log2(1e-12))
    with pytest.raises(NonHermitianInputError):
        fs.hermitian_log(np.array([[1.0, 1.0], [0.0, 1.0]]))


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 8), st.floats(0, 1.0), st.floats(0, 0.7))
def test_region_psd_property(nc, da, dp):
    for r in fs.region_operators(da, dp, nc):
        assert min_eig(r) >= -1e-10
