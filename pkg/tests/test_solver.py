import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from satqkd import sdp
from satqkd.errors import InfeasibleProblemError, NonHermitianInputError
from satqkd.solver import (
    CONVERGED,
    KeyMap,
    SolverOptions,
    SpectrahedronProblem,
    feasible_init,
    gradient,
    linear_subproblem,
    minimize,
    objective,
)


def rand_density(rng, n, rank=None):
    rank = rank or n
    g = rng.normal(size=(n, rank)) + 1j * rng.normal(size=(n, rank))
    r = g @ g.conj().T
    return r / np.trace(r).real


def rand_herm(rng, n):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return 0.5 * (a + a.conj().T)


def rand_keymap(rng, dim, key_dim, n_kraus=1):
    """Random trace-non-increasing key map with ``key_dim`` register blocks."""
    block = dim
    ks = [rng.normal(size=(key_dim * block, dim)) + 1j * rng.normal(size=(key_dim * block, dim)) for _ in range(n_kraus)]
    total = sum(k.conj().T @ k for k in ks)
    scale = 1 / math.sqrt(np.linalg.eigvalsh(total).max())
    return KeyMap([k * scale for k in ks], key_dim=key_dim)


def tomographic_ops(n):
    """Hermitian basis of n x n matrices (trace first)."""
    ops = [np.eye(n)]
    for i in range(n):
        for j in range(i, n):
            if i == j and i < n - 1:
                e = np.zeros((n, n))
                e[i, i] = 1
                ops.append(e)
            elif i < j:
                re = np.zeros((n, n), dtype=complex)
                re[i, j] = re[j, i] = 1
                im = np.zeros((n, n), dtype=complex)
                im[i, j], im[j, i] = -1j, 1j
                ops += [re, im]
    return ops


# --- objective --------------------------------------------------------------


def test_objective_plus_state_is_one_bit():
    plus = np.array([1, 1]) / math.sqrt(2)
    rho = np.kron(np.outer(plus, plus), np.diag([1.0, 0.0]))
    km = KeyMap([np.eye(4)], key_dim=2)
    assert objective(rho, km) == pytest.approx(1.0, abs=1e-12)


def test_objective_classical_state_is_zero():
    rho = np.kron(np.diag([0.3, 0.7]), np.diag([0.5, 0.5]))
    assert objective(rho, KeyMap([np.eye(4)], key_dim=2)) == pytest.approx(0.0, abs=1e-12)


def test_objective_matches_entropy_difference():
    rng = np.random.default_rng(5)
    rho = rand_density(rng, 6)
    km = KeyMap([np.eye(6)], key_dim=3)

    def h(m):
        w = np.linalg.eigvalsh(m)
        w = w[w > 1e-15]
        return -float(np.sum(w * np.log2(w)))

    assert objective(rho, km) == pytest.approx(h(km.pinch(rho)) - h(rho), abs=1e-12)


def test_objective_input_validation():
    km = KeyMap([np.eye(2)], key_dim=2)
    with pytest.raises(NonHermitianInputError):
        objective(np.array([[1.0, 1.0], [0.0, 0.0]]), km)
    with pytest.raises(NonHermitianInputError):
        objective(np.diag([1.5, -0.5]), km)


def test_keymap_shape_check():
    with pytest.raises(ValueError):
        KeyMap([np.ones((5, 2))], key_dim=2)


def test_thin_factorisation_and_direct_path_agree():
    rng = np.random.default_rng(2)
    km = rand_keymap(rng, 4, 2)
    split = KeyMap([km.kraus[0] / math.sqrt(2), km.kraus[0] / math.sqrt(2)], key_dim=2)
    rho = rand_density(rng, 4)
    assert objective(rho, km) == pytest.approx(objective(rho, split), abs=1e-11)
    np.testing.assert_allclose(gradient(rho, km), gradient(rho, split), atol=1e-9)


@pytest.mark.parametrize("seed", range(20))
def test_gradient_central_differences(seed):
    rng = np.random.default_rng(100 + seed)
    dim = int(rng.integers(2, 9))
    key_dim = int(rng.choice([2, 4]))
    n_kraus = int(rng.integers(1, 3))
    maps = [rand_keymap(rng, dim, key_dim, n_kraus) for _ in range(int(rng.integers(1, 3)))]
    assert dim * key_dim <= 32 and dim <= 16
    rho = rand_density(rng, dim)
    direction = rand_herm(rng, dim)
    direction /= np.linalg.norm(direction)
    h = 1e-5 * np.linalg.eigvalsh(rho).min()
    fd = (objective(rho + h * direction, maps) - objective(rho - h * direction, maps)) / (2 * h)
    an = sdp.inner(gradient(rho, maps), direction)
    assert abs(fd - an) <= 1e-4 * max(abs(an), 1e-3)


def test_gradient_with_perturbation():
    rng = np.random.default_rng(9)
    km = rand_keymap(rng, 5, 2)
    rho = rand_density(rng, 5)
    d = rand_herm(rng, 5)
    eps, h = 1e-3, 1e-7
    fd = (objective(rho + h * d, km, eps=eps) - objective(rho - h * d, km, eps=eps)) / (2 * h)
    assert sdp.inner(gradient(rho, km, eps=eps), d) == pytest.approx(fd, rel=1e-5)


# --- feasible set -----------------------------------------------------------


def test_feasible_init_maximises_smallest_eigenvalue():
    ops = [np.eye(3), np.diag([1.0, 0.0, 0.0])]
    prob = SpectrahedronProblem(ops, [1.0, 0.7], [KeyMap([np.eye(3)], key_dim=3)])
    rho = feasible_init(prob)
    np.testing.assert_allclose(np.real(np.diag(rho)), [0.7, 0.15, 0.15], atol=1e-6)


def test_infeasible_problem_raises():
    n_op = np.diag([0.0, 1.0, 2.0])
    prob = SpectrahedronProblem([np.eye(3), n_op], [1.0, -0.5], [KeyMap([np.eye(3)], key_dim=3)])
    with pytest.raises(InfeasibleProblemError):
        feasible_init(prob)


def test_inconsistent_targets_raise():
    with pytest.raises(InfeasibleProblemError):
        SpectrahedronProblem([np.eye(2), 2 * np.eye(2)], [1.0, 1.0], [KeyMap([np.eye(2)], key_dim=2)])


def test_linear_subproblem_trace_only():
    rng = np.random.default_rng(4)
    c = rand_herm(rng, 4)
    prob = SpectrahedronProblem([np.eye(4)], [1.0], [KeyMap([np.eye(4)], key_dim=2)])
    sigma = linear_subproblem(c, prob)
    assert sdp.inner(c, sigma) == pytest.approx(np.linalg.eigvalsh(c).min(), abs=1e-7)


# --- Frank-Wolfe -------------------------------------------------------------


@pytest.mark.parametrize("seed", range(4))
def test_pinned_state_bound_equals_objective(seed):
    rng = np.random.default_rng(200 + seed)
    n = 4
    rho0 = rand_density(rng, n)
    ops = tomographic_ops(n)
    targets = [sdp.inner(o, rho0) for o in ops]
    km = rand_keymap(rng, n, 2)
    rep = minimize(SpectrahedronProblem(ops, targets, [km]))
    direct = objective(rho0, km, eps=rep.perturbation)
    assert rep.primal_value == pytest.approx(direct, abs=1e-9)
    assert rep.lower_bound == pytest.approx(direct, abs=1e-9)
    assert rep.status == CONVERGED


def _random_problem(rng, n, m, key_dim=2):
    rho0 = rand_density(rng, n)
    ops = [np.eye(n)] + [rand_herm(rng, n) for _ in range(m)]
    return SpectrahedronProblem(ops, [sdp.inner(o, rho0) for o in ops], [rand_keymap(rng, n, key_dim)])


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 10_000))
def test_lower_bound_never_exceeds_primal(seed):
    rng = np.random.default_rng(seed)
    prob = _random_problem(rng, int(rng.integers(2, 6)), int(rng.integers(1, 6)))
    rep = minimize(prob, SolverOptions(max_iterations=60))
    assert rep.lower_bound <= rep.primal_value
    assert rep.gap >= -1e-9
    assert np.abs(prob.residual(rep.rho)).max() < 1e-7
    assert np.linalg.eigvalsh(rep.rho).min() > -1e-9


def test_trace_is_monotone_and_gaps_non_negative():
    rng = np.random.default_rng(31)
    prob = _random_problem(rng, 6, 8)
    rep = minimize(prob, SolverOptions(trace=True, max_iterations=80))
    values = [v for _, v, _ in rep.trace]
    gaps = [g for _, _, g in rep.trace]
    assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))
    assert min(gaps) >= -1e-9
    assert rep.gap <= gaps[-1] + 1e-9


def test_iteration_limit_still_certifies():
    rng = np.random.default_rng(8)
    prob = _random_problem(rng, 6, 4)
    rep = minimize(prob, SolverOptions(max_iterations=2))
    assert rep.status == "iteration-limit"
    assert math.isfinite(rep.lower_bound) and rep.lower_bound <= rep.primal_value


def test_tighter_tolerance_stays_within_reported_gap():
    rng = np.random.default_rng(12)
    prob = _random_problem(rng, 5, 6)
    loose = minimize(prob, SolverOptions(fw_gap_tolerance=2e-6))
    tight = minimize(prob, SolverOptions(fw_gap_tolerance=1e-6))
    assert abs(loose.lower_bound - tight.lower_bound) <= max(loose.gap, tight.gap) + 1e-9


def test_options_validation():
    with pytest.raises(ValueError):
        SolverOptions(fw_gap_tolerance=0)
