"""Certified minimisation of ``f(rho) = D(G(rho) || Z(G(rho)))`` over a spectrahedron.

Frank-Wolfe iterations give an upper bound (the primal value); the
linearisation ``f(rho) + min_sigma <grad f(rho), sigma - rho>`` evaluated
with a dual-certified interior-point solve gives a lower bound that is
valid regardless of how well the primal iterations converged.
"""

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import sdp
from .errors import InfeasibleProblemError, NonHermitianInputError
from .fockspace import LOG_FLOOR

log = logging.getLogger(__name__)

CONVERGED = "converged"
ITERATION_LIMIT = "iteration-limit"
INFEASIBLE = "infeasible"


@dataclass
class KeyMap:
    """Post-processing Kraus map followed by pinching of the key register.

    ``kraus`` operators map the ``dim``-dimensional input onto
    ``key_dim * block`` outputs, register index outermost.
    """

    kraus: list
    key_dim: int

    def __post_init__(self):
        self.kraus = [np.asarray(k, dtype=complex) for k in self.kraus]
        rows, self.dim = self.kraus[0].shape
        if rows % self.key_dim:
            raise ValueError("Kraus output dimension must be a multiple of the key dimension")
        self.block = rows // self.key_dim
        self._prepare()

    def _prepare(self):
        # Thin factorisation of the stacked Kraus map: the non-zero spectrum
        # of G(rho) equals that of B^dag (1 (x) rho) B.
        stacked = np.vstack(self.kraus) if len(self.kraus) > 1 else self.kraus[0]
        if len(self.kraus) == 1:
            u, s, vh = np.linalg.svd(stacked, full_matrices=False)
            keep = s > 1e-13 * max(s[0], 1e-300)
            self._b = (vh[keep].conj().T * s[keep])
        else:
            self._b = None
        self._blocks = [
            [k[j * self.block:(j + 1) * self.block] for j in range(self.key_dim)] for k in self.kraus
        ]
        del stacked

    def apply(self, rho):
        return sum(k @ rho @ k.conj().T for k in self.kraus)

    def projectors(self):
        out = []
        n = self.key_dim * self.block
        for j in range(self.key_dim):
            zj = np.zeros((n, n))
            idx = slice(j * self.block, (j + 1) * self.block)
            zj[idx, idx] = np.eye(self.block)
            out.append(zj)
        return out

    def pinch(self, g):
        out = np.zeros_like(g)
        for j in range(self.key_dim):
            idx = slice(j * self.block, (j + 1) * self.block)
            out[idx, idx] = g[idx, idx]
        return out

    def pinched_blocks(self, rho):
        return [
            sum(kb[j] @ rho @ kb[j].conj().T for kb in self._blocks) for j in range(self.key_dim)
        ]

    def trace_out(self, rho):
        """``Tr G(rho)``, the probability of passing post-selection."""
        return float(np.real(sum(np.trace(k.conj().T @ k @ rho) for k in self.kraus)))


def _entropy_terms(h, floor):
    """``Tr(h log2 h)`` and ``log2 h`` for Hermitian ``h``."""
    w, v = np.linalg.eigh(h)
    wc = np.maximum(w, floor)
    logw = np.log2(wc)
    val = float(np.sum(np.where(w > 0, w, 0.0) * logw))
    return val, w, v, logw


def _map_value(rho, km, floor, want_grad=False):
    grad = np.zeros_like(rho) if want_grad else None
    if km._b is not None:
        m = sdp.hermitize(km._b.conj().T @ rho @ km._b)
        val, w, v, logw = _entropy_terms(m, floor)
        if want_grad:
            bv = km._b @ v
            grad += (bv * logw) @ bv.conj().T
    else:
        g = sdp.hermitize(km.apply(rho))
        val, w, v, logw = _entropy_terms(g, floor)
        if want_grad:
            lg = (v * logw) @ v.conj().T
            for k in km.kraus:
                grad += k.conj().T @ lg @ k
    for j, gj in enumerate(km.pinched_blocks(rho)):
        bval, w, v, logw = _entropy_terms(sdp.hermitize(gj), floor)
        val -= bval
        if want_grad:
            lg = (v * logw) @ v.conj().T
            for kb in km._blocks:
                grad -= kb[j].conj().T @ lg @ kb[j]
    return val, grad


def _check_state(rho, tol=1e-8):
    scale = max(1.0, float(np.max(np.abs(rho))))
    if not np.allclose(rho, rho.conj().T, atol=tol * scale, rtol=0):
        raise NonHermitianInputError("density operator is not Hermitian")


def perturb(rho, eps):
    d = rho.shape[0]
    return (1 - eps) * rho + eps * np.eye(d) / d


def objective(rho, maps, eps=0.0, floor=LOG_FLOOR):
    """Sum over ``maps`` of ``D(G(rho) || Z(G(rho)))`` in bits.

    ``rho`` is first blended with the maximally mixed state by ``eps``.
    """
    rho = np.asarray(rho, dtype=complex)
    _check_state(rho)
    if np.linalg.eigvalsh(sdp.hermitize(rho)).min() < -1e-8:
        raise NonHermitianInputError("density operator is not positive semi-definite")
    if isinstance(maps, KeyMap):
        maps = [maps]
    rho = perturb(sdp.hermitize(rho), eps)
    return sum(_map_value(rho, km, floor)[0] for km in maps)


def gradient(rho, maps, eps=0.0, floor=LOG_FLOOR):
    """Gradient of :func:`objective` with respect to ``rho`` (Hermitian)."""
    rho = np.asarray(rho, dtype=complex)
    if isinstance(maps, KeyMap):
        maps = [maps]
    pr = perturb(sdp.hermitize(rho), eps)
    grad = sum(_map_value(pr, km, floor, want_grad=True)[1] for km in maps)
    return (1 - eps) * sdp.hermitize(grad)


def _value_and_gradient(rho, maps, eps, floor):
    pr = perturb(rho, eps)
    val = 0.0
    grad = np.zeros_like(rho)
    for km in maps:
        v, g = _map_value(pr, km, floor, want_grad=True)
        val += v
        grad += g
    return val, (1 - eps) * sdp.hermitize(grad)


@dataclass
class SpectrahedronProblem:
    """``{rho >= 0 : Tr(Gamma_i rho) = gamma_i}`` plus the objective's key maps."""

    operators: np.ndarray
    targets: np.ndarray
    maps: list
    labels: list = field(default_factory=list)

    def __post_init__(self):
        self.operators = np.asarray(self.operators, dtype=complex)
        self.targets = np.asarray(self.targets, dtype=float)
        if isinstance(self.maps, KeyMap):
            self.maps = [self.maps]
        for op in self.operators:
            if not np.allclose(op, op.conj().T, atol=1e-12, rtol=0):
                raise NonHermitianInputError("constraint operators must be Hermitian")
        self.basis = sdp.orthonormalize(self.operators, self.targets)
        tol = 1e-8 * (1 + np.linalg.norm(self.targets))
        if self.basis.residual > tol:
            raise InfeasibleProblemError(
                f"constraint targets are linearly inconsistent (residual {self.basis.residual:.3e})"
            )

    @property
    def dim(self):
        return self.operators.shape[1]

    def residual(self, rho):
        return np.real(np.einsum("kij,ji->k", self.operators, rho)) - self.targets


@dataclass
class SolverOptions:
    max_iterations: int = 300
    fw_gap_tolerance: float = 1e-6
    perturbation: float = 1e-10
    subproblem_tolerance: float = 1e-9
    log_floor: float = LOG_FLOOR
    line_search_tolerance: float = 1e-10
    interior_tolerance: float = 1e-8
    trace: bool = False

    def __post_init__(self):
        for name in ("max_iterations", "fw_gap_tolerance", "perturbation", "subproblem_tolerance", "log_floor"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class SolverReport:
    primal_value: float
    lower_bound: float
    gap: float
    iterations: int
    status: str
    perturbation: float
    fw_gap: float
    rho: np.ndarray = field(repr=False, default=None)
    trace: list = field(repr=False, default_factory=list)
    seconds: float = 0.0


def _subproblem_solve(c, problem, tol):
    """Minimise ``Tr(c sigma)`` over the feasible set; returns (sigma, certified lower value)."""
    basis = problem.basis
    c = sdp.hermitize(np.asarray(c, dtype=complex))
    d = c.shape[0]
    # shift and scale so the interior point sees an O(1) objective
    shift = float(np.real(np.trace(c))) / d if basis.trace is not None else 0.0
    cs = c - shift * np.eye(d)
    scale = max(np.linalg.norm(cs), 1e-300)
    res = sdp.solve_with_restarts(cs / scale, basis.ops, basis.rhs, tol=tol)
    sigma = res.x
    zcert = sdp.hermitize(cs / scale - sdp.adjoint_ops(basis.ops, res.y))
    lam = float(np.linalg.eigvalsh(zcert).min())
    if basis.trace is not None:
        lower = float(basis.rhs @ res.y) + basis.trace * min(lam, 0.0)
        lower = lower * scale + shift * basis.trace
    elif lam >= 0:
        lower = float(basis.rhs @ res.y) * scale
    else:
        lower = -math.inf
    return sigma, lower, res


def linear_subproblem(c, problem, tol=1e-9):
    """Feasible ``sigma`` minimising ``Tr(c sigma)``."""
    return _subproblem_solve(c, problem, tol)[0]


def feasible_init(problem, tol=1e-9, interior=1e-8):
    """Point of the feasible set maximising the smallest eigenvalue.

    With ``rho = X + t I`` and the pinned trace ``Tr rho = tau`` this is
    ``min Tr X`` over ``X >= 0`` subject to shifted constraints.  Returns the
    point even when the best ``t`` is only marginally positive or zero
    (feasible set without interior); raises if it is clearly negative.
    """
    basis = problem.basis
    d = problem.dim
    if basis.trace is None:
        raise InfeasibleProblemError("feasible_init requires a trace constraint")
    tau = basis.trace
    eye = np.eye(d)
    tr = np.real(np.trace(problem.operators, axis1=1, axis2=2))
    shifted = problem.operators - (tr / d)[:, None, None] * eye
    targets = problem.targets - tr * tau / d
    keep = np.linalg.norm(shifted.reshape(len(shifted), -1), axis=1) > 1e-12
    sbasis = sdp.orthonormalize(shifted[keep], targets[keep])
    res = sdp.solve_with_restarts(eye, sbasis.ops, sbasis.rhs, tol=tol)
    x = res.x
    t = (tau - float(np.real(np.trace(x)))) / d
    rho = sdp.hermitize(x + t * eye)
    if t < -1e-7:
        raise InfeasibleProblemError(
            f"no density operator satisfies the constraints (best minimum eigenvalue {t:.3e})"
        )
    if t < interior:
        log.warning("feasible set has (numerically) empty interior: min eigenvalue %.3e", t)
    return rho


def _golden(phi, tol):
    # minimise a convex function on [0, 1]; ties go to the smaller step
    inv = (math.sqrt(5) - 1) / 2
    a, b = 0.0, 1.0
    c = b - inv * (b - a)
    d = a + inv * (b - a)
    fc, fd = phi(c), phi(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = phi(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = phi(d)
    x = 0.5 * (a + b)
    fx = phi(x)
    f1 = phi(1.0)
    if f1 < fx:
        return 1.0, f1
    return x, fx


def minimize(problem, options=None, rho0=None):
    """Frank-Wolfe minimisation with a certified linearisation lower bound."""
    opts = options or SolverOptions()
    start = time.perf_counter()
    maps = problem.maps
    eps, floor = opts.perturbation, opts.log_floor
    if rho0 is None:
        rho = feasible_init(problem, tol=opts.subproblem_tolerance, interior=opts.interior_tolerance)
    else:
        rho = np.asarray(rho0, dtype=complex)

    value, grad = _value_and_gradient(rho, maps, eps, floor)
    best_lower = -math.inf
    trace = []
    status = ITERATION_LIMIT
    fw_gap = math.inf
    it = 0
    for it in range(1, opts.max_iterations + 1):
        sigma, lin_lower, _ = _subproblem_solve(grad, problem, opts.subproblem_tolerance)
        g_rho = sdp.inner(grad, rho)
        fw_gap = g_rho - sdp.inner(grad, sigma)
        best_lower = max(best_lower, value - g_rho + lin_lower)
        if opts.trace:
            trace.append((it, value, fw_gap))
            log.debug("fw %d\t%.12g\t%.3e", it, value, fw_gap)
        if fw_gap < opts.fw_gap_tolerance:
            status = CONVERGED
            break
        direction = sigma - rho

        def phi(step):
            return sum(_map_value(perturb(rho + step * direction, eps), km, floor)[0] for km in maps)

        step, new_value = _golden(phi, opts.line_search_tolerance)
        if new_value > value:
            step, new_value = 0.0, value
        if step == 0.0:
            # no descent along the segment: the linearisation bound is the best we can do
            status = CONVERGED if fw_gap < 10 * opts.fw_gap_tolerance else ITERATION_LIMIT
            break
        rho = sdp.hermitize(rho + step * direction)
        value, grad = _value_and_gradient(rho, maps, eps, floor)

    best_lower = min(best_lower, value)
    return SolverReport(
        primal_value=value,
        lower_bound=best_lower,
        gap=value - best_lower,
        iterations=it,
        status=status,
        perturbation=eps,
        fw_gap=fw_gap,
        rho=rho,
        trace=trace,
        seconds=time.perf_counter() - start,
    )
