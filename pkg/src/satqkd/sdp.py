"""Primal-dual interior-point method for small dense Hermitian SDPs.

Solves::

    min  <C, X>   s.t.  <A_i, X> = b_i,  X >= 0

with the HKM search direction and Mehrotra predictor-corrector steps.
Constraint matrices are orthonormalised (and redundant ones dropped)
before iterating, which keeps the Schur complement well conditioned.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleProblemError, SubproblemFailureError

log = logging.getLogger(__name__)


def inner(a, b):
    """Real Frobenius inner product ``Re Tr(a^dag b)``."""
    return float(np.real(np.vdot(a, b)))


def hermitize(m):
    return 0.5 * (m + m.conj().T)


@dataclass
class ConstraintBasis:
    """Orthonormal basis for the span of the constraint operators."""

    ops: np.ndarray  # (r, n, n) Hermitian, orthonormal under Re Tr
    rhs: np.ndarray  # (r,)
    trace: float | None  # Tr X implied by the constraints, if any
    residual: float  # inconsistency of the original right-hand side


def orthonormalize(ops, targets, rank_tol=1e-10):
    """Whiten constraint operators and check consistency of the targets."""
    ops = np.asarray(ops, dtype=complex)
    targets = np.asarray(targets, dtype=float)
    m, n, _ = ops.shape
    # Re Tr(A X) for Hermitian A equals a real dot product of stacked parts
    mat = np.concatenate([ops.real.reshape(m, -1), ops.imag.reshape(m, -1)], axis=1)
    u, s, vt = np.linalg.svd(mat, full_matrices=False)
    keep = s > rank_tol * s[0]
    u, s, vt = u[:, keep], s[keep], vt[keep]
    rhs = (u.T @ targets) / s
    residual = float(np.linalg.norm(targets - u @ (u.T @ targets)))
    r = len(s)
    basis = (vt[:, : n * n] + 1j * vt[:, n * n :]).reshape(r, n, n)
    basis = 0.5 * (basis + basis.conj().transpose(0, 2, 1))
    # identity in the span => trace is pinned
    ident = np.concatenate([np.eye(n).ravel(), np.zeros(n * n)])
    coeff = vt @ ident
    if np.linalg.norm(ident - vt.T @ coeff) < 1e-8 * np.sqrt(n):
        trace = float(coeff @ rhs)
    else:
        trace = None
    return ConstraintBasis(basis, rhs, trace, residual)


def apply_ops(ops, x):
    """``A(X)``: vector of inner products with every constraint."""
    m = ops.shape[0]
    return np.real(ops.conj().reshape(m, -1) @ x.reshape(-1))


def adjoint_ops(ops, y):
    """``A^*(y) = sum_i y_i A_i``."""
    return np.tensordot(y, ops, axes=1)


def _max_step(x_chol, dx):
    # largest a with X + a dX >= 0, given X = L L^dag
    linv = np.linalg.inv(x_chol)
    w = np.linalg.eigvalsh(hermitize(linv @ dx @ linv.conj().T))
    lam = w.min()
    return np.inf if lam >= 0 else -1.0 / lam


@dataclass
class SDPResult:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    primal_objective: float
    dual_objective: float
    iterations: int
    primal_infeasibility: float
    dual_infeasibility: float
    status: str


def solve(c, ops, rhs, tol=1e-9, max_iter=100, x0_scale=None, seed=None, slack=100.0, feas_tol=1e-6):
    """Interior-point solve with orthonormal constraints ``ops``.

    ``ops`` must already be orthonormal (see :func:`orthonormalize`).
    If the iteration breaks down numerically while all residuals are within
    ``slack * tol``, the last iterate is returned with status ``near_optimal``.
    Feasible sets without a strict interior stall with an accurate dual but a
    primal residual stuck above ``tol``; if that residual is below
    ``feas_tol`` the iterate comes back as ``inexact`` (callers that need a
    bound must certify ``y`` themselves).  Otherwise raises
    :class:`SubproblemFailureError`.
    """
    c = hermitize(np.asarray(c, dtype=complex))
    n = c.shape[0]
    m = ops.shape[0]
    ops_t = ops.transpose(0, 2, 1).reshape(m, -1)
    bnorm = 1 + np.linalg.norm(rhs)
    cnorm = 1 + np.linalg.norm(c)

    xi = max(10.0, np.sqrt(n), n * np.max((1 + np.abs(rhs)) / 2.0)) if x0_scale is None else x0_scale
    eta = max(10.0, np.sqrt(n), np.linalg.norm(c))
    eye = np.eye(n)
    x = xi * eye
    z = eta * eye
    if seed is not None:
        rng = np.random.default_rng(seed)
        jitter = rng.uniform(0.5, 2.0)
        x *= jitter
        z /= jitter
    y = np.zeros(m)

    history = []

    def breakdown(msg):
        pobj, dobj, pinf, dinf, relgap = history[-1]
        if max(pinf, dinf, relgap) < slack * tol:
            log.debug("%s at relgap %.2e; accepting last iterate", msg, relgap)
            return SDPResult(x, y, z, pobj, dobj, it, pinf, dinf, "near_optimal")
        if pinf < feas_tol and dinf < slack * tol:
            log.debug("%s with primal residual %.2e; returning inexact iterate", msg, pinf)
            return SDPResult(x, y, z, pobj, dobj, it, pinf, dinf, "inexact")
        raise SubproblemFailureError(msg, {"history": history})

    for it in range(1, max_iter + 1):
        rp = rhs - apply_ops(ops, x)
        rd = c - z - adjoint_ops(ops, y)
        mu = inner(x, z) / n
        pobj = inner(c, x)
        dobj = float(rhs @ y)
        pinf = np.linalg.norm(rp) / bnorm
        dinf = np.linalg.norm(rd) / cnorm
        relgap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
        history.append((pobj, dobj, pinf, dinf, relgap))
        if pinf < tol and dinf < tol and relgap < tol:
            return SDPResult(x, y, z, pobj, dobj, it, pinf, dinf, "optimal")

        try:
            zc = np.linalg.cholesky(z)
            xc = np.linalg.cholesky(x)
        except np.linalg.LinAlgError:
            return breakdown("iterate lost positive definiteness")
        zinv = np.linalg.inv(zc)
        zinv = zinv.conj().T @ zinv
        # Schur complement M_ij = Re Tr(A_i X A_j Z^-1)
        t = x @ ops @ zinv
        schur = np.real(ops_t @ t.reshape(m, -1).T)
        schur = 0.5 * (schur + schur.T)
        try:
            mchol = np.linalg.cholesky(schur)
        except np.linalg.LinAlgError:
            return breakdown("Schur complement not positive definite")

        def direction(rc_zinv):
            # rc_zinv = R_c Z^-1 for the complementarity residual R_c
            base = rc_zinv - x @ rd @ zinv
            r = rp - apply_ops(ops, base)
            dy = np.linalg.solve(mchol.conj().T, np.linalg.solve(mchol, r))
            ady = adjoint_ops(ops, dy)
            dx = hermitize(base + x @ ady @ zinv)
            dz = rd - ady
            return dx, dy, dz

        dx_a, dy_a, dz_a = direction(-x)
        ap = min(1.0, _max_step(xc, dx_a))
        ad = min(1.0, _max_step(zc, dz_a))
        mu_aff = inner(x + ap * dx_a, z + ad * dz_a) / n
        sigma = min(1.0, (mu_aff / mu) ** 3)
        rc_zinv = sigma * mu * zinv - x - dx_a @ dz_a @ zinv
        dx, dy, dz = direction(rc_zinv)
        gamma = 0.98
        ap = min(1.0, gamma * _max_step(xc, dx))
        ad = min(1.0, gamma * _max_step(zc, dz))
        x_new = hermitize(x + ap * dx)
        z_new = hermitize(z + ad * dz)
        if not np.isfinite(x_new).all() or not np.isfinite(z_new).all():
            return breakdown("non-finite iterate")
        x, y, z = x_new, y + ad * dy, z_new
    return breakdown(f"interior point did not converge in {max_iter} iterations")


def solve_with_restarts(c, ops, rhs, tol=1e-9, max_iter=100, restarts=3):
    last = None
    for attempt in range(restarts + 1):
        try:
            return solve(c, ops, rhs, tol=tol, max_iter=max_iter, seed=None if attempt == 0 else attempt)
        except SubproblemFailureError as err:
            log.debug("interior point attempt %d failed: %s", attempt, err)
            last = err
    raise last


def check_consistent(basis, tol=1e-9):
    if basis.residual > tol:
        raise InfeasibleProblemError(f"linear constraints are inconsistent (residual {basis.residual:.3e})")
