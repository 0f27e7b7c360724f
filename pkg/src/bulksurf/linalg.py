"""
Sparse linear solvers.

Matrices are ``scipy.sparse`` CSR matrices (row offsets / column indices /
values).  CG and BiCGStab are implemented here with Jacobi preconditioning;
the direct method wraps SuperLU.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

logger = logging.getLogger(__name__)


class Method(str, Enum):
    CG = "cg"
    BICGSTAB = "bicgstab"
    DIRECT = "direct"


class SolverError(RuntimeError):
    """Base class for linear-solver failures; carries the best iterate."""

    def __init__(self, message, x=None, stats=None):
        super().__init__(message)
        self.x = x
        self.stats = stats


class Breakdown(SolverError):
    """Zero denominator in the Krylov recurrence."""


class NonConvergence(SolverError):
    """Iteration limit reached before the tolerance."""


@dataclass
class SolveStats:
    iterations: int
    residual: float          # ||b - A x||_2, recomputed from scratch
    relative_residual: float
    history: list[float] | None = None


def as_csr(A) -> sps.csr_matrix:
    A = sps.csr_matrix(A)
    A.sum_duplicates()
    A.sort_indices()
    return A


def _jacobi(A):
    d = A.diagonal().copy()
    d[d == 0] = 1.0
    return 1.0 / d


def _finish(A, b, x, it, history, tol, nullspace_mean):
    if nullspace_mean:
        x = x - x.mean()
    r = np.linalg.norm(b - A @ x)
    bn = np.linalg.norm(b)
    rel = r / bn if bn > 0 else r
    return x, SolveStats(it, float(r), float(rel), history)


def cg(A, b, tol=1e-10, max_iter=1000, x0=None, nullspace_mean=False, track=False):
    """Jacobi-preconditioned conjugate gradients for SPD (or SPSD) systems."""
    n = b.shape[0]
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if nullspace_mean:
        if abs(b.sum()) > 1e-9 * np.abs(b).sum():
            raise Breakdown("right-hand side is not orthogonal to the constant null space")
        b = b - b.mean()
        x -= x.mean()
    bnorm = np.linalg.norm(b)
    history = [] if track else None
    if bnorm == 0.0:
        return _finish(A, b, np.zeros(n), 0, history, tol, nullspace_mean)
    Minv = _jacobi(A)
    r = b - A @ x
    z = Minv * r
    p = z.copy()
    rz = r @ z
    target = tol * bnorm
    it = 0
    rnorm = np.linalg.norm(r)
    if track:
        history.append(rnorm)
    while rnorm > target and it < max_iter:
        Ap = A @ p
        pAp = p @ Ap
        if pAp == 0.0 or not np.isfinite(pAp):
            x, stats = _finish(A, b, x, it, history, tol, nullspace_mean)
            raise Breakdown(f"CG breakdown at iteration {it} (p.Ap = {pAp})", x, stats)
        a = rz / pAp
        x += a * p
        r -= a * Ap
        it += 1
        rnorm = np.linalg.norm(r)
        if track:
            history.append(rnorm)
        z = Minv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    x, stats = _finish(A, b, x, it, history, tol, nullspace_mean)
    if stats.residual > target * (1 + 1e-8):
        # the recurrence residual drifted from the true one; polish once
        if it < max_iter:
            x2, stats2 = cg(A, b, tol, max_iter - it, x0=x, nullspace_mean=nullspace_mean)
            return x2, SolveStats(it + stats2.iterations, stats2.residual,
                                  stats2.relative_residual, history)
        raise NonConvergence(
            f"CG did not converge in {max_iter} iterations "
            f"(relative residual {stats.relative_residual:.3e})", x, stats)
    return x, stats


def bicgstab(A, b, tol=1e-10, max_iter=1000, x0=None):
    """Jacobi right-preconditioned BiCGStab."""
    n = b.shape[0]
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return _finish(A, b, np.zeros(n), 0, None, tol, False)
    Minv = _jacobi(A)
    r = b - A @ x
    r_hat = r.copy()
    rho = alpha = omega = 1.0
    v = np.zeros(n)
    p = np.zeros(n)
    target = tol * bnorm
    it = 0
    while np.linalg.norm(r) > target and it < max_iter:
        rho_new = r_hat @ r
        if rho_new == 0.0:
            x, stats = _finish(A, b, x, it, None, tol, False)
            raise Breakdown(f"BiCGStab breakdown (rho = 0) at iteration {it}", x, stats)
        beta = (rho_new / rho) * (alpha / omega)
        rho = rho_new
        p = r + beta * (p - omega * v)
        y = Minv * p
        v = A @ y
        denom = r_hat @ v
        if denom == 0.0:
            x, stats = _finish(A, b, x, it, None, tol, False)
            raise Breakdown(f"BiCGStab breakdown (r_hat.v = 0) at iteration {it}", x, stats)
        alpha = rho / denom
        s = r - alpha * v
        it += 1
        if np.linalg.norm(s) <= target:
            x += alpha * y
            r = s
            break
        zz = Minv * s
        t = A @ zz
        tt = t @ t
        if tt == 0.0:
            x, stats = _finish(A, b, x, it, None, tol, False)
            raise Breakdown(f"BiCGStab breakdown (t.t = 0) at iteration {it}", x, stats)
        omega = (t @ s) / tt
        x += alpha * y + omega * zz
        r = s - omega * t
        if omega == 0.0:
            x, stats = _finish(A, b, x, it, None, tol, False)
            raise Breakdown(f"BiCGStab breakdown (omega = 0) at iteration {it}", x, stats)
    x, stats = _finish(A, b, x, it, None, tol, False)
    if stats.residual > target * (1 + 1e-8):
        raise NonConvergence(
            f"BiCGStab did not converge in {max_iter} iterations "
            f"(relative residual {stats.relative_residual:.3e})", x, stats)
    return x, stats


class DirectSolver:
    """Sparse LU factorization of a fixed matrix, reusable across right-hand sides."""

    def __init__(self, A):
        self.A = as_csr(A)
        try:
            self._lu = spla.splu(self.A.tocsc())
        except RuntimeError as exc:   # exactly singular
            raise Breakdown(f"LU factorization failed: {exc}") from exc

    def __call__(self, b):
        x = self._lu.solve(b)
        if not np.all(np.isfinite(x)):
            raise Breakdown("LU solve produced non-finite values")
        r = np.linalg.norm(b - self.A @ x)
        bn = np.linalg.norm(b)
        return x, SolveStats(1, float(r), float(r / bn) if bn > 0 else float(r))


def solve(A, b, method: Method | str = Method.CG, tol: float = 1e-10, max_iter: int = 1000,
          x0=None, nullspace_mean: bool = False):
    """Solve ``A x = b``; returns ``(x, SolveStats)``.

    ``nullspace_mean`` projects ``b`` and ``x`` onto mean-zero vectors (for
    pure-Neumann/periodic Laplacians whose kernel is the constants); only
    meaningful with CG.
    """
    A = as_csr(A)
    b = np.asarray(b, dtype=float)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got {A.shape}")
    if A.shape[0] != b.shape[0]:
        raise ValueError(f"dimension mismatch: A is {A.shape}, b has {b.shape[0]} entries")
    if tol <= 0:
        raise ValueError("tol must be positive")
    method = Method(method)
    if method is Method.CG:
        return cg(A, b, tol, max_iter, x0, nullspace_mean)
    if method is Method.BICGSTAB:
        return bicgstab(A, b, tol, max_iter, x0)
    x, stats = DirectSolver(A)(b)
    if stats.relative_residual > tol:
        raise NonConvergence(
            f"direct solve residual {stats.relative_residual:.3e} exceeds tol", x, stats)
    return x, stats
