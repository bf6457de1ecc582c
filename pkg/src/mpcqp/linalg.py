"""Portable dense linear-algebra kernels for fixed-structure matrices.

All matrices and vectors are plain numpy arrays of float64 in row-major
(C-contiguous) layout; that layout choice is global to the package.  Only
fixed structures are handled (dense, symmetric, triangular, diagonal); there
are no sparse formats and no dynamic pivoting: pivot order is always the
natural one implied by the block structure of the caller.

Every kernel is a pure function of its inputs.  As optional instrumentation,
kernels add a nominal operation count to a thread-local counter when one is
active (see :func:`flop_counter`); this keeps the kernels safe to call
concurrently on disjoint data while making complexity measurements exact and
reproducible.  Nominal counts use the standard textbook formulas and are
deterministic integers.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatch,
    NotPositiveDefinite,
    RankDeficient,
    SingularFactor,
)

__all__ = [
    "cholesky_factor",
    "solve_triangular",
    "qr_cholesky",
    "matmul_acc",
    "flop_counter",
    "FlopCounter",
]

_local = threading.local()


class FlopCounter:
    """Accumulates nominal floating-point operation counts of kernel calls."""

    def __init__(self):
        self.flops = 0

    def add(self, n):
        self.flops += int(n)


@contextmanager
def flop_counter():
    """Activate flop counting on this thread and yield the counter.

    Counters nest: an inner context accumulates into both the inner and the
    outer counter.
    """
    counter = FlopCounter()
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = _local.stack = []
    stack.append(counter)
    try:
        yield counter
    finally:
        stack.pop()


def _count(n):
    stack = getattr(_local, "stack", None)
    if stack:
        n = int(n)
        for counter in stack:
            counter.flops += n
    return None


def cholesky_factor(M, reg=0.0, pivot_tol=0.0):
    """Lower Cholesky factor L with L @ L.T = M + reg*I.

    Parameters
    ----------
    M : (n, n) array
        Symmetric matrix.  Only used through its symmetric part implicitly;
        symmetry is the caller's responsibility.
    reg : float
        Nonnegative diagonal shift added before factorization.
    pivot_tol : float
        A pivot (squared diagonal entry of L) at or below this threshold
        raises :class:`NotPositiveDefinite`.  The default 0 fails only on
        nonpositive pivots; callers are expected to retry with regularization
        instead of the kernel loosening the test.

    Raises
    ------
    NotPositiveDefinite
        If M + reg*I is not numerically positive definite.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"expected square matrix, got shape {M.shape}")
    n = M.shape[0]
    _count(n * n * n // 3)
    if n == 0:
        return np.zeros((0, 0))
    A = M if reg == 0.0 else M + reg * np.eye(n)
    try:
        L = scipy.linalg.cholesky(A, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    if pivot_tol > 0.0 and np.min(np.diag(L)) ** 2 <= pivot_tol:
        raise NotPositiveDefinite(
            f"pivot {np.min(np.diag(L))**2:.3e} below threshold {pivot_tol:.3e}"
        )
    return L


def solve_triangular(L, B, transpose=False, lower=True):
    """Solve L @ X = B (or L.T @ X = B when ``transpose``) for X.

    ``L`` must be square triangular with nonzero diagonal; ``B`` may be a
    vector or a matrix with matching leading dimension.

    Raises
    ------
    SingularFactor
        If any diagonal entry of L is exactly zero.
    DimensionMismatch
        If shapes are not conformal.
    """
    L = np.asarray(L, dtype=float)
    B = np.asarray(B, dtype=float)
    n = L.shape[0]
    if L.ndim != 2 or L.shape[1] != n:
        raise DimensionMismatch(f"factor must be square, got {L.shape}")
    if B.shape[0] != n:
        raise DimensionMismatch(f"rhs leading dim {B.shape} does not match factor {n}")
    if n == 0:
        return B.copy()
    if np.any(np.diag(L) == 0.0):
        raise SingularFactor("zero diagonal entry in triangular factor")
    m = 1 if B.ndim == 1 else B.shape[1]
    _count(n * n * m)
    return scipy.linalg.solve_triangular(
        L, B, trans="T" if transpose else "N", lower=lower, check_finite=False
    )


def qr_cholesky(Astack, rank_tol=None):
    """Upper-triangular R with R.T @ R = Astack.T @ Astack, via QR.

    This is the array-algorithm replacement for forming the normal matrix
    A.T @ A and Cholesky-factorizing it: the triangularization acts on the
    stacked factor directly, so the condition number is not squared.  The
    returned R has a nonnegative diagonal (rows are sign-normalized), which
    pins down the otherwise sign-ambiguous factor.

    Parameters
    ----------
    Astack : (m, n) array with m >= n
        Stacked rows of the factors whose Gram matrix is wanted.
    rank_tol : float, optional
        Diagonal entries of R at or below this value raise
        :class:`RankDeficient`.  Default: max(m, n) * eps * max_i |R_ii|.
    """
    A = np.asarray(Astack, dtype=float)
    if A.ndim != 2:
        raise DimensionMismatch(f"expected 2-d stack, got shape {A.shape}")
    m, n = A.shape
    if m < n:
        raise DimensionMismatch(f"stack must have at least {n} rows, got {m}")
    _count(max(0, 2 * m * n * n - (2 * n * n * n) // 3))
    if n == 0:
        return np.zeros((0, 0))
    R = np.linalg.qr(A, mode="r")
    d = np.diag(R).copy()
    if rank_tol is None:
        rank_tol = max(m, n) * np.finfo(float).eps * (np.max(np.abs(d)) if n else 0.0)
    if np.any(np.abs(d) <= rank_tol):
        raise RankDeficient(
            f"diagonal entry {np.min(np.abs(d)):.3e} at or below {rank_tol:.3e}"
        )
    R = np.where(d[:, None] < 0.0, -R, R)
    return R


def matmul_acc(alpha, A, B, beta, C, transA=False, transB=False):
    """Return alpha * op(A) @ op(B) + beta * C.

    ``A`` and ``B`` are matrices (B may also be a vector); ``C`` must be
    conformal with the product (or a scalar 0.0 shortcut when beta == 0).
    A fresh array is returned; inputs are never written.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    opA = A.T if transA else A
    opB = B.T if transB else B
    if opA.ndim != 2:
        raise DimensionMismatch("A must be a matrix")
    if opA.shape[-1] != opB.shape[0]:
        raise DimensionMismatch(
            f"inner dimensions differ: {opA.shape} vs {opB.shape}"
        )
    mdim = opA.shape[0]
    ndim = 1 if opB.ndim == 1 else opB.shape[1]
    _count(2 * mdim * ndim * opA.shape[1])
    P = alpha * (opA @ opB)
    if beta == 0.0:
        return P
    C = np.asarray(C, dtype=float)
    if C.shape != P.shape:
        raise DimensionMismatch(f"accumulator shape {C.shape} != product {P.shape}")
    return P + beta * C
