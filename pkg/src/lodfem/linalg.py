"""Sparse solver kernels shared by assembly, correctors, and the harness.

Matrices are scipy CSR (``indptr``/``indices``/``data`` are the row offsets,
column indices, and values of the compressed-sparse-row layout).  Two kernels
cover every linear solve in the package: a symmetric positive definite solve
and an equality-constrained quadratic solve

    minimize 1/2 x'Ax - b'x   subject to  Cx = 0,

handled through its KKT system.  Both factorize with SuperLU and polish with
iterative refinement; they either meet the requested residual tolerance or
raise SolverFailure carrying the achieved residual.  Solves are pure
functions of their inputs, so repeated or concurrent calls on shared
immutable matrices are deterministic.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

_REFINE_STEPS = 2
_DENSE_FALLBACK_LIMIT = 5000


class SolverFailure(RuntimeError):
    """Linear solve did not reach the requested tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


def _check_square(A, b):
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix not square: {A.shape}")
    if b.shape != (A.shape[0],):
        raise ValueError(f"shape mismatch: matrix {A.shape}, vector {b.shape}")


def check_symmetry(A, rel_tol=1e-12):
    """Require max|A - A'| <= rel_tol * max|A|."""
    if A.nnz == 0:
        return
    diff = (A - A.T).tocsr()
    skew = np.abs(diff.data).max() if diff.nnz else 0.0
    scale = np.abs(A.data).max()
    if skew > rel_tol * scale:
        raise ValueError(f"matrix not symmetric: skew {skew:.3e} vs scale {scale:.3e}")


def spd_solve(A, b, tol=1e-10):
    """Solve Ax = b for symmetric positive definite A to a relative residual.

    Direct LU factorization plus iterative refinement; deterministic for
    fixed inputs.  Raises SolverFailure if the residual target is missed.
    """
    b = np.asarray(b, dtype=float)
    _check_square(A, b)
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    norm_b = np.linalg.norm(b)
    if norm_b == 0.0:
        return np.zeros_like(b)
    try:
        lu = spla.splu(sparse.csc_matrix(A))
    except RuntimeError as exc:
        raise SolverFailure(f"factorization failed: {exc}") from exc
    x = lu.solve(b)
    for _ in range(_REFINE_STEPS):
        r = b - A @ x
        if np.linalg.norm(r) <= tol * norm_b:
            break
        x = x + lu.solve(r)
    resid = np.linalg.norm(b - A @ x)
    if not np.isfinite(resid) or resid > tol * norm_b:
        raise SolverFailure(
            f"spd solve missed tolerance: residual {resid:.3e} > {tol:.1e} * {norm_b:.3e}",
            residual=float(resid))
    return x


@dataclass(eq=False)
class SaddleSystem:
    """Algebraic corrector problem: Ax + C'mu = b with Cx = 0."""

    A: sparse.csr_matrix
    C: sparse.csr_matrix
    b: np.ndarray

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float)
        _check_square(self.A, self.b)
        if self.C.shape[1] != self.A.shape[0]:
            raise ValueError(
                f"constraint width {self.C.shape[1]} != system size {self.A.shape[0]}")
        check_symmetry(self.A)


class SaddleFactorization:
    """Reusable KKT factorization for many right-hand sides.

    Rank-deficient constraints make the KKT matrix singular; in that case a
    dense least-squares solve recovers the (still unique) minimizer x with a
    least-norm multiplier.
    """

    def __init__(self, A, C):
        self.A = A.tocsr()
        self.C = C.tocsr()
        self.n = A.shape[0]
        self.m = C.shape[0]
        self._lu = None
        self._dense = None
        if self.m == 0:
            self._kkt = sparse.csc_matrix(A)
        else:
            self._kkt = sparse.bmat([[A, C.T], [C, None]], format="csc")
        try:
            self._lu = spla.splu(self._kkt)
        except RuntimeError:
            self._use_dense()

    def _use_dense(self):
        if self._kkt.shape[0] > _DENSE_FALLBACK_LIMIT:
            raise SolverFailure(
                f"singular KKT system of size {self._kkt.shape[0]} "
                "exceeds the dense fallback limit")
        self._lu = None
        self._dense = self._kkt.toarray()

    def solve(self, b, tol=1e-10):
        b = np.asarray(b, dtype=float)
        if b.shape != (self.n,):
            raise ValueError(f"shape mismatch: system size {self.n}, rhs {b.shape}")
        rhs = np.concatenate([b, np.zeros(self.m)])
        if self._dense is None:
            z = self._lu.solve(rhs)
            for _ in range(_REFINE_STEPS):
                r = rhs - self._kkt @ z
                if np.linalg.norm(r) <= tol * max(np.linalg.norm(rhs), 1e-300):
                    break
                z = z + self._lu.solve(r)
            if not np.all(np.isfinite(z)):
                self._use_dense()
        if self._dense is not None:
            z, *_ = np.linalg.lstsq(self._dense, rhs, rcond=None)
        x, mu = z[:self.n], z[self.n:]

        norm_b = np.linalg.norm(b)
        stat = np.linalg.norm(self.A @ x + (self.C.T @ mu if self.m else 0.0) - b)
        feas = np.linalg.norm(self.C @ x) if self.m else 0.0
        if not np.isfinite(stat) or stat > tol * norm_b or \
                feas > tol * max(1.0, np.linalg.norm(x)):
            raise SolverFailure(
                f"saddle solve missed tolerance: stationarity {stat:.3e}, "
                f"feasibility {feas:.3e}", residual=float(max(stat, feas)))
        return x, mu


def saddle_solve(system, tol=1e-10):
    """Solve a SaddleSystem; with no constraints this reduces to spd_solve."""
    if system.C.shape[0] == 0:
        return spd_solve(system.A, system.b, tol), np.zeros(0)
    return SaddleFactorization(system.A, system.C).solve(system.b, tol)


def matvec(A, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (A.shape[1],):
        raise ValueError(f"shape mismatch: matrix {A.shape}, vector {x.shape}")
    return A @ x


def transpose_matvec(A, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (A.shape[0],):
        raise ValueError(f"shape mismatch: matrix {A.shape}, vector {x.shape}")
    return A.T @ x


def extract_submatrix(A, rows, cols):
    """CSR submatrix A[rows, cols] with strict bounds checking."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    if rows.size and (rows.min() < 0 or rows.max() >= A.shape[0]):
        raise IndexError(f"row indices out of bounds for {A.shape}")
    if cols.size and (cols.min() < 0 or cols.max() >= A.shape[1]):
        raise IndexError(f"column indices out of bounds for {A.shape}")
    sub = A.tocsr()[rows][:, cols].tocsr()
    sub.sort_indices()
    return sub
