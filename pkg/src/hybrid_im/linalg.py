"""Dense linear-algebra kernels: damped normal equations, pseudo-inverse, spectra, LU."""

import warnings

import numpy as np
import scipy.linalg as sla

from .errors import DimensionMismatch, NonSquare, SingularSystem


def as_matrix(a, name="matrix") -> np.ndarray:
    """Return `a` as a finite 2-D float array."""
    m = np.atleast_2d(np.asarray(a, dtype=float))
    if m.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def solve_damped_normal(J, F, lam: float) -> np.ndarray:
    """Solve (J^T J + lam I) d = -J^T F.

    Cholesky on the damped normal matrix; if that fails, QR on the stacked
    system [J; sqrt(lam) I] d = [-F; 0]. Raises SingularSystem when both fail.
    """
    J = np.asarray(J, dtype=float)
    F = np.asarray(F, dtype=float)
    if J.ndim != 2 or F.shape != (J.shape[0],):
        raise DimensionMismatch(f"J {J.shape} and F {F.shape} do not match")
    if lam < 0:
        raise ValueError("damping must be non-negative")
    return solve_damped_from_normal(J.T @ J, J.T @ F, lam, J)


def solve_damped_from_normal(JtJ, JtF, lam: float, J=None) -> np.ndarray:
    """Same as solve_damped_normal with a precomputed J^T J and J^T F.

    `J` is only needed for the orthogonal fallback.
    """
    eta = JtJ.shape[0]
    if not np.any(JtF):
        return np.zeros(eta)
    K = JtJ + lam * np.eye(eta)
    try:
        c = sla.cho_factor(K, lower=False, check_finite=True)
        d = sla.cho_solve(c, -JtF)
        if np.all(np.isfinite(d)):
            return d
    except (np.linalg.LinAlgError, ValueError):
        pass
    if J is None:
        raise SingularSystem("damped normal matrix is not positive definite")
    return _stacked_qr(J, JtF, lam)


def _stacked_qr(J, JtF, lam):
    zeta, eta = J.shape
    if not (np.all(np.isfinite(J)) and np.all(np.isfinite(JtF))):
        raise SingularSystem("non-finite entries in the damped system")
    S = np.vstack([J, np.sqrt(lam) * np.eye(eta)])
    Q, R = np.linalg.qr(S)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag.min() <= eta * np.finfo(float).eps * max(diag.max(), 1.0):
        raise SingularSystem("damped system is rank deficient")
    # R^T R d = -J^T F
    y = sla.solve_triangular(R, -JtF, trans="T")
    return sla.solve_triangular(R, y)


def pinv_solve(V, y) -> np.ndarray:
    """Minimum-norm least-squares solution V^+ y (SVD based)."""
    V = as_matrix(V, "V")
    y = np.asarray(y, dtype=float)
    if y.shape != (V.shape[0],):
        raise DimensionMismatch(f"target length {y.shape} != {V.shape[0]} rows")
    return np.linalg.pinv(V) @ y


def eigvals(A) -> np.ndarray:
    A = as_matrix(A, "A")
    if A.shape[0] != A.shape[1]:
        raise NonSquare(f"matrix of shape {A.shape} is not square")
    return np.linalg.eigvals(A).astype(complex)


def lu_solve_checked(K, rhs, pivot_tol: float = 1e-12):
    """Partial-pivot LU solve. Returns None when a pivot falls below `pivot_tol`
    (relative to the largest entry of K)."""
    K = np.asarray(K, dtype=float)
    scale = max(np.abs(K).max(), 1.0) if K.size else 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(K, check_finite=True)
    if np.abs(np.diag(lu)).min() < pivot_tol * scale:
        return None
    return sla.lu_solve((lu, piv), rhs)
