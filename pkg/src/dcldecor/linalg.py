"""Dense symmetric/SPD linear-algebra primitives shared by all solvers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

# Cholesky pivots at or below this are treated as numerically non-SPD.
SPD_PIVOT_TOL = 1e-12

# Degree-13 Pade coefficients b_0..b_13 for the matrix exponential.
_PADE13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
)
# 1-norm threshold theta_13 below which the degree-13 approximant is accurate
# to double precision without scaling.
_PADE13_THETA = 5.371920351148152


class NotSpd(Exception):
    """A matrix required to be SPD has a non-positive (or tiny) pivot."""

    def __init__(self, msg="matrix is not positive definite", min_eigenvalue=None):
        if min_eigenvalue is not None:
            msg = f"{msg} (min eigenvalue {min_eigenvalue:.6e})"
        super().__init__(msg)
        self.min_eigenvalue = min_eigenvalue


@dataclass(frozen=True)
class SpdCheckResult:
    is_spd: bool
    min_eigenvalue: float


def symmetrize(m):
    """0.5 * (M + M^T)."""
    m = np.asarray(m, dtype=float)
    return 0.5 * (m + m.T)


def is_symmetric(m, tol=0.0):
    m = np.asarray(m, dtype=float)
    return bool(np.all(np.abs(m - m.T) <= tol))


def spd_check(m) -> SpdCheckResult:
    """Eigenvalue-based SPD check; is_spd == (min eigenvalue > 0)."""
    ev = np.linalg.eigvalsh(symmetrize(m))
    lo = float(ev[0])
    return SpdCheckResult(is_spd=lo > 0.0, min_eigenvalue=lo)


def cholesky_spd(m) -> np.ndarray:
    """Lower-triangular factor L with L @ L.T == m.

    Raises NotSpd when the factorization fails or any pivot (squared diagonal
    of L) is at or below SPD_PIVOT_TOL, which separates genuine indefiniteness
    from round-off at the matrix sizes this library targets.
    """
    a = np.asarray(m, dtype=float)
    try:
        lower = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        lo = float(np.linalg.eigvalsh(symmetrize(a))[0])
        raise NotSpd(min_eigenvalue=lo) from None
    pivots = np.diagonal(lower) ** 2
    if pivots.size and float(pivots.min()) <= SPD_PIVOT_TOL:
        lo = float(np.linalg.eigvalsh(symmetrize(a))[0])
        raise NotSpd("matrix is numerically singular", min_eigenvalue=lo)
    return lower


def inv_spd(m) -> np.ndarray:
    """Inverse of an SPD matrix via its Cholesky factor; result symmetric."""
    lower = cholesky_spd(m)
    p = lower.shape[0]
    if p == 0:
        return np.zeros((0, 0))
    eye = np.eye(p)
    y = solve_triangular(lower, eye, lower=True)
    inv = solve_triangular(lower, y, lower=True, trans="T")
    return symmetrize(inv)


def solve_spd(m, b) -> np.ndarray:
    """Solve m @ x = b for SPD m via Cholesky."""
    lower = cholesky_spd(m)
    y = solve_triangular(lower, np.asarray(b, dtype=float), lower=True)
    return solve_triangular(lower, y, lower=True, trans="T")


def eig_sym(m):
    """Eigenvalues (descending) and matching orthonormal eigenvectors."""
    w, v = np.linalg.eigh(symmetrize(m))
    return w[::-1].copy(), v[:, ::-1].copy()


def psd_project(m) -> np.ndarray:
    """Frobenius-nearest PSD matrix: clip negative eigenvalues to zero."""
    a = symmetrize(m)
    w, v = np.linalg.eigh(a)
    if w.size == 0 or w[0] >= 0.0:
        return a
    w = np.maximum(w, 0.0)
    return symmetrize((v * w) @ v.T)


def expm(a) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring with the degree-13 Pade approximant.

    The input is scaled by 2**-s with s = max(0, ceil(log2(||A||_1 / theta_13)))
    so the scaled 1-norm is at most theta_13 ~= 5.372; the [13/13] Pade
    approximant is evaluated there and the result squared s times.
    """
    a = np.asarray(a, dtype=float)
    p = a.shape[0]
    if p == 0:
        return np.zeros((0, 0))
    norm1 = float(np.abs(a).sum(axis=0).max())
    s = 0
    if norm1 > _PADE13_THETA:
        s = int(np.ceil(np.log2(norm1 / _PADE13_THETA)))
    a_scaled = a / (2.0 ** s)

    b = _PADE13
    eye = np.eye(p)
    a2 = a_scaled @ a_scaled
    a4 = a2 @ a2
    a6 = a4 @ a2
    u = a_scaled @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
                    + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * eye)
    v = (a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
         + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * eye)
    r = np.linalg.solve(v - u, v + u)
    for _ in range(s):
        r = r @ r
    return r


def acyclicity(b):
    """Smooth acyclicity surrogate h(B) = tr(exp(B * B)) - p and its gradient.

    h is zero (to round-off) exactly when the support of B is acyclic; the
    gradient is exp(B * B)^T * 2B.
    """
    b = np.asarray(b, dtype=float)
    p = b.shape[0]
    e = expm(b * b)
    h = float(np.trace(e)) - p
    grad = e.T * (2.0 * b)
    return max(h, 0.0), grad


def soft_threshold(m, t, off_diagonal_only=False) -> np.ndarray:
    """Elementwise x -> sign(x) * max(|x| - t, 0); diagonal optionally untouched."""
    if t < 0:
        raise ValueError("threshold must be nonnegative")
    m = np.asarray(m, dtype=float)
    out = np.sign(m) * np.maximum(np.abs(m) - t, 0.0)
    if off_diagonal_only:
        np.fill_diagonal(out, np.diagonal(m))
    return out


def hard_threshold(m, t) -> np.ndarray:
    """Zero entries with |x| < t (entries at exactly t survive)."""
    m = np.asarray(m, dtype=float)
    return np.where(np.abs(m) >= t, m, 0.0)
