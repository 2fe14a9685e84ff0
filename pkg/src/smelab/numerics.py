"""Dense linear-algebra and special-function primitives.

Matrices are plain 2-D float64 numpy arrays.  Every public operation
validates its input at the boundary (finite entries, strictly positive
dimensions) so downstream modules can assume well-formed data.

Rank decisions use the scale-aware singular-value cutoff
``max(rows, cols) * machine_eps * sigma_max``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammainc

_EPS = float(np.finfo(np.float64).eps)


def check_matrix(m, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float array and enforce the basic matrix contract."""
    arr = np.asarray(m, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got {arr.ndim}-D")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must have strictly positive dimensions, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def _rank_cutoff(singular_values: np.ndarray, shape: tuple[int, int]) -> float:
    top = float(singular_values[0]) if singular_values.size else 0.0
    return max(shape) * _EPS * top


def pseudoinverse(m, return_rank: bool = False):
    """Moore-Penrose inverse computed from the SVD.

    Satisfies the four Moore-Penrose identities to ~1e-9 relative accuracy;
    for a full-row-rank M it coincides with ``M.T @ inv(M @ M.T)``.

    Parameters
    ----------
    m : array_like
        Any nonempty matrix with finite entries.
    return_rank : bool
        Also return the effective rank used for the inversion.
    """
    arr = check_matrix(m, "m")
    u, s, vt = np.linalg.svd(arr, full_matrices=False)
    cutoff = _rank_cutoff(s, arr.shape)
    rank = int(np.count_nonzero(s > cutoff))
    inv = np.zeros_like(s)
    inv[:rank] = 1.0 / s[:rank]
    pinv = (vt.T * inv) @ u.T
    if return_rank:
        return pinv, rank
    return pinv


def kernel_basis(m) -> np.ndarray:
    """Orthonormal rows spanning the right kernel of ``m``.

    The returned basis B satisfies ``m @ B.T == 0`` and ``B @ B.T == I``
    (both to ~1e-10).  Row count is ``cols - rank(m)``; a full-column-rank
    input yields an empty (0 x cols) basis.  Output is deterministic for a
    fixed input: LAPACK's SVD ordering plus the sign convention that the
    first nonzero entry of each row is positive.
    """
    arr = check_matrix(m, "m")
    _, s, vt = np.linalg.svd(arr, full_matrices=True)
    cutoff = _rank_cutoff(s, arr.shape)
    rank = int(np.count_nonzero(s > cutoff))
    basis = vt[rank:].copy()
    for row in basis:
        idx = np.flatnonzero(np.abs(row) > 1e-12)
        if idx.size and row[idx[0]] < 0.0:
            row *= -1.0
    return basis


def is_psd(s, tol: float) -> bool:
    """True iff the symmetrized matrix has minimum eigenvalue >= -tol.

    The input is symmetrized as (S + S.T)/2 first, which guards against
    asymmetry accumulated through matrix products.
    """
    arr = check_matrix(s, "s")
    if arr.shape[0] != arr.shape[1]:
        raise ValueError(f"s must be square, got {arr.shape}")
    sym = 0.5 * (arr + arr.T)
    return bool(np.linalg.eigvalsh(sym)[0] >= -tol)


def _chi2_cdf(x: float, dof: int) -> float:
    # regularized lower incomplete gamma P(dof/2, x/2)
    if x <= 0.0:
        return 0.0
    return float(gammainc(0.5 * dof, 0.5 * x))


def _chi2_pdf(x: float, dof: int) -> float:
    if x <= 0.0:
        return 0.0
    k = 0.5 * dof
    return math.exp((k - 1.0) * math.log(x) - 0.5 * x - k * math.log(2.0) - math.lgamma(k))


def chi2_quantile(p: float, dof: int) -> float:
    """Inverse chi-squared CDF via bisection plus Newton polish.

    Inverts the regularized lower incomplete gamma function; the returned
    q satisfies ``CDF(q) == p`` to well under 1e-9.

    Parameters
    ----------
    p : float
        Probability level in [0, 1).
    dof : int
        Degrees of freedom, >= 1.
    """
    if not 0.0 <= p < 1.0:
        raise ValueError(f"p must lie in [0, 1), got {p}")
    if int(dof) != dof or dof < 1:
        raise ValueError(f"dof must be a positive integer, got {dof}")
    dof = int(dof)
    if p == 0.0:
        return 0.0

    # bracket the root, then bisect
    lo, hi = 0.0, float(dof)
    while _chi2_cdf(hi, dof) < p:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if _chi2_cdf(mid, dof) < p:
            lo = mid
        else:
            hi = mid
    q = 0.5 * (lo + hi)

    # Newton steps sharpen the last digits when the density is informative
    for _ in range(4):
        f = _chi2_cdf(q, dof) - p
        d = _chi2_pdf(q, dof)
        if d <= 0.0:
            break
        step = f / d
        q_new = q - step
        if q_new <= lo or q_new >= hi:
            break
        q = q_new
        if abs(step) <= 1e-14 * max(q, 1.0):
            break
    return q


def ellipsoid_volume(shape, radius: float) -> float:
    """Volume of the ellipsoid { v : v @ shape @ v.T <= radius }.

    Equals ``V_n * radius**(n/2) * det(shape)**-0.5`` with V_n the unit-ball
    volume in dimension n.  A nonpositive radius gives volume 0; a
    non-positive-definite shape is rejected.
    """
    arr = check_matrix(shape, "shape")
    if arr.shape[0] != arr.shape[1]:
        raise ValueError(f"shape must be square, got {arr.shape}")
    sym = 0.5 * (arr + arr.T)
    try:
        np.linalg.cholesky(sym)
    except np.linalg.LinAlgError:
        raise ValueError("shape must be positive definite") from None
    if radius <= 0.0:
        return 0.0
    n = arr.shape[0]
    unit_ball = math.pi ** (0.5 * n) / math.gamma(0.5 * n + 1.0)
    _, logdet = np.linalg.slogdet(sym)
    return unit_ball * radius ** (0.5 * n) * math.exp(-0.5 * logdet)
