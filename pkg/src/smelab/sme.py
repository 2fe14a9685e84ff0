"""Set-membership estimation: exact ellipsoidal parameter sets and queries.

All constructed sets share one representation: a matrix ellipsoid

    { theta : (theta - center) @ shape @ (theta - center).T <= radius }

with ``center`` the ordinary-least-squares estimate, ``shape`` an n_z x n_z
PSD matrix and ``radius`` an n_x x n_x symmetric matrix.  An indefinite
radius means the set is empty, which is the built-in signal that the
assumed noise level underestimates the truth.

Three constructions are provided:

* ``build_stochastic_set`` - every parameter consistent with the data and
  the sample-covariance noise bound ``(1/N) W W.T <= epsilon^2 I``.  Its
  radius is ``epsilon^2 I - (1/N) E E.T`` with E the OLS residual; this is
  the memory-friendly form of the exact kernel-basis description (see
  ``kernel_basis_oracle_set``).
* ``build_noise_filtered_set`` - the looser baseline that filters the noise
  through the regressor pseudoinverse and therefore never shrinks to a
  point.
* ``build_chi2_set`` - the classical OLS confidence ellipsoid with a
  chi-squared quantile radius (gaussian noise, linear dynamics).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import (
    check_matrix,
    chi2_quantile,
    ellipsoid_volume,
    is_psd,
    kernel_basis,
    pseudoinverse,
)
from .noise import epsilon
from .systems import PE_THRESHOLD, TrajectoryData

KINDS = ("stochastic-sme", "noise-filtered", "chi2")


class ExcitationError(ValueError):
    """Raised when the regressor block is not persistently exciting."""


@dataclass
class EllipsoidalParamSet:
    """Ellipsoidal parameter set; see the module docstring for semantics."""

    kind: str
    center: np.ndarray
    shape: np.ndarray
    radius: np.ndarray
    N: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown set kind {self.kind!r}")
        self.center = check_matrix(self.center, "center")
        self.shape = _check_symmetric(self.shape, "shape")
        self.radius = _check_symmetric(self.radius, "radius")
        n_x, n_z = self.center.shape
        if self.shape.shape != (n_z, n_z):
            raise ValueError("shape must be n_z x n_z")
        if self.radius.shape != (n_x, n_x):
            raise ValueError("radius must be n_x x n_x")
        self.N = int(self.N)

    @property
    def n_x(self) -> int:
        return self.center.shape[0]

    @property
    def n_z(self) -> int:
        return self.center.shape[1]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "center": self.center.tolist(),
            "shape": self.shape.tolist(),
            "radius": self.radius.tolist(),
            "N": self.N,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EllipsoidalParamSet":
        return cls(kind=d["kind"], center=np.asarray(d["center"], dtype=float),
                   shape=np.asarray(d["shape"], dtype=float),
                   radius=np.asarray(d["radius"], dtype=float), N=int(d["N"]))


@dataclass(frozen=True)
class QmiBlocks:
    """Blocks of the quadratic matrix inequality

        [theta.T; I].T @ Phi @ [theta.T; I] >= 0,
        Phi = [[phi11, phi12], [phi12.T, phi22]].
    """

    phi11: np.ndarray
    phi12: np.ndarray
    phi22: np.ndarray

    def assembled(self) -> np.ndarray:
        top = np.hstack([self.phi11, self.phi12])
        bottom = np.hstack([self.phi12.T, self.phi22])
        full = np.vstack([top, bottom])
        return 0.5 * (full + full.T)

    def evaluate(self, theta) -> np.ndarray:
        """The n_x x n_x matrix [theta.T; I].T Phi [theta.T; I]."""
        th = check_matrix(theta, "theta")
        val = th @ self.phi11 @ th.T + th @ self.phi12 + self.phi12.T @ th.T + self.phi22
        return 0.5 * (val + val.T)

    def contains(self, theta, tol: float) -> bool:
        return is_psd(self.evaluate(theta), tol)


def _check_symmetric(m, name: str) -> np.ndarray:
    arr = check_matrix(m, name)
    if arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square")
    scale = max(1.0, float(np.max(np.abs(arr))))
    if np.max(np.abs(arr - arr.T)) > 1e-10 * scale:
        raise ValueError(f"{name} must be symmetric")
    return 0.5 * (arr + arr.T)


def _psd_tol(radius: np.ndarray) -> float:
    # scale-aware boundary tolerance for membership/emptiness decisions
    top = float(np.linalg.eigvalsh(radius)[-1])
    return 1e-9 * (1.0 + max(top, 0.0))


def _gram_stats(data: TrajectoryData):
    zz = data.Z @ data.Z.T
    zx = data.Z @ data.X.T
    xx = data.X @ data.X.T
    return zz, zx, xx


def _require_pe(zz: np.ndarray, n: int):
    eigs = np.linalg.eigvalsh(0.5 * (zz + zz.T)) / n
    if eigs[0] <= PE_THRESHOLD:
        raise ExcitationError(
            f"regressors are not persistently exciting (min eigenvalue {eigs[0]:.3e})")


def ols_estimate(data: TrajectoryData) -> np.ndarray:
    """Ordinary-least-squares estimate X @ pinv(Z) for full-row-rank Z."""
    zz, zx, _ = _gram_stats(data)
    return _ols_from_grams(zz, zx, data.N)


def _ols_from_grams(zz: np.ndarray, zx: np.ndarray, n: int) -> np.ndarray:
    _require_pe(zz, n)
    return np.linalg.solve(zz, zx).T


def build_stochastic_set(data: TrajectoryData, kappa: float) -> EllipsoidalParamSet:
    """Exact parameter set under the sample-covariance noise bound.

    center = OLS estimate, shape = (1/N) Z Z.T and
    radius = epsilon(N, kappa)^2 I - (1/N) E E.T with E = X - center Z.
    """
    zz, zx, xx = _gram_stats(data)
    return stochastic_set_from_grams(zz, zx, xx, data.N, kappa)


def stochastic_set_from_grams(zz, zx, xx, n: int, kappa: float) -> EllipsoidalParamSet:
    """Same construction from the sufficient statistics (Z Z.T, Z X.T, X X.T)."""
    zz = check_matrix(zz, "zz")
    zx = check_matrix(zx, "zx")
    xx = check_matrix(xx, "xx")
    center = _ols_from_grams(zz, zx, n)
    resid_gram = xx - zx.T @ np.linalg.solve(zz, zx)  # (X - center Z)(X - center Z).T
    eps = epsilon(n, kappa)
    radius = eps * eps * np.eye(center.shape[0]) - resid_gram / n
    return EllipsoidalParamSet(kind="stochastic-sme", center=center,
                               shape=zz / n, radius=0.5 * (radius + radius.T), N=n)


def kernel_basis_oracle_set(data: TrajectoryData, kappa: float) -> EllipsoidalParamSet:
    """Literal kernel-basis construction of the stochastic set (test oracle).

    Materializes an orthonormal basis of the right kernel of Z and computes
    the radius from the component of X outside the row space of Z.  Costs
    O(N^2) memory, so it exists purely as an independent cross-check of
    ``build_stochastic_set``.
    """
    if data.N < data.n_z:
        raise ExcitationError(f"need at least n_z = {data.n_z} samples, got {data.N}")
    zz, _, _ = _gram_stats(data)
    _require_pe(zz, data.N)
    z_perp = kernel_basis(data.Z)
    center = data.X @ pseudoinverse(data.Z)
    eps = epsilon(data.N, kappa)
    radius = eps * eps * np.eye(data.n_x)
    if z_perp.shape[0] > 0:
        theta0 = data.X @ z_perp.T
        radius = radius - theta0 @ (z_perp @ z_perp.T) @ theta0.T / data.N
    return EllipsoidalParamSet(kind="stochastic-sme", center=center,
                               shape=zz / data.N, radius=0.5 * (radius + radius.T),
                               N=data.N)


def build_noise_filtered_set(data: TrajectoryData, kappa: float) -> EllipsoidalParamSet:
    """Baseline set that filters the noise bound through pinv(Z) (n_x = 1).

    Membership means (theta - center).T (theta - center) <= N eps^2
    pinv(Z).T pinv(Z) in the PSD order; for a scalar output the rank-one
    comparison dualizes exactly to the stored quadratic form
    v @ shape @ v.T <= 1 with shape = inv(N eps^2 pinv(Z).T pinv(Z)).
    """
    if data.n_x != 1:
        raise ValueError("noise-filtered set is only defined for n_x = 1")
    zz, zx, _ = _gram_stats(data)
    return noise_filtered_set_from_grams(zz, zx, data.N, kappa)


def noise_filtered_set_from_grams(zz, zx, n: int, kappa: float) -> EllipsoidalParamSet:
    zz = check_matrix(zz, "zz")
    zx = check_matrix(zx, "zx")
    if zx.shape[1] != 1:
        raise ValueError("noise-filtered set is only defined for n_x = 1")
    center = _ols_from_grams(zz, zx, n)
    eps = epsilon(n, kappa)
    # inv(N eps^2 pinv(Z).T pinv(Z)) = Z Z.T / (N eps^2) under full row rank
    shape = zz / (n * eps * eps)
    return EllipsoidalParamSet(kind="noise-filtered", center=center, shape=shape,
                               radius=np.array([[1.0]]), N=n)


def build_chi2_set(data: TrajectoryData, delta: float, dof: int) -> EllipsoidalParamSet:
    """Classical OLS confidence ellipsoid with a chi-squared radius."""
    zz, zx, _ = _gram_stats(data)
    return chi2_set_from_grams(zz, zx, data.N, chi2_quantile(1.0 - delta, dof))


def chi2_set_from_grams(zz, zx, n: int, c_delta: float) -> EllipsoidalParamSet:
    zz = check_matrix(zz, "zz")
    zx = check_matrix(zx, "zx")
    center = _ols_from_grams(zz, zx, n)
    radius = c_delta * np.eye(center.shape[0])
    return EllipsoidalParamSet(kind="chi2", center=center, shape=zz, radius=radius, N=n)


def qmi_blocks(param_set: EllipsoidalParamSet) -> QmiBlocks:
    """Quadratic-matrix-inequality form of an ellipsoidal set.

    phi11 = -shape, phi12 = shape @ center.T and
    phi22 = radius - center @ shape @ center.T; for the stochastic set these
    expand to the raw data blocks (-(1/N) Z Z.T, (1/N) Z X.T,
    eps^2 I - (1/N) X X.T).
    """
    sc = param_set.shape @ param_set.center.T
    phi22 = param_set.radius - param_set.center @ sc
    return QmiBlocks(phi11=-param_set.shape, phi12=sc, phi22=0.5 * (phi22 + phi22.T))


def is_member(param_set: EllipsoidalParamSet, theta, tol: float | None = None) -> bool:
    """True iff radius - (theta - center) shape (theta - center).T is PSD."""
    th = check_matrix(theta, "theta")
    if th.shape != param_set.center.shape:
        raise ValueError(
            f"theta must be {param_set.center.shape}, got {th.shape}")
    if tol is None:
        tol = _psd_tol(param_set.radius)
    diff = th - param_set.center
    gap = param_set.radius - diff @ param_set.shape @ diff.T
    return is_psd(0.5 * (gap + gap.T), tol)


def is_empty(param_set: EllipsoidalParamSet, tol: float | None = None) -> bool:
    """True iff the radius matrix is not PSD (no parameter satisfies the QMI)."""
    if tol is None:
        tol = _psd_tol(param_set.radius)
    return not is_psd(param_set.radius, tol)


def radius_sq(param_set: EllipsoidalParamSet) -> float:
    """Largest squared distance from the center over set members.

    Equals lambda_max(radius) / lambda_min(shape); exact for n_x = 1 and a
    valid upper bound otherwise.  Rejects empty sets.
    """
    if is_empty(param_set):
        raise ValueError("radius_sq is undefined for an empty set")
    r_top = float(np.linalg.eigvalsh(param_set.radius)[-1])
    s_bottom = float(np.linalg.eigvalsh(param_set.shape)[0])
    if s_bottom <= 0.0:
        raise ValueError("shape must be positive definite")
    return max(r_top, 0.0) / s_bottom


def set_volume(param_set: EllipsoidalParamSet) -> float:
    """Volume of the parameter ellipsoid for vector parameters (n_x = 1)."""
    if param_set.n_x != 1:
        raise ValueError("set_volume is only defined for n_x = 1")
    return ellipsoid_volume(param_set.shape, float(param_set.radius[0, 0]))
