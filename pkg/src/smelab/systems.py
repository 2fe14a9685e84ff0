"""Benchmark system simulators, lifting, isotropy rescaling, excitation checks.

Both simulators produce regression data in the stacked form

    X = theta_true @ Z + W,

with X holding successor states (one column per step), Z the lifted
regressors and W the injected noise.  The identity holds exactly for the
stored matrices, which the tests rely on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .numerics import check_matrix


@dataclass
class TrajectoryData:
    """Stacked regression matrices assembled from one simulated rollout.

    X : n_x x N successor states (x_1 ... x_N)
    Z : n_z x N lifted states (z_0 ... z_{N-1})
    W : optional n_x x N true noise, retained for oracle checks
    """

    X: np.ndarray
    Z: np.ndarray
    W: np.ndarray | None = None
    N: int = field(init=False)
    n_x: int = field(init=False)
    n_z: int = field(init=False)

    def __post_init__(self):
        self.X = check_matrix(self.X, "X")
        self.Z = check_matrix(self.Z, "Z")
        if self.X.shape[1] != self.Z.shape[1]:
            raise ValueError("X and Z must have the same number of columns")
        if self.W is not None:
            self.W = check_matrix(self.W, "W")
            if self.W.shape != self.X.shape:
                raise ValueError("W must have the same shape as X")
        self.N = self.X.shape[1]
        self.n_x = self.X.shape[0]
        self.n_z = self.Z.shape[0]

    def prefix(self, n: int) -> "TrajectoryData":
        """First n samples of the rollout."""
        if not 1 <= n <= self.N:
            raise ValueError(f"prefix length {n} outside [1, {self.N}]")
        w = None if self.W is None else self.W[:, :n]
        return TrajectoryData(self.X[:, :n], self.Z[:, :n], w)


@dataclass(frozen=True)
class LtiParams:
    """Scalar linear system x_{t+1} = a x_t + b u_t + w_t."""

    a: float = 0.9
    b: float = 1.0

    def theta_true(self) -> np.ndarray:
        return np.array([[self.a, self.b]])


@dataclass(frozen=True)
class PendulumParams:
    """Damped pendulum with angle psi and angular velocity omega.

    psi_{t+1}   = psi_t + omega_t                      (known recursion)
    omega_{t+1} = omega_t - g_over_l*sin(psi_t) - d*omega_t + b*u_t + w_t
    """

    g_over_l: float = 0.1
    d: float = 0.02
    b: float = 1.0

    def theta_true(self) -> np.ndarray:
        return np.array([[-self.g_over_l, 1.0 - self.d, self.b]])


@dataclass(frozen=True)
class PeReport:
    """Eigenvalue extremes of the regressor sample covariance (1/N) Z Z.T."""

    c3_hat: float
    c4_hat: float
    is_pe: bool


PE_THRESHOLD = 1e-8


def simulate_lti(params: LtiParams, inputs, noise, x0: float = 0.0) -> TrajectoryData:
    """Roll out the scalar linear system; z_t = (x_t, u_t)."""
    u = np.asarray(inputs, dtype=float).ravel()
    w = check_matrix(noise, "noise")
    if w.shape[0] != 1 or w.shape[1] != u.size:
        raise ValueError(f"noise must be 1 x {u.size}, got {w.shape}")
    drive = params.b * u + w[0]
    # x[k] = x_{k+1}; lfilter carries the recursion x_{t+1} = a x_t + drive_t
    x_next, _ = lfilter([1.0], [1.0, -params.a], drive, zi=np.array([params.a * x0]))
    states = np.concatenate(([x0], x_next[:-1]))
    Z = np.vstack([states, u])
    return TrajectoryData(X=x_next.reshape(1, -1), Z=Z, W=w.copy())


def lift_pendulum(psi, omega, u) -> np.ndarray:
    """Nonlinear lifting (sin(psi), omega, u); broadcasts over arrays."""
    return np.stack(np.broadcast_arrays(np.sin(psi), np.asarray(omega, dtype=float),
                                        np.asarray(u, dtype=float)))


def pendulum_step(params: PendulumParams, psi, omega, u, w):
    """One step of the pendulum recursion; works on scalars or arrays."""
    omega_next = omega - params.g_over_l * np.sin(psi) - params.d * omega + params.b * u + w
    return psi + omega, omega_next


def simulate_pendulum(params: PendulumParams, inputs, noise,
                      psi0: float = 0.0, omega0: float = 0.0) -> TrajectoryData:
    """Roll out the pendulum; the angular-velocity equation is the estimated one.

    X holds omega_1 ... omega_N (n_x = 1) and Z holds the lifted columns
    (sin(psi_t), omega_t, u_t), so X = (-g/l, 1-d, b) @ Z + W exactly.
    """
    u = np.asarray(inputs, dtype=float).ravel()
    w = check_matrix(noise, "noise")
    n = u.size
    if w.shape[0] != 1 or w.shape[1] != n:
        raise ValueError(f"noise must be 1 x {n}, got {w.shape}")
    Z = np.empty((3, n))
    X = np.empty((1, n))
    psi, omega = float(psi0), float(omega0)
    for t in range(n):
        Z[0, t] = np.sin(psi)
        Z[1, t] = omega
        Z[2, t] = u[t]
        psi, omega = pendulum_step(params, psi, omega, u[t], w[0, t])
        X[0, t] = omega
    return TrajectoryData(X=X, Z=Z, W=w.copy())


def rescale_isotropic(data: TrajectoryData, sigma: float, mode: str = "joint") -> TrajectoryData:
    """Rescale a rollout so the residual noise becomes (closer to) isotropic.

    joint mode divides X and Z (and W when stored) by sigma, leaving the
    generating parameters unchanged; left-multiply mode divides only X (and
    W), which maps the parameters theta to theta/sigma.  Joint mode is the
    scalar-output shortcut and requires n_x = 1.
    """
    if not sigma > 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if mode == "joint":
        if data.n_x != 1:
            raise ValueError("joint rescaling requires n_x = 1")
        w = None if data.W is None else data.W / sigma
        return TrajectoryData(data.X / sigma, data.Z / sigma, w)
    if mode == "left-multiply":
        w = None if data.W is None else data.W / sigma
        return TrajectoryData(data.X / sigma, data.Z.copy(), w)
    raise ValueError(f"unknown rescaling mode {mode!r}")


def check_pe(Z) -> PeReport:
    """Empirical persistency-of-excitation diagnostics for a regressor block."""
    arr = check_matrix(Z, "Z")
    gram = (arr @ arr.T) / arr.shape[1]
    eigs = np.linalg.eigvalsh(0.5 * (gram + gram.T))
    c3 = float(max(eigs[0], 0.0))
    c4 = float(eigs[-1])
    return PeReport(c3_hat=c3, c4_hat=c4, is_pe=c3 > PE_THRESHOLD)
