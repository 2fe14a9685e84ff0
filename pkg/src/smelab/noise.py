"""Sub-Gaussian noise models and sample-covariance concentration bounds.

The central objects are the concentration constant ``kappa`` and the
inflation factor ``epsilon(N, kappa) = 1 + kappa / sqrt(N)``: with
probability at least 1 - delta the stacked noise matrix W (one column per
sample) satisfies

    sigma_max(W.T) <= sqrt(N) + kappa,
    sigma_min(W.T) >= sqrt(N) - kappa,
    || (1/N) W W.T - I || <= max(eta, eta^2),   eta = kappa / sqrt(N),

provided kappa >= c1*sqrt(n_x) + sqrt(log(2/delta)/c2) with distribution
constants c1, c2.  For standard gaussian noise c1 = 1 and c2 = 1/2; for
other families the constants can be calibrated empirically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import check_matrix

FAMILIES = ("gaussian", "rademacher", "uniform-bounded")

# distribution constants for the unit-variance base draws, where known
_KNOWN_CONSTANTS = {"gaussian": (1.0, 0.5)}


@dataclass
class NoiseModel:
    """Zero-mean i.i.d. noise description.

    Parameters
    ----------
    family : str
        One of ``gaussian``, ``rademacher``, ``uniform-bounded``.  The
        non-gaussian families draw from unit-variance base distributions
        (rademacher +-1; uniform on [-sqrt(3), sqrt(3)]).
    covariance : float or ndarray
        Scalar variance sigma^2, or a full symmetric positive-definite
        matrix applied per column.
    c1, c2 : float or None
        Sub-gaussian concentration constants of the unit-variance base
        distribution; ``None`` means unknown (use ``calibrate_kappa``).
        Gaussian defaults to c1=1, c2=1/2.
    """

    family: str
    covariance: object = 1.0
    c1: float | None = None
    c2: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown noise family {self.family!r}")
        if np.isscalar(self.covariance):
            if not float(self.covariance) > 0.0:
                raise ValueError("covariance must be positive")
            self.covariance = float(self.covariance)
        else:
            cov = check_matrix(self.covariance, "covariance")
            if cov.shape[0] != cov.shape[1]:
                raise ValueError("covariance matrix must be square")
            if np.max(np.abs(cov - cov.T)) > 1e-10:
                raise ValueError("covariance matrix must be symmetric")
            try:
                np.linalg.cholesky(cov)
            except np.linalg.LinAlgError:
                raise ValueError("covariance matrix must be positive definite") from None
            self.covariance = cov
        if self.c1 is None and self.c2 is None and self.family in _KNOWN_CONSTANTS:
            self.c1, self.c2 = _KNOWN_CONSTANTS[self.family]
        for name in ("c1", "c2"):
            val = getattr(self, name)
            if val is not None and not val > 0.0:
                raise ValueError(f"{name} must be positive when given")

    @property
    def sigma(self) -> float:
        """Scalar noise standard deviation (scalar-covariance models only)."""
        if not np.isscalar(self.covariance):
            raise ValueError("sigma is only defined for scalar covariance")
        return math.sqrt(self.covariance)

    def has_constants(self) -> bool:
        return self.c1 is not None and self.c2 is not None

    def to_config(self) -> dict:
        if not np.isscalar(self.covariance):
            raise ValueError("matrix covariance is not JSON-serializable")
        return {"family": self.family, "sigma": self.sigma, "c1": self.c1, "c2": self.c2}

    @classmethod
    def from_config(cls, cfg: dict) -> "NoiseModel":
        sigma = float(cfg.get("sigma", 1.0))
        if not sigma > 0.0:
            raise ValueError("sigma must be positive")
        return cls(
            family=cfg.get("family", "gaussian"),
            covariance=sigma * sigma,
            c1=cfg.get("c1"),
            c2=cfg.get("c2"),
        )


@dataclass(frozen=True)
class NoiseBoundParams:
    """Concentration-bound parameters for one (delta, N) configuration."""

    delta: float
    kappa: float
    N: int
    epsilon: float
    eta: float

    @classmethod
    def from_constants(cls, delta: float, n_x: int, N: int, c1: float, c2: float):
        kappa = kappa_delta(delta, n_x, c1, c2)
        eta = c1 * math.sqrt(n_x / N) + math.sqrt(math.log(2.0 / delta) / c2 / N)
        return cls(delta=delta, kappa=kappa, N=int(N), epsilon=epsilon(N, kappa), eta=eta)

    @classmethod
    def from_kappa(cls, delta: float, kappa: float, N: int):
        if kappa < 0.0:
            raise ValueError("kappa must be nonnegative")
        return cls(delta=delta, kappa=kappa, N=int(N),
                   epsilon=epsilon(N, kappa), eta=kappa / math.sqrt(N))


@dataclass(frozen=True)
class CovarianceBoundReport:
    """Outcome of the singular-value and Gram-deviation tests for one W."""

    sigma_max: float
    sigma_min: float
    upper_ok: bool
    lower_ok: bool
    gram_deviation: float
    gram_ok: bool


def kappa_delta(delta: float, n_x: int, c1: float, c2: float) -> float:
    """Concentration constant c1*sqrt(n_x) + sqrt(log(2/delta)/c2)."""
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if n_x < 1:
        raise ValueError("n_x must be >= 1")
    if not (c1 > 0.0 and c2 > 0.0):
        raise ValueError("c1 and c2 must be positive")
    return c1 * math.sqrt(n_x) + math.sqrt(math.log(2.0 / delta) / c2)


def epsilon(N: int, kappa: float) -> float:
    """Covariance inflation factor 1 + kappa/sqrt(N)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if kappa < 0.0:
        raise ValueError("kappa must be nonnegative")
    return 1.0 + kappa / math.sqrt(N)


def sample_noise(model: NoiseModel, n_x: int, N: int, seed) -> np.ndarray:
    """Draw an n_x x N noise matrix with i.i.d. columns from ``model``.

    Deterministic for a fixed seed (int or sequence of ints).
    """
    if n_x < 1 or N < 1:
        raise ValueError("n_x and N must be >= 1")
    rng = np.random.default_rng(seed)
    if model.family == "gaussian":
        base = rng.standard_normal((n_x, N))
    elif model.family == "rademacher":
        base = 2.0 * rng.integers(0, 2, size=(n_x, N)).astype(float) - 1.0
    elif model.family == "uniform-bounded":
        half = math.sqrt(3.0)
        base = rng.uniform(-half, half, size=(n_x, N))
    else:  # pragma: no cover - NoiseModel rejects unknown families
        raise ValueError(f"unknown noise family {model.family!r}")
    if np.isscalar(model.covariance):
        return math.sqrt(model.covariance) * base
    chol = np.linalg.cholesky(model.covariance)
    return chol @ base


def verify_covariance_bounds(W, kappa: float) -> CovarianceBoundReport:
    """Evaluate the three concentration tests for one noise matrix.

    ``upper_ok``/``lower_ok`` compare the extreme singular values of W.T
    against sqrt(N) +- kappa; ``gram_ok`` compares the spectral deviation of
    (1/N) W W.T from the identity against max(eta, eta^2), eta = kappa/sqrt(N).
    """
    arr = check_matrix(W, "W")
    n = arr.shape[1]
    svals = np.linalg.svd(arr, compute_uv=False)  # singular values of W and W.T agree
    smax = float(svals[0])
    smin = float(svals[-1])
    root_n = math.sqrt(n)
    eta = kappa / root_n
    gram_dev = float(np.max(np.abs(svals**2 / n - 1.0)))
    if arr.shape[0] > n:
        gram_dev = max(gram_dev, 1.0)  # rank-deficient Gram has a unit eigengap
    slack = 1e-12 * root_n  # keeps exact-boundary cases decidable at float precision
    return CovarianceBoundReport(
        sigma_max=smax,
        sigma_min=smin,
        upper_ok=smax <= root_n + kappa + slack,
        lower_ok=smin >= root_n - kappa - slack,
        gram_deviation=gram_dev,
        gram_ok=gram_dev <= max(eta, eta * eta) + 1e-12,
    )


def covariance_bound_holds(W, kappa: float) -> bool:
    """Membership test for the noise-consistency set.

    True iff sigma_max(W.T) <= sqrt(N) * epsilon(N, kappa), i.e. the sample
    covariance satisfies (1/N) W W.T <= epsilon^2 I.  Implemented as one SVD
    instead of an N x N eigenproblem.
    """
    return verify_covariance_bounds(W, kappa).upper_ok


def calibrate_kappa(model: NoiseModel, n_x: int, N: int, delta: float,
                    trials: int, seed) -> float:
    """Empirical replacement for ``kappa_delta`` when c1, c2 are unknown.

    Returns the (1-delta) empirical quantile of sigma_max(W.T) - sqrt(N)
    over ``trials`` fresh draws, using the conservative ceiling-index order
    statistic.  Trial i draws from the stream (seed, i) so any single trial
    is reproducible in isolation.  The result is clamped at 0.
    """
    if trials < 100:
        raise ValueError("trials must be >= 100 for a usable quantile")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    excess = np.empty(trials)
    root_n = math.sqrt(N)
    for i in range(trials):
        w = sample_noise(model, n_x, N, np.random.SeedSequence([_as_seed(seed), i]))
        excess[i] = np.linalg.svd(w, compute_uv=False)[0] - root_n
    excess.sort()
    k = math.ceil((1.0 - delta) * trials)  # 1-based ceiling index
    return max(0.0, float(excess[k - 1]))


def _as_seed(seed) -> int:
    if isinstance(seed, (int, np.integer)):
        return int(seed)
    raise ValueError("seed must be an integer")
