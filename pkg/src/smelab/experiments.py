"""Seeded Monte Carlo harness: sweeps over noise level, sample count, method.

For every (sigma, trial) pair one trajectory of length max(N_grid) is
simulated from counter-derived random streams; every N in the grid and
every configured method then sees the same data prefix (paired design).
Sets are always built for the nominal unit-variance noise assumption, i.e.
after joint rescaling by 1/sigma_nominal, so sweeping the true sigma probes
what happens when the assumed noise level is wrong.

Trial i draws its input and noise streams from (seed, stream_tag, i), so
any single trial is reproducible in isolation and trials can run
concurrently on disjoint streams.  The engine accumulates the sufficient
statistics (Z Z.T, Z X.T, X X.T) in fixed-size chunks, which keeps memory
flat for sample counts in the millions.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .noise import kappa_delta
from .numerics import chi2_quantile
from .sme import (
    KINDS,
    chi2_set_from_grams,
    is_empty,
    is_member,
    noise_filtered_set_from_grams,
    radius_sq,
    set_volume,
    stochastic_set_from_grams,
)
from .systems import LtiParams, PendulumParams, pendulum_step

SYSTEMS = ("lti", "pendulum")
CSV_HEADER = "method,sigma,N,trial,volume,radius_sq,empty,contains_true,ols_error_sq"

_INPUT_STREAM = 0
_NOISE_STREAM = 1
_CHUNK_BUDGET = 1 << 22  # max elements per (trials x chunk) buffer


@dataclass
class ExperimentConfig:
    """Declarative description of one Monte Carlo sweep (JSON-serializable)."""

    system: str
    sigma_grid: list[float]
    N_grid: list[int]
    trials: int
    delta: float
    sigma_u: float
    seed: int
    methods: tuple[str, ...]
    dof: int | None = None
    sigma_nominal: float | None = None
    kappa: float | None = None
    system_params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.methods = tuple(self.methods)
        self.sigma_grid = [float(s) for s in self.sigma_grid]
        self.N_grid = [int(n) for n in self.N_grid]
        validate_config(self)

    def resolved_sigma_nominal(self) -> float:
        if self.sigma_nominal is not None:
            return float(self.sigma_nominal)
        return 1.0 if self.system == "lti" else 0.01

    def resolved_dof(self) -> int:
        # n_x = 1 for both benchmark systems, so the default is n_z
        if self.dof is not None:
            return self.dof
        return 2 if self.system == "lti" else 3

    def lti_params(self) -> LtiParams:
        return LtiParams(a=self.system_params.get("a", 0.9),
                         b=self.system_params.get("b", 1.0))

    def pendulum_params(self) -> PendulumParams:
        return PendulumParams(g_over_l=self.system_params.get("g_over_l", 0.1),
                              d=self.system_params.get("d", 0.02),
                              b=self.system_params.get("b", 1.0))

    def to_dict(self) -> dict:
        out = {
            "system": self.system,
            "sigma_grid": list(self.sigma_grid),
            "N_grid": list(self.N_grid),
            "trials": self.trials,
            "delta": self.delta,
            "sigma_u": self.sigma_u,
            "seed": self.seed,
            "methods": list(self.methods),
        }
        if self.dof is not None:
            out["dof"] = self.dof
        if self.sigma_nominal is not None:
            out["sigma_nominal"] = self.sigma_nominal
        if self.kappa is not None:
            out["kappa"] = self.kappa
        if self.system_params:
            out["system_params"] = dict(self.system_params)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {"system", "sigma_grid", "N_grid", "trials", "delta", "sigma_u",
                 "seed", "methods", "dof", "sigma_nominal", "kappa", "system_params"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config field(s): {', '.join(sorted(unknown))}")
        base = default_config(d.get("system", "lti")).to_dict()
        base.update(d)
        return cls(system=base["system"], sigma_grid=base["sigma_grid"],
                   N_grid=base["N_grid"], trials=base["trials"], delta=base["delta"],
                   sigma_u=base["sigma_u"], seed=base["seed"], methods=base["methods"],
                   dof=base.get("dof"), sigma_nominal=base.get("sigma_nominal"),
                   kappa=base.get("kappa"), system_params=base.get("system_params", {}))

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def default_config(system: str) -> ExperimentConfig:
    """Benchmark defaults: log-spaced N grid, nominal +-10% noise sweep."""
    if system == "lti":
        return ExperimentConfig(system="lti", sigma_grid=[0.9, 1.0, 1.1],
                                N_grid=[100, 316, 1000, 3162, 10000], trials=1000,
                                delta=0.05, sigma_u=5.0, seed=0,
                                methods=("stochastic-sme", "noise-filtered", "chi2"))
    if system == "pendulum":
        return ExperimentConfig(system="pendulum", sigma_grid=[0.009, 0.01, 0.011],
                                N_grid=[100, 316, 1000, 3162, 10000], trials=1000,
                                delta=0.05, sigma_u=0.05, seed=0,
                                methods=("stochastic-sme", "noise-filtered"))
    raise ValueError(f"unknown system {system!r}")


def validate_config(cfg: ExperimentConfig):
    if cfg.system not in SYSTEMS:
        raise ValueError(f"system must be one of {SYSTEMS}, got {cfg.system!r}")
    if not cfg.sigma_grid or any(s <= 0.0 for s in cfg.sigma_grid):
        raise ValueError("sigma_grid must be a nonempty list of positive values")
    if not cfg.N_grid or any(n < 4 for n in cfg.N_grid):
        raise ValueError("N_grid entries must be >= 4")
    if any(b <= a for a, b in zip(cfg.N_grid, cfg.N_grid[1:])):
        raise ValueError("N_grid must be strictly increasing")
    if cfg.trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0.0 < cfg.delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {cfg.delta}")
    if not cfg.sigma_u > 0.0:
        raise ValueError("sigma_u must be positive")
    if int(cfg.seed) != cfg.seed or cfg.seed < 0:
        raise ValueError("seed must be a nonnegative integer")
    if not cfg.methods:
        raise ValueError("methods must be nonempty")
    for m in cfg.methods:
        if m not in KINDS:
            raise ValueError(f"unknown method {m!r}; choose from {KINDS}")
    if cfg.dof is not None and cfg.dof < 1:
        raise ValueError("dof must be >= 1")
    if cfg.kappa is not None and cfg.kappa < 0.0:
        raise ValueError("kappa override must be nonnegative")
    if cfg.sigma_nominal is not None and not cfg.sigma_nominal > 0.0:
        raise ValueError("sigma_nominal must be positive")


@dataclass(frozen=True)
class MonteCarloRecord:
    """Outcome of one (method, sigma, N, trial) set construction."""

    method: str
    sigma: float
    N: int
    trial: int
    volume: float
    radius_sq: float
    empty: bool
    contains_true: bool
    ols_error_sq: float


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r_squared: float


def run_monte_carlo(config: ExperimentConfig, threads: int | None = None) -> list[MonteCarloRecord]:
    """Run the full sweep; returns records sorted by (method, sigma, N, trial).

    Deterministic for a fixed config regardless of ``threads`` (noise-level
    blocks are independent and merged in a fixed order).
    """
    validate_config(config)
    sigmas = list(config.sigma_grid)
    if threads is None:
        threads = os.cpu_count() or 1
    if threads <= 1 or len(sigmas) == 1:
        blocks = [_run_sigma_block(config, s) for s in sigmas]
    else:
        with ThreadPoolExecutor(max_workers=min(threads, len(sigmas))) as pool:
            blocks = list(pool.map(lambda s: _run_sigma_block(config, s), sigmas))
    records = [rec for block in blocks for rec in block]
    records.sort(key=lambda r: (r.method, r.sigma, r.N, r.trial))
    return records


def _trial_rng(seed: int, stream: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, stream, trial]))


def _chunk_len(trials: int, n_max: int) -> int:
    return max(256, min(n_max, _CHUNK_BUDGET // max(trials, 1)))


def _lti_chunk(params: LtiParams, x_state, U, W):
    drive = params.b * U + W
    zi = (params.a * x_state)[:, None]
    x_next, _ = lfilter([1.0], [1.0, -params.a], drive, axis=1, zi=zi)
    states = np.concatenate([x_state[:, None], x_next[:, :-1]], axis=1)
    Zc = np.stack([states, U], axis=2)
    return Zc, x_next, (x_next[:, -1].copy(),)


def _pendulum_chunk(params: PendulumParams, psi, omega, U, W):
    n_trials, width = U.shape
    Zc = np.empty((n_trials, width, 3))
    Xc = np.empty((n_trials, width))
    for k in range(width):
        Zc[:, k, 0] = np.sin(psi)
        Zc[:, k, 1] = omega
        Zc[:, k, 2] = U[:, k]
        psi, omega = pendulum_step(params, psi, omega, U[:, k], W[:, k])
        Xc[:, k] = omega
    return Zc, Xc, (psi, omega)


def _run_sigma_block(config: ExperimentConfig, sigma: float) -> list[MonteCarloRecord]:
    trials = config.trials
    grid = list(config.N_grid)
    n_max = grid[-1]
    scale = 1.0 / config.resolved_sigma_nominal()
    kappa = config.kappa if config.kappa is not None else kappa_delta(config.delta, 1, 1.0, 0.5)
    c_delta = None
    if "chi2" in config.methods:
        c_delta = chi2_quantile(1.0 - config.delta, config.resolved_dof())

    if config.system == "lti":
        params = config.lti_params()
        n_z = 2
        state = (np.zeros(trials),)
        step_chunk = lambda st, U, W: _lti_chunk(params, st[0], U, W)
    else:
        params = config.pendulum_params()
        n_z = 3
        state = (np.zeros(trials), np.zeros(trials))
        step_chunk = lambda st, U, W: _pendulum_chunk(params, st[0], st[1], U, W)
    theta_star = params.theta_true()

    gens_u = [_trial_rng(config.seed, _INPUT_STREAM, t) for t in range(trials)]
    gens_e = [_trial_rng(config.seed, _NOISE_STREAM, t) for t in range(trials)]

    zz = np.zeros((trials, n_z, n_z))
    zx = np.zeros((trials, n_z))
    xx = np.zeros(trials)

    records: list[MonteCarloRecord] = []
    chunk = _chunk_len(trials, n_max)
    pos, gi = 0, 0
    while pos < n_max:
        nxt = min(pos + chunk, grid[gi])
        width = nxt - pos
        U = np.empty((trials, width))
        E = np.empty((trials, width))
        for t in range(trials):
            U[t] = gens_u[t].standard_normal(width)
            E[t] = gens_e[t].standard_normal(width)
        U *= config.sigma_u
        E *= sigma
        Zc, Xc, state = step_chunk(state, U, E)
        if scale != 1.0:
            Zc *= scale
            Xc *= scale
        zct = Zc.transpose(0, 2, 1)
        zz += zct @ Zc
        zx += (zct @ Xc[:, :, None])[:, :, 0]
        xx += np.einsum("tc,tc->t", Xc, Xc)
        pos = nxt
        if pos == grid[gi]:
            records.extend(_grid_records(config, sigma, pos, zz, zx, xx,
                                         theta_star, kappa, c_delta))
            gi += 1
    return records


def _grid_records(config, sigma, n, zz, zx, xx, theta_star, kappa, c_delta):
    out = []
    for t in range(config.trials):
        zx_t = zx[t].reshape(-1, 1)
        xx_t = np.array([[xx[t]]])
        ols_err = None
        for method in config.methods:
            if method == "stochastic-sme":
                pset = stochastic_set_from_grams(zz[t], zx_t, xx_t, n, kappa)
            elif method == "noise-filtered":
                pset = noise_filtered_set_from_grams(zz[t], zx_t, n, kappa)
            else:
                pset = chi2_set_from_grams(zz[t], zx_t, n, c_delta)
            if ols_err is None:
                ols_err = float(np.sum((pset.center - theta_star) ** 2))
            empty = is_empty(pset)
            out.append(MonteCarloRecord(
                method=method, sigma=sigma, N=n, trial=t,
                volume=0.0 if empty else set_volume(pset),
                radius_sq=0.0 if empty else radius_sq(pset),
                empty=empty,
                contains_true=bool((not empty) and is_member(pset, theta_star)),
                ols_error_sq=ols_err,
            ))
    return out


# ---------------------------------------------------------------------------
# statistics over record lists
# ---------------------------------------------------------------------------

def _select(records, method, sigma, N):
    return [r for r in records if r.method == method and r.sigma == sigma and r.N == N]


def empirical_coverage(records, method, sigma, N) -> float:
    """Fraction of matching records whose set contains the true parameters."""
    sel = _select(records, method, sigma, N)
    if not sel:
        raise ValueError(f"no records match ({method!r}, {sigma}, {N})")
    return sum(r.contains_true for r in sel) / len(sel)


def empty_fraction(records, method, sigma, N) -> float:
    sel = _select(records, method, sigma, N)
    if not sel:
        raise ValueError(f"no records match ({method!r}, {sigma}, {N})")
    return sum(r.empty for r in sel) / len(sel)


def mean_volume(records, method, sigma, N) -> float | None:
    """Mean volume over non-empty matching records (None if all empty)."""
    sel = _select(records, method, sigma, N)
    if not sel:
        raise ValueError(f"no records match ({method!r}, {sigma}, {N})")
    vols = [r.volume for r in sel if not r.empty]
    if not vols:
        return None
    return sum(vols) / len(vols)


def fit_loglog_slope(N_values, mean_volumes) -> SlopeFit:
    """Least-squares line through (log N, log volume)."""
    ns = np.asarray(N_values, dtype=float)
    vols = np.asarray(mean_volumes, dtype=float)
    if ns.shape != vols.shape or ns.size < 3:
        raise ValueError("need matching N/volume lists of length >= 3")
    if np.any(vols <= 0.0):
        raise ValueError("volumes must be positive (exclude empty-set points)")
    x = np.log(ns)
    y = np.log(vols)
    design = np.column_stack([x, np.ones_like(x)])
    coef, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    fitted = design @ coef
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r_sq = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return SlopeFit(slope=float(coef[0]), intercept=float(coef[1]),
                    r_squared=min(max(r_sq, 0.0), 1.0))


# ---------------------------------------------------------------------------
# CSV / JSON output
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def export_csv(records, path):
    """Write records as CSV: 12 significant digits, booleans as 0/1."""
    try:
        with open(path, "w", newline="") as fh:
            fh.write(CSV_HEADER + "\n")
            for r in records:
                fh.write(",".join((
                    r.method, _fmt(r.sigma), str(r.N), str(r.trial),
                    _fmt(r.volume), _fmt(r.radius_sq),
                    "1" if r.empty else "0",
                    "1" if r.contains_true else "0",
                    _fmt(r.ols_error_sq),
                )) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write records to {path}: {exc}") from exc


def load_records_csv(path) -> list[MonteCarloRecord]:
    try:
        with open(path) as fh:
            lines = [ln.rstrip("\n") for ln in fh]
    except OSError as exc:
        raise OSError(f"cannot read records from {path}: {exc}") from exc
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"{path}: expected header {CSV_HEADER!r}")
    records = []
    for ln in lines[1:]:
        if not ln:
            continue
        f = ln.split(",")
        if len(f) != 9:
            raise ValueError(f"{path}: malformed row {ln!r}")
        records.append(MonteCarloRecord(
            method=f[0], sigma=float(f[1]), N=int(f[2]), trial=int(f[3]),
            volume=float(f[4]), radius_sq=float(f[5]),
            empty=f[6] == "1", contains_true=f[7] == "1",
            ols_error_sq=float(f[8])))
    return records


def summarize(records) -> dict:
    """Aggregate per (method, sigma, N) plus per-series log-log slope fits."""
    keys = sorted({(r.method, r.sigma, r.N) for r in records})
    groups = []
    for method, sigma, n in keys:
        sel = _select(records, method, sigma, n)
        vols = [r.volume for r in sel if not r.empty]
        rads = [r.radius_sq for r in sel if not r.empty]
        groups.append({
            "method": method, "sigma": sigma, "N": n, "records": len(sel),
            "empty_fraction": sum(r.empty for r in sel) / len(sel),
            "coverage": sum(r.contains_true for r in sel) / len(sel),
            "mean_volume": sum(vols) / len(vols) if vols else None,
            "median_radius_sq": float(np.median(rads)) if rads else None,
            "median_ols_error_sq": float(np.median([r.ols_error_sq for r in sel])),
        })
    slopes = []
    for method, sigma in sorted({(g["method"], g["sigma"]) for g in groups}):
        pts = [(g["N"], g["mean_volume"]) for g in groups
               if g["method"] == method and g["sigma"] == sigma
               and g["mean_volume"] is not None and g["mean_volume"] > 0.0]
        entry = {"method": method, "sigma": sigma, "points": len(pts)}
        if len(pts) >= 3:
            fit = fit_loglog_slope([p[0] for p in pts], [p[1] for p in pts])
            entry.update(slope=fit.slope, intercept=fit.intercept,
                         r_squared=fit.r_squared)
        else:
            entry.update(slope=None, intercept=None, r_squared=None)
        slopes.append(entry)
    return {"groups": groups, "slopes": slopes}


def write_summary(records, path):
    try:
        with open(path, "w") as fh:
            json.dump(summarize(records), fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write summary to {path}: {exc}") from exc
