"""Fit of switching rate versus cavity temperature to the thermal photon
rate of a few cavity modes plus a constant dark-count floor.

Mode frequencies and quality factors are fixed; the free parameters are
the per-mode detection efficiencies and the dark rate. Residuals are taken
in log space, weighted by relative errors, and minimized by a bounded,
damped Gauss-Newton (Levenberg-Marquardt) iteration from several starts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import csv
import itertools
import math

import numpy as np

from .constants import h, k_B
from .errors import ParameterError
from .source import CavityMode, mean_occupation

ETA_BOUNDS = (0.0, 1.0)
DARK_BOUNDS = (0.0, 10.0)
_FLOOR = 1e-300


@dataclass(frozen=True)
class RateData:
    """Rate-versus-temperature samples (K, Hz, Hz)."""

    T: np.ndarray
    rate: np.ndarray
    rate_err: np.ndarray

    def __post_init__(self):
        T = np.asarray(self.T, dtype=float)
        rate = np.asarray(self.rate, dtype=float)
        err = np.asarray(self.rate_err, dtype=float)
        if not (T.shape == rate.shape == err.shape) or T.ndim != 1:
            raise ParameterError("T, rate and rate_err must be 1-D arrays of equal length")
        if np.any(T <= 0) or np.any(rate < 0) or np.any(err <= 0):
            raise ParameterError("need T > 0, rate >= 0, rate_err > 0")
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "rate", rate)
        object.__setattr__(self, "rate_err", err)

    def __len__(self):
        return self.T.size

    @classmethod
    def from_csv(cls, path) -> "RateData":
        with open(path, newline="") as fh:
            rows = csv.DictReader(line for line in fh if not line.startswith("#"))
            recs = [(float(r["temp_K"]), float(r["rate_Hz"]), float(r["rate_err_Hz"])) for r in rows]
        if not recs:
            raise ParameterError(f"no rows in {path}")
        T, rate, err = map(np.array, zip(*recs))
        return cls(T, rate, err)


def mode_coefficients(T, modes) -> np.ndarray:
    """Matrix A[k, i] = nbar(f_i, T_k) / tau_i, the rate of mode i per unit
    efficiency."""
    T = np.atleast_1d(np.asarray(T, dtype=float))
    return np.stack([mean_occupation(m.f, T) / m.lifetime for m in modes], axis=1)


def model_rate(T, modes, eta, r_dc: float):
    """r(T) = r_dc + sum_i eta_i nbar(f_i, T) / tau_i."""
    A = mode_coefficients(T, modes)
    out = r_dc + A @ np.asarray(eta, dtype=float)
    return out if np.ndim(T) else float(out[0])


@dataclass
class FitResult:
    eta: np.ndarray
    r_dc: float
    covariance: np.ndarray
    reduced_chi2: float
    residuals: np.ndarray
    iterations: int
    step_norm: float
    converged: bool
    cost: float
    start_index: int
    unidentifiable: list[str] = field(default_factory=list)

    @property
    def params(self) -> np.ndarray:
        return np.append(self.eta, self.r_dc)

    @property
    def param_names(self) -> list[str]:
        return [f"eta_{k + 1}" for k in range(self.eta.size)] + ["r_dc"]

    @property
    def stderr(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def to_dict(self) -> dict:
        return {
            "params": dict(zip(self.param_names, map(float, self.params))),
            "stderr": dict(zip(self.param_names, map(float, self.stderr))),
            "covariance": self.covariance.tolist(),
            "reduced_chi2": float(self.reduced_chi2),
            "residuals": [float(r) for r in self.residuals],
            "convergence": {
                "converged": bool(self.converged),
                "iterations": int(self.iterations),
                "final_step_norm": float(self.step_norm),
                "start_index": int(self.start_index),
            },
            "cost": float(self.cost),
            "unidentifiable": list(self.unidentifiable),
        }


class _Problem:
    def __init__(self, data: RateData, modes):
        self.A = mode_coefficients(data.T, modes)
        self.log_y = np.log(np.maximum(data.rate, _FLOOR))
        self.sigma = data.rate_err / np.maximum(data.rate, _FLOOR)
        self.n_modes = len(modes)

    def model(self, theta):
        return np.maximum(self.A @ theta[:-1] + theta[-1], _FLOOR)

    def residuals(self, theta):
        return (np.log(self.model(theta)) - self.log_y) / self.sigma

    def jacobian(self, theta):
        m = self.model(theta)
        J = np.empty((self.A.shape[0], self.n_modes + 1))
        J[:, :-1] = self.A / m[:, None]
        J[:, -1] = 1.0 / m
        return J / self.sigma[:, None]


def _levenberg_marquardt(problem: _Problem, theta0, lo, hi, max_iter=200, xtol=1e-8):
    """Bounded LM: steps are projected onto the box; parameters pinned at a
    bound with the gradient pointing outward are frozen for the step."""
    theta = np.clip(np.asarray(theta0, dtype=float), lo, hi)
    r = problem.residuals(theta)
    cost = 0.5 * r @ r
    lam = 1e-3
    step_norm = math.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        J = problem.jacobian(theta)
        g = J.T @ r
        free = ~(((theta <= lo) & (g > 0)) | ((theta >= hi) & (g < 0)))
        if not free.any():
            converged = True
            step_norm = 0.0
            break
        Jf = J[:, free]
        JtJ = Jf.T @ Jf
        diag = np.diag(JtJ).copy()
        diag[diag == 0] = 1.0
        accepted = False
        while lam < 1e16:
            try:
                delta = np.linalg.solve(JtJ + lam * np.diag(diag), -g[free])
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = theta.copy()
            trial[free] += delta
            trial = np.clip(trial, lo, hi)
            r_trial = problem.residuals(trial)
            cost_trial = 0.5 * r_trial @ r_trial
            if cost_trial <= cost:
                step = trial - theta
                scale = np.maximum(np.abs(theta), 1e-12)
                step_norm = float(np.max(np.abs(step) / scale))
                theta, r, cost = trial, r_trial, cost_trial
                lam = max(lam / 10.0, 1e-12)
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            # no downhill step at any damping: stationary to machine precision
            converged = True
            step_norm = 0.0
            break
        if step_norm < xtol:
            converged = True
            break
    return theta, r, cost, it, step_norm, converged


def _default_starts(n_modes: int, r0: float):
    grid = (0.01, 0.1, 0.5, 0.9)
    r0 = min(max(r0, 1e-6), DARK_BOUNDS[1])
    for combo in itertools.product(grid, repeat=n_modes):
        yield np.array(list(combo) + [r0])


def fit(
    data: RateData,
    modes,
    eta_bounds=ETA_BOUNDS,
    dark_bounds=DARK_BOUNDS,
    starts=None,
    max_iter: int = 200,
    xtol: float = 1e-8,
) -> FitResult:
    """Fit efficiencies and dark rate to rate-versus-temperature data.

    Args:
        data: measured or simulated rates with 1-sigma errors.
        modes: cavity modes; only ``f`` and ``Q`` are used, ``eta`` is free.
        eta_bounds, dark_bounds: box constraints.
        starts: iterable of initial parameter vectors
            ``[eta_1, ..., eta_n, r_dc]``; defaults to a coarse efficiency
            grid with the dark rate started at the lowest-temperature rate.
        max_iter: iteration cap per start.
        xtol: relative step size for convergence.

    The best start is the one with the lowest cost; ties go to the lowest
    start index. The covariance is (J^T J)^-1 at the solution, with J the
    error-weighted Jacobian of the log residuals.
    """
    modes = list(modes)
    n_par = len(modes) + 1
    if len(data) < n_par + 1:
        raise ParameterError(f"need at least {n_par + 1} data points")
    problem = _Problem(data, modes)
    lo = np.array([eta_bounds[0]] * len(modes) + [dark_bounds[0]], dtype=float)
    hi = np.array([eta_bounds[1]] * len(modes) + [dark_bounds[1]], dtype=float)
    if starts is None:
        r0 = float(data.rate[np.argmin(data.T)])
        starts = _default_starts(len(modes), r0)

    best = None
    for k, theta0 in enumerate(starts):
        out = _levenberg_marquardt(problem, theta0, lo, hi, max_iter, xtol)
        if best is None or out[2] < best[1][2]:
            best = (k, out)
    k_best, (theta, r, cost, it, step_norm, converged) = best

    J = problem.jacobian(theta)
    JtJ = J.T @ J
    cov = np.linalg.pinv(JtJ, hermitian=True)
    cov = 0.5 * (cov + cov.T)
    dof = max(len(data) - n_par, 1)

    names = [f"eta_{k + 1}" for k in range(len(modes))] + ["r_dc"]
    span = hi - lo
    col_norm = np.linalg.norm(J, axis=0)
    sd = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    flagged = [
        name
        for name, cn, s, w in zip(names, col_norm, sd, span)
        if cn * w < 1.0 or s > 0.5 * w
    ]
    return FitResult(
        eta=theta[:-1].copy(),
        r_dc=float(theta[-1]),
        covariance=cov,
        reduced_chi2=float(2.0 * cost / dof),
        residuals=r * problem.sigma,
        iterations=it,
        step_norm=step_norm,
        converged=converged,
        cost=float(cost),
        start_index=k_best,
        unidentifiable=flagged,
    )


def _log_mode_rate(mode: CavityMode, T: float) -> float:
    x = h * mode.f / (k_B * T)
    return math.log(mode.eta / mode.lifetime) - x - math.log1p(-math.exp(-x))


def contribution_crossover(mode_a: CavityMode, mode_b: CavityMode,
                           T_lo: float = 1e-3, T_hi: float = 1.0,
                           tol: float = 1e-5) -> float:
    """Temperature (K) at which two modes contribute equal detected rates.

    Bracketing bisection on log r_a(T) - log r_b(T) over [T_lo, T_hi].
    """
    if mode_a.eta <= 0 or mode_b.eta <= 0:
        raise ParameterError("both modes need positive efficiency")
    if (mode_a.f, mode_a.Q, mode_a.eta) == (mode_b.f, mode_b.Q, mode_b.eta):
        raise ParameterError("degenerate: identical modes are equal at every temperature")

    def g(T):
        return _log_mode_rate(mode_a, T) - _log_mode_rate(mode_b, T)

    a, b = T_lo, T_hi
    ga, gb = g(a), g(b)
    if ga == 0.0:
        return a
    if ga * gb > 0:
        raise ParameterError(f"no crossing between {T_lo} K and {T_hi} K")
    while b - a > tol * 1e-3:
        mid = 0.5 * (a + b)
        gm = g(mid)
        if gm == 0.0:
            return mid
        if ga * gm < 0:
            b = mid
        else:
            a, ga = mid, gm
    return 0.5 * (a + b)
