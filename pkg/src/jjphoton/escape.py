"""Dark-count rate theory: thermal activation over the washboard barrier,
macroscopic quantum tunnelling (MQT) through it, and switching statistics
under a current ramp.

Rate functions accept scalar or array bias ratios and return matching
shapes. Rates are in Hz, lifetimes in seconds.
"""

from __future__ import annotations

from dataclasses import dataclass
import functools
import math
import warnings

import numpy as np
from scipy import integrate, optimize

from .constants import PHI0_REDUCED, hbar, k_B
from .errors import NoBarrierError, ParameterError
from .junction import JunctionParams

PREFACTOR_MODELS = ("transition-state", "low-damping-correction")
RAMP_CEILING = 1.0 - 1e-9


@dataclass(frozen=True)
class EscapeConfig:
    """Selects the escape-rate model.

    ``dark_rate_override`` replaces the computed rate altogether; it is the
    only way to represent a junction in the phase-diffusion regime, which
    has no closed-form rate here.
    """

    T: float = 0.018
    prefactor_model: str = "transition-state"
    include_mqt: bool = True
    dark_rate_override: float | None = None

    def __post_init__(self):
        if not self.T > 0:
            raise ParameterError("temperature must be positive")
        if self.prefactor_model not in PREFACTOR_MODELS:
            raise ParameterError(f"unknown prefactor model {self.prefactor_model!r}")
        if self.dark_rate_override is not None and self.dark_rate_override < 0:
            raise ParameterError("dark_rate_override must be >= 0")


def _bias_array(i) -> np.ndarray:
    i = np.asarray(i, dtype=float)
    if np.any(i >= 1.0):
        raise NoBarrierError("bias ratio >= 1 leaves no potential well")
    if np.any(i < 0.0):
        raise ParameterError("bias ratio must be >= 0")
    return i


def _out(x: np.ndarray):
    return x if x.ndim else float(x)


def _barrier(params: JunctionParams, i: np.ndarray) -> np.ndarray:
    return 2.0 * params.josephson_energy * (np.sqrt(1.0 - i * i) - i * np.arccos(i))


def _omega_p(params: JunctionParams, i: np.ndarray) -> np.ndarray:
    L0 = PHI0_REDUCED / params.I_c
    return (1.0 - i * i) ** 0.25 / math.sqrt(L0 * params.C)


def _q_at_bias(params: JunctionParams, i: np.ndarray) -> np.ndarray:
    # Q = R_N sqrt(C / L_JJ(I)), with L_JJ(I) = L_JJ(0) / sqrt(1 - i^2)
    L0 = PHI0_REDUCED / params.I_c
    return params.R_N * np.sqrt(params.C / L0) * (1.0 - i * i) ** 0.25


def thermal_escape_rate(
    params: JunctionParams,
    i,
    T: float,
    prefactor_model: str = "transition-state",
    Q: float | None = None,
):
    """Thermal activation rate a_t (omega_p / 2pi) exp(-dU / k_B T).

    Args:
        params: junction parameters.
        i: bias ratio(s) I / I_c, each in [0, 1).
        T: junction temperature (K).
        prefactor_model: ``"transition-state"`` (a_t = 1) or
            ``"low-damping-correction"`` (a_t = min(1, 7.2 dU / (Q k_B T))).
        Q: damping quality factor; defaults to the junction Q at the bias.
    """
    if not T > 0:
        raise ParameterError("temperature must be positive")
    if prefactor_model not in PREFACTOR_MODELS:
        raise ParameterError(f"unknown prefactor model {prefactor_model!r}")
    i = _bias_array(i)
    dU = _barrier(params, i)
    attempt = _omega_p(params, i) / (2.0 * math.pi)
    kT = k_B * T
    if prefactor_model == "transition-state":
        a_t = 1.0
    else:
        q = _q_at_bias(params, i) if Q is None else Q
        a_t = np.minimum(1.0, 7.2 * dU / (q * kT))
    return _out(a_t * attempt * np.exp(-dU / kT))


def _mqt_formula(params: JunctionParams, i: np.ndarray, Q: float | None) -> np.ndarray:
    dU = _barrier(params, i)
    wp = _omega_p(params, i)
    q = _q_at_bias(params, i) if Q is None else Q
    ratio = dU / (hbar * wp)
    return wp / (2.0 * math.pi) * np.sqrt(120.0 * math.pi * 7.2 * ratio) * np.exp(
        -7.2 * ratio * (1.0 + 0.87 / q)
    )


@functools.lru_cache(maxsize=64)
def _mqt_saturation_bias(params: JunctionParams, Q: float | None) -> float:
    """Lowest bias at which the WKB rate reaches the zero-bias attempt
    frequency (1.0 if it never does)."""
    cap = _omega_p(params, np.array(0.0)) / (2.0 * math.pi)
    grid = 1.0 - np.geomspace(1.0, 1e-12, 2000)
    over = _mqt_formula(params, grid, Q) >= cap
    if not over.any():
        return 1.0
    k = int(np.argmax(over))
    if k == 0:
        return 0.0
    return optimize.brentq(
        lambda x: float(_mqt_formula(params, np.array(x), Q)) - cap, grid[k - 1], grid[k], xtol=1e-15
    )


def mqt_rate(params: JunctionParams, i, Q: float | None = None):
    """Macroscopic quantum tunnelling rate (Hz), temperature independent.

    Gamma_q = (omega_p/2pi) sqrt(120 pi * 7.2 dU / (hbar omega_p))
              * exp(-7.2 dU / (hbar omega_p) * (1 + 0.87 / Q)).

    The WKB form is meaningless once the barrier holds less than about one
    level; the rate is therefore capped at the zero-bias attempt frequency
    omega_p0 / 2pi and held there at all biases above the one where the
    formula first reaches it, which keeps the rate monotone in bias.
    """
    i = _bias_array(i)
    cap = _omega_p(params, np.array(0.0)) / (2.0 * math.pi)
    rate = np.minimum(_mqt_formula(params, i, Q), cap)
    i_sat = _mqt_saturation_bias(params, Q)
    return _out(np.where(i >= i_sat, cap, rate))


def total_escape_rate(params: JunctionParams, i, cfg: EscapeConfig):
    """Dark switching rate (Hz) under ``cfg``."""
    i = _bias_array(i)
    if cfg.dark_rate_override is not None:
        return _out(np.full_like(i, cfg.dark_rate_override))
    rate = np.asarray(thermal_escape_rate(params, i, cfg.T, cfg.prefactor_model))
    if cfg.include_mqt:
        rate = rate + np.asarray(mqt_rate(params, i))
    return _out(rate)


def total_lifetime(params: JunctionParams, i, cfg: EscapeConfig):
    """Mean switching time 1 / (Gamma_th + Gamma_q) in seconds."""
    rate = np.asarray(total_escape_rate(params, i, cfg))
    with np.errstate(divide="ignore"):
        return _out(1.0 / rate)


def crossover_temperature(params: JunctionParams, i) -> float:
    """Thermal/quantum crossover temperature hbar omega_p / (2 pi k_B)."""
    i = _bias_array(i)
    return _out(hbar * _omega_p(params, i) / (2.0 * math.pi * k_B))


@dataclass
class SwitchingDistribution:
    """Switching-time law under a time-dependent bias.

    ``cdf[k]`` is P(switched by ``times[k]``); ``hazard`` is the integrated
    rate. Switching may not happen within the ramp, so ``cdf[-1]`` can be
    below one.
    """

    times: np.ndarray
    currents: np.ndarray
    hazard: np.ndarray

    @property
    def cdf(self) -> np.ndarray:
        return -np.expm1(-self.hazard)

    def probability(self, t) -> np.ndarray:
        """P(switch by t) by interpolating the integrated hazard."""
        return -np.expm1(-np.interp(t, self.times, self.hazard))

    def quantile(self, q):
        """Switching time at cumulative probability ``q`` (NaN if never reached)."""
        q = np.asarray(q, dtype=float)
        target = -np.log1p(-q)
        out = np.interp(target, self.hazard, self.times, right=np.nan)
        return out if out.ndim else float(out)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Inverse-transform samples; NaN marks no switch within the ramp."""
        return np.asarray(self.quantile(rng.uniform(size=n)))


def _piecewise_linear(ramp_times: np.ndarray, ramp_currents: np.ndarray):
    def current(t):
        return np.interp(t, ramp_times, ramp_currents)

    return current


def ramp_switching_distribution(
    params: JunctionParams,
    ramp_times,
    ramp_currents,
    cfg: EscapeConfig,
    n_points: int = 2001,
    rtol: float = 1e-11,
) -> SwitchingDistribution:
    """Switching probability under a piecewise-linear bias ramp.

    P(switch by t) = 1 - exp(-int_0^t Gamma(I(t')) dt'); the integral is
    evaluated by adaptive Gauss-Kronrod quadrature between successive
    output times (ramp breakpoints always included).

    Args:
        params: junction parameters.
        ramp_times: increasing breakpoint times (s), starting at the origin
            of the distribution.
        ramp_currents: bias current (A) at each breakpoint.
        cfg: escape model; ``cfg.T`` is the junction temperature.
        n_points: number of output times spread over the ramp.
        rtol: relative tolerance for each quadrature panel.
    """
    t_knots = np.asarray(ramp_times, dtype=float)
    i_knots = np.asarray(ramp_currents, dtype=float) / params.I_c
    if t_knots.ndim != 1 or t_knots.shape != i_knots.shape or len(t_knots) < 2:
        raise ParameterError("ramp needs matching 1-D times and currents (>= 2 points)")
    if np.any(np.diff(t_knots) <= 0):
        raise ParameterError("ramp times must be strictly increasing")
    if np.any(i_knots < 0):
        raise ParameterError("ramp currents must be >= 0")
    if np.any(i_knots >= 1.0):
        warnings.warn(
            "ramp reaches the critical current; truncating bias at 1 - 1e-9",
            RuntimeWarning,
            stacklevel=2,
        )
        i_knots = np.minimum(i_knots, RAMP_CEILING)

    times = np.union1d(np.linspace(t_knots[0], t_knots[-1], n_points), t_knots)
    bias = _piecewise_linear(t_knots, i_knots)

    def rate(t):
        return float(total_escape_rate(params, bias(t), cfg))

    hazard = np.zeros_like(times)
    for k in range(1, len(times)):
        seg, _ = integrate.quad(
            rate, times[k - 1], times[k], epsabs=0.0, epsrel=rtol, limit=200
        )
        hazard[k] = hazard[k - 1] + seg
    return SwitchingDistribution(times, bias(times) * params.I_c, hazard)
