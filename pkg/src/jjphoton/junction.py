"""Deterministic junction physics: washboard potential, inductance, damping,
and the current pulse produced by an absorbed photon.

All quantities are SI. Functions are pure; ``JunctionParams`` carries the
device identity.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
import math

import numpy as np

from .constants import PHI0_REDUCED, e as E_CHARGE, h
from .errors import NoBarrierError, ParameterError

# Area 2.5 x 0.7 um^2 at roughly 45 fF/um^2.
DEFAULT_CAPACITANCE = 80e-15
DEFAULT_GAP_VOLTAGE = 0.4e-3


@dataclass(frozen=True)
class JunctionParams:
    """Physical parameters of the detector junction.

    Args:
        I_c: critical current (A).
        C: junction capacitance (F).
        R_N: normal-state resistance (Ohm).
        R_qp: subgap (quasiparticle) resistance (Ohm); defaults to ``R_N``.
        V_g: gap voltage 2*Delta/e (V).
    """

    I_c: float = 170e-9
    C: float = DEFAULT_CAPACITANCE
    R_N: float = 1480.0
    R_qp: float | None = None
    V_g: float = DEFAULT_GAP_VOLTAGE

    def __post_init__(self):
        if self.R_qp is None:
            object.__setattr__(self, "R_qp", self.R_N)
        for name in ("I_c", "C", "R_N", "V_g"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ParameterError(f"{name} must be positive and finite, got {value!r}")
        if self.R_qp < self.R_N:
            raise ParameterError("R_qp must be >= R_N")

    @property
    def josephson_energy(self) -> float:
        """E_J = (hbar/2e) I_c in joules."""
        return PHI0_REDUCED * self.I_c

    def to_dict(self) -> dict:
        return asdict(self)


def _check_bias(i: float) -> float:
    i = float(i)
    if not 0.0 <= i < 1.0:
        if i >= 1.0:
            raise NoBarrierError(f"bias ratio {i} >= 1 leaves no potential well")
        raise ParameterError(f"bias ratio must be in [0, 1), got {i}")
    return i


def washboard_potential(phase, i):
    """Tilted washboard potential in units of E_J: -(cos(phi) + i*phi)."""
    phase = np.asarray(phase, dtype=float)
    out = -(np.cos(phase) + i * phase)
    return out if out.ndim else float(out)


def well_minimum(i: float) -> float:
    """Phase of the potential minimum, arcsin(i)."""
    return math.asin(_check_bias(i))


def barrier_height_reduced(i: float) -> float:
    """Barrier height in units of E_J: 2(sqrt(1-i^2) - i*arccos(i))."""
    i = _check_bias(i)
    return 2.0 * (math.sqrt(1.0 - i * i) - i * math.acos(i))


def barrier_height(params: JunctionParams, i: float) -> float:
    """Barrier height Delta U (J) of the washboard at bias ratio ``i``."""
    return params.josephson_energy * barrier_height_reduced(i)


def _check_current(params: JunctionParams, I: float) -> float:
    I = float(I)
    if abs(I) >= params.I_c:
        raise NoBarrierError(
            f"|I| = {abs(I):.4g} A >= I_c = {params.I_c:.4g} A: inductance diverges"
        )
    return I


def junction_inductance(params: JunctionParams, I: float) -> float:
    """Josephson inductance L_JJ = (hbar/2e) / sqrt(I_c^2 - I^2) in henry."""
    I = _check_current(params, I)
    return PHI0_REDUCED / math.sqrt(params.I_c**2 - I**2)


def quality_factor(params: JunctionParams, I: float) -> float:
    """Parallel-RLC quality factor Q = R_N sqrt(C / L_JJ)."""
    return params.R_N * math.sqrt(params.C / junction_inductance(params, I))


def plasma_frequency(params: JunctionParams, i: float) -> float:
    """Small-oscillation angular frequency (rad/s) at bias ratio ``i``."""
    i = _check_bias(i)
    L0 = PHI0_REDUCED / params.I_c
    return (1.0 - i * i) ** 0.25 / math.sqrt(L0 * params.C)


def zero_bias_plasma_frequency(params: JunctionParams) -> float:
    return plasma_frequency(params, 0.0)


def photon_current_pulse(params: JunctionParams, I: float, f: float) -> float:
    """Current pulse amplitude (A) produced by absorbing one photon of
    frequency ``f`` at bias current ``I``.

    The photon energy splits between the supercurrent energy
    L_JJ dI^2 / 2 and the dissipated part in the ratio Q / 2pi, giving
    dI = sqrt(2 h f / L_JJ / (1 + 2pi/Q)).
    """
    if not f > 0:
        raise ParameterError("photon frequency must be positive")
    L = junction_inductance(params, I)
    Q = quality_factor(params, I)
    return math.sqrt(2.0 * h * f / L / (1.0 + 2.0 * math.pi / Q))


def supercurrent_energy(params: JunctionParams, I: float, delta_I: float) -> float:
    """E_s = L_JJ dI^2 / 2."""
    return 0.5 * junction_inductance(params, I) * delta_I**2


def theoretical_critical_current(gap: float, R_N: float) -> float:
    """Zero-temperature Ambegaokar-Baratoff critical current pi*Delta/(2 e R_N).

    Args:
        gap: superconducting gap Delta in joules.
        R_N: normal resistance in ohm.
    """
    if gap < 0 or R_N <= 0:
        raise ParameterError("gap must be >= 0 and R_N > 0")
    return math.pi * gap / (2.0 * E_CHARGE * R_N)
