"""Photon-assisted tunnelling (PAT) steps and cavity spectroscopy.

Forward model: the Tien-Gordon sum
    I(V) = sum_n J_n(alpha)^2 I_dark(V + n h f / e),  alpha = e V_ac / (h f),
applied to a smoothed quasiparticle branch. Inverse pipeline: calibrate step
current against drive power with an exponential fit, convert step currents
measured across a frequency sweep into power, and fit a Lorentzian to
recover the cavity centre frequency and Q.

Drive power in dB is 20 log10(alpha / alpha_ref).
"""

from __future__ import annotations

from dataclasses import dataclass
import csv
import io
import math
from typing import Sequence

import numpy as np
from scipy import optimize
from scipy.special import jv

from .constants import e as E_CHARGE, h
from .errors import ParameterError
from .events import format_float
from .source import cavity_s21


class CalibrationRangeError(ParameterError):
    """Value outside the range covered by the calibration curve."""


@dataclass(frozen=True)
class IvCurve:
    voltage: np.ndarray
    current: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.voltage, dtype=float).reshape(-1)
        c = np.asarray(self.current, dtype=float).reshape(-1)
        if v.shape != c.shape:
            raise ParameterError("voltage and current must have equal length")
        if v.size < 2 or np.any(np.diff(v) <= 0):
            raise ParameterError("voltage grid must be strictly increasing")
        object.__setattr__(self, "voltage", v)
        object.__setattr__(self, "current", c)

    def __call__(self, V):
        V = np.asarray(V, dtype=float)
        if np.any(V < self.voltage[0]) or np.any(V > self.voltage[-1]):
            raise ParameterError("voltage outside IV curve support")
        return np.interp(V, self.voltage, self.current)

    @property
    def support(self) -> tuple[float, float]:
        return float(self.voltage[0]), float(self.voltage[-1])

    def to_csv(self, comment: str | None = None) -> str:
        buf = io.StringIO()
        if comment:
            buf.write(f"# {comment}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["voltage_V", "current_A"])
        for v, c in zip(self.voltage, self.current):
            w.writerow([format_float(v), format_float(c)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, path) -> "IvCurve":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
        return cls([float(r["voltage_V"]) for r in rows], [float(r["current_A"]) for r in rows])


@dataclass(frozen=True)
class DarkIvModel:
    """Smoothed quasiparticle branch of a tunnel junction.

    I(V) = V / R_sg below the gap voltage 2 Delta / e, blending into V / R_N
    above it through a logistic step of width ``w``; odd in V.

    Args:
        gap: Delta in joules.
        R_N: normal resistance (Ohm).
        R_sg: subgap resistance (Ohm), >= R_N.
        w: transition width (V).
    """

    gap: float = 0.2e-3 * E_CHARGE
    R_N: float = 1480.0
    R_sg: float = 148_000.0
    w: float = 0.5e-6

    def __post_init__(self):
        if not self.gap > 0 or not self.R_N > 0 or not self.w > 0:
            raise ParameterError("gap, R_N and w must be positive")
        if self.R_sg < self.R_N:
            raise ParameterError("R_sg must be >= R_N")

    @property
    def gap_voltage(self) -> float:
        return 2.0 * self.gap / E_CHARGE

    def __call__(self, V):
        V = np.asarray(V, dtype=float)
        z = (np.abs(V) - self.gap_voltage) / self.w
        s = 0.5 * (1.0 + np.tanh(0.5 * z))  # logistic, overflow-safe
        out = V / self.R_sg + (V / self.R_N - V / self.R_sg) * s
        return out if out.ndim else float(out)

    def curve(self, V) -> IvCurve:
        return IvCurve(V, self(V))


def dark_iv_model(gap: float, R_N: float, R_sg: float, w: float) -> DarkIvModel:
    return DarkIvModel(gap, R_N, R_sg, w)


def photon_voltage(f: float) -> float:
    """h f / e, the voltage spacing of photon steps."""
    return h * f / E_CHARGE


def bessel_truncation(alpha: float, tol: float = 1e-9) -> int:
    """Smallest N with sum_{|n| <= N} J_n(alpha)^2 > 1 - tol."""
    if alpha < 0:
        raise ParameterError("alpha must be >= 0")
    total = jv(0, alpha) ** 2
    n = 0
    while total <= 1.0 - tol:
        n += 1
        total += 2.0 * jv(n, alpha) ** 2
        if n > 10_000:
            raise ParameterError("Bessel sum failed to converge")
    return n


def bessel_weights(alpha: float, tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """Orders -N..N and their weights J_n(alpha)^2."""
    N = bessel_truncation(alpha, tol)
    n = np.arange(-N, N + 1)
    return n, jv(n, alpha) ** 2


def tien_gordon_iv(dark, f: float, alpha: float, voltages=None, tol: float = 1e-9) -> IvCurve:
    """Pumped IV curve from a dark one.

    Args:
        dark: ``IvCurve`` (interpolated) or a callable I(V) such as
            ``DarkIvModel`` (evaluated exactly).
        f: drive frequency (Hz).
        alpha: normalized drive amplitude e V_ac / (h f).
        voltages: output grid; defaults to the dark grid points whose
            shifted voltages stay inside the dark support.
        tol: Bessel truncation tolerance.

    Raises:
        ParameterError: the shifted voltages leave the dark curve's support.
    """
    if not f > 0:
        raise ParameterError("frequency must be positive")
    n, w = bessel_weights(alpha, tol)
    shift = photon_voltage(f)
    N = int(n[-1])
    if isinstance(dark, IvCurve):
        lo, hi = dark.support
        if voltages is None:
            V = dark.voltage
            V = V[(V - N * shift >= lo) & (V + N * shift <= hi)]
            if V.size < 2:
                raise ParameterError("dark curve support too narrow for the drive")
        else:
            V = np.asarray(voltages, dtype=float)
            if V.min() - N * shift < lo or V.max() + N * shift > hi:
                raise ParameterError("insufficient dark-curve support for the shifted voltages")
        func = dark
    else:
        if voltages is None:
            raise ParameterError("voltages are required with a model dark curve")
        V = np.asarray(voltages, dtype=float)
        func = dark
    I = np.zeros_like(V)
    for order, weight in zip(n, w):
        I += weight * func(V + order * shift)
    return IvCurve(V, I)


def first_step_onset(gap_voltage: float, f: float) -> float:
    """Voltage where the first photon step starts, 2 Delta / e - h f / e."""
    return gap_voltage - photon_voltage(f)


def default_probe_voltage(gap_voltage: float, f: float) -> float:
    """Midpoint of the first photon step, 2 Delta / e - h f / (2e)."""
    return gap_voltage - 0.5 * photon_voltage(f)


def extract_step_current(iv: IvCurve, V_probe: float) -> float:
    """Current at ``V_probe`` by linear interpolation."""
    lo, hi = iv.support
    if not lo <= V_probe <= hi:
        raise ParameterError(f"V_probe {V_probe} outside curve [{lo}, {hi}]")
    return float(np.interp(V_probe, iv.voltage, iv.current))


@dataclass(frozen=True)
class Calibration:
    """I_step = A exp(B P) + C, fitted over ``power_range`` (dB)."""

    A: float
    B: float
    C: float
    power_range: tuple[float, float]
    current_range: tuple[float, float]
    rms_residual: float

    def forward(self, power_db, extrapolate: bool = False):
        P = np.asarray(power_db, dtype=float)
        if not extrapolate and (np.any(P < self.power_range[0] - 1e-9)
                                or np.any(P > self.power_range[1] + 1e-9)):
            raise CalibrationRangeError("power outside calibrated range")
        out = self.A * np.exp(self.B * P) + self.C
        return out if out.ndim else float(out)

    def inverse(self, current, extrapolate: bool = False):
        I = np.asarray(current, dtype=float)
        lo, hi = self.current_range
        pad = 1e-12 * (hi - lo)
        if not extrapolate and (np.any(I < lo - pad) or np.any(I > hi + pad)):
            raise CalibrationRangeError("step current outside calibrated range")
        arg = (I - self.C) / self.A
        if np.any(arg <= 0):
            raise CalibrationRangeError("step current below the calibration asymptote")
        out = np.log(arg) / self.B
        return out if out.ndim else float(out)

    def to_dict(self) -> dict:
        return {
            "A": self.A, "B": self.B, "C": self.C,
            "power_range_dB": list(self.power_range),
            "current_range_A": list(self.current_range),
            "rms_residual_A": self.rms_residual,
        }


def _linear_ac(P, I, B):
    X = np.column_stack([np.exp(B * P), np.ones_like(P)])
    coef, *_ = np.linalg.lstsq(X, I, rcond=None)
    resid = X @ coef - I
    return coef, float(resid @ resid)


def build_calibration(power_db: Sequence[float], step_current: Sequence[float]) -> Calibration:
    """Exponential least-squares fit of step current versus drive power.

    The rate B is located on a grid by variable projection (A and C solved
    linearly for each B), then all three are refined jointly.
    """
    P = np.asarray(power_db, dtype=float)
    I = np.asarray(step_current, dtype=float)
    if P.size < 3 or P.shape != I.shape:
        raise ParameterError("need at least 3 (power, current) pairs")
    order = np.argsort(P)
    P, I = P[order], I[order]
    dI = np.diff(I)
    if not (np.all(dI > 0) or np.all(dI < 0)):
        raise ParameterError("calibration pairs must be strictly monotone")
    span = P[-1] - P[0]
    if span <= 0:
        raise ParameterError("calibration powers must differ")
    grid = np.concatenate([-np.geomspace(1e-3, 20.0, 200)[::-1], np.geomspace(1e-3, 20.0, 200)]) / span
    costs = [_linear_ac(P, I, b)[1] for b in grid]
    b0 = grid[int(np.argmin(costs))]
    (a0, c0), _ = _linear_ac(P, I, b0)
    scale = np.max(np.abs(I)) or 1.0

    def resid(theta):
        a, b, c = theta
        return (a * np.exp(b * P) + c - I) / scale

    sol = optimize.least_squares(resid, [a0, b0, c0], method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
    a, b, c = sol.x
    rms = float(np.sqrt(np.mean((sol.fun * scale) ** 2)))
    cur = (float(I.min()), float(I.max()))
    return Calibration(float(a), float(b), float(c), (float(P[0]), float(P[-1])), cur, rms)


@dataclass(frozen=True)
class PatDrive:
    f: float
    alpha: float

    def __post_init__(self):
        if not self.f > 0 or self.alpha < 0:
            raise ParameterError("need f > 0 and alpha >= 0")

    @classmethod
    def from_power(cls, f: float, power_db: float, alpha_ref: float) -> "PatDrive":
        return cls(f, alpha_ref * 10.0 ** (power_db / 20.0))

    def power_db(self, alpha_ref: float) -> float:
        return 20.0 * math.log10(self.alpha / alpha_ref)


@dataclass
class Response:
    """Reconstructed cavity response, peak normalized to 0 dB."""

    freq: np.ndarray
    power_db: np.ndarray
    f0: float
    Q: float
    identifiable: bool
    fit_rms_db: float

    def to_csv(self, comment: str | None = None) -> str:
        buf = io.StringIO()
        if comment:
            buf.write(f"# {comment}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["freq_Hz", "power_dB"])
        for f, p in zip(self.freq, self.power_db):
            w.writerow([format_float(f), format_float(p)])
        return buf.getvalue()


def fit_lorentzian_db(freq, power_db, min_depth_db: float = 1.0):
    """Fit 10 log10(1 / (1 + (2Q(f - f0)/f0)^2)) + offset.

    Returns (f0, Q, offset, rms, identifiable). The fit is flagged as
    unidentifiable when the data show less than ``min_depth_db`` of
    variation or the fitted linewidth exceeds ten times the sweep span.
    """
    f = np.asarray(freq, dtype=float)
    y = np.asarray(power_db, dtype=float)
    depth = float(y.max() - y.min())
    k = int(np.argmax(y))
    f0_guess = f[k]
    half = f[y >= y.max() - 3.0]
    width = max(half.max() - half.min(), np.min(np.diff(np.sort(f)))) if half.size > 1 else (f.max() - f.min())
    Q_guess = f0_guess / max(width, 1e-12 * f0_guess)
    fs = f0_guess

    def model(theta):
        x0, q, off = theta
        f0 = fs * (1.0 + x0)
        return -10.0 * np.log10(1.0 + (2.0 * q * (f - f0) / f0) ** 2) + off

    try:
        sol = optimize.least_squares(lambda th: model(th) - y, [0.0, Q_guess, y.max()],
                                     method="lm", xtol=1e-14, ftol=1e-14)
        x0, q, off = sol.x
        rms = float(np.sqrt(np.mean(sol.fun**2)))
        ok = sol.success
    except (ValueError, np.linalg.LinAlgError):
        x0, q, off, rms, ok = 0.0, float("nan"), float(y.max()), float("nan"), False
    f0 = fs * (1.0 + x0)
    q = abs(q)
    identifiable = bool(
        ok and depth >= min_depth_db and np.isfinite(q) and q > 0
        and f0 / q < 10.0 * (f.max() - f.min()) and f.min() <= f0 <= f.max()
    )
    return float(f0), float(q), float(off), rms, identifiable


def reconstruct_response(sweep, calibration: Calibration, V_probe: float) -> Response:
    """Cavity response from IV curves taken at fixed source power.

    Args:
        sweep: iterable of ``(frequency_Hz, IvCurve)``.
        calibration: step-current calibration.
        V_probe: probe voltage on the first photon step.

    Raises:
        CalibrationRangeError: a step current falls outside the calibration.
    """
    pairs = sorted(sweep, key=lambda p: p[0])
    freq = np.array([p[0] for p in pairs], dtype=float)
    currents = np.array([extract_step_current(iv, V_probe) for _, iv in pairs])
    power = np.asarray(calibration.inverse(currents), dtype=float)
    power_db = power - power.max()
    f0, Q, _, rms, ok = fit_lorentzian_db(freq, power_db)
    return Response(freq, power_db, f0, Q, ok, rms)


@dataclass
class PatExperiment:
    """Everything produced by a synthetic PAT spectroscopy run."""

    calibration: Calibration
    calib_powers: np.ndarray
    calib_currents: np.ndarray
    calib_ivs: list
    sweep: list
    response: Response
    V_probe: float


def synthetic_pat_experiment(
    f0: float,
    Q: float | None,
    dark: DarkIvModel = DarkIvModel(),
    alpha_ref: float = 0.5,
    source_power_db: float = -4.0,
    calib_powers_db=None,
    freqs=None,
    voltages=None,
    V_probe: float | None = None,
) -> PatExperiment:
    """Run the calibration and frequency-sweep measurement on a synthetic
    Lorentzian cavity (``Q=None`` means no cavity: flat transmission).

    Drive power at the junction is source power plus cavity transmission;
    the calibration sweep is taken at ``f0``.
    """
    Vg = dark.gap_voltage
    if V_probe is None:
        V_probe = default_probe_voltage(Vg, f0)
    if voltages is None:
        voltages = np.linspace(0.0, 1.5 * Vg, 1501)
    if freqs is None:
        lw = f0 / (Q if Q else 5000.0)
        freqs = f0 + np.linspace(-4.0, 4.0, 81) * lw
    if calib_powers_db is None:
        calib_powers_db = np.linspace(source_power_db - 25.0, source_power_db + 1.0, 27)

    def transmission(f):
        return 0.0 if Q is None else float(cavity_s21(f, f0, Q))

    calib_ivs, calib_cur = [], []
    for P in calib_powers_db:
        drive = PatDrive.from_power(f0, P + transmission(f0), alpha_ref)
        iv = tien_gordon_iv(dark, f0, drive.alpha, voltages)
        calib_ivs.append(iv)
        calib_cur.append(extract_step_current(iv, V_probe))
    cal = build_calibration(calib_powers_db, calib_cur)

    sweep = []
    for f in freqs:
        drive = PatDrive.from_power(f, source_power_db + transmission(f), alpha_ref)
        sweep.append((float(f), tien_gordon_iv(dark, f, drive.alpha, voltages)))
    resp = reconstruct_response(sweep, cal, V_probe)
    return PatExperiment(cal, np.asarray(calib_powers_db, dtype=float), np.asarray(calib_cur),
                         calib_ivs, sweep, resp, V_probe)
