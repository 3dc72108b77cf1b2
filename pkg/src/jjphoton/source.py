"""Thermal cavity photon source.

Mode occupations follow the Bose factor; the detected rate of mode ``i`` is
``eta_i / tau_i * nbar(f_i, T)`` with photon lifetime ``tau_i = Q_i/(2 pi f_i)``.
Arrival streams are either homogeneous Poisson or chaotic-light Cox
processes whose intensity is the squared modulus of a complex
Ornstein-Uhlenbeck field.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from scipy import signal

from .constants import h, k_B
from .errors import ParameterError
from .events import DARK, EventStream
from .seeding import as_rng

STATS_MODELS = ("poisson", "thermal-bunched")


@dataclass(frozen=True)
class CavityMode:
    """One resonant mode of the cavity as seen by the detector.

    Args:
        f: resonance frequency (Hz).
        Q: loaded quality factor.
        eta: detection efficiency in [0, 1] (antenna coupling times
            detector efficiency).
        stats_model: ``"poisson"`` or ``"thermal-bunched"``.
        tau_int: intensity correlation time (s) used by the bunched model;
            defaults to the photon lifetime.
    """

    f: float
    Q: float
    eta: float = 1.0
    stats_model: str = "poisson"
    tau_int: float | None = None

    def __post_init__(self):
        if not self.f > 0 or not self.Q > 0:
            raise ParameterError("mode frequency and Q must be positive")
        if not 0.0 <= self.eta <= 1.0:
            raise ParameterError(f"eta must be in [0, 1], got {self.eta}")
        if self.stats_model not in STATS_MODELS:
            raise ParameterError(f"unknown stats model {self.stats_model!r}")
        if self.tau_int is not None and not self.tau_int > 0:
            raise ParameterError("tau_int must be positive")

    @property
    def lifetime(self) -> float:
        return self.Q / (2.0 * math.pi * self.f)

    @property
    def correlation_time(self) -> float:
        return self.lifetime if self.tau_int is None else self.tau_int


REFERENCE_MODES = (
    CavityMode(f=8.81e9, Q=7340.0, eta=0.0125),
    CavityMode(f=13.95e9, Q=4650.0, eta=0.45),
)


@dataclass(frozen=True)
class SourceConfig:
    modes: tuple[CavityMode, ...] = REFERENCE_MODES
    dark_rate: float = 0.1
    T: float = 0.047

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        if self.dark_rate < 0:
            raise ParameterError("dark rate must be >= 0")
        if not self.T > 0:
            raise ParameterError("temperature must be positive")


@dataclass(frozen=True)
class PhotonRates:
    per_mode: np.ndarray
    dark: float

    @property
    def photon_total(self) -> float:
        return float(np.sum(self.per_mode))

    @property
    def total(self) -> float:
        return self.photon_total + self.dark


def mean_occupation(f, T):
    """Bose-Einstein mean photon number 1 / (exp(hf / k_B T) - 1)."""
    x = h * np.asarray(f, dtype=float) / (k_B * np.asarray(T, dtype=float))
    with np.errstate(over="ignore"):
        out = 1.0 / np.expm1(x)
    return out if np.ndim(out) else float(out)


def mode_rate(mode: CavityMode, T):
    """Detected photon rate (Hz) of a single mode at temperature ``T``."""
    return mode.eta / mode.lifetime * mean_occupation(mode.f, T)


def photon_rate(cfg: SourceConfig) -> PhotonRates:
    per_mode = np.array([mode_rate(m, cfg.T) for m in cfg.modes], dtype=float)
    return PhotonRates(per_mode, cfg.dark_rate)


def sample_poisson_stream(rate: float, duration: float, seed, label: int = DARK) -> EventStream:
    """Homogeneous Poisson arrivals on [0, duration]."""
    if rate < 0:
        raise ParameterError("rate must be >= 0")
    rng = as_rng(seed)
    n = rng.poisson(rate * duration) if rate > 0 else 0
    times = np.sort(rng.uniform(0.0, duration, size=n))
    return EventStream(times, np.full(n, label, dtype=np.int64), duration,
                       metadata={"model": "poisson", "rate_hz": rate})


def _chunk_sizes(total: int, chunk: int):
    while total > 0:
        step = min(chunk, total)
        yield step
        total -= step


def sample_cox_stream(
    rate: float,
    tau_int: float,
    duration: float,
    seed,
    label: int = 0,
    oversample: int = 20,
    max_steps: int = 20_000_000,
    chunk: int = 1 << 20,
) -> EventStream:
    """Chaotic-light (g2(0) = 2) Cox process with mean rate ``rate``.

    The intensity is ``rate * |a(t)|^2`` where ``a`` is a unit-power complex
    Ornstein-Uhlenbeck field with field correlation time ``2 * tau_int``, so
    the intensity autocorrelation is ``1 + exp(-|t|/tau_int)`` and the
    long-window Fano factor is ``1 + 2 * rate * tau_int``.

    The field is advanced exactly on a grid of step ``tau_int / oversample``
    and the intensity held constant within a step. When that grid would
    exceed ``max_steps`` the step is widened; once it is coarser than
    ``tau_int / 4`` the per-step integrated intensity is drawn from a gamma
    law matching its exact mean and variance instead.
    """
    if rate < 0:
        raise ParameterError("rate must be >= 0")
    if not tau_int > 0:
        raise ParameterError("tau_int must be positive")
    rng = as_rng(seed)
    if rate == 0 or duration == 0:
        return EventStream.empty(duration)

    dt = tau_int / oversample
    n_steps = int(math.ceil(duration / dt))
    if n_steps > max_steps:
        n_steps = max_steps
        dt = duration / n_steps
    times_out = []
    start = 0.0
    if dt <= tau_int / 4:
        rho = math.exp(-dt / (2.0 * tau_int))
        kick = math.sqrt(1.0 - rho * rho)
        a_prev = (rng.standard_normal() + 1j * rng.standard_normal()) / math.sqrt(2.0)
        for m in _chunk_sizes(n_steps, chunk):
            z = (rng.standard_normal(m) + 1j * rng.standard_normal(m)) / math.sqrt(2.0)
            # a_k = rho a_{k-1} + kick z_k
            a, _ = signal.lfilter([kick], [1.0, -rho], z, zi=np.array([rho * a_prev]))
            a_prev = a[-1]
            weight = np.abs(a) ** 2 * dt
            times_out.append(_place_events(rng, rate * weight, start, dt))
            start += m * dt
    else:
        variance = 2.0 * tau_int * dt - 2.0 * tau_int**2 * (-math.expm1(-dt / tau_int))
        shape = dt * dt / variance
        scale = variance / dt
        for m in _chunk_sizes(n_steps, chunk):
            weight = rng.gamma(shape, scale, size=m)
            times_out.append(_place_events(rng, rate * weight, start, dt))
            start += m * dt
    times = np.concatenate(times_out) if times_out else np.empty(0)
    times = times[times <= duration]
    return EventStream(times, np.full(times.size, label, dtype=np.int64), duration,
                       metadata={"model": "cox", "rate_hz": rate, "tau_int_s": tau_int})


def _place_events(rng, expected, start, dt):
    counts = rng.poisson(expected)
    total = int(counts.sum())
    if total == 0:
        return np.empty(0)
    bins = np.repeat(np.arange(counts.size), counts)
    t = start + (bins + rng.uniform(size=total)) * dt
    return np.sort(t)


def sample_thermal_stream(mode: CavityMode, T: float, duration: float, seed,
                          label: int = 0) -> EventStream:
    """Bunched single-mode thermal photon arrivals at cavity temperature ``T``."""
    return sample_cox_stream(mode_rate(mode, T), mode.correlation_time, duration, seed, label)


def merge_streams(*streams: EventStream) -> EventStream:
    """Time-sorted union of streams sharing one duration; labels are kept."""
    if not streams:
        raise ParameterError("nothing to merge")
    duration = streams[0].duration
    for s in streams[1:]:
        if not math.isclose(s.duration, duration, rel_tol=1e-12, abs_tol=0.0):
            raise ParameterError(
                f"duration mismatch: {s.duration} vs {duration}"
            )
    times = np.concatenate([s.times for s in streams])
    labels = np.concatenate([s.labels for s in streams])
    order = np.argsort(times, kind="stable")
    return EventStream(times[order], labels[order], duration, streams[0].seed)


def sample_source_stream(cfg: SourceConfig, duration: float, rng_for) -> EventStream:
    """All modes plus dark counts, each drawn from its own generator.

    Args:
        cfg: source configuration.
        duration: record length (s).
        rng_for: callable mapping a stream key (mode index or ``"dark"``)
            to an independent ``numpy.random.Generator``.
    """
    streams = []
    for k, mode in enumerate(cfg.modes):
        if mode.stats_model == "thermal-bunched":
            streams.append(sample_thermal_stream(mode, cfg.T, duration, rng_for(k), label=k))
        else:
            streams.append(sample_poisson_stream(mode_rate(mode, cfg.T), duration, rng_for(k), label=k))
    streams.append(sample_poisson_stream(cfg.dark_rate, duration, rng_for("dark"), label=DARK))
    return merge_streams(*streams)


def cavity_s21(f, f0: float, Q: float, floor_db: float | None = None):
    """Lorentzian power transmission in dB, 0 dB at resonance.

    ``floor_db`` adds a flat leakage level (relative to the peak) before
    normalization.
    """
    if not Q > 0:
        raise ParameterError("Q must be positive")
    f = np.asarray(f, dtype=float)
    lor = 1.0 / (1.0 + (2.0 * Q * (f - f0) / f0) ** 2)
    if floor_db is not None:
        fl = 10.0 ** (floor_db / 10.0)
        lor = (lor + fl) / (1.0 + fl)
    out = 10.0 * np.log10(lor)
    return out if out.ndim else float(out)
