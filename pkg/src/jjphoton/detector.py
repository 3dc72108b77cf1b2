"""Detector simulation in two tiers.

The microscopic tier integrates the phase of the current-biased junction,

    phi'' + phi'/Q + sin(phi) = i + i_drive(t) + xi(t),
    <xi(t1) xi(t2)> = (2 gamma / Q) delta(t1 - t2),  gamma = k_B T / E_J,

in units where time is measured in 1/omega_p0. It yields photon switching
probabilities and dark escape rates at a bias point. The event-level tier
uses those numbers to thin photon arrival streams, add dark counts and
apply dead time over records lasting hours.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
import math

import numba
import numpy as np

from .constants import PHI0_REDUCED, k_B
from .errors import NumericalError, ParameterError
from .escape import EscapeConfig, total_escape_rate
from .events import DARK, EventStream
from .junction import (
    JunctionParams,
    barrier_height_reduced,
    photon_current_pulse,
    quality_factor,
    zero_bias_plasma_frequency,
)
from .seeding import derive_rng, derive_seed
from .source import (
    CavityMode,
    SourceConfig,
    mean_occupation,
    mode_rate,
    sample_cox_stream,
    sample_poisson_stream,
    merge_streams,
)

RUNNING, SWITCHED, BLOWUP = 0, 1, 2


@dataclass(frozen=True)
class SdeConfig:
    """Integration settings, all in dimensionless units (time in 1/omega_p0).

    Args:
        timestep: integration step.
        max_time: give up (no switch) after this time.
        Q: damping quality factor; ``None`` takes the junction Q at zero bias.
        threshold: phase excursion from the reference minimum that starts a
            switch candidate.
        confirm_time: window after the threshold crossing over which the
            mean velocity must exceed ``v_confirm``; otherwise the phase is
            considered retrapped and the reference minimum is moved.
        v_confirm: running-state velocity criterion.
        vmax: velocity magnitude treated as numerical blow-up.
        block: noise block length per kernel call.
    """

    timestep: float = 0.01
    max_time: float = 1.0e4
    Q: float | None = None
    threshold: float = 4.0 * math.pi
    confirm_time: float = 20.0
    v_confirm: float = 0.1
    vmax: float = 1.0e3
    block: int = 8192

    def __post_init__(self):
        if not self.timestep > 0 or not self.max_time > 0:
            raise ParameterError("timestep and max_time must be positive")
        if self.Q is not None and not self.Q > 0:
            raise ParameterError("Q must be positive")


@numba.njit(nogil=True, cache=True)
def _advance(fs, ist, noise, drive, dt, damp, bias, threshold, confirm_steps,
             v_confirm, vmax, n_max):
    """Advance one trajectory through up to ``noise.size`` Heun steps.

    fs = [phi, v, ref_phi, conf_sum, ke_sum]; ist = [step, cand, conf_n,
    status, ke_n]. ``noise`` holds the scaled Wiener increments.
    """
    phi = fs[0]
    v = fs[1]
    ref = fs[2]
    conf_sum = fs[3]
    ke_sum = fs[4]
    step = ist[0]
    cand = ist[1]
    conf_n = ist[2]
    ke_n = ist[4]
    nd = drive.size
    phi_min = math.asin(bias) if bias < 1.0 else math.pi / 2
    two_pi = 2.0 * math.pi
    status = RUNNING
    for j in range(noise.size):
        if step >= n_max:
            break
        xi = noise[j]
        d0 = drive[step] if step < nd else 0.0
        d1 = drive[step + 1] if step + 1 < nd else 0.0
        a0 = bias + d0 - math.sin(phi) - damp * v
        phi1 = phi + v * dt
        v1 = v + a0 * dt + xi
        a1 = bias + d1 - math.sin(phi1) - damp * v1
        phi = phi + 0.5 * (v + v1) * dt
        v = v + 0.5 * (a0 + a1) * dt + xi
        step += 1
        if not (abs(v) < vmax):
            status = BLOWUP
            break
        if cand < 0:
            ke_sum += v * v
            ke_n += 1
            if phi - ref > threshold:
                cand = step
                conf_sum = 0.0
                conf_n = 0
        else:
            conf_sum += v
            conf_n += 1
            if conf_n >= confirm_steps:
                if conf_sum / conf_n > v_confirm:
                    status = SWITCHED
                    break
                cand = -1
                ref = phi_min + two_pi * math.floor((phi - phi_min) / two_pi + 0.5)
    fs[0] = phi
    fs[1] = v
    fs[2] = ref
    fs[3] = conf_sum
    fs[4] = ke_sum
    ist[0] = step
    ist[1] = cand
    ist[2] = conf_n
    ist[3] = status
    ist[4] = ke_n


@dataclass
class TrajectorySummary:
    """Outcome of one integration.

    Times are dimensionless (units of 1/omega_p0); ``switch_time_s``
    converts with the junction plasma frequency. ``final_voltage_proxy`` is
    the mean phase velocity over the last confirmation window (the running
    state has v ~ i Q), and ``voltage_V`` its dc voltage equivalent.
    """

    switched: bool
    switch_time: float
    final_voltage_proxy: float
    elapsed: float
    mean_kinetic_energy: float
    omega_p0: float
    trajectory: np.ndarray | None = None

    @property
    def switch_time_s(self) -> float:
        return self.switch_time / self.omega_p0

    @property
    def voltage_V(self) -> float:
        return PHI0_REDUCED * self.omega_p0 * self.final_voltage_proxy


def reduced_noise(params: JunctionParams, T: float) -> float:
    """gamma = k_B T / E_J."""
    if T < 0:
        raise ParameterError("temperature must be >= 0")
    return k_B * T / params.josephson_energy


def damping_q(params: JunctionParams, cfg: SdeConfig) -> float:
    return quality_factor(params, 0.0) if cfg.Q is None else cfg.Q


def thermal_initial_state(i: float, gamma: float, rng: np.random.Generator):
    """Boltzmann sample in the harmonic approximation of the well."""
    phi_min = math.asin(i)
    w2 = math.sqrt(1.0 - i * i)
    phi = phi_min + math.sqrt(gamma / w2) * rng.standard_normal()
    v = math.sqrt(gamma) * rng.standard_normal()
    return phi, v


def integrate_rcsj(
    params: JunctionParams,
    i: float,
    T: float,
    drive: np.ndarray | None = None,
    sde_cfg: SdeConfig = SdeConfig(),
    seed=0,
    init: str = "minimum",
    record_stride: int | None = None,
) -> TrajectorySummary:
    """Integrate the noisy RCSJ equation with the stochastic Heun scheme.

    Args:
        params: junction parameters.
        i: dc bias ratio I / I_c, in [0, 1).
        T: junction temperature (K); sets gamma = k_B T / E_J.
        drive: extra bias ``i_drive`` sampled on the step grid
            (``drive[k]`` at t = k * timestep); zero past its end.
        sde_cfg: integration settings.
        seed: seed or Generator for the noise.
        init: ``"minimum"`` (at rest in the well) or ``"thermal"``.
        record_stride: if set, sample (t, phi, dphi) every this many steps.

    Raises:
        NumericalError: the velocity blew up without a confirmed switch;
            use a smaller timestep.
    """
    if not 0.0 <= i < 1.0:
        raise ParameterError("initial bias ratio must be in [0, 1)")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    gamma = reduced_noise(params, T)
    Q = damping_q(params, sde_cfg)
    dt = sde_cfg.timestep
    sig = math.sqrt(2.0 * gamma / Q * dt)
    if init == "thermal" and gamma > 0:
        phi0, v0 = thermal_initial_state(i, gamma, rng)
    elif init in ("minimum", "thermal"):
        phi0, v0 = math.asin(i), 0.0
    else:
        raise ParameterError(f"unknown init {init!r}")
    fs = np.array([phi0, v0, math.asin(i), 0.0, 0.0])
    ist = np.array([0, -1, 0, RUNNING, 0], dtype=np.int64)
    drive_arr = np.zeros(0) if drive is None else np.ascontiguousarray(drive, dtype=float)
    n_max = int(math.ceil(sde_cfg.max_time / dt))
    confirm_steps = max(1, int(round(sde_cfg.confirm_time / dt)))
    block = sde_cfg.block if record_stride is None else int(record_stride)
    record = [] if record_stride else None
    if record is not None:
        record.append((0.0, phi0, v0))
    noise = np.empty(block)
    while ist[3] == RUNNING and ist[0] < n_max:
        if sig > 0:
            rng.standard_normal(out=noise)
            noise *= sig
        else:
            noise.fill(0.0)
        _advance(fs, ist, noise, drive_arr, dt, 1.0 / Q, i, sde_cfg.threshold,
                 confirm_steps, sde_cfg.v_confirm, sde_cfg.vmax, n_max)
        if record is not None:
            record.append((ist[0] * dt, fs[0], fs[1]))
    if ist[3] == BLOWUP:
        raise NumericalError(
            f"velocity exceeded {sde_cfg.vmax} without a confirmed switch; "
            f"reduce the timestep (now {dt})"
        )
    switched = ist[3] == SWITCHED
    elapsed = ist[0] * dt
    switch_time = ist[1] * dt if switched else math.inf
    v_proxy = fs[3] / ist[2] if ist[2] > 0 else fs[1]
    ke = 0.5 * fs[4] / ist[4] if ist[4] else 0.0
    return TrajectorySummary(
        switched=bool(switched),
        switch_time=switch_time,
        final_voltage_proxy=float(v_proxy),
        elapsed=elapsed,
        mean_kinetic_energy=ke,
        omega_p0=zero_bias_plasma_frequency(params),
        trajectory=None if record is None else np.array(record),
    )


def _map_trials(fn, n: int, workers: int):
    """Run ``fn(k)`` for k in range(n); results ordered by k."""
    if workers <= 1:
        return [fn(k) for k in range(n)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n)))


# -- pulses -----------------------------------------------------------------

PULSE_KINDS = ("half-sine", "exponential-decay", "rectangular")


@dataclass(frozen=True)
class PulseShape:
    """Photon-induced current pulse.

    For ``exponential-decay`` the duration is the decay constant and the
    waveform is truncated after ten decay constants.
    """

    kind: str = "half-sine"
    amplitude: float = 60e-9
    duration: float = 1.6e-10

    def __post_init__(self):
        if self.kind not in PULSE_KINDS:
            raise ParameterError(f"unknown pulse kind {self.kind!r}")
        if self.amplitude < 0 or not self.duration > 0:
            raise ParameterError("pulse needs amplitude >= 0 and duration > 0")

    def waveform(self, params: JunctionParams, dt: float, delay: float = 0.0) -> np.ndarray:
        """Drive ratio i_drive sampled on the dimensionless step grid."""
        w0 = zero_bias_plasma_frequency(params)
        dur = self.duration * w0
        amp = self.amplitude / params.I_c
        span = 10.0 * dur if self.kind == "exponential-decay" else dur
        n = int(math.ceil((delay + span) / dt)) + 2
        t = np.arange(n) * dt - delay
        inside = (t >= 0) & (t <= span)
        out = np.zeros(n)
        if self.kind == "half-sine":
            out[inside] = amp * np.sin(math.pi * t[inside] / dur)
        elif self.kind == "rectangular":
            out[inside] = amp
        else:
            out[inside] = amp * np.exp(-t[inside] / dur)
        return out


def default_pulse(params: JunctionParams, i: float, f: float) -> PulseShape:
    """Half-sine pulse lasting two plasma periods, amplitude from the photon
    energy balance at this bias and frequency."""
    from .junction import plasma_frequency

    wp = plasma_frequency(params, i)
    return PulseShape("half-sine", photon_current_pulse(params, i * params.I_c, f), 2 * 2 * math.pi / wp)


@dataclass(frozen=True)
class SwitchProbability:
    p: float
    stderr: float
    n_switched: int
    trials: int


def photon_switch_probability(
    params: JunctionParams,
    i: float,
    T: float,
    pulse: PulseShape,
    trials: int,
    seed: int = 0,
    sde_cfg: SdeConfig = SdeConfig(),
    settle_time: float = 60.0,
    workers: int = 1,
) -> SwitchProbability:
    """Monte Carlo probability that one pulse switches the junction.

    Each trial starts from a thermal state, waits a uniformly random delay
    within one plasma period (random arrival phase), applies the pulse and
    then watches for ``settle_time`` (dimensionless) plus the confirmation
    window. Trial ``k`` draws from ``derive_rng(seed, k)``.
    """
    if trials < 10:
        raise ParameterError("need at least 10 trials")
    w_i = (1.0 - i * i) ** 0.25
    period = 2.0 * math.pi / w_i
    dt = sde_cfg.timestep

    def one(k):
        rng = derive_rng(seed, k)
        delay = rng.uniform(0.0, period)
        drive = pulse.waveform(params, dt, delay)
        window = drive.size * dt + settle_time + sde_cfg.confirm_time
        cfg = replace(sde_cfg, max_time=window)
        return integrate_rcsj(params, i, T, drive, cfg, rng, init="thermal").switched

    hits = sum(_map_trials(one, trials, workers))
    p = hits / trials
    return SwitchProbability(p, math.sqrt(max(p * (1 - p), 0.0) / trials), int(hits), trials)


@dataclass(frozen=True)
class EscapeEstimate:
    """Dark escape rate measured by repeated SDE runs (censored exponential MLE)."""

    rate: float
    rate_hz: float
    n_switched: int
    total_time: float
    times: np.ndarray

    @property
    def mean_time(self) -> float:
        return 1.0 / self.rate

    @property
    def rel_stderr(self) -> float:
        return 1.0 / math.sqrt(max(self.n_switched, 1))


def sde_escape_rate(
    params: JunctionParams,
    i: float,
    T: float,
    n_trials: int,
    sde_cfg: SdeConfig = SdeConfig(),
    seed: int = 0,
    workers: int = 1,
) -> EscapeEstimate:
    """Escape rate from ``n_trials`` independent thermal starts at bias ``i``.

    Trials that have not switched by ``sde_cfg.max_time`` are censored; the
    rate is switches / total observed time (dimensionless), and ``rate_hz``
    scales it by omega_p0.
    """

    def one(k):
        return integrate_rcsj(params, i, T, None, sde_cfg, derive_rng(seed, k), init="thermal")

    results = _map_trials(one, n_trials, workers)
    times = np.array([r.switch_time if r.switched else r.elapsed for r in results])
    switched = np.array([r.switched for r in results])
    total = float(times.sum())
    n_sw = int(switched.sum())
    rate = n_sw / total if total > 0 else 0.0
    return EscapeEstimate(rate, rate * zero_bias_plasma_frequency(params), n_sw, total, times[switched])


def temperature_for_barrier_ratio(params: JunctionParams, i: float, ratio: float) -> float:
    """Temperature at which Delta U / k_B T equals ``ratio``."""
    return params.josephson_energy * barrier_height_reduced(i) / (k_B * ratio)


# -- event level --------------------------------------------------------------


@dataclass(frozen=True)
class DetectorModel:
    """Event-level detector.

    Args:
        detection_prob: per-mode probability that an arriving photon
            produces a switch (missing entries default to 1).
        dead_time: non-paralyzable dead time (s).
        dark_rate: dark-count rate (Hz); ``None`` uses the source's.
    """

    detection_prob: tuple[float, ...] = ()
    dead_time: float = 5e-3
    dark_rate: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "detection_prob", tuple(float(p) for p in self.detection_prob))
        if any(not 0.0 <= p <= 1.0 for p in self.detection_prob):
            raise ParameterError("detection probabilities must lie in [0, 1]")
        if self.dead_time < 0:
            raise ParameterError("dead time must be >= 0")
        if self.dark_rate is not None and self.dark_rate < 0:
            raise ParameterError("dark rate must be >= 0")

    def prob(self, k: int) -> float:
        return self.detection_prob[k] if k < len(self.detection_prob) else 1.0


@numba.njit(cache=True)
def _dead_time_mask(times, dead):
    keep = np.zeros(times.size, dtype=np.bool_)
    last = -np.inf
    for k in range(times.size):
        if times[k] - last >= dead:
            keep[k] = True
            last = times[k]
    return keep


def apply_dead_time(stream: EventStream, dead_time: float) -> EventStream:
    """Non-paralyzable dead time: events within ``dead_time`` after a
    recorded event are lost and do not extend the dead period."""
    if dead_time <= 0 or len(stream) == 0:
        return stream
    keep = _dead_time_mask(stream.times, float(dead_time))
    return EventStream(stream.times[keep], stream.labels[keep], stream.duration,
                       stream.seed, dict(stream.metadata))


def simulate_event_level(source: SourceConfig, detector: DetectorModel,
                         duration: float, seed: int) -> EventStream:
    """Recorded switchings over ``duration`` seconds.

    Arrivals of mode ``k`` come from ``derive_rng(seed, "arrivals", k)``,
    thinning from ``derive_rng(seed, "thin", k)`` and dark counts from
    ``derive_rng(seed, "dark")``.
    """
    if not duration > 0:
        raise ParameterError("duration must be positive")
    streams = []
    for k, mode in enumerate(source.modes):
        rng = derive_rng(seed, "arrivals", k)
        rate = mode_rate(mode, source.T)
        if mode.stats_model == "thermal-bunched":
            arr = sample_cox_stream(rate, mode.correlation_time, duration, rng, label=k)
        else:
            arr = sample_poisson_stream(rate, duration, rng, label=k)
        p = detector.prob(k)
        if p < 1.0:
            keep = derive_rng(seed, "thin", k).uniform(size=len(arr)) < p
            arr = EventStream(arr.times[keep], arr.labels[keep], duration)
        streams.append(arr)
    dark = source.dark_rate if detector.dark_rate is None else detector.dark_rate
    streams.append(sample_poisson_stream(dark, duration, derive_rng(seed, "dark"), label=DARK))
    merged = merge_streams(*streams)
    out = apply_dead_time(merged, detector.dead_time)
    out.seed = seed
    return out


# -- bias sweep ---------------------------------------------------------------


@dataclass
class BiasCalibration:
    """Per-bias detection probabilities (one column per mode) and dark rates."""

    bias: np.ndarray
    prob: np.ndarray
    prob_err: np.ndarray
    dark_rate: np.ndarray

    def __post_init__(self):
        self.bias = np.asarray(self.bias, dtype=float)
        self.prob = np.atleast_2d(np.asarray(self.prob, dtype=float))
        self.prob_err = np.atleast_2d(np.asarray(self.prob_err, dtype=float))
        self.dark_rate = np.asarray(self.dark_rate, dtype=float)
        n = self.bias.size
        if self.prob.shape[0] != n or self.prob_err.shape != self.prob.shape or self.dark_rate.shape != (n,):
            raise ParameterError("calibration arrays must share the bias dimension")


def calibrate_bias(
    params: JunctionParams,
    bias_grid,
    modes,
    T_junction: float,
    escape_cfg: EscapeConfig,
    trials: int = 200,
    seed: int = 0,
    sde_cfg: SdeConfig = SdeConfig(),
    workers: int = 1,
) -> BiasCalibration:
    """Detection probability per mode from the SDE tier and dark rate from
    escape theory, on a bias grid. Bias point ``b``, mode ``k`` uses seed
    ``derive_seed(seed, b, k)``."""
    bias_grid = np.asarray(bias_grid, dtype=float)
    prob = np.zeros((bias_grid.size, len(modes)))
    err = np.zeros_like(prob)
    for b, i in enumerate(bias_grid):
        for k, mode in enumerate(modes):
            pulse = default_pulse(params, i, mode.f)
            res = photon_switch_probability(params, i, T_junction, pulse, trials,
                                            derive_seed(seed, b, k), sde_cfg, workers=workers)
            prob[b, k] = res.p
            err[b, k] = res.stderr
    dark = np.asarray(total_escape_rate(params, bias_grid, escape_cfg), dtype=float)
    return BiasCalibration(bias_grid, prob, err, np.atleast_1d(dark))


@dataclass
class SweepTable:
    bias: np.ndarray
    temps: np.ndarray
    rate: np.ndarray
    rate_err: np.ndarray

    def rows(self):
        for b, i in enumerate(self.bias):
            for t, T in enumerate(self.temps):
                yield i, T, self.rate[b, t], self.rate_err[b, t]

    def optimal_bias_index(self) -> int:
        """Bias with the largest signal-to-noise figure
        (r_hot - r_cold) / sqrt(r_cold), hot and cold being the extreme
        temperatures."""
        hot = self.rate[:, np.argmax(self.temps)]
        cold = self.rate[:, np.argmin(self.temps)]
        snr = (hot - cold) / np.sqrt(np.maximum(cold, 1e-300))
        return int(np.argmax(snr))


def sweep_bias(calibration: BiasCalibration, modes, temps) -> SweepTable:
    """rate(bias, T) = dark(bias) + sum_i p_i(bias) eta_i nbar(f_i, T) / tau_i.

    ``eta_i`` (from ``modes``) is the antenna/matching efficiency; the SDE
    probability ``p_i`` supplies the junction's switching efficiency.
    """
    temps = np.asarray(temps, dtype=float)
    A = np.stack([m.eta / m.lifetime * mean_occupation(m.f, temps) for m in modes], axis=1)
    photon = calibration.prob @ A.T
    photon_err = np.sqrt((calibration.prob_err**2) @ (A.T**2))
    rate = calibration.dark_rate[:, None] + photon
    return SweepTable(calibration.bias, temps, rate, photon_err)
