import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import jv

from jjphoton.constants import e, h
from jjphoton.errors import ParameterError
from jjphoton.pat import (
    CalibrationRangeError,
    DarkIvModel,
    IvCurve,
    PatDrive,
    bessel_truncation,
    bessel_weights,
    build_calibration,
    default_probe_voltage,
    extract_step_current,
    first_step_onset,
    photon_voltage,
    reconstruct_response,
    synthetic_pat_experiment,
    tien_gordon_iv,
)

DARK = DarkIvModel()
F = 13.95e9
V = np.linspace(0.0, 0.6e-3, 6001)


def test_dark_model_examples():
    assert DARK.gap_voltage == pytest.approx(0.4e-3, rel=1e-12)
    assert DARK(0.0) == 0.0
    assert DARK(1e-3) == pytest.approx(1e-3 / 1480.0, rel=1e-3)
    assert DARK(0.39e-3) == pytest.approx(0.39e-3 / 148_000.0, rel=1e-6)
    assert DARK(-0.5e-3) == -DARK(0.5e-3)
    with pytest.raises(ParameterError):
        DarkIvModel(R_sg=100.0)


def test_photon_voltage_and_onset():
    assert photon_voltage(F) == pytest.approx(h * F / e, rel=1e-15)
    assert first_step_onset(0.4e-3, F) == pytest.approx(0.3423e-3, abs=1e-7)
    assert default_probe_voltage(0.4e-3, F) == pytest.approx(0.4e-3 - 0.5 * h * F / e, rel=1e-15)


def test_zero_drive_is_identity():
    iv = tien_gordon_iv(DARK, F, 0.0, V)
    assert np.array_equal(iv.current, DARK(V))
    n, w = bessel_weights(0.0)
    assert list(n) == [0] and w[0] == 1.0


@given(st.floats(0.0, 20.0))
def test_bessel_weights_sum_to_one(alpha):
    n, w = bessel_weights(alpha, 1e-9)
    assert abs(w.sum() - 1.0) < 1e-9
    assert np.allclose(w, jv(n, alpha) ** 2)
    assert bessel_truncation(alpha) == n[-1]


@given(st.floats(0.0, 3.0), st.floats(1e9, 50e9))
def test_linear_dark_curve_is_unchanged(alpha, f):
    ohmic = lambda x: np.asarray(x) / 1000.0  # noqa: E731
    iv = tien_gordon_iv(ohmic, f, alpha, V)
    assert np.allclose(iv.current, ohmic(V), rtol=1e-8, atol=1e-18)


def test_step_edges_sit_at_photon_spacing():
    iv = tien_gordon_iv(DARK, F, 1.0, V)
    slope = np.gradient(iv.current, iv.voltage)
    for k in (1, 2):
        edge = DARK.gap_voltage - k * photon_voltage(F)
        window = np.abs(iv.voltage - edge) < 0.3 * photon_voltage(F)
        peak = iv.voltage[window][np.argmax(slope[window])]
        assert peak == pytest.approx(edge, abs=2e-7)


@given(st.floats(0.01, 1.8), st.floats(0.001, 0.05))
def test_step_current_monotone_in_drive(alpha, d):
    Vp = default_probe_voltage(DARK.gap_voltage, F)
    i1 = tien_gordon_iv(DARK, F, alpha, np.array([0.0, Vp])).current[1]
    i2 = tien_gordon_iv(DARK, F, min(alpha + d, 1.8), np.array([0.0, Vp])).current[1]
    assert i2 >= i1


def test_support_checks():
    narrow = DARK.curve(np.linspace(0.0, 1e-3, 1001))
    with pytest.raises(ParameterError):
        tien_gordon_iv(narrow, F, 0.3, [0.01e-3])
    sub = tien_gordon_iv(narrow, F, 0.3)
    assert sub.support[0] > 0.0 and sub.support[1] < 1e-3
    with pytest.raises(ParameterError):
        tien_gordon_iv(DARK.curve(np.linspace(0.2e-3, 0.3e-3, 11)), F, 1.0)
    with pytest.raises(ParameterError):
        tien_gordon_iv(DARK, F, 1.0)
    with pytest.raises(ParameterError):
        extract_step_current(narrow, 2e-3)


def test_iv_csv_round_trip(tmp_path):
    iv = DARK.curve(np.linspace(0, 1e-3, 11))
    p = tmp_path / "iv.csv"
    p.write_text(iv.to_csv("test"))
    back = IvCurve.from_csv(p)
    assert np.array_equal(back.voltage, iv.voltage) and np.array_equal(back.current, iv.current)


def test_calibration_recovery_and_round_trip():
    P = np.linspace(-30.0, 0.0, 16)
    A, B, C = 2e-9, 0.11, 3e-10
    cal = build_calibration(P, A * np.exp(B * P) + C)
    assert cal.A == pytest.approx(A, rel=1e-6)
    assert cal.B == pytest.approx(B, rel=1e-6)
    assert cal.C == pytest.approx(C, rel=1e-6)
    probe = np.linspace(-29.5, -0.5, 30)
    assert np.max(np.abs(cal.inverse(cal.forward(probe)) - probe)) < 1e-9
    with pytest.raises(CalibrationRangeError):
        cal.forward(5.0)
    with pytest.raises(CalibrationRangeError):
        cal.inverse(cal.forward(5.0, extrapolate=True))
    assert cal.inverse(cal.forward(5.0, extrapolate=True), extrapolate=True) == pytest.approx(5.0, abs=1e-9)


def test_calibration_rejects_bad_input():
    with pytest.raises(ParameterError):
        build_calibration([0, 1, 2, 3], [1.0, 2.0, 1.5, 3.0])
    with pytest.raises(ParameterError):
        build_calibration([0, 1], [1.0, 2.0])


def test_drive_power_convention():
    d = PatDrive.from_power(F, -6.0, 0.5)
    assert d.alpha == pytest.approx(0.5 * 10 ** (-0.3), rel=1e-12)
    assert d.power_db(0.5) == pytest.approx(-6.0, abs=1e-12)


@pytest.mark.parametrize("f0,Q", [(8.81e9, 7340.0), (13.95e9, 4650.0)])
def test_cavity_round_trip(f0, Q):
    exp = synthetic_pat_experiment(f0, Q)
    r = exp.response
    assert r.identifiable
    assert r.Q == pytest.approx(Q, rel=0.01)
    assert abs(r.f0 - f0) < 0.1 * f0 / Q
    assert r.power_db.max() == 0.0


def test_flat_cavity_is_flagged():
    exp = synthetic_pat_experiment(13.95e9, None)
    assert not exp.response.identifiable
    assert np.ptp(exp.response.power_db) < 0.01


def test_fixed_frequency_flat_identity():
    exp = synthetic_pat_experiment(F, None, freqs=np.array([F]))
    iv = exp.sweep[0][1]
    sweep = [(F + k, iv) for k in range(7)]
    resp = reconstruct_response(sweep, exp.calibration, exp.V_probe)
    assert np.max(np.abs(resp.power_db)) < 1e-6
    assert not resp.identifiable
