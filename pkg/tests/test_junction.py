import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from jjphoton.constants import CONST, PHI0_REDUCED, Phi0, h, hbar, e
from jjphoton.errors import NoBarrierError, ParameterError
from jjphoton.junction import (
    JunctionParams,
    barrier_height,
    barrier_height_reduced,
    junction_inductance,
    photon_current_pulse,
    plasma_frequency,
    quality_factor,
    supercurrent_energy,
    theoretical_critical_current,
    washboard_potential,
    well_minimum,
)

P = JunctionParams()
bias = st.floats(0.0, 0.99)


def test_constants_exact_relations():
    assert Phi0 == h / (2 * e)
    assert hbar == h / (2 * math.pi)
    assert CONST.phi0_reduced == pytest.approx(hbar / (2 * e), rel=1e-15)


def test_params_validation():
    with pytest.raises(ParameterError):
        JunctionParams(I_c=-1.0)
    with pytest.raises(ParameterError):
        JunctionParams(R_qp=100.0)
    assert JunctionParams().R_qp == JunctionParams().R_N


@pytest.mark.parametrize("phi,i,expected", [(0.0, 0.0, -1.0), (math.pi, 0.0, 1.0),
                                            (math.asin(0.8), 0.8, -1.3418)])
def test_washboard_examples(phi, i, expected):
    assert washboard_potential(phi, i) == pytest.approx(expected, abs=1e-4)


def test_barrier_examples():
    assert barrier_height(P, 0.0) == pytest.approx(2 * P.josephson_energy, rel=1e-15)
    assert barrier_height_reduced(1 - 1e-12) < 1e-15
    assert barrier_height_reduced(0.8) == pytest.approx(0.17039822593074483, rel=1e-12)
    assert barrier_height(P, 0.8) == pytest.approx(9.53e-24, rel=1e-3)
    with pytest.raises(NoBarrierError):
        barrier_height(P, 1.0)


@pytest.mark.parametrize("i", [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])
def test_barrier_matches_numeric_potential(i):
    assert barrier_height_reduced(i) == pytest.approx(oracles.barrier_numeric(i), rel=1e-10)


def test_well_minimum_is_stationary():
    i = 0.37
    phi = well_minimum(i)
    d = 1e-6
    slope = (washboard_potential(phi + d, i) - washboard_potential(phi - d, i)) / (2 * d)
    assert abs(slope) < 1e-9


def test_inductance_examples():
    assert junction_inductance(P, 0.0) == pytest.approx(1.9359175204438434e-09, rel=1e-12)
    assert junction_inductance(P, 0.8 * P.I_c) == pytest.approx(3.2265292007397395e-09, rel=1e-12)
    assert junction_inductance(P, 0.0) == pytest.approx(1.936e-9, rel=1e-3)
    with pytest.raises(NoBarrierError):
        junction_inductance(P, P.I_c)


def test_quality_factor_examples():
    assert quality_factor(P, 0.0) == pytest.approx(9.51, abs=0.01)
    assert quality_factor(P, 0.8 * P.I_c) == pytest.approx(7.37, abs=0.01)
    assert quality_factor(P, 0.0) == pytest.approx(oracles.qfactor(170e-9, 80e-15, 1480.0, 0.0), rel=1e-12)
    assert quality_factor(JunctionParams(C=1e-30), 0.0) < 1e-6


def test_plasma_frequency_examples():
    assert plasma_frequency(P, 0.0) == pytest.approx(8.04e10, rel=1e-3)
    assert plasma_frequency(P, 0.8) == pytest.approx(8.0354755e10 * 0.36**0.25, rel=1e-6)
    assert plasma_frequency(P, 0.8) == pytest.approx(6.22e10, rel=2e-3)
    assert 2 * math.pi / plasma_frequency(P, 0.0) < 1e-9


def test_photon_pulse_examples():
    dI = photon_current_pulse(P, 0.75 * P.I_c, 13.95e9)
    assert dI == pytest.approx(5.904029443486189e-08, rel=1e-12)
    assert 50e-9 <= dI <= 70e-9
    lossless = JunctionParams(R_N=1e12)
    L = junction_inductance(lossless, 0.5 * P.I_c)
    assert photon_current_pulse(lossless, 0.5 * P.I_c, 5e9) == pytest.approx(
        math.sqrt(2 * h * 5e9 / L), rel=1e-9)
    assert photon_current_pulse(P, 0.5 * P.I_c, 1.0) < 1e-12


@given(i=bias, f=st.floats(1e9, 5e10))
def test_photon_energy_bookkeeping(i, f):
    I = i * P.I_c
    dI = photon_current_pulse(P, I, f)
    Es = supercurrent_energy(P, I, dI)
    Q = quality_factor(P, I)
    assert Es * (1 + 2 * math.pi / Q) == pytest.approx(h * f, rel=1e-12)


@given(i=st.floats(-0.99, 0.99))
def test_inductance_invariant(i):
    I = i * P.I_c
    assert junction_inductance(P, I) * math.sqrt(P.I_c**2 - I**2) == pytest.approx(PHI0_REDUCED, rel=1e-12)


def test_monotonicity_on_grid():
    grid = np.linspace(0, 0.99, 100)
    dU = [barrier_height(P, i) for i in grid]
    L = [junction_inductance(P, i * P.I_c) for i in grid]
    Q = [quality_factor(P, i * P.I_c) for i in grid]
    assert np.all(np.diff(dU) < 0)
    assert np.all(np.diff(L) > 0)
    assert np.all(np.diff(Q) < 0)


def test_theoretical_critical_current():
    assert theoretical_critical_current(180e-6 * e, 1480.0) == pytest.approx(191e-9, rel=3e-3)
    assert theoretical_critical_current(200e-6 * e, 1480.0) == pytest.approx(212e-9, rel=3e-3)
    assert theoretical_critical_current(0.0, 1480.0) == 0.0
