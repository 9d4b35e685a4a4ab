import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ddbound.quadrature import QuadratureConfig
from ddbound.spectra import (ClassicalMeasure, FlatHardCutoff, FlatMeasure,
                             MeasureDivergenceError, QuantumMeasure, SupraOhmicGaussian,
                             Tabulated, beta_from_temperature, eval_spectral_density,
                             eval_spectral_measure, exciton_measure, measure_M, measure_m)

from oracles import trapezoid

ALPHA, S, WC = 0.0114, 3.0, 3.0


@pytest.fixture
def exciton():
    return exciton_measure()


def test_supra_ohmic_values():
    d = SupraOhmicGaussian(ALPHA, S, WC)
    assert eval_spectral_density(d, 0.0) == 0.0
    assert eval_spectral_density(d, 3.0) == pytest.approx(ALPHA * 27 * math.exp(-1), rel=1e-15)


def test_flat_hard_cutoff_is_zero_beyond_cutoff():
    d = FlatHardCutoff(1.0, 3.0)
    assert eval_spectral_density(d, 4.0) == 0.0
    assert eval_spectral_density(d, 2.9) == 1.0


def test_negative_frequency_rejected(exciton):
    with pytest.raises(ValueError):
        eval_spectral_density(SupraOhmicGaussian(ALPHA, S, WC), -1.0)
    with pytest.raises(ValueError):
        eval_spectral_measure(exciton, -0.5)


@pytest.mark.parametrize("kwargs", [dict(alpha=0, s=3, omega_c=1), dict(alpha=1, s=0.5, omega_c=1),
                                    dict(alpha=1, s=3, omega_c=0)])
def test_supra_ohmic_validation(kwargs):
    with pytest.raises(ValueError):
        SupraOhmicGaussian(**kwargs)


def test_tabulated_validation_and_interpolation():
    with pytest.raises(ValueError):
        Tabulated([0.0, 2.0, 1.0], [1.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        Tabulated([0.0, 1.0], [1.0, -1.0])
    tab = Tabulated([1.0, 2.0, 4.0], [1.0, 3.0, 1.0])
    assert eval_spectral_density(tab, 1.5) == pytest.approx(2.0)
    assert eval_spectral_density(tab, 0.5) == 0.0
    assert eval_spectral_density(tab, 5.0) == 0.0
    assert tab.cutoff == 4.0


def test_flat_measure():
    m = FlatMeasure(3.0)
    assert eval_spectral_measure(m, 1.0) == 1.0
    assert eval_spectral_measure(m, 3.0) == 0.0


def test_classical_identity_measure():
    w = np.linspace(0.1, 5.0, 50)
    m = ClassicalMeasure(Tabulated(w, 2 * math.pi * w ** 2))
    np.testing.assert_allclose(eval_spectral_measure(m, w), 1.0, rtol=1e-14)


def test_beta_at_77_kelvin():
    assert beta_from_temperature(77.0) == pytest.approx(9.92e-2, rel=1e-3)
    with pytest.raises(ValueError):
        beta_from_temperature(0.0)


def test_quantum_config_error():
    with pytest.raises(ValueError):
        QuantumMeasure(SupraOhmicGaussian(ALPHA, S, WC), beta=0.0)


def test_quantum_small_frequency_limit(exciton):
    # coth(x) ~ 1/x gives lam(0) = 4 alpha / beta for s = 3
    limit = 4 * ALPHA / exciton.beta
    assert eval_spectral_measure(exciton, 1e-6) == pytest.approx(limit, rel=1e-10)
    assert eval_spectral_measure(exciton, 0.0) == pytest.approx(limit, rel=1e-15)


def test_quantum_continuous_at_switch(exciton):
    w0 = exciton.switch_freq
    below = eval_spectral_measure(exciton, np.nextafter(w0, 0))
    above = eval_spectral_measure(exciton, w0)
    assert abs(below - above) / above < 1e-6


def test_quantum_generic_density_matches_closed_form():
    # a tabulated density goes through the generic branch; compare with coth directly
    w = np.linspace(0.0, 6.0, 601)
    dens = Tabulated(w, ALPHA * w ** 3 * np.exp(-(w / WC) ** 2))
    m = QuantumMeasure(dens, 0.1)
    x = np.array([0.37, 1.2, 2.5])
    direct = 2 / np.tanh(0.05 * x) * dens(x) / x ** 2
    np.testing.assert_allclose(eval_spectral_measure(m, x), direct, rtol=1e-14)


measures = st.sampled_from([
    exciton_measure(),
    QuantumMeasure(SupraOhmicGaussian(0.02, 4.0, 2.0), 0.5),
    ClassicalMeasure(SupraOhmicGaussian(0.3, 2.0, 1.0)),
    ClassicalMeasure(FlatHardCutoff(1.0, 2.0)),
    FlatMeasure(2.5),
])


@settings(max_examples=200, deadline=None)
@given(m=measures, frac=st.floats(0.0, 1.0))
def test_measure_non_negative(m, frac):
    w = frac * QuadratureConfig().upper_limit(m.cutoff)
    assert eval_spectral_measure(m, w) >= 0.0


def test_M_and_m_flat():
    m = FlatMeasure(3.0)
    assert measure_M(m) == pytest.approx(3.0, rel=1e-12)
    assert measure_m(m) == pytest.approx(3.0, rel=1e-12)


def test_M_constant_measure():
    assert measure_M(FlatMeasure(1.0, level=2.0)) == pytest.approx(0.5, rel=1e-12)


def test_zero_measure():
    m = FlatMeasure(1.0, level=0.0)
    assert measure_m(m) == 0.0
    with pytest.raises(MeasureDivergenceError):
        measure_M(m)


def test_M_diverges_when_measure_vanishes_inside():
    # table vanishes on [0, 0.5): 1/lam blows up there
    m = ClassicalMeasure(Tabulated([0.5, 1.0, 3.0], [1.0, 1.0, 1.0]), omega_c=3.0)
    with pytest.raises(MeasureDivergenceError):
        measure_M(m)


def test_exciton_moments_against_dense_trapezoid(exciton):
    hi = QuadratureConfig().upper_limit(exciton.cutoff)
    M_ref = trapezoid(lambda w: 1.0 / exciton(w), 0.0, exciton.cutoff)
    m_ref = trapezoid(exciton, 0.0, hi)
    assert measure_M(exciton) == pytest.approx(M_ref, rel=1e-6)
    assert measure_m(exciton) == pytest.approx(m_ref, rel=1e-6)


@pytest.mark.parametrize("m", [
    QuantumMeasure(SupraOhmicGaussian(0.02, 4.0, 2.0), 0.5),
    ClassicalMeasure(SupraOhmicGaussian(0.3, 2.0, 1.0)),
    FlatMeasure(2.5, level=0.7),
])
def test_builtin_moments_against_dense_trapezoid(m):
    hi = m.integration_limit(QuadratureConfig())
    m_ref = trapezoid(m.on_support, 0.0, hi)
    assert measure_m(m) == pytest.approx(m_ref, rel=1e-5)
    if m.on_support(np.array([0.0]))[0] > 0:
        M_ref = trapezoid(lambda w: 1.0 / m.on_support(w), 0.0, m.cutoff)
        assert measure_M(m) == pytest.approx(M_ref, rel=1e-5)


def test_with_cutoff_rescales():
    m = exciton_measure().with_cutoff(6.0)
    assert m.cutoff == 6.0
    assert m.beta == exciton_measure().beta
