import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tlsgates import dispersive as d
from tlsgates.config import SystemConfig


def one(D=40.0, g=40.0, Dc=120.0, eps=0.0):
    return SystemConfig(tls=[dict(Delta=D, g=g)], Delta_c=Dc, epsilon=eps)


def test_effective_detuning_without_drive():
    assert d.effective_detuning(one(eps=0.0), 0) == pytest.approx(40 + 1600 / -80)


def test_x_point_cancels_detuning():
    cfg = one(eps=-60.0)
    assert d.effective_detuning(cfg, 0) == pytest.approx(0.0, abs=1e-12)
    assert d.rabi_frequency(cfg, 0) == pytest.approx(60.0)


def test_zero_drive_zero_rabi():
    assert d.rabi_frequency(one(eps=0.0), 0) == 0.0


def test_zero_denominator_raises():
    with pytest.raises(d.DispersiveError, match="Delta_nc"):
        d.effective_detuning(one(D=120.0, Dc=120.0), 0)
    with pytest.raises(d.DispersiveError, match="Delta_c"):
        d.effective_detuning(one(Dc=0.0), 0)


@settings(max_examples=40, deadline=None)
@given(st.floats(-100, 100), st.floats(1, 50), st.floats(150, 400), st.floats(-300, 300))
def test_detuning_derivative_in_drive(D, g, Dc, eps):
    cfg = one(D, g, Dc, eps)
    h = 1e-3
    num = (d.effective_detuning(cfg.replace(epsilon=eps + h), 0)
           - d.effective_detuning(cfg.replace(epsilon=eps - h), 0)) / (2 * h)
    exact = -2 * g**2 / (cfg.Delta_nc(0) * Dc)
    assert num == pytest.approx(exact, rel=1e-6, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(-100, 100), st.floats(1, 50), st.floats(150, 400), st.floats(-300, 300))
def test_dressed_energy_invariants(D, g, Dc, eps):
    cfg = one(D, g, Dc, eps)
    E, th = d.dressed_energy(cfg, 0)
    dt, om = d.effective_detuning(cfg, 0), d.rabi_frequency(cfg, 0)
    assert E**2 == pytest.approx(dt**2 + om**2, rel=1e-10, abs=1e-12)
    if E > 0:
        assert math.cos(th) == pytest.approx(dt / E, abs=1e-12)
        assert math.sin(th) == pytest.approx(om / E, abs=1e-12)


def test_exchange_symmetric(pair_cfg):
    assert d.exchange_coupling(pair_cfg, 0, 1) == d.exchange_coupling(pair_cfg, 1, 0)
    # g1 g2 (1/D1c + 1/D2c) = 1200 (1/-300 + 1/-360)
    assert d.exchange_coupling(pair_cfg, 0, 1) == pytest.approx(1200 * (1 / -300 + 1 / -360))


def test_residual_coefficients_vanish_without_drive(pair_cfg):
    assert d.residual_drive_coefficient(pair_cfg, 0) == 0.0
    assert d.stark_shift(pair_cfg, 0) == pytest.approx(1600 / -300)


def test_effective_params_lambda_matrix(pair_cfg):
    p = d.effective_params(pair_cfg.replace(epsilon=100.0))
    assert np.allclose(p.lam, p.lam.T)
    assert np.all(np.diag(p.lam) == 0)
    assert p.beta is None


def test_two_qubit_coefficients_at_operating_point(pair_cfg):
    cfg = pair_cfg.replace(epsilon=277.19670734771614)
    b1, b2, b2p = d.two_qubit_coefficients(cfg)
    assert b2p == pytest.approx(-1.8529, abs=1e-3)
    assert b1 == pytest.approx(-1.1416, abs=1e-3)
    assert b2 == pytest.approx(-1.7458, abs=1e-3)


def test_two_qubit_requires_resonance(pair_cfg):
    with pytest.raises(d.DispersiveError, match="resonance"):
        d.two_qubit_coefficients(pair_cfg.replace(epsilon=100.0))


@pytest.mark.parametrize("eps", [1.0, 0.1, 0.01])
def test_beta2_prime_correction_quadratic_in_drive(pair_cfg, eps):
    cfg = pair_cfg.replace(epsilon=eps)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        _, b2, b2p = d.two_qubit_coefficients(cfg, resonance_rtol=math.inf)
        _, b2_ref, b2p_ref = d.two_qubit_coefficients(cfg.replace(epsilon=1.0),
                                                      resonance_rtol=math.inf)
    ratio = (b2p - b2) / (b2p_ref - b2_ref)
    assert ratio == pytest.approx(eps**2, rel=0.05)


def test_real_transition_warning():
    # Dressed energies near Delta_c trigger the warning.
    cfg = SystemConfig(tls=[dict(Delta=0.0, g=10.0), dict(Delta=0.0, g=10.0)],
                       Delta_c=5.0, epsilon=0.0)
    with pytest.warns(d.RealTransitionWarning):
        d.two_qubit_coefficients(cfg)
