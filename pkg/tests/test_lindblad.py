import math
import warnings

import numpy as np
import pytest

from tlsgates import calibration as cal
from tlsgates.config import SystemConfig
from tlsgates.fidelity import compensate_local_phases, nielsen_fidelity
from tlsgates.hamiltonian import build_full_hamiltonian, build_transformed_hamiltonian
from tlsgates.lindblad import (
    SimulationDiagnosticError, evolve, lindblad_rhs, probe_states, propagate,
    simulate_gate_channel,
)
from tlsgates.operators import destroy, expm_hermitian, fock_state, projector
from tlsgates.units import angular, rate_per_ns

from conftest import random_density

pytestmark = pytest.mark.filterwarnings("ignore::tlsgates.config.DispersiveWarning")


def x_point(g=40.0, Delta=40.0, Dc=120.0, nf=6):
    cfg = SystemConfig(tls=[dict(Delta=Delta, g=g)], Delta_c=Dc, epsilon=0.0, fock_cutoff=nf)
    return cfg, cal.calibrate_x(cfg)


def test_rhs_zero_hamiltonian():
    assert np.allclose(lindblad_rhs(np.zeros((3, 3)), [], np.eye(3) / 3), 0)


def test_rhs_traceless(rng):
    d = 6
    A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    H = A + A.conj().T
    C = [rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)) for _ in range(2)]
    out = lindblad_rhs(H, C, random_density(rng, d))
    assert abs(np.trace(out)) < 1e-12


def test_rhs_photon_decay_rate():
    a = destroy(4)
    kappa = 0.3
    rho = projector(fock_state(1, 4))
    drho = lindblad_rhs(np.zeros((4, 4)), [math.sqrt(kappa) * a], rho)
    assert np.trace(a.conj().T @ a @ drho).real == pytest.approx(-kappa)


def test_rhs_shape_mismatch():
    with pytest.raises(ValueError):
        lindblad_rhs(np.eye(2), [], np.eye(3))
    with pytest.raises(ValueError):
        lindblad_rhs(np.eye(2), [np.eye(3)], np.eye(2))


def test_photon_decay_oracle():
    nf = 4
    a = destroy(nf)
    kappa = rate_per_ns(4.0)
    H = angular(300.0) * a.conj().T @ a
    tr = propagate(H, [math.sqrt(kappa) * a], projector(fock_state(1, nf)), 150.0, n_samples=16)
    for t, rho in zip(tr.times, tr.states):
        n = np.trace(a.conj().T @ a @ rho).real
        assert abs(n - math.exp(-kappa * t)) < 1e-6


def test_unitary_oracle():
    cfg, plan = x_point()
    seg = plan.segments[0]
    H = build_transformed_hamiltonian(seg.apply(cfg))
    rho0 = projector(np.kron([1, 0], fock_state(0, cfg.fock_cutoff)))
    tr = evolve(seg, cfg, rho0, step=0.005)
    U = expm_hermitian(H, seg.duration)
    assert np.max(np.abs(tr.final - U @ rho0 @ U.conj().T)) < 1e-8


def test_driven_cavity_amplitude_oracle():
    nf = 20
    Dc, eps, kappa = 50.0, 40.0, 8.0
    a = destroy(nf)
    H = angular(Dc) * a.conj().T @ a + angular(eps) * (a + a.conj().T)
    k = rate_per_ns(kappa)
    tr = propagate(H, [math.sqrt(k) * a], projector(fock_state(0, nf)), 60.0, n_samples=7)
    z = 1j * angular(Dc) + k / 2
    alpha_ss = -1j * angular(eps) / z
    for t, rho in zip(tr.times, tr.states):
        expected = alpha_ss * (1 - np.exp(-z * t))
        assert abs(np.trace(a @ rho) - expected) < 1e-6


def test_rk4_fourth_order():
    cfg, plan = x_point()
    seg = plan.segments[0]
    cfg = cfg.replace(kappa=5.0)
    rho0 = projector(np.kron([1, 0], fock_state(0, cfg.fock_cutoff)))
    finals = [evolve(seg, cfg, rho0, step=h).final for h in (0.04, 0.02, 0.01)]
    ratio = np.max(np.abs(finals[0] - finals[1])) / np.max(np.abs(finals[1] - finals[2]))
    assert 12 <= ratio <= 20


def test_step_lands_on_duration():
    tr = propagate(np.diag([1.0, -1.0]), [], np.eye(2) / 2, 1.0, step=0.3)
    assert tr.step * math.ceil(1.0 / 0.3) == pytest.approx(1.0)
    assert tr.times[-1] == pytest.approx(1.0)


def test_diagnostics_recorded():
    cfg, plan = x_point()
    rho0 = projector(np.kron([1, 0], fock_state(0, cfg.fock_cutoff)))
    tr = evolve(plan.segments[0], cfg.replace(kappa=5.0), rho0)
    assert not tr.failed
    assert np.max(tr.trace_deviation) < 1e-7
    assert np.min(tr.min_eigenvalue) >= -1e-6
    assert np.all(np.diff(tr.check_times) > 0)


def test_coarse_step_aborts_with_advisory():
    H = np.diag([0.0, 50.0])
    rho0 = np.full((2, 2), 0.5, complex)
    with pytest.raises(SimulationDiagnosticError, match="step"):
        propagate(H, [np.array([[0, 1], [0, 0]]) * 3.0], rho0, 10.0, step=0.2)


def test_probe_states_reconstruct_matrix_units():
    for d in (2, 4):
        states, coeffs = probe_states(d)
        assert states.shape == (d * d, d, d)
        for i in range(d):
            for j in range(d):
                E = np.einsum("k,kab->ab", coeffs[i, j], states)
                target = np.zeros((d, d))
                target[i, j] = 1
                assert np.allclose(E, target, atol=1e-14)


def test_zero_duration_plan_is_identity(pair_cfg):
    plan = cal.GatePlan("idle", (cal.Segment(300.0, 0.0, 0.0),), np.eye(4), "lab-rotating", (0, 1))
    res = simulate_gate_channel(plan, pair_cfg)
    assert np.max(np.abs(res.channel.superop - np.eye(16))) < 1e-12


def test_channel_trace_preserving():
    cfg, plan = x_point()
    res = simulate_gate_channel(plan, cfg.replace(kappa=5.0))
    assert res.channel.trace_deviation() < 1e-7


@pytest.mark.parametrize("g", [4.0, 1.0])
def test_x_channel_approaches_target(g):
    # Fidelity tends to one as g/Delta_nc shrinks.
    cfg = SystemConfig(tls=[dict(Delta=0.0, g=g)], Delta_c=120.0, epsilon=0.0, fock_cutoff=4)
    plan = cal.calibrate_x(cfg)
    res = simulate_gate_channel(plan, cfg)
    F = nielsen_fidelity(res.channel, plan.target_unitary)
    assert F > 1 - 3 * (g / 120.0) ** 2


def test_fock_cutoff_convergence():
    cfg = SystemConfig(tls=[dict(Delta=40.0, g=40.0), dict(Delta=-80.0, g=30.0)],
                       Delta_c=160.0, epsilon=0.0, kappa=5.0)
    plan = cal.calibrate_hadamard(cfg)
    fids = []
    for nf in (10, 14):
        res = simulate_gate_channel(plan, cfg, fock_cutoff=nf)
        fids.append(compensate_local_phases(res.channel, plan.target_unitary, plan.compensate,
                                            plan.theta).compensated_fidelity)
    assert abs(fids[0] - fids[1]) < 1e-4


def test_lab_frame_raises_cutoff():
    cfg, plan = x_point(nf=4)
    res = simulate_gate_channel(plan, cfg, frame="lab")
    assert res.fock_cutoff > 4
    assert res.frame == "lab"


@pytest.mark.xfail(strict=True, reason="closed-form drive-induced coefficients deviate from the "
                   "exact driven dynamics at second order in g/Delta_nc")
def test_frame_consistency_single_tls():
    cfg = SystemConfig(tls=[dict(Delta=0.0, g=5.0)], Delta_c=100.0, epsilon=0.0, fock_cutoff=6)
    plan = cal.calibrate_x(cfg)
    lab = simulate_gate_channel(plan, cfg, frame="lab", step=0.01)
    tr = simulate_gate_channel(plan, cfg, frame="transformed", step=0.01)
    r = 5.0 / 100.0
    rho = np.array([[1, 0], [0, 0]], complex)
    assert np.max(np.abs(lab.channel(rho) - tr.channel(rho))) <= 5 * r**3
