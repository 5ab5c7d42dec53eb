import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tlsgates.config import DispersiveValidityError, DispersiveWarning, SystemConfig
from tlsgates.hamiltonian import (
    build_full_hamiltonian, build_hamiltonian, build_transformed_hamiltonian, collapse_operators,
    lab_fock_cutoff, resonator_initial_state, transformation_unitary,
)
from tlsgates.operators import annihilation, coherent_state, fock_state, is_hermitian, pauli
from tlsgates.units import angular, rate_per_ns

freq = st.floats(-200, 200)


def cfg2(D1=0.0, g1=10.0, D2=-60.0, g2=8.0, Dc=300.0, eps=40.0, kappa=0.0, nf=5):
    return SystemConfig(tls=[dict(Delta=D1, g=g1), dict(Delta=D2, g=g2)], Delta_c=Dc,
                        epsilon=eps, kappa=kappa, fock_cutoff=nf)


def test_decoupled_spectrum():
    cfg = cfg2(g1=0.0, g2=0.0, eps=0.0, nf=4)
    w = np.sort(np.linalg.eigvalsh(build_full_hamiltonian(cfg)))
    expected = sorted(
        angular(300.0 * m + s1 * 0.0 / 2 + s2 * -60.0 / 2)
        for m in range(4) for s1, s2 in itertools.product((1, -1), repeat=2)
    )
    assert np.allclose(w, expected, atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(freq, st.floats(0, 20), freq, st.floats(0, 20), st.floats(150, 400), st.floats(-100, 100))
def test_full_hamiltonian_hermitian(D1, g1, D2, g2, Dc, eps):
    H = build_full_hamiltonian(cfg2(D1, g1, D2, g2, Dc, eps))
    assert np.max(np.abs(H - H.conj().T)) < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.floats(-50, 50), st.floats(0, 10), st.floats(-50, 50), st.floats(0, 10),
       st.floats(150, 400), st.floats(-100, 100))
def test_transformed_hamiltonian_hermitian(D1, g1, D2, g2, Dc, eps):
    H = build_transformed_hamiltonian(cfg2(D1, g1, D2, g2, Dc, eps))
    assert np.max(np.abs(H - H.conj().T)) < 1e-12


def test_vacuum_rabi_splitting():
    g = 12.0
    cfg = SystemConfig(tls=[dict(Delta=100.0, g=g)], Delta_c=100.0, epsilon=0.0, fock_cutoff=6)
    w = np.sort(np.linalg.eigvalsh(build_full_hamiltonian(cfg)))
    # ground state |down,0> at -Delta/2, then the one-excitation doublet
    doublet = w[1:3]
    assert doublet[1] - doublet[0] == pytest.approx(angular(2 * g), rel=1e-12)


def test_transformed_reduces_without_coupling():
    cfg = cfg2(g1=0.0, g2=0.0, eps=0.0)
    s = cfg.space
    a = annihilation(s)
    H0 = angular(300.0) * a.conj().T @ a + angular(-60.0) / 2 * pauli("z", 1, s)
    assert np.allclose(build_transformed_hamiltonian(cfg), H0)


def test_transformed_without_drive_has_no_sigma_x():
    cfg = cfg2(eps=0.0)
    s = cfg.space
    H = build_transformed_hamiltonian(cfg)
    for n in range(2):
        assert abs(np.trace(H @ pauli("x", n, s))) < 1e-12


def test_zero_coupling_spectra_agree():
    cfg = cfg2(g1=0.0, g2=0.0, eps=37.0, nf=40)
    wf = np.sort(np.linalg.eigvalsh(build_full_hamiltonian(cfg)))
    wt = np.sort(np.linalg.eigvalsh(build_transformed_hamiltonian(cfg)))
    # The displacement shifts every level by -eps^2/Delta_c; compare low-lying gaps.
    shift = angular(-37.0**2 / 300.0)
    assert np.allclose(wf[:12] - shift, wt[:12], atol=1e-6)


def test_dispersive_validity_thresholds():
    with pytest.warns(DispersiveWarning):
        build_transformed_hamiltonian(cfg2(g1=90.0, D1=0.0, Dc=300.0))
    with pytest.raises(DispersiveValidityError, match="TLS 0"):
        build_transformed_hamiltonian(cfg2(g1=200.0, D1=0.0, Dc=300.0))


def test_build_hamiltonian_dispatch():
    cfg = cfg2()
    assert np.allclose(build_hamiltonian(cfg, "lab"), build_full_hamiltonian(cfg))
    with pytest.raises(ValueError, match="frame"):
        build_hamiltonian(cfg, "rotating")


def test_collapse_empty_without_loss():
    assert collapse_operators(cfg2(kappa=0.0)) == []


def test_collapse_norm_linear_in_kappa():
    n1 = np.linalg.norm(collapse_operators(cfg2(kappa=4.0))[0]) ** 2
    n2 = np.linalg.norm(collapse_operators(cfg2(kappa=8.0))[0]) ** 2
    assert n2 == pytest.approx(2 * n1)
    C = collapse_operators(cfg2(kappa=4.0))[0]
    assert np.allclose(C, np.sqrt(rate_per_ns(4.0)) * annihilation(cfg2().space))


def test_collapse_annihilates_vacuum():
    cfg = cfg2(kappa=4.0)
    C = collapse_operators(cfg, frame="transformed")[0]
    psi = np.kron(np.array([0, 1, 1, 0]) / np.sqrt(2), fock_state(0, cfg.fock_cutoff))
    assert np.allclose(C @ psi, 0)


def test_dressed_loss_adds_tls_lowering():
    cfg = cfg2(kappa=4.0)
    s = cfg.space
    C = collapse_operators(cfg, frame="transformed", dressed_loss=True)[0]
    extra = C / np.sqrt(rate_per_ns(4.0)) - annihilation(s)
    expected = sum(cfg.tls[n].g / cfg.Delta_nc(n) * pauli("-", n, s) for n in range(2))
    assert np.allclose(extra, expected)


def test_collapse_rejects_negative_kappa():
    cfg = cfg2()
    object.__setattr__(cfg, "kappa", -1.0)
    with pytest.raises(ValueError, match="non-negative"):
        collapse_operators(cfg)


def test_transformation_unitary_is_unitary():
    U = transformation_unitary(cfg2(nf=8))
    assert np.allclose(U.conj().T @ U, np.eye(U.shape[0]), atol=1e-12)


def test_transformation_displaces_resonator():
    cfg = cfg2(g1=0.0, g2=0.0, eps=30.0, nf=30)
    U = transformation_unitary(cfg)
    a = annihilation(cfg.space)
    shifted = U @ a @ U.conj().T
    # U a U^dag = a - eps/Delta_c on the low-lying sector
    low = np.kron(np.eye(4), np.diag([1.0] * 10 + [0.0] * 20))
    assert np.allclose(low @ (shifted - a) @ low, -30.0 / 300.0 * low, atol=1e-8)


def test_initial_states():
    cfg = cfg2(eps=60.0, nf=12)
    assert np.allclose(resonator_initial_state(cfg, "transformed"), fock_state(0, 12))
    assert np.allclose(resonator_initial_state(cfg, "lab"), coherent_state(-0.2, 12))


def test_lab_cutoff_covers_amplitude():
    cfg = cfg2(eps=900.0, Dc=300.0, nf=5)
    assert lab_fock_cutoff(cfg) >= 9 + 15
    assert lab_fock_cutoff(cfg2(eps=0.0, nf=10)) == 10
