"""Rotating-frame Hamiltonians and the resonator loss channel.

Operators are returned in rad/ns (``hbar = 1``), built from a
:class:`~tlsgates.config.SystemConfig` whose frequencies are in MHz.

Two frames are supported:

``lab``
    the driven Jaynes-Cummings Hamiltonian in the frame rotating with the
    drive; the resonator starts in the coherent state ``-eps/Delta_c``.
``transformed``
    after the drive displacement and the dispersive transformation; the drive
    is absorbed by the displacement, so the resonator starts in vacuum.
"""
import numpy as np
from scipy.linalg import expm

from . import dispersive
from .config import DISPERSIVE_ERROR, DISPERSIVE_WARN
from .operators import annihilation, coherent_state, fock_state, pauli
from .units import angular, rate_per_ns

FRAMES = ("transformed", "lab")


def _space(cfg, space):
    space = cfg.space if space is None else space
    if space.n_tls != cfg.n_tls:
        raise ValueError(f"space has {space.n_tls} TLS slots but config has {cfg.n_tls} TLSs")
    return space


def build_full_hamiltonian(cfg, space=None) -> np.ndarray:
    space = _space(cfg, space)
    a = annihilation(space)
    ad = a.conj().T
    H = angular(cfg.Delta_c) * (ad @ a) + angular(cfg.epsilon) * (a + ad)
    for n, t in enumerate(cfg.tls):
        H = H + angular(t.Delta) / 2 * pauli("z", n, space)
        H = H + angular(t.g) * (a @ pauli("+", n, space) + ad @ pauli("-", n, space))
    return H


def build_transformed_hamiltonian(cfg, space=None, warn=DISPERSIVE_WARN,
                                  error=DISPERSIVE_ERROR) -> np.ndarray:
    """Effective Hamiltonian in the displaced, dispersively transformed frame.

    Resonator term ``Delta_c a^dag a`` (the drive is displaced away), effective
    single-TLS terms, pairwise exchange, and the residual coupling: the Stark
    shift and the drive-induced ``f_n sigma_nz (a + a^dag)``.
    """
    space = _space(cfg, space)
    cfg.check_dispersive(warn, error)
    p = dispersive.effective_params(cfg)
    a = annihilation(space)
    ad = a.conj().T
    nop = ad @ a
    H = angular(cfg.Delta_c) * nop
    for n in range(cfg.n_tls):
        sz = pauli("z", n, space)
        H = H + angular(p.Delta_tilde[n]) / 2 * sz + angular(p.Omega_x[n]) / 2 * pauli("x", n, space)
        H = H + angular(p.stark[n]) * (sz @ nop) + angular(p.f[n]) * (sz @ (a + ad))
        for m in range(n):
            flip = pauli("+", n, space) @ pauli("-", m, space)
            H = H + angular(p.lam[m, n]) / 2 * (flip + flip.conj().T)
    return H


def build_hamiltonian(cfg, frame="transformed", space=None) -> np.ndarray:
    if frame == "transformed":
        return build_transformed_hamiltonian(cfg, space)
    if frame == "lab":
        return build_full_hamiltonian(cfg, space)
    raise ValueError(f"unknown frame {frame!r}; expected one of {FRAMES}")


def collapse_operators(cfg, space=None, frame="lab", dressed_loss=False) -> list:
    """Resonator loss as a single Lindblad operator ``sqrt(kappa) * a``.

    With ``dressed_loss=True`` in the transformed frame the operator becomes
    the transformed mode ``a + sum_n (g_n/Delta_nc) sigma_n-``, which adds the
    Purcell-type TLS decay that the bare ``a`` channel cannot produce there
    (the transformed Hamiltonian has no TLS-resonator exchange).  The constant
    displacement is dropped either way.
    """
    if cfg.kappa < 0:
        raise ValueError(f"kappa must be non-negative, got {cfg.kappa}")
    if frame not in FRAMES:
        raise ValueError(f"unknown frame {frame!r}; expected one of {FRAMES}")
    if cfg.kappa == 0:
        return []
    space = _space(cfg, space)
    L = annihilation(space)
    if dressed_loss and frame == "transformed":
        for n, t in enumerate(cfg.tls):
            L = L + (t.g / cfg.Delta_nc(n)) * pauli("-", n, space)
    return [np.sqrt(rate_per_ns(cfg.kappa)) * L]


def transformation_unitary(cfg, space=None) -> np.ndarray:
    """Exact exponentials of the displacement and dispersive generators.

    ``U = D * prod_n S_n`` maps lab-frame states to the transformed frame,
    ``rho_t = U rho U^dag``.
    """
    space = _space(cfg, space)
    a = annihilation(space)
    ad = a.conj().T
    U = expm(-cfg.epsilon / cfg.Delta_c * (a - ad))
    for n, t in enumerate(cfg.tls):
        gen = ad @ pauli("-", n, space) - pauli("+", n, space) @ a
        U = U @ expm(-t.g / cfg.Delta_nc(n) * gen)
    return U


def resonator_initial_state(cfg, frame="transformed", dim=None) -> np.ndarray:
    """Initial resonator ket: vacuum (transformed) or coherent ``-eps/Delta_c`` (lab)."""
    dim = cfg.fock_cutoff if dim is None else dim
    if frame == "transformed":
        return fock_state(0, dim)
    if frame == "lab":
        return coherent_state(-cfg.epsilon / cfg.Delta_c, dim)
    raise ValueError(f"unknown frame {frame!r}; expected one of {FRAMES}")


def lab_fock_cutoff(cfg, minimum=None) -> int:
    """Fock cutoff covering the lab-frame coherent amplitude with 5-sigma headroom."""
    alpha = abs(cfg.epsilon / cfg.Delta_c)
    need = int(np.ceil(alpha**2 + 5 * max(alpha, 1.0))) + 1
    return max(need, cfg.fock_cutoff if minimum is None else minimum)
