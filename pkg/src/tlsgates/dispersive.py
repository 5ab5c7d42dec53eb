"""Closed-form dispersive-regime quantities.

All inputs and outputs are linear frequencies in MHz; every expression here is
homogeneous in frequency, so no factors of 2*pi appear.
"""
import math
import warnings
from dataclasses import dataclass

import numpy as np

RESONANCE_RTOL = 5e-3
REAL_TRANSITION_FACTOR = 10.0


class DispersiveError(ValueError):
    pass


class RealTransitionWarning(UserWarning):
    pass


def _nonzero(value, what):
    if value == 0:
        raise DispersiveError(f"{what} is zero; dispersive quantity undefined")
    return value


def effective_detuning(cfg, n: int) -> float:
    """Drive-shifted TLS detuning ``Delta_n + (g^2/Delta_nc)(1 - 2 eps/Delta_c)``."""
    t = cfg.tls[n]
    dnc = _nonzero(cfg.Delta_nc(n), f"Delta_nc for TLS {n}")
    dc = _nonzero(cfg.Delta_c, "Delta_c")
    return t.Delta + t.g**2 / dnc * (1 - 2 * cfg.epsilon / dc)


def rabi_frequency(cfg, n: int) -> float:
    dnc = _nonzero(cfg.Delta_nc(n), f"Delta_nc for TLS {n}")
    return 2 * cfg.epsilon * cfg.tls[n].g / dnc


def exchange_coupling(cfg, m: int, n: int) -> float:
    """Resonator-mediated flip-flop coupling between TLS ``m`` and ``n``."""
    dmc = _nonzero(cfg.Delta_nc(m), f"Delta_nc for TLS {m}")
    dnc = _nonzero(cfg.Delta_nc(n), f"Delta_nc for TLS {n}")
    return cfg.tls[m].g * cfg.tls[n].g * (dmc + dnc) / (dmc * dnc)


def stark_shift(cfg, n: int) -> float:
    """Coefficient of ``sigma_nz a^dag a``."""
    return cfg.tls[n].g ** 2 / _nonzero(cfg.Delta_nc(n), f"Delta_nc for TLS {n}")


def residual_drive_coefficient(cfg, n: int) -> float:
    """Coefficient ``f_n`` of the drive-induced ``sigma_nz (a + a^dag)`` coupling."""
    dnc = _nonzero(cfg.Delta_nc(n), f"Delta_nc for TLS {n}")
    dc = _nonzero(cfg.Delta_c, "Delta_c")
    return cfg.tls[n].g ** 2 / dnc * cfg.epsilon * (dc - 2 * dnc) / (2 * dnc * dc)


def dressed_energy(cfg, n: int):
    """Return ``(E_n, theta_n)``: splitting and tilt of the dressed quantisation axis.

    ``E_n = 0`` is degenerate and returns ``theta_n = 0``.
    """
    dt = effective_detuning(cfg, n)
    om = rabi_frequency(cfg, n)
    E = math.hypot(dt, om)
    if E == 0.0:
        return 0.0, 0.0
    return E, math.atan2(om, dt)


def two_qubit_coefficients(cfg, pair=(0, 1), resonance_rtol=RESONANCE_RTOL):
    """``(beta_1, beta_2, beta_2_prime)`` for a pair brought into dressed resonance.

    Requires ``E_1 ~= E_2`` within ``resonance_rtol``.  A
    :class:`RealTransitionWarning` is issued when either dressed energy comes
    within ``10 |lambda_12|`` of ``Delta_c``.
    """
    i, j = pair
    E1, _ = dressed_energy(cfg, i)
    E2, _ = dressed_energy(cfg, j)
    if E1 == 0 or abs(E1 - E2) > resonance_rtol * max(E1, E2):
        raise DispersiveError(
            f"TLS pair {pair} not in dressed resonance: E = ({E1:.6g}, {E2:.6g}) MHz"
        )
    lam = exchange_coupling(cfg, i, j)
    d1, d2 = effective_detuning(cfg, i), effective_detuning(cfg, j)
    o1, o2 = rabi_frequency(cfg, i), rabi_frequency(cfg, j)
    beta_1 = lam * o1 * o2 / (4 * E1**2)
    beta_2 = lam / 4 * (1 + d1 * d2 / E1**2)
    dc = cfg.Delta_c
    if min(abs(E1 - dc), abs(E2 - dc)) < REAL_TRANSITION_FACTOR * abs(lam):
        warnings.warn(
            f"dressed energies ({E1:.4g}, {E2:.4g}) MHz within {REAL_TRANSITION_FACTOR:g}"
            f" |lambda| of Delta_c = {dc}; real resonator transitions likely",
            RealTransitionWarning,
            stacklevel=2,
        )
    f1, f2 = residual_drive_coefficient(cfg, i), residual_drive_coefficient(cfg, j)
    correction = f1 * f2 * (E1 + E2 - 2 * dc) / (2 * (E1 - dc) * (E2 - dc))
    return beta_1, beta_2, beta_2 + correction


@dataclass(frozen=True)
class EffectiveParams:
    Delta_tilde: np.ndarray
    Omega_x: np.ndarray
    E: np.ndarray
    theta: np.ndarray
    f: np.ndarray
    stark: np.ndarray
    lam: np.ndarray  # symmetric, zero diagonal
    beta: tuple = None  # (beta_1, beta_2, beta_2_prime) for the designated pair


def effective_params(cfg, pair=None) -> EffectiveParams:
    n = cfg.n_tls
    dt = np.array([effective_detuning(cfg, k) for k in range(n)])
    om = np.array([rabi_frequency(cfg, k) for k in range(n)])
    dressed = [dressed_energy(cfg, k) for k in range(n)]
    lam = np.zeros((n, n))
    for m in range(n):
        for k in range(m + 1, n):
            lam[m, k] = lam[k, m] = exchange_coupling(cfg, m, k)
    return EffectiveParams(
        Delta_tilde=dt,
        Omega_x=om,
        E=np.array([d[0] for d in dressed]),
        theta=np.array([d[1] for d in dressed]),
        f=np.array([residual_drive_coefficient(cfg, k) for k in range(n)]),
        stark=np.array([stark_shift(cfg, k) for k in range(n)]),
        lam=lam,
        beta=None if pair is None else two_qubit_coefficients(cfg, pair),
    )
