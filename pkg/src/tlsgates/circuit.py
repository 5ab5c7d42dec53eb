"""RF-SQUID junction resonator in the harmonic approximation.

SI units throughout: ``E_J`` is given as an angular frequency (rad/s, so the
Josephson energy is ``hbar * E_J``), capacitance in farads, inductance in
henries, flux in webers and currents in amperes.  Returned frequencies are
angular (rad/s).

The circuit layer is optional: gate calibration works directly on effective
parameters.  Circuits with several junctions on one island are not modelled
separately; they reduce to the same effective coupled-TLS description, with
a resonator frequency that drops as junctions are added.
"""
import math
from dataclasses import dataclass

from scipy.constants import e as E_CHARGE, hbar as HBAR

FLUX_PHASE = 2 * E_CHARGE / HBAR  # phase per unit flux, 2e/hbar (1/Wb)
NONLINEAR_PHASE_LIMIT = 0.1


class CircuitError(ValueError):
    pass


class PhaseShiftConvergenceError(CircuitError):
    pass


@dataclass(frozen=True)
class CircuitParams:
    E_J: float
    C0: float
    L: float
    Phi_ex: float = 0.0
    delta_Ic: float = 0.0
    j_x: tuple = ()

    def __post_init__(self):
        if not (self.E_J > 0 and self.C0 > 0 and self.L > 0):
            raise CircuitError("E_J, C0 and L must all be positive")
        if any(j < 0 for j in self.j_x):
            raise CircuitError("coupling magnitudes j_x must be non-negative")

    @property
    def screening(self) -> float:
        """Dimensionless ``(2e/hbar)^2 L hbar E_J``; above 1 the flux map is multi-valued."""
        return FLUX_PHASE**2 * self.L * HBAR * self.E_J

    @staticmethod
    def inductance_matched(E_J: float) -> float:
        """Inductance satisfying ``1/L = 4 e^2 E_J / hbar^2`` (screening parameter 1)."""
        return 1.0 / (FLUX_PHASE**2 * HBAR * E_J)


def phase_shift_residual(p: CircuitParams, Phi_s: float) -> float:
    """Residual of the equilibrium condition, divided by hbar (units of flux)."""
    return Phi_s + 2 * E_CHARGE * p.L * p.E_J * math.sin(FLUX_PHASE * Phi_s) + p.Phi_ex


def solve_phase_shift(p: CircuitParams, max_iter: int = 200, rtol: float = 1e-13) -> float:
    """Equilibrium phase shift ``Phi_s`` of the biased SQUID loop.

    Damped Newton iteration in the dimensionless phase ``phi = 2e Phi / hbar``
    started from ``Phi_s = -Phi_ex``; the step is halved whenever the residual
    grows.  Raises :class:`PhaseShiftConvergenceError` if the cap is reached,
    which happens when the screening parameter is large and the flux map has
    several branches.
    """
    beta = p.screening
    target = -FLUX_PHASE * p.Phi_ex

    def f(x):
        return x + beta * math.sin(x) - target

    x = target
    fx = f(x)
    scale = max(abs(target), 1.0)
    for _ in range(max_iter):
        if abs(fx) <= rtol * scale:
            return x / FLUX_PHASE
        deriv = 1.0 + beta * math.cos(x)
        if deriv == 0.0:
            deriv = 1e-12
        step = -fx / deriv
        for _ in range(60):
            x_new = x + step
            f_new = f(x_new)
            if abs(f_new) < abs(fx):
                break
            step *= 0.5
        x, fx = x_new, f_new
    raise PhaseShiftConvergenceError(
        f"phase-shift Newton iteration did not converge in {max_iter} steps "
        f"(screening 2eL*E_J*(2e/hbar) = {beta:.3g}; values > 1 give a multi-valued flux map)"
    )


def resonator_frequency(p: CircuitParams, Phi_s: float) -> float:
    radicand = 1.0 / (p.L * p.C0) + (
        FLUX_PHASE**2 * HBAR * p.E_J * math.cos(FLUX_PHASE * Phi_s) / p.C0
    )
    if radicand <= 0:
        raise CircuitError(
            f"resonator unstable at this flux bias: omega_c^2 = {radicand:.4g} rad^2/s^2"
        )
    return math.sqrt(radicand)


def zero_point_flux(p: CircuitParams, omega_c: float) -> float:
    """``sqrt(hbar / (2 C0 omega_c))``: flux per unit ``a + a^dag``."""
    return math.sqrt(HBAR / (2 * p.C0 * omega_c))


def coupling_constant(p: CircuitParams, omega_c: float, Phi_s: float, site: int) -> float:
    """TLS-resonator coupling ``g_n`` (rad/s) from the critical-current mechanism.

    ``j_x`` is dimensionless, so the junction-phase factor ``2e/hbar`` is
    written out explicitly.
    """
    if omega_c <= 0:
        raise CircuitError("omega_c must be positive")
    return (
        p.E_J * p.j_x[site] * FLUX_PHASE * zero_point_flux(p, omega_c)
        * math.sin(FLUX_PHASE * Phi_s)
    )


def drive_amplitude_and_bound(p: CircuitParams, omega_c: float):
    """Return ``(epsilon, bound_ok)`` for the applied drive current.

    ``epsilon`` is in rad/s.  The bound keeps the driven phase oscillation
    ``|2e dPhi_d / hbar|`` below 0.1 so the Josephson nonlinearity stays small.
    """
    if omega_c <= 0:
        raise CircuitError("omega_c must be positive")
    epsilon = p.delta_Ic * zero_point_flux(p, omega_c) / HBAR
    dphi = p.delta_Ic / (p.C0 * omega_c**2)
    return epsilon, abs(FLUX_PHASE * dphi) < NONLINEAR_PHASE_LIMIT


def max_drive_amplitude(p: CircuitParams, omega_c: float) -> float:
    """Largest ``epsilon`` (rad/s) compatible with the nonlinearity bound."""
    delta_Ic = NONLINEAR_PHASE_LIMIT / FLUX_PHASE * p.C0 * omega_c**2
    return delta_Ic * zero_point_flux(p, omega_c) / HBAR


def flux_for_phase_shift(p: CircuitParams, Phi_s: float) -> float:
    """External flux that produces a given equilibrium shift (inverse map)."""
    return -(Phi_s + 2 * E_CHARGE * p.L * p.E_J * math.sin(FLUX_PHASE * Phi_s))
