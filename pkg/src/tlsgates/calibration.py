"""Gate calibration: drive settings, durations, targets and decoherence estimates.

Frequencies in MHz, durations in ns, decay rates in 1/us.
"""
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import dispersive as dsp
from .config import DISPERSIVE_ERROR
from .operators import SIGMA, expm_hermitian, kron, tls_operator
from .units import angular, duration_ns

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)
CZ = np.diag([1, 1, 1, -1]).astype(complex)

ROOT_SCAN_STEP = 1.0  # MHz
CLOSURE_TOL = 1e-6  # MHz, on E_1 - E_2


class CalibrationError(ValueError):
    pass


class DegenerateCalibrationError(CalibrationError):
    pass


@dataclass(frozen=True)
class Segment:
    Delta_c: float
    epsilon: float
    duration: float  # ns

    def apply(self, cfg):
        """Config with this segment's resonator detuning and drive."""
        return cfg.replace(Delta_c=self.Delta_c, epsilon=self.epsilon)


@dataclass(frozen=True)
class GatePlan:
    kind: str  # X, Hadamard, SWAP or CiracZoller
    segments: tuple
    target_unitary: np.ndarray  # on the full TLS register
    frame: str  # "lab-rotating" or "dressed-interaction"
    targets: tuple  # TLS indices the gate acts on
    theta: tuple = ()  # dressed-axis tilt per TLS, used for phase compensation
    compensate: tuple = ()  # TLS indices whose local z phases are not errors
    phases: dict = field(default_factory=dict)
    flags: tuple = ()
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.segments:
            raise ValueError("a gate plan needs at least one segment")
        if any(s.duration < 0 for s in self.segments):
            raise ValueError("segment durations must be non-negative")

    @property
    def duration(self) -> float:
        return sum(s.duration for s in self.segments)


@dataclass(frozen=True)
class DecoherenceEstimate:
    tau_g: float  # ns
    tau_d_inverse: float  # 1/us
    ratio: float
    fidelity_estimate: float
    segments: tuple = ()  # per-segment (tau_g, tau_d_inverse, ratio)


def _check_bound(cfg, eps, what):
    if abs(eps) > cfg.drive_bound:
        raise CalibrationError(
            f"{what}: required drive |epsilon| = {abs(eps):.6g} MHz exceeds the bound "
            f"{cfg.drive_bound} MHz (Delta_c={cfg.Delta_c})"
        )


def single_qubit_target(gate2: np.ndarray, target: int, n_tls: int) -> np.ndarray:
    return tls_operator(gate2, target, n_tls)


def spectator_diagnostics(cfg, target: int) -> dict:
    """Protection ratios for every TLS other than ``target``.

    ``Omega_m/|Delta~_m|`` should be small (only a dynamic phase is picked up)
    and ``|lambda_tm| / |Delta~_t - Delta~_m|`` small (no conditional phase).
    """
    out = {}
    p = dsp.effective_params(cfg)
    for m in range(cfg.n_tls):
        if m == target:
            continue
        rot = abs(p.Omega_x[m]) / abs(p.Delta_tilde[m]) if p.Delta_tilde[m] else math.inf
        gap = abs(p.Delta_tilde[target] - p.Delta_tilde[m])
        exch = abs(p.lam[target, m]) / gap if gap else math.inf
        out[m] = {"rabi_over_detuning": rot, "exchange_over_gap": exch}
    return out


def x_drive(cfg, n: int) -> float:
    """Drive amplitude that cancels the effective detuning of TLS ``n``."""
    t = cfg.tls[n]
    if t.g == 0:
        raise DegenerateCalibrationError(f"TLS {n} is uncoupled (g = 0)")
    return (t.Delta * cfg.Delta_nc(n) + t.g**2) * cfg.Delta_c / (2 * t.g**2)


def hadamard_drive(cfg, n: int) -> float:
    """Drive amplitude with effective detuning equal to the Rabi frequency.

    Obtained by solving the linear condition directly; it reproduces the
    tabulated operating point (eps = -32 MHz at Delta_c = 160 MHz).
    """
    t = cfg.tls[n]
    if t.g == 0 or cfg.Delta_c + t.g == 0:
        raise DegenerateCalibrationError(f"Hadamard condition singular for TLS {n}")
    return (t.Delta * cfg.Delta_nc(n) + t.g**2) * cfg.Delta_c / (2 * t.g * (cfg.Delta_c + t.g))


def _single_qubit_plan(cfg, target, kind, eps, angle, gate2):
    _check_bound(cfg, eps, f"{kind} on TLS {target}")
    tuned = cfg.replace(epsilon=eps)
    omega = dsp.rabi_frequency(tuned, target)
    if omega == 0:
        raise DegenerateCalibrationError(
            f"{kind} on TLS {target}: Rabi frequency vanishes at epsilon = {eps:.6g} MHz "
            "(the condition already holds without drive); gate unreachable"
        )
    seg = Segment(cfg.Delta_c, eps, duration_ns(angle, omega))
    p = dsp.effective_params(tuned)
    spectators = tuple(m for m in range(cfg.n_tls) if m != target)
    return GatePlan(
        kind=kind,
        segments=(seg,),
        target_unitary=single_qubit_target(gate2, target, cfg.n_tls),
        frame="lab-rotating",
        targets=(target,),
        theta=tuple(float(x) for x in p.theta),
        compensate=spectators,
        phases={"spectator_precession": {m: angular(p.E[m]) * seg.duration for m in spectators}},
        diagnostics={
            "Omega_x": omega,
            "Delta_tilde": float(p.Delta_tilde[target]),
            "spectators": spectator_diagnostics(tuned, target),
        },
    )


def calibrate_x(cfg, target: int = 0) -> GatePlan:
    return _single_qubit_plan(cfg, target, "X", x_drive(cfg, target), math.pi, SIGMA["x"])


def calibrate_hadamard(cfg, target: int = 0) -> GatePlan:
    return _single_qubit_plan(
        cfg, target, "Hadamard", hadamard_drive(cfg, target), math.pi / math.sqrt(2), HADAMARD
    )


def dressed_rotation(theta: float) -> np.ndarray:
    """``R`` with ``R sigma_z R^dag = cos(theta) sigma_z + sin(theta) sigma_x``."""
    return expm_hermitian(SIGMA["y"] / 2, theta)


def _energy_gap(cfg, pair):
    def h(eps):
        c = cfg.replace(epsilon=eps)
        return dsp.dressed_energy(c, pair[0])[0] - dsp.dressed_energy(c, pair[1])[0]

    return h


def find_resonant_drives(cfg, pair=(0, 1), step=ROOT_SCAN_STEP):
    """All drives in ``[0, drive_bound]`` where the two dressed energies coincide."""
    h = _energy_gap(cfg, pair)
    grid = np.arange(0.0, cfg.drive_bound + 0.5 * step, step)
    grid[-1] = min(grid[-1], cfg.drive_bound)
    vals = np.array([h(e) for e in grid])
    scale = max(1.0, float(np.max(np.abs(vals))))
    if np.all(np.abs(vals) < 1e-12 * scale):
        raise DegenerateCalibrationError(
            f"TLS pair {pair} is resonant at every drive (identical fluctuators)"
        )
    roots = []
    for k in range(len(grid) - 1):
        a, b = vals[k], vals[k + 1]
        if a == 0.0:
            roots.append(float(grid[k]))
        elif a * b < 0:
            roots.append(brentq(h, grid[k], grid[k + 1], xtol=1e-12, maxiter=200))
    if vals[-1] == 0.0:
        roots.append(float(grid[-1]))
    return roots


def _pair_target(H12_dressed, theta_pair, tau, pair, n_tls):
    R = kron(*(dressed_rotation(t) for t in theta_pair))
    S0 = R @ expm_hermitian(H12_dressed, tau) @ R.conj().T
    if n_tls == 2:
        return S0 if tuple(pair) == (0, 1) else SWAP @ S0 @ SWAP
    # Embed with identity on the other fluctuators by permuting the pair to the front.
    order = list(pair) + [k for k in range(n_tls) if k not in pair]
    full = np.kron(S0, np.eye(2 ** (n_tls - 2)))
    t = full.reshape([2] * (2 * n_tls))
    inv = np.argsort(order)
    t = t.transpose(list(inv) + [n_tls + k for k in inv])
    return t.reshape(2**n_tls, 2**n_tls)


def calibrate_two_qubit(cfg, pair=(0, 1)) -> GatePlan:
    """SWAP-type gate: drive both fluctuators into dressed resonance.

    The target is ``exp(-i H12 tau)`` with ``H12 = beta_1 sz sz +
    beta_2' (s+ s- + h.c.)`` in the dressed basis, which is SWAP up to the
    phase factors from ``beta_1`` recorded in ``phases``.
    """
    flags = []
    roots = find_resonant_drives(cfg, pair)
    if not roots:
        raise CalibrationError(
            f"no drive in [0, {cfg.drive_bound}] MHz brings TLS pair {pair} into resonance "
            f"(Delta_c={cfg.Delta_c})"
        )
    if len(roots) > 1:
        flags.append("multiple_roots")
    eps = min(roots, key=abs)
    tuned = cfg.replace(epsilon=eps)
    p = dsp.effective_params(tuned)
    i, j = pair
    closure = abs(p.E[i] - p.E[j])
    if closure > CLOSURE_TOL:
        raise CalibrationError(f"resonance closure |E1-E2| = {closure:.3e} MHz")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        beta_1, beta_2, beta_2p = dsp.two_qubit_coefficients(tuned, pair)
    if any(issubclass(w.category, dsp.RealTransitionWarning) for w in caught):
        flags.append("real_transition_risk")
    tau = duration_ns(math.pi / 2, beta_2p)
    b1, b2p = angular(beta_1), angular(beta_2p)
    sz, sp, sm = SIGMA["z"], SIGMA["+"], SIGMA["-"]
    H12 = b1 * np.kron(sz, sz) + b2p * (np.kron(sp, sm) + np.kron(sm, sp))
    target = _pair_target(H12, (p.theta[i], p.theta[j]), tau, pair, cfg.n_tls)
    return GatePlan(
        kind="SWAP",
        segments=(Segment(cfg.Delta_c, eps, tau),),
        target_unitary=target,
        frame="dressed-interaction",
        targets=tuple(pair),
        theta=tuple(float(x) for x in p.theta),
        compensate=tuple(range(cfg.n_tls)),
        phases={
            "beta_1_phase": b1 * tau,
            "dressed_precession": {k: angular(p.E[k]) * tau for k in range(cfg.n_tls)},
        },
        flags=tuple(flags),
        diagnostics={
            "epsilon": eps,
            "E": tuple(float(x) for x in p.E),
            "lambda": float(p.lam[i, j]),
            "beta_1": beta_1,
            "beta_2": beta_2,
            "beta_2_prime": beta_2p,
            "f": tuple(float(x) for x in p.f),
            "roots": tuple(roots),
        },
    )


def cirac_zoller_plan(cfg, pair=(0, 1), phase_detuning=120.0) -> GatePlan:
    """Three-segment controlled-phase gate using the resonator as a bus.

    Resonant swap of the first TLS into the resonator (``Delta_c = Delta_1``,
    no drive, ``pi/2g_1``), a Stark-shift conditional phase on the second TLS
    at ``Delta_2c = phase_detuning`` for ``pi Delta_2c / 2 g_2^2``, then the
    swap again.  The target is CZ up to single-qubit phases.
    """
    i, j = pair
    t1, t2 = cfg.tls[i], cfg.tls[j]
    if t1.g == 0 or t2.g == 0:
        raise DegenerateCalibrationError("both fluctuators need nonzero coupling")
    if phase_detuning == 0:
        raise CalibrationError("phase segment needs a nonzero TLS-resonator detuning")
    ratio = abs(t2.g / phase_detuning)
    if ratio > DISPERSIVE_ERROR:
        raise CalibrationError(
            f"phase segment not dispersive: g_2/|Delta_2c| = {ratio:.3g} (Delta_2c={phase_detuning})"
        )
    swap = Segment(t1.Delta, 0.0, duration_ns(math.pi / 2, t1.g))
    t_cg = math.pi * abs(angular(phase_detuning)) / (2 * angular(t2.g) ** 2)
    phase = Segment(t2.Delta - phase_detuning, 0.0, t_cg)
    if cfg.n_tls == 2 and tuple(pair) == (0, 1):
        target = CZ
    else:
        target = _pair_target(np.diag([0, 0, 0, math.pi]).astype(complex), (0.0, 0.0), 1.0,
                              pair, cfg.n_tls)
    flags = ("phase_segment_marginal",) if ratio > 0.25 else ()
    return GatePlan(
        kind="CiracZoller",
        segments=(swap, phase, swap),
        target_unitary=target,
        frame="lab-rotating",
        targets=tuple(pair),
        theta=(0.0,) * cfg.n_tls,
        compensate=tuple(range(cfg.n_tls)),
        phases={"stark_phase": 2 * angular(t2.g**2 / phase_detuning) * t_cg},
        flags=flags,
        diagnostics={"Delta_2c": phase_detuning, "t_cg": t_cg, "t_swap": swap.duration},
    )


def _segment_rate(plan, seg_index, seg, cfg):
    if plan.kind == "CiracZoller":
        if seg_index == 1:
            j = plan.targets[1]
            g = cfg.tls[j].g
            return g**2 * cfg.kappa / plan.diagnostics["Delta_2c"] ** 2
        return cfg.kappa / 2
    tuned = seg.apply(cfg)
    return max(
        tuned.tls[n].g ** 2 * cfg.kappa / tuned.Delta_nc(n) ** 2 for n in plan.targets
    )


def decoherence_estimate(plan: GatePlan, cfg) -> DecoherenceEstimate:
    """Gate time against induced decoherence, ``F ~ exp(-tau_g/tau_d)``.

    Dispersive gates decay at ``g_n^2 kappa / Delta_nc^2`` (largest over the
    fluctuators involved); the resonant swap segments of the Cirac-Zoller gate
    at ``kappa/2``.
    """
    if cfg.kappa < 0:
        raise ValueError("kappa must be non-negative")
    per = []
    total = 0.0
    for k, seg in enumerate(plan.segments):
        rate = _segment_rate(plan, k, seg, cfg)
        r = seg.duration * rate * 1e-3
        per.append((seg.duration, rate, r))
        total += r
    tau = plan.duration
    return DecoherenceEstimate(
        tau_g=tau,
        tau_d_inverse=total / (tau * 1e-3) if tau > 0 else 0.0,
        ratio=total,
        fidelity_estimate=math.exp(-total),
        segments=tuple(per),
    )


def residual_dephasing_rate(cfg, n: int) -> float:
    """Order-of-magnitude dephasing ``eps^2 g^4 kappa / Delta_nc^6`` in 1/us."""
    dnc = cfg.Delta_nc(n)
    if dnc == 0:
        raise dsp.DispersiveError(f"Delta_nc for TLS {n} is zero")
    return cfg.epsilon**2 * cfg.tls[n].g ** 4 * cfg.kappa / dnc**6


def fluctuation_spectrum(omega, omega_c, kappa):
    """Lorentzian resonator fluctuation spectrum ``kappa / ((w - w_c)^2 + kappa^2/4)``."""
    return kappa / ((np.asarray(omega) - omega_c) ** 2 + kappa**2 / 4)
