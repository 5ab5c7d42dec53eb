"""Fixed-step RK4 integration of the Lindblad master equation.

States may be a single ``d x d`` density matrix or a stack ``(B, d, d)``;
stacks are propagated together, which is how gate channels are built.
Hamiltonians are in rad/ns and times in ns.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .calibration import Segment
from .config import DispersiveValidityError
from .fidelity import Channel
from .hamiltonian import (
    build_hamiltonian,
    collapse_operators,
    lab_fock_cutoff,
    resonator_initial_state,
)
from .operators import partial_trace_resonator, projector

log = logging.getLogger(__name__)

STEPS_PER_PERIOD = 20  # step <= 0.05 / f_max
TRACE_TOL = 1e-6
NEGATIVITY_TOL = 1e-6


class SimulationDiagnosticError(RuntimeError):
    pass


@dataclass
class SimulationTrace:
    times: np.ndarray
    states: np.ndarray  # (n_samples, [B,] d, d)
    step: float
    trace_deviation: np.ndarray  # per step, worst over the batch
    hermiticity_deviation: np.ndarray  # per step, before re-symmetrisation
    min_eigenvalue: np.ndarray  # at the check times
    check_times: np.ndarray
    failed: bool = False
    notes: list = field(default_factory=list)

    @property
    def final(self):
        return self.states[-1]


def lindblad_rhs(H, collapse, rho):
    """``-i[H, rho] + sum_k (C rho C^dag - {C^dag C, rho}/2)``."""
    H = np.asarray(H)
    rho = np.asarray(rho)
    if rho.shape[-2:] != H.shape:
        raise ValueError(f"state shape {rho.shape[-2:]} does not match H {H.shape}")
    out = -1j * (H @ rho - rho @ H)
    for C in collapse:
        if C.shape != H.shape:
            raise ValueError(f"collapse operator shape {C.shape} does not match H {H.shape}")
        Cd = C.conj().T
        CdC = Cd @ C
        out = out + C @ rho @ Cd - 0.5 * (CdC @ rho + rho @ CdC)
    return out


class _Generator:
    """Lindbladian prepared for repeated evaluation."""

    def __init__(self, H, collapse):
        H = np.asarray(H, dtype=complex)
        w = np.linalg.eigvalsh(0.5 * (H + H.conj().T))
        self.spectral_radius = float(np.max(np.abs(w)))
        # The commutator ignores a constant shift; centre the spectrum for accuracy.
        H = H - 0.5 * (w[0] + w[-1]) * np.eye(H.shape[0])
        damp = sum((C.conj().T @ C for C in collapse), np.zeros_like(H))
        self.damping = float(np.linalg.norm(damp, 2)) if collapse else 0.0
        self.heff = H - 0.5j * damp
        self.heff_d = self.heff.conj().T
        self.collapse = [(C, C.conj().T) for C in collapse]

    def __call__(self, rho):
        out = -1j * (self.heff @ rho - rho @ self.heff_d)
        for C, Cd in self.collapse:
            out += C @ rho @ Cd
        return out

    def auto_step(self):
        """``0.05 / f_max``, ``f_max`` the largest ``|eigenvalue|`` of H as a linear frequency (1/ns)."""
        f_max = (self.spectral_radius + 0.5 * self.damping) / (2 * math.pi)
        return 1.0 / (STEPS_PER_PERIOD * f_max) if f_max > 0 else math.inf


def _min_eig(rho):
    return float(np.min(np.linalg.eigvalsh(rho)))


def propagate(H, collapse, rho0, duration, step=None, n_samples=2, n_checks=20,
              trace_tol=TRACE_TOL, negativity_tol=NEGATIVITY_TOL, raise_on_failure=True):
    """Integrate from ``rho0`` for ``duration`` ns with a fixed RK4 step.

    The step is shrunk so an integer number of steps lands exactly on
    ``duration``.  ``rho`` is re-symmetrised after every step.  Trace drift or
    negativity beyond tolerance marks the trace failed and, by default,
    aborts at once with :class:`SimulationDiagnosticError`.
    """
    gen = _Generator(H, collapse)
    rho = np.array(rho0, dtype=complex)
    step = gen.auto_step() if step is None else float(step)
    if duration < 0:
        raise ValueError("duration must be non-negative")
    n_steps = max(1, math.ceil(duration / step - 1e-9)) if duration > 0 else 0
    h = duration / n_steps if n_steps else 0.0
    tr0 = np.trace(rho, axis1=-2, axis2=-1)
    sample_at = set(np.linspace(0, n_steps, max(n_samples, 2)).round().astype(int))
    check_at = set(np.linspace(0, n_steps, max(n_checks, 2)).round().astype(int))
    times, states, checks, mins = [], [], [], []
    tr_dev = np.zeros(n_steps + 1)
    herm_dev = np.zeros(n_steps + 1)
    failed, notes = False, []

    def flag(msg):
        nonlocal failed
        failed = True
        notes.append(msg)
        if raise_on_failure:
            raise SimulationDiagnosticError(f"{msg} (step {h * 1e3:.3f} ps); try a smaller --step-ps")

    def record(k):
        if k in sample_at:
            times.append(k * h)
            states.append(rho.copy())
        if k in check_at:
            m = _min_eig(rho) if rho.ndim == 2 else min(_min_eig(r) for r in rho)
            checks.append(k * h)
            mins.append(m)
            if not m >= -negativity_tol:
                flag(f"negativity {m:.3e} at t={k * h:.4f} ns")

    record(0)
    for k in range(1, n_steps + 1):
        k1 = gen(rho)
        k2 = gen(rho + 0.5 * h * k1)
        k3 = gen(rho + 0.5 * h * k2)
        k4 = gen(rho + h * k3)
        rho = rho + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        rho_d = np.swapaxes(rho.conj(), -1, -2)
        herm_dev[k] = np.max(np.abs(rho - rho_d))
        rho = 0.5 * (rho + rho_d)
        tr_dev[k] = np.max(np.abs(np.trace(rho, axis1=-2, axis2=-1) - tr0))
        if not tr_dev[k] <= trace_tol and not failed:
            flag(f"trace drift {tr_dev[k]:.3e} at t={k * h:.4f} ns")
        record(k)
    trace = SimulationTrace(
        times=np.array(times), states=np.array(states), step=h,
        trace_deviation=tr_dev, hermiticity_deviation=herm_dev,
        min_eigenvalue=np.array(mins), check_times=np.array(checks),
        failed=failed, notes=notes,
    )
    return trace


def evolve(segment: Segment, cfg, rho0, step=None, frame="transformed", dressed_loss=False,
           **kw) -> SimulationTrace:
    """Evolve ``rho0`` through one constant-drive segment of a gate plan."""
    seg_cfg = segment.apply(cfg)
    H = build_hamiltonian(seg_cfg, frame)
    C = collapse_operators(seg_cfg, frame=frame, dressed_loss=dressed_loss)
    return propagate(H, C, rho0, segment.duration, step, **kw)


def probe_states(d):
    """``d^2`` pure states whose projectors span all ``d x d`` matrices.

    Returns ``(states, coeffs)`` with ``|i><j| = sum_k coeffs[i, j, k] states[k]``.
    """
    kets, index = [], {}
    for i in range(d):
        v = np.zeros(d, complex)
        v[i] = 1
        index[("d", i)] = len(kets)
        kets.append(v)
    for i, j in itertools.combinations(range(d), 2):
        for tag, ph in (("x", 1.0), ("y", 1j)):
            v = np.zeros(d, complex)
            v[i], v[j] = 1 / math.sqrt(2), ph / math.sqrt(2)
            index[(tag, i, j)] = len(kets)
            kets.append(v)
    coeffs = np.zeros((d, d, d * d), complex)
    for i in range(d):
        coeffs[i, i, index[("d", i)]] = 1
    # |x><x| = (Eii + Eij + Eji + Ejj)/2 and |y><y| = (Eii - i Eij + i Eji + Ejj)/2
    for i, j in itertools.combinations(range(d), 2):
        x, y = index[("x", i, j)], index[("y", i, j)]
        for (a, b), sgn in (((i, j), 1), ((j, i), -1)):
            coeffs[a, b, x] += 1
            coeffs[a, b, y] += 1j * sgn
            coeffs[a, b, index[("d", i)]] -= (1 + 1j * sgn) / 2
            coeffs[a, b, index[("d", j)]] -= (1 + 1j * sgn) / 2
    return np.array([projector(v) for v in kets]), coeffs


@dataclass
class ChannelResult:
    channel: Channel
    traces: list
    fock_cutoff: int
    frame: str


def simulate_gate_channel(plan, cfg, resonator_init=None, frame="transformed", step=None,
                          fock_cutoff=None, dressed_loss=False) -> ChannelResult:
    """Process of a gate plan on the TLS register.

    Each probe state of the register is tensored with the resonator's initial
    state, propagated through every segment, and reduced by tracing out the
    resonator; linearity then gives the full channel.  ``resonator_init`` is a
    ket; the default is the frame's natural start (vacuum when transformed,
    the coherent displacement of the first segment in the lab frame).
    ``dressed_loss`` is passed to :func:`collapse_operators`.
    """
    if fock_cutoff is not None:
        cfg = cfg.replace(fock_cutoff=fock_cutoff)
    first = plan.segments[0].apply(cfg)
    if frame == "lab":
        need = max(lab_fock_cutoff(s.apply(cfg)) for s in plan.segments)
        if need > cfg.fock_cutoff and fock_cutoff is None:
            log.info("raising Fock cutoff to %d for lab-frame run", need)
            cfg = cfg.replace(fock_cutoff=need)
            first = plan.segments[0].apply(cfg)
    space = cfg.space
    if resonator_init is None:
        resonator_init = resonator_initial_state(first, frame)
    res = projector(resonator_init)
    d = space.tls_dim
    probes, coeffs = probe_states(d)
    rho = np.array([np.kron(p, res) for p in probes])
    traces = []
    for seg in plan.segments:
        if seg.duration == 0:
            continue
        try:
            tr = evolve(seg, cfg, rho, step=step, frame=frame, dressed_loss=dressed_loss)
        except DispersiveValidityError as exc:
            raise DispersiveValidityError(
                f"{exc}; segment {seg} cannot be simulated in the {frame} frame"
            ) from None
        traces.append(tr)
        rho = tr.final
    reduced = partial_trace_resonator(rho, space)
    outputs = np.einsum("ijk,kab->ijab", coeffs, reduced)
    return ChannelResult(Channel.from_outputs(outputs), traces, cfg.fock_cutoff, frame)
