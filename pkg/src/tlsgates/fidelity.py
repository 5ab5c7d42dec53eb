"""Quantum channels on the TLS register and average gate fidelity.

Channels are stored as superoperators in the column-stacking convention,
``vec(E(rho)) = S @ vec(rho)`` with ``vec`` stacking columns.
"""
import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .calibration import dressed_rotation
from .operators import SIGMA, kron

GRID_POINTS = 64


def vec(rho):
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v, d):
    return np.asarray(v).reshape(d, d, order="F")


class Channel:
    """Linear map on ``d x d`` matrices."""

    def __init__(self, superop):
        superop = np.asarray(superop, dtype=complex)
        d2 = superop.shape[0]
        d = int(round(np.sqrt(d2)))
        if superop.shape != (d2, d2) or d * d != d2:
            raise ValueError(f"superoperator has invalid shape {superop.shape}")
        self.superop = superop
        self.d = d

    @classmethod
    def from_outputs(cls, outputs):
        """Build from ``outputs[i][j] = E(|i><j|)``."""
        outputs = np.asarray(outputs)
        d = outputs.shape[0]
        S = np.zeros((d * d, d * d), dtype=complex)
        for i, j in itertools.product(range(d), range(d)):
            S[:, i + j * d] = vec(outputs[i, j])
        return cls(S)

    @classmethod
    def from_unitary(cls, U):
        U = np.asarray(U, dtype=complex)
        return cls(np.kron(U.conj(), U))

    @classmethod
    def identity(cls, d):
        return cls(np.eye(d * d))

    @classmethod
    def depolarizing(cls, d, p=1.0):
        """``rho -> (1-p) rho + p tr(rho) I/d``."""
        full = np.outer(vec(np.eye(d)), vec(np.eye(d))) / d
        return cls((1 - p) * np.eye(d * d) + p * full)

    def __call__(self, rho):
        return unvec(self.superop @ vec(rho), self.d)

    def compose(self, after: "Channel") -> "Channel":
        """The channel ``after o self``."""
        return Channel(after.superop @ self.superop)

    def trace_deviation(self) -> float:
        """Largest ``|tr E(|i><j|) - delta_ij|`` over matrix units."""
        d = self.d
        tr_row = vec(np.eye(d)).conj() @ self.superop
        return float(np.max(np.abs(tr_row - vec(np.eye(d)))))


def pauli_basis(n_qubits):
    """All ``4**n`` Pauli products (unitary, ``tr(P_j^dag P_k) = d delta_jk``)."""
    singles = [SIGMA["i"], SIGMA["x"], SIGMA["y"], SIGMA["z"]]
    return [kron(*ops) for ops in itertools.product(singles, repeat=n_qubits)]


def matrix_unit_basis(d):
    """Orthonormal basis ``|i><j|`` (``tr(B_j^dag B_k) = delta_jk``)."""
    out = []
    for i, j in itertools.product(range(d), range(d)):
        B = np.zeros((d, d), dtype=complex)
        B[i, j] = 1.0
        out.append(B)
    return out


def nielsen_fidelity(E: Channel, U, basis="pauli", tp_tol=1e-6) -> float:
    """Average gate fidelity of ``E`` against the unitary ``U``.

    ``F = [sum_j tr(U U_j^dag U^dag E(U_j)) + d^2] / (d^2 (d+1))`` over a
    unitary operator basis with ``tr(U_j^dag U_k) = d delta_jk``.  With
    ``basis="matrix_units"`` the orthonormal basis is rescaled by ``d``.
    """
    U = np.asarray(U, dtype=complex)
    d = E.d
    if U.shape != (d, d):
        raise ValueError(f"target is {U.shape}, channel acts on d={d}")
    dev = E.trace_deviation()
    if dev > tp_tol:
        raise ValueError(f"channel is not trace preserving (deviation {dev:.3e})")
    if basis == "pauli":
        n = int(round(np.log2(d)))
        if 2**n != d:
            raise ValueError("Pauli basis needs a qubit register")
        ops, weight = pauli_basis(n), 1.0
    elif basis == "matrix_units":
        ops, weight = matrix_unit_basis(d), float(d)
    else:
        raise ValueError(f"unknown basis {basis!r}")
    Ud = U.conj().T
    total = sum(np.trace(U @ B.conj().T @ Ud @ E(B)) for B in ops)
    return float(((weight * total).real + d * d) / (d * d * (d + 1)))


def unitary_fidelity_closed_form(V, U) -> float:
    """``(|tr(U^dag V)|^2 + d) / (d^2 + d)`` for the unitary channel of ``V``."""
    d = np.asarray(U).shape[0]
    return float((abs(np.trace(np.asarray(U).conj().T @ V)) ** 2 + d) / (d * d + d))


@dataclass(frozen=True)
class FidelityReport:
    raw_fidelity: float
    compensated_fidelity: float
    compensation: tuple  # z-rotation angle per compensated TLS (rad)
    d: int
    qubits: tuple = ()


def local_z_rotation(angles, qubits, n_qubits, theta=None):
    """Product of rotations ``exp(-i phi_n sz_n/2)`` about each dressed axis."""
    theta = [0.0] * n_qubits if theta is None else theta
    factors = [np.eye(2, dtype=complex) for _ in range(n_qubits)]
    for phi, q in zip(angles, qubits):
        R = dressed_rotation(theta[q])
        rz = np.diag([np.exp(-0.5j * phi), np.exp(0.5j * phi)])
        factors[q] = R @ rz @ R.conj().T
    return kron(*factors)


class _Objective:
    """Vectorised ``F(R_phi o E, U)`` as ``F(E, R_phi^dag U)``."""

    def __init__(self, E, U, qubits, theta):
        d = E.d
        self.n = int(round(np.log2(d)))
        self.d, self.U = d, np.asarray(U, dtype=complex)
        self.qubits, self.theta = list(qubits), theta
        self.ops = np.array(pauli_basis(self.n))
        self.outs = np.array([E(P) for P in self.ops])

    def __call__(self, angle_sets):
        angle_sets = np.atleast_2d(angle_sets)
        W = np.array([
            local_z_rotation(a, self.qubits, self.n, self.theta).conj().T @ self.U
            for a in angle_sets
        ])
        Wd = W.conj().transpose(0, 2, 1)
        # tr(W P^dag W^dag E(P)) for every grid point and basis element
        tr = np.einsum("gab,jcb,gcd,jda->g", W, self.ops.conj(), Wd, self.outs)
        d = self.d
        return (tr.real + d * d) / (d * d * (d + 1))


def compensate_local_phases(E: Channel, U, qubits=(), theta=None, initial=None,
                            grid=GRID_POINTS) -> FidelityReport:
    """Best fidelity over local z rotations applied after ``E``.

    ``qubits`` lists the TLSs whose local phases are not counted as errors;
    ``theta`` gives each TLS's dressed-axis tilt (0 means the bare z axis).
    A coarse grid of ``grid`` points per angle is refined with Nelder-Mead.
    """
    raw = nielsen_fidelity(E, U)
    qubits = tuple(qubits)
    if not qubits:
        return FidelityReport(raw, raw, (), E.d, ())
    obj = _Objective(E, U, qubits, theta)
    k = len(qubits)
    axis = np.linspace(-np.pi, np.pi, grid, endpoint=False)
    if k <= 2:
        pts = np.array(list(itertools.product(axis, repeat=k)))
        vals = np.concatenate([obj(chunk) for chunk in np.array_split(pts, max(1, len(pts) // 1024))])
        best = pts[int(np.argmax(vals))]
    else:
        best = np.zeros(k)
        for _ in range(3):
            for c in range(k):
                trial = np.tile(best, (grid, 1))
                trial[:, c] = axis
                best = trial[int(np.argmax(obj(trial)))]
    starts = [best] + ([np.asarray(initial, float)] if initial is not None else [])
    cand = [(float(obj(s)[0]), np.asarray(s, float)) for s in starts]
    for s in starts:
        res = minimize(lambda x: -obj(x)[0], s, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-15, "maxiter": 4000})
        cand.append((-float(res.fun), res.x))
    f_best, x_best = max(cand, key=lambda c: c[0])
    x_best = (np.asarray(x_best) + np.pi) % (2 * np.pi) - np.pi
    return FidelityReport(raw, max(raw, f_best), tuple(float(x) for x in x_best), E.d, qubits)
