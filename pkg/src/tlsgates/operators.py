"""Dense operators on the TLS register tensored with one truncated bosonic mode.

Tensor ordering is fixed as ``TLS_1 (x) TLS_2 (x) ... (x) Fock``; every
embedding helper in this module builds operators in that order.  Fock levels
``0 .. fock_cutoff - 1`` are retained.
"""
from dataclasses import dataclass
from functools import reduce

import numpy as np

SIGMA = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
    # sigma_+ raises |1> (down) to |0> (up); sigma_z|0> = +|0>.
    "+": np.array([[0, 1], [0, 0]], dtype=complex),
    "-": np.array([[0, 0], [1, 0]], dtype=complex),
    "i": np.eye(2, dtype=complex),
}


@dataclass(frozen=True)
class HilbertSpace:
    n_tls: int
    fock_cutoff: int

    def __post_init__(self):
        if self.n_tls < 1:
            raise ValueError(f"n_tls must be >= 1, got {self.n_tls}")
        if self.fock_cutoff < 2:
            raise ValueError(f"fock_cutoff must be >= 2, got {self.fock_cutoff}")

    @property
    def tls_dim(self) -> int:
        return 2 ** self.n_tls

    @property
    def dim(self) -> int:
        return self.tls_dim * self.fock_cutoff


def is_hermitian(A, atol=1e-12) -> bool:
    return np.max(np.abs(A - A.conj().T), initial=0.0) <= atol


def is_unitary(A, atol=1e-10) -> bool:
    A = np.asarray(A)
    return np.max(np.abs(A.conj().T @ A - np.eye(A.shape[0]))) <= atol


def kron(*ops) -> np.ndarray:
    """Kronecker product of any number of matrices, left to right."""
    return reduce(np.kron, ops)


def destroy(n: int) -> np.ndarray:
    """Bare ``n x n`` truncated annihilation operator."""
    if n < 2:
        raise ValueError(f"Fock dimension must be >= 2, got {n}")
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1).astype(complex)


def annihilation(space: HilbertSpace) -> np.ndarray:
    """Resonator ``a`` embedded on the composite space (identity on TLSs)."""
    return np.kron(np.eye(space.tls_dim), destroy(space.fock_cutoff))


def number(space: HilbertSpace) -> np.ndarray:
    a = annihilation(space)
    return a.conj().T @ a


def tls_operator(op2: np.ndarray, site: int, n_tls: int) -> np.ndarray:
    """Embed a 2x2 operator at ``site`` of an ``n_tls`` register (no Fock factor)."""
    if not 0 <= site < n_tls:
        raise IndexError(f"TLS site {site} out of range for {n_tls} fluctuator(s)")
    factors = [np.eye(2, dtype=complex)] * n_tls
    factors[site] = np.asarray(op2, dtype=complex)
    return kron(*factors)


def pauli(axis: str, site: int, space: HilbertSpace) -> np.ndarray:
    """Pauli or ladder operator on one TLS, identity on the rest and on the mode."""
    try:
        op2 = SIGMA[axis]
    except KeyError:
        raise ValueError(f"unknown Pauli axis {axis!r}; use x, y, z, + or -") from None
    return np.kron(tls_operator(op2, site, space.n_tls), np.eye(space.fock_cutoff))


def embed_tls(op_register: np.ndarray, space: HilbertSpace) -> np.ndarray:
    """Lift an operator on the TLS register to the composite space."""
    op_register = np.asarray(op_register)
    if op_register.shape != (space.tls_dim, space.tls_dim):
        raise ValueError(
            f"register operator has shape {op_register.shape}, expected "
            f"{(space.tls_dim, space.tls_dim)}"
        )
    return np.kron(op_register, np.eye(space.fock_cutoff))


def expm_hermitian(H: np.ndarray, t: float, atol=1e-9) -> np.ndarray:
    """Return ``exp(-i H t)`` for Hermitian ``H`` via eigendecomposition."""
    H = np.asarray(H, dtype=complex)
    if not is_hermitian(H, atol):
        dev = np.max(np.abs(H - H.conj().T))
        raise ValueError(f"expm_hermitian needs a Hermitian matrix (deviation {dev:.3e})")
    H = 0.5 * (H + H.conj().T)
    w, v = np.linalg.eigh(H)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def fock_state(n: int, dim: int) -> np.ndarray:
    psi = np.zeros(dim, dtype=complex)
    psi[n] = 1.0
    return psi


def coherent_state(alpha: complex, dim: int) -> np.ndarray:
    """Truncated coherent state, built as ``D(alpha)|0>`` and renormalised."""
    a = destroy(dim)
    gen = alpha * a.conj().T - np.conj(alpha) * a
    # exp(gen) = exp(-i K) with Hermitian K = i*gen.
    psi = expm_hermitian(1j * gen, 1.0) @ fock_state(0, dim)
    return psi / np.linalg.norm(psi)


def projector(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def partial_trace_resonator(rho: np.ndarray, space: HilbertSpace) -> np.ndarray:
    """Trace out the Fock factor.  Accepts a single matrix or a stack ``(..., d, d)``."""
    rho = np.asarray(rho)
    if rho.shape[-2:] != (space.dim, space.dim):
        raise ValueError(f"state has shape {rho.shape[-2:]}, expected {(space.dim, space.dim)}")
    dt, nf = space.tls_dim, space.fock_cutoff
    r = rho.reshape(rho.shape[:-2] + (dt, nf, dt, nf))
    return np.einsum("...ikjk->...ij", r)


def equal_up_to_phase(A, B, atol=1e-9) -> bool:
    """True when ``|tr(A^dag B)| / d == 1`` within ``atol`` (unitary inputs)."""
    A, B = np.asarray(A), np.asarray(B)
    overlap = abs(np.trace(A.conj().T @ B)) / A.shape[0]
    return abs(overlap - 1.0) <= atol


def validate_density_matrix(rho, herm_tol=1e-10, trace_tol=1e-8, eig_tol=1e-8):
    """Raise ``ValueError`` unless ``rho`` is a density matrix within tolerances."""
    rho = np.asarray(rho)
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > herm_tol:
        raise ValueError(f"density matrix not Hermitian (deviation {herm:.3e})")
    tr = np.trace(rho).real
    if abs(tr - 1) > trace_tol:
        raise ValueError(f"density matrix trace is {tr:.12f}")
    lo = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()
    if lo < -eig_tol:
        raise ValueError(f"density matrix has negative eigenvalue {lo:.3e}")
    return rho
