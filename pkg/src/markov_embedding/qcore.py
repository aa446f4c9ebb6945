"""
Dense complex linear algebra and quantum-state primitives.

Vectorization is row-major everywhere in the package:
``|i><j|  ->  |i> (x) |j>``, i.e. ``vec(rho)[i*d + j] == rho[i, j]``.
With this convention ``vec(A rho B) == kron(A, B.T) @ vec(rho)``.

Joint system-environment operators are ordered system first,
``rho_SE = rho (x) rho_E``.
"""
from __future__ import annotations

from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .errors import NonPhysicalStateError

# Tolerances for the density-matrix invariants
HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-10

ComplexMatrix = np.ndarray

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)


def _require_square(m: np.ndarray, what: str = "matrix") -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{what} must be square, got shape {m.shape}")


def vectorize(rho: ComplexMatrix) -> np.ndarray:
    """Row-major vectorization of a square matrix (length d**2)."""
    rho = np.asarray(rho, dtype=complex)
    _require_square(rho)
    return rho.reshape(-1).copy()


def devectorize(v: np.ndarray, d: int) -> ComplexMatrix:
    """Inverse of :func:`vectorize`."""
    v = np.asarray(v, dtype=complex)
    if v.ndim != 1 or v.shape[0] != d * d:
        raise ValueError(f"Vector of length {v.size} cannot be reshaped to {d}x{d}")
    return v.reshape(d, d).copy()


def partial_trace_env(rho_se: ComplexMatrix, d: int, d_E: int) -> ComplexMatrix:
    """Trace out the environment factor of a system-first joint operator."""
    rho_se = np.asarray(rho_se, dtype=complex)
    n = d * d_E
    if rho_se.shape != (n, n):
        raise ValueError(
            f"Joint operator must be {n}x{n} for d={d}, d_E={d_E}; got {rho_se.shape}"
        )
    return np.einsum("iaja->ij", rho_se.reshape(d, d_E, d, d_E))


def partial_trace_sys(rho_se: ComplexMatrix, d: int, d_E: int) -> ComplexMatrix:
    """Trace out the system factor, leaving the environment operator."""
    rho_se = np.asarray(rho_se, dtype=complex)
    n = d * d_E
    if rho_se.shape != (n, n):
        raise ValueError(
            f"Joint operator must be {n}x{n} for d={d}, d_E={d_E}; got {rho_se.shape}"
        )
    return np.einsum("aiaj->ij", rho_se.reshape(d, d_E, d, d_E))


def partial_trace_env_many(states: np.ndarray, d: int, d_E: int) -> np.ndarray:
    """Batched :func:`partial_trace_env` over the leading axes of ``states``."""
    states = np.asarray(states, dtype=complex)
    n = d * d_E
    if states.shape[-2:] != (n, n):
        raise ValueError(f"Trailing dimensions must be {n}x{n}; got {states.shape[-2:]}")
    lead = states.shape[:-2]
    blocks = states.reshape(lead + (d, d_E, d, d_E))
    return np.einsum("...iaja->...ij", blocks)


def trace_distance(a: ComplexMatrix, b: ComplexMatrix) -> float:
    """Trace norm of ``a - b`` (sum of singular values, no 1/2 factor)."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise ValueError(f"Shape mismatch: {a.shape} vs {b.shape}")
    _require_square(a)
    return float(np.sum(scipy.linalg.svdvals(a - b)))


def project_to_density(m: ComplexMatrix) -> ComplexMatrix:
    """
    Nearest physical state in the clip-and-renormalize sense:
    hermitize, drop negative eigenvalues, rescale to unit trace.
    """
    m = np.asarray(m, dtype=complex)
    _require_square(m)
    herm = 0.5 * (m + m.conj().T)
    w, v = np.linalg.eigh(herm)
    w = np.clip(w, 0.0, None)
    total = float(np.sum(w))
    if total <= 0.0:
        raise NonPhysicalStateError(
            "Matrix has no positive spectral weight; cannot project onto density matrices"
        )
    w = w / total
    return (v * w) @ v.conj().T


def pinv(m: ComplexMatrix, tol: Optional[float] = None) -> ComplexMatrix:
    """
    Moore-Penrose inverse. Singular values below ``tol * s_max`` are treated as
    zero; the default ``tol`` is ``max(rows, cols) * eps``.
    """
    m = np.asarray(m, dtype=complex)
    if tol is None:
        tol = max(m.shape) * np.finfo(float).eps
    if tol < 0:
        raise ValueError("tol must be non-negative")
    return scipy.linalg.pinv(m, atol=0.0, rtol=tol)


def sample_pure_state(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random pure state (uniform on the Bloch sphere for d=2)."""
    if d < 2:
        raise ValueError("State dimension must be at least 2")
    z = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return z / np.linalg.norm(z)


def matrix_exponential(m: ComplexMatrix) -> ComplexMatrix:
    """exp(m) by scaling and squaring with a degree-13 Pade approximant."""
    m = np.asarray(m, dtype=complex)
    _require_square(m)
    return scipy.linalg.expm(m)


def ket_to_density(psi: np.ndarray) -> ComplexMatrix:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    return np.outer(psi, psi.conj())


def purity(rho: ComplexMatrix) -> float:
    rho = np.asarray(rho, dtype=complex)
    return float(np.real(np.trace(rho @ rho)))


def bloch_vector(rho: ComplexMatrix) -> Tuple[float, float, float]:
    """(<sigma_x>, <sigma_y>, <sigma_z>) of a qubit operator."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise ValueError(f"Bloch vector is defined for 2x2 matrices, got {rho.shape}")
    return (
        float(np.real(np.trace(PAULI_X @ rho))),
        float(np.real(np.trace(PAULI_Y @ rho))),
        float(np.real(np.trace(PAULI_Z @ rho))),
    )


def density_matrix_errors(rho: ComplexMatrix, tol: float = HERMITIAN_TOL) -> List[str]:
    """
    Check the density-matrix invariants.

    Returns:
        List of violated invariants (empty list means valid).
    """
    rho = np.asarray(rho, dtype=complex)
    errors: List[str] = []
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return [f"not square: {rho.shape}"]
    if not np.all(np.isfinite(rho)):
        return ["non-finite entries"]

    herm_dev = float(np.max(np.abs(rho - rho.conj().T)))
    if herm_dev > tol:
        errors.append(f"not Hermitian (max deviation {herm_dev:.3e})")
    tr = np.trace(rho)
    if abs(tr - 1.0) > tol:
        errors.append(f"trace {tr.real:.12g}{tr.imag:+.3e}j differs from 1")
    min_eig = float(np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))))
    if min_eig < -tol:
        errors.append(f"negative eigenvalue {min_eig:.3e}")
    return errors


def is_density_matrix(rho: ComplexMatrix, tol: float = HERMITIAN_TOL) -> bool:
    return not density_matrix_errors(rho, tol)


def gell_mann_basis(n: int) -> np.ndarray:
    """
    Generalized Gell-Mann matrices of dimension ``n``: ``n**2 - 1`` traceless
    Hermitian matrices with ``Tr(F_i^dagger F_j) = delta_ij``.

    Returns:
        Array of shape ``(n**2 - 1, n, n)``.
    """
    if n < 2:
        raise ValueError("Gell-Mann basis requires n >= 2")
    mats: List[np.ndarray] = []
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    for j in range(n):
        for k in range(j + 1, n):
            sym = np.zeros((n, n), dtype=complex)
            sym[j, k] = sym[k, j] = inv_sqrt2
            mats.append(sym)
            anti = np.zeros((n, n), dtype=complex)
            anti[j, k] = -1j * inv_sqrt2
            anti[k, j] = 1j * inv_sqrt2
            mats.append(anti)
    for l in range(1, n):
        diag = np.zeros(n, dtype=complex)
        diag[:l] = 1.0
        diag[l] = -float(l)
        mats.append(np.diag(diag / np.sqrt(l * (l + 1))))
    return np.stack(mats)


def lindblad_superoperator(
    hamiltonian: ComplexMatrix,
    jump_ops: Sequence[ComplexMatrix] | np.ndarray = (),
) -> ComplexMatrix:
    """
    Vectorized GKSL generator for ``-i[H, rho] + sum_k D[J_k](rho)`` in the
    row-major convention:

        -i (H (x) I - I (x) H^T)
        + sum_k J_k (x) conj(J_k) - 1/2 (J_k^+ J_k) (x) I - 1/2 I (x) (J_k^+ J_k)^T
    """
    h = np.asarray(hamiltonian, dtype=complex)
    _require_square(h, "Hamiltonian")
    n = h.shape[0]
    eye = np.eye(n, dtype=complex)
    out = -1j * (np.kron(h, eye) - np.kron(eye, h.T))

    jumps = np.asarray(jump_ops, dtype=complex)
    if jumps.size == 0:
        return out
    jumps = jumps.reshape(-1, n, n)
    # sum_k J_k (x) conj(J_k), indices (a,c),(b,d)
    sandwich = np.einsum("kab,kcd->acbd", jumps, jumps.conj()).reshape(n * n, n * n)
    jdj = np.einsum("kba,kbc->ac", jumps.conj(), jumps)
    out += sandwich - 0.5 * np.kron(jdj, eye) - 0.5 * np.kron(eye, jdj.T)
    return out
