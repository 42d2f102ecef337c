"""Dense linear algebra on the two-atom, four-level Hilbert space.

Basis ordering is fixed once for the whole package: single-atom levels are
ordered (0, 1, p, r) and two-atom indices are ``4 * level_atom1 + level_atom2``.
Operators and states are plain complex ``numpy`` arrays.
"""

from __future__ import annotations

from enum import IntEnum

import numpy as np
import scipy.linalg

SINGLE_DIM = 4
PAIR_DIM = SINGLE_DIM * SINGLE_DIM

HERMITIAN_TOL = 1e-12
RHO_HERMITIAN_TOL = 1e-10
RHO_TRACE_TOL = 1e-9
RHO_POSITIVITY_TOL = -1e-8


class LevelIndex(IntEnum):
    G0 = 0
    G1 = 1
    P = 2
    R = 3


class InvalidDimensionError(ValueError):
    pass


class ContractViolation(ValueError):
    pass


class InvalidStateError(ContractViolation):
    """Raised when a matrix fails density-matrix validation."""


class NumericalFailure(RuntimeError):
    """An eigensolver did not converge.

    ``iterations`` carries the LAPACK ``info`` index reported on failure
    (the number of eigenvalues that failed to converge), when available.
    """

    def __init__(self, message: str, iterations: int | None = None):
        super().__init__(message)
        self.iterations = iterations


def basis(level: int, dim: int = SINGLE_DIM) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[int(level)] = 1.0
    return v


def pair_index(level1: int, level2: int) -> int:
    return SINGLE_DIM * int(level1) + int(level2)


def ket(level1: int, level2: int) -> np.ndarray:
    """Two-atom product basis vector ``|level1 level2>``."""
    return basis(pair_index(level1, level2), PAIR_DIM)


def projector(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    return np.outer(v, v.conj())


def normalized(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    return v / np.linalg.norm(v)


def tensor(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of two single-atom objects, atom 1 major.

    Works for both state vectors (shape ``(4,)``) and operators (``(4, 4)``);
    both operands must be of the same kind.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != b.ndim or a.ndim not in (1, 2):
        raise InvalidDimensionError(
            f"tensor needs two vectors or two matrices, got shapes {a.shape} and {b.shape}"
        )
    for x in (a, b):
        if any(n != SINGLE_DIM for n in x.shape):
            raise InvalidDimensionError(f"expected single-atom dimension 4, got shape {x.shape}")
    return np.kron(a, b)


def embed(op: np.ndarray, atom: int) -> np.ndarray:
    """Lift a single-atom operator to the pair space acting on ``atom`` (1 or 2)."""
    ident = np.eye(SINGLE_DIM)
    if atom == 1:
        return tensor(op, ident)
    if atom == 2:
        return tensor(ident, op)
    raise ValueError(f"atom must be 1 or 2, got {atom}")


def dagger(a: np.ndarray) -> np.ndarray:
    return np.asarray(a).conj().T


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    a = np.asarray(a)
    return a.ndim == 2 and a.shape[0] == a.shape[1] and np.max(np.abs(a - a.conj().T), initial=0.0) < tol


def expect(rho: np.ndarray, proj: np.ndarray, *, norm_tol: float = 1e-10) -> float:
    """Return ``<proj|rho|proj>``.

    The imaginary part is discarded; it is checked against 1e-10 and a
    violation raises, since it can only come from a non-Hermitian ``rho``.
    """
    proj = np.asarray(proj, dtype=complex)
    if abs(np.linalg.norm(proj) - 1.0) > norm_tol:
        raise ContractViolation(f"projection vector not normalized (norm={np.linalg.norm(proj):.3e})")
    val = proj.conj() @ np.asarray(rho) @ proj
    if abs(val.imag) >= 1e-10:
        raise ContractViolation(f"expectation value has imaginary part {val.imag:.3e}")
    return float(val.real)


def validate_density_matrix(
    rho: np.ndarray,
    *,
    herm_tol: float = RHO_HERMITIAN_TOL,
    trace_tol: float = RHO_TRACE_TOL,
    pos_tol: float = RHO_POSITIVITY_TOL,
) -> np.ndarray:
    """Check Hermiticity, unit trace and positivity; return ``rho`` as a complex array.

    Raises
    ------
    InvalidStateError
        If any of the three checks fails. The message names the failing check.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidDimensionError(f"density matrix must be square, got shape {rho.shape}")
    herm_err = np.max(np.abs(rho - rho.conj().T))
    if herm_err >= herm_tol:
        raise InvalidStateError(f"not Hermitian: max|rho - rho^dag| = {herm_err:.3e}")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > trace_tol:
        raise InvalidStateError(f"trace {tr:.12f} deviates from 1 by more than {trace_tol:g}")
    min_ev = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
    if min_ev < pos_tol:
        raise InvalidStateError(f"not positive: minimum eigenvalue {min_ev:.3e}")
    return rho


def eig_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending."""
    a = np.asarray(a, dtype=complex)
    if not is_hermitian(a, tol):
        raise ContractViolation("eig_hermitian called on a non-Hermitian matrix")
    return np.linalg.eigh(a)


def eig_general(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of a general square matrix, sorted by ascending ``|Im|`` then ``Re``.

    Eigenvectors are columns, normalized to unit 2-norm. Defective matrices are
    fine: LAPACK returns (numerically parallel) eigenvectors without failing.
    """
    a = np.asarray(a, dtype=complex)
    try:
        w, v = scipy.linalg.eig(a, check_finite=True)
    except np.linalg.LinAlgError as exc:
        info = None
        for tok in str(exc).split():
            if tok.strip(".,()").isdigit():
                info = int(tok.strip(".,()"))
        raise NumericalFailure(f"eigensolver did not converge: {exc}", iterations=info) from exc
    order = np.lexsort((w.real, np.abs(w.imag)))
    v = v[:, order]
    v = v / np.linalg.norm(v, axis=0)
    return w[order], v


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Half the trace norm of ``a - b`` for Hermitian inputs."""
    d = np.asarray(a) - np.asarray(b)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (d + d.conj().T)))))


def purity(rho: np.ndarray) -> float:
    rho = np.asarray(rho)
    return float(np.real(np.einsum("ij,ji->", rho, rho)))
