"""Finite-dimensional operator algebra for the atom ⊗ field Hilbert space.

Basis convention: the atom factor comes first and the field factor second, so the
composite index is ``i_atom * n_fock + n``. The atom basis is (|g⟩, |e⟩) = (0, 1).
Operators below dimension 16 are stored dense; everything else is CSR.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import logging
from typing import Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)

SPARSE_FROM_DIM = 16
MAX_KRON_DIM = 1 << 16

ArrayLike = Union[np.ndarray, sp.spmatrix]


@dataclass(frozen=True, eq=False)
class Operator:
    """Square complex matrix, dense or sparse, immutable after construction."""

    data: ArrayLike
    label: str = ""

    def __post_init__(self) -> None:
        matrix = self.data
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"Operator must be square, got shape {matrix.shape}")
        if matrix.shape[0] < 1:
            raise ValueError("Operator dimension must be positive")
        if sp.issparse(matrix):
            matrix = sp.csr_matrix(matrix, dtype=np.complex128, copy=True)
            matrix.eliminate_zeros()
            values = matrix.data
        else:
            matrix = np.array(matrix, dtype=np.complex128, copy=True)
            matrix.setflags(write=False)
            values = matrix
        if not np.all(np.isfinite(values)):
            raise ValueError(f"Operator {self.label or ''} has non-finite entries".strip())
        object.__setattr__(self, "data", matrix)

    @classmethod
    def from_array(cls, matrix: ArrayLike, label: str = "") -> "Operator":
        """Build an operator, choosing the representation from its dimension."""

        dim = matrix.shape[0]
        if dim < SPARSE_FROM_DIM:
            dense = matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix)
            return cls(dense, label)
        return cls(sp.csr_matrix(matrix), label)

    # ------------------------------------------------------------------
    # Representation
    # ------------------------------------------------------------------
    @property
    def dim(self) -> int:
        return int(self.data.shape[0])

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.data)

    @property
    def representation(self) -> str:
        return "sparse" if self.is_sparse else "dense"

    def dense(self) -> np.ndarray:
        if self.is_sparse:
            return self.data.toarray()
        return np.array(self.data)

    def sparse(self) -> sp.csr_matrix:
        if self.is_sparse:
            return self.data.copy()
        return sp.csr_matrix(self.data)

    def as_sparse(self) -> "Operator":
        return Operator(self.sparse(), self.label)

    def as_dense(self) -> "Operator":
        return Operator(self.dense(), self.label)

    def entry(self, row: int, col: int) -> complex:
        return complex(self.data[row, col])

    # ------------------------------------------------------------------
    # Algebra
    # ------------------------------------------------------------------
    def dagger(self) -> "Operator":
        return Operator(self.data.conj().T, _dagger_label(self.label))

    def matvec(self, vector: np.ndarray) -> np.ndarray:
        return np.asarray(self.data @ np.asarray(vector, dtype=np.complex128))

    def power(self, k: int) -> "Operator":
        if k < 0:
            raise ValueError("Only nonnegative powers are supported")
        result = identity(self.dim)
        for _ in range(k):
            result = result @ self
        return result

    def __matmul__(self, other):
        if isinstance(other, Operator):
            _require_same_dim(self, other)
            return Operator.from_array(self.data @ other.data, _join_labels(self.label, other.label))
        return self.matvec(other)

    def __add__(self, other: "Operator") -> "Operator":
        _require_same_dim(self, other)
        return Operator.from_array(self.data + other.data)

    def __sub__(self, other: "Operator") -> "Operator":
        _require_same_dim(self, other)
        return Operator.from_array(self.data - other.data)

    def __mul__(self, scalar: complex) -> "Operator":
        return Operator.from_array(self.data * complex(scalar), self.label)

    __rmul__ = __mul__

    def __neg__(self) -> "Operator":
        return self * -1.0

    def equals(self, other: "Operator", atol: float = 0.0) -> bool:
        if self.dim != other.dim:
            return False
        return bool(np.max(np.abs(self.dense() - other.dense()), initial=0.0) <= atol)

    def is_hermitian(self, atol: float = 0.0) -> bool:
        return self.equals(self.dagger(), atol=atol)

    def __repr__(self) -> str:
        return f"Operator<{self.label or 'unnamed'} dim={self.dim} {self.representation}>"


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Dense density matrix on the composite (or atomic) space."""

    data: np.ndarray
    n_fock: Optional[int] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        matrix = np.array(self.data, dtype=np.complex128, copy=True)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"Density matrix must be square, got shape {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("Density matrix has non-finite entries")
        matrix.setflags(write=False)
        object.__setattr__(self, "data", matrix)

    @property
    def dim(self) -> int:
        return int(self.data.shape[0])

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.data)).copy()

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.data - self.data.conj().T), initial=0.0))

    def min_eigenvalue(self) -> float:
        hermitian = 0.5 * (self.data + self.data.conj().T)
        return float(np.linalg.eigvalsh(hermitian)[0])

    def hermitized(self) -> "DensityMatrix":
        return DensityMatrix(0.5 * (self.data + self.data.conj().T), self.n_fock, dict(self.meta))

    def validate(self, herm_tol: float = 1e-12, trace_tol: float = 1e-12, eig_floor: float = -1e-10) -> None:
        """Raise ValueError unless ρ is Hermitian, unit-trace and positive within tolerance."""

        herm = self.hermiticity_error()
        if herm > herm_tol:
            raise ValueError(f"Density matrix is not Hermitian (max deviation {herm:.3e})")
        trace_error = abs(self.trace() - 1.0)
        if trace_error > trace_tol:
            raise ValueError(f"Density matrix trace deviates from 1 by {trace_error:.3e}")
        lowest = self.min_eigenvalue()
        if lowest < eig_floor:
            raise ValueError(f"Density matrix has eigenvalue {lowest:.3e} below {eig_floor:.1e}")


# ----------------------------------------------------------------------
# Constructors
# ----------------------------------------------------------------------

def identity(dim: int) -> Operator:
    if dim < 1:
        raise ValueError("Identity dimension must be positive")
    return Operator.from_array(sp.identity(dim, dtype=np.complex128, format="csr"), f"I{dim}")


def destroy(n_fock: int) -> Operator:
    """Annihilation operator with ⟨n−1|a|n⟩ = √n on the truncated Fock space."""

    if n_fock < 2:
        raise ValueError(f"n_fock must be at least 2, got {n_fock}")
    amplitudes = np.sqrt(np.arange(1, n_fock, dtype=float))
    matrix = sp.diags(amplitudes, offsets=1, shape=(n_fock, n_fock), dtype=np.complex128, format="csr")
    return Operator.from_array(matrix, "a")


def create(n_fock: int) -> Operator:
    return destroy(n_fock).dagger()


def number(n_fock: int) -> Operator:
    if n_fock < 2:
        raise ValueError(f"n_fock must be at least 2, got {n_fock}")
    matrix = sp.diags(np.arange(n_fock, dtype=float), shape=(n_fock, n_fock), dtype=np.complex128, format="csr")
    return Operator.from_array(matrix, "a†a")


def atom_ops() -> Tuple[Operator, Operator, Operator]:
    """Return (σ_-, σ_+, σ_z) in the (|g⟩, |e⟩) basis."""

    sigma_minus = Operator(np.array([[0.0, 1.0], [0.0, 0.0]]), "σ-")
    sigma_plus = Operator(sigma_minus.dagger().data, "σ+")
    sigma_z = Operator(sigma_plus.dense() @ sigma_minus.dense() - sigma_minus.dense() @ sigma_plus.dense(), "σz")
    return sigma_minus, sigma_plus, sigma_z


def dagger(op: Operator) -> Operator:
    return op.dagger()


def commutator(a: Operator, b: Operator) -> Operator:
    return a @ b - b @ a


def kron(a: Operator, b: Operator) -> Operator:
    """Tensor product; composite index = i_a * dim(b) + i_b."""

    dim = a.dim * b.dim
    if dim > MAX_KRON_DIM:
        raise OverflowError(f"Tensor product dimension {dim} exceeds {MAX_KRON_DIM}")
    matrix = sp.kron(sp.csr_matrix(a.data), sp.csr_matrix(b.data), format="csr")
    label = f"{a.label}⊗{b.label}" if a.label and b.label else ""
    return Operator.from_array(matrix, label)


def expect(op: Operator, rho: Union[DensityMatrix, np.ndarray]) -> complex:
    """Tr(Aρ). Imaginary parts are returned, not dropped."""

    matrix = rho.data if isinstance(rho, DensityMatrix) else np.asarray(rho)
    if matrix.shape != (op.dim, op.dim):
        raise ValueError(f"Dimension mismatch: operator {op.dim}, state {matrix.shape}")
    if op.is_sparse:
        return complex(op.data.multiply(matrix.T).sum())
    return complex(np.einsum("ij,ji->", op.data, matrix))


# ----------------------------------------------------------------------
# States
# ----------------------------------------------------------------------

def thermal_populations(dim: int, occupation: float) -> np.ndarray:
    """Bose-Einstein populations truncated to ``dim`` levels and renormalized."""

    if occupation < 0:
        raise ValueError("Thermal occupation must be nonnegative")
    populations = np.zeros(dim)
    if occupation == 0:
        populations[0] = 1.0
        return populations
    ratio = occupation / (occupation + 1.0)
    populations = ratio ** np.arange(dim, dtype=float)
    return populations / populations.sum()


def thermal_atom_state(occupation: float) -> DensityMatrix:
    """Two-level state in detailed balance with a reservoir of mean occupation m: ρ_ee = m/(2m+1)."""

    if occupation < 0:
        raise ValueError("Thermal occupation must be nonnegative")
    excited = occupation / (2.0 * occupation + 1.0)
    return DensityMatrix(np.diag([1.0 - excited, excited]))


def thermal_field_state(n_fock: int, occupation: float) -> DensityMatrix:
    return DensityMatrix(np.diag(thermal_populations(n_fock, occupation)), n_fock=n_fock)


def product_state(atom_index: int, fock_index: int, n_fock: int) -> DensityMatrix:
    if atom_index not in (0, 1) or not 0 <= fock_index < n_fock:
        raise ValueError("Basis index out of range")
    matrix = np.zeros((2 * n_fock, 2 * n_fock), dtype=np.complex128)
    position = atom_index * n_fock + fock_index
    matrix[position, position] = 1.0
    return DensityMatrix(matrix, n_fock=n_fock)


def tensor_states(atom: DensityMatrix, field_state: DensityMatrix) -> DensityMatrix:
    return DensityMatrix(np.kron(atom.data, field_state.data), n_fock=field_state.dim)


def partial_trace(rho: DensityMatrix, keep: str, atom_dim: int = 2) -> np.ndarray:
    """Reduced state of one factor of the two-factor atom ⊗ field space."""

    field_dim = rho.dim // atom_dim
    if atom_dim * field_dim != rho.dim:
        raise ValueError(f"State dimension {rho.dim} is not divisible by atom dimension {atom_dim}")
    blocks = rho.data.reshape(atom_dim, field_dim, atom_dim, field_dim)
    if keep == "atom":
        return np.einsum("injn->ij", blocks)
    if keep == "field":
        return np.einsum("imin->mn", blocks)
    raise ValueError(f"keep must be 'atom' or 'field', got {keep!r}")


def _require_same_dim(a: Operator, b: Operator) -> None:
    if a.dim != b.dim:
        raise ValueError(f"Dimension mismatch: {a.dim} vs {b.dim}")


def _dagger_label(label: str) -> str:
    if not label:
        return ""
    return label[:-1] if label.endswith("†") else f"{label}†"


def _join_labels(left: str, right: str) -> str:
    return f"{left}{right}" if left and right else ""
