"""Dense complex linear algebra used by every other module.

States are 1-D complex numpy arrays and operators are square 2-D complex
arrays. Composite spaces follow one index convention throughout: the atom
index is slowest, then field modes in the order they are listed (first mode
slower than the second).
"""
from __future__ import annotations

import os

import numpy as np

__all__ = [
    "CapacityError",
    "ContractError",
    "MAX_OPERATOR_DIM",
    "max_joint_dim",
    "check_operator_dim",
    "check_state_dim",
    "tensor",
    "is_hermitian",
    "is_unitary",
    "herm_expm",
    "expectation",
    "variance",
    "commutator_norm",
    "sigma_x",
    "sigma_y",
    "sigma_z",
    "ket",
    "PLUS_Y",
]

MAX_OPERATOR_DIM = 4096
DEFAULT_MAX_JOINT_DIM = 250_000

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10


class CapacityError(ValueError):
    """A state or operator would exceed the configured dimension cap."""

    def __init__(self, what: str, dim: int, cap: int):
        super().__init__(f"{what} dimension {dim} exceeds cap {cap}")
        self.dim = dim
        self.cap = cap


class ContractError(ValueError):
    """An input violates a documented precondition (e.g. non-Hermitian)."""


def max_joint_dim() -> int:
    """Cap on state-vector dimension; ``CQLBENCH_MAX_DIM`` overrides it."""
    raw = os.environ.get("CQLBENCH_MAX_DIM")
    if raw is None:
        return DEFAULT_MAX_JOINT_DIM
    return int(float(raw))


def check_operator_dim(dim: int) -> None:
    if dim > MAX_OPERATOR_DIM:
        raise CapacityError("dense operator", dim, MAX_OPERATOR_DIM)


def check_state_dim(dim: int) -> None:
    cap = max_joint_dim()
    if dim > cap:
        raise CapacityError("joint state", dim, cap)


def tensor(*factors: np.ndarray) -> np.ndarray:
    """Kronecker product of operators (2-D) or state vectors (1-D).

    The first factor carries the slowest index. Operators are capped at
    ``MAX_OPERATOR_DIM``; vectors at ``max_joint_dim()``.
    """
    if not factors:
        raise ValueError("tensor needs at least one factor")
    ndim = np.ndim(factors[0])
    if any(np.ndim(f) != ndim for f in factors):
        raise ValueError("cannot mix vectors and operators in tensor")
    if ndim == 2:
        for f in factors:
            if f.shape[0] != f.shape[1]:
                raise ValueError(f"operator of shape {f.shape} is not square")
        dim = int(np.prod([f.shape[0] for f in factors]))
        check_operator_dim(dim)
    elif ndim == 1:
        dim = int(np.prod([f.shape[0] for f in factors]))
        check_state_dim(dim)
    else:
        raise ValueError("tensor factors must be 1-D or 2-D")
    out = np.asarray(factors[0], dtype=complex)
    for f in factors[1:]:
        out = np.kron(out, f)
    return out


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return a.shape[0] == a.shape[1] and float(np.max(np.abs(a - a.conj().T), initial=0.0)) <= tol


def is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    eye = np.eye(u.shape[0])
    return float(np.max(np.abs(u.conj().T @ u - eye), initial=0.0)) <= tol


def herm_expm(h: np.ndarray, scale: float) -> np.ndarray:
    """Return ``exp(-i * scale * h)`` for Hermitian ``h`` by eigendecomposition."""
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ContractError(f"expected a square matrix, got shape {h.shape}")
    check_operator_dim(h.shape[0])
    if not is_hermitian(h):
        raise ContractError("herm_expm requires a Hermitian matrix")
    evals, evecs = np.linalg.eigh(h)
    return (evecs * np.exp(-1j * scale * evals)) @ evecs.conj().T


def _check_pair(op: np.ndarray, psi: np.ndarray) -> None:
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ValueError(f"operator of shape {op.shape} is not square")
    if psi.shape != (op.shape[0],):
        raise ValueError(f"state of shape {psi.shape} does not match operator dim {op.shape[0]}")
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > 1e-8:
        raise ContractError(f"state is not normalized (norm {norm:.3e})")


def expectation(op: np.ndarray, psi: np.ndarray) -> complex:
    """<psi|op|psi>."""
    _check_pair(op, psi)
    return complex(np.vdot(psi, op @ psi))


def variance(op: np.ndarray, psi: np.ndarray) -> float:
    """<op^2> - <op>^2 for Hermitian ``op``; round-off negatives are clamped to 0."""
    _check_pair(op, psi)
    if not is_hermitian(op):
        raise ContractError("variance requires a Hermitian operator")
    phi = op @ psi
    mean = np.vdot(psi, phi).real
    second = np.vdot(phi, phi).real
    var = second - mean * mean
    if var < -1e-12 * max(1.0, second):
        raise ContractError(f"negative variance {var:.3e}")
    return max(var, 0.0)


def commutator_norm(a: np.ndarray, b: np.ndarray) -> float:
    """Largest entry magnitude of ``ab - ba``."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.max(np.abs(a @ b - b @ a), initial=0.0))


def sigma_x(atom_dim: int = 2) -> np.ndarray:
    """Pauli x on the qubit levels {0, 1}; zero action on any third level."""
    out = np.zeros((atom_dim, atom_dim), dtype=complex)
    out[0, 1] = out[1, 0] = 1.0
    return out


def sigma_y(atom_dim: int = 2) -> np.ndarray:
    out = np.zeros((atom_dim, atom_dim), dtype=complex)
    out[0, 1] = -1j
    out[1, 0] = 1j
    return out


def sigma_z(atom_dim: int = 2) -> np.ndarray:
    """|0><0| - |1><1|, zero on any third level."""
    out = np.zeros((atom_dim, atom_dim), dtype=complex)
    out[0, 0] = 1.0
    out[1, 1] = -1.0
    return out


def ket(index: int, dim: int) -> np.ndarray:
    out = np.zeros(dim, dtype=complex)
    out[index] = 1.0
    return out


# (|0> + i|1>)/sqrt(2), the +1 eigenstate of sigma_y
PLUS_Y = np.array([1.0, 1.0j]) / np.sqrt(2.0)
