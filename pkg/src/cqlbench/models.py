"""Atom-field Hamiltonians, their conserved quantities, and the conservation-law bound.

All Hamiltonians are in units of hbar = 1. Basis labels:

* two-level atom: |g> = index 0 (qubit |0>), |e> = index 1 (qubit |1>)
* Raman atom: |g1> = 0 (qubit |0>), |g2> = 1 (qubit |1>), |e> = 2

Joint index = atom * field_dim + field_index, with the first mode slowest.

Every conserved quantity is stored as ``L = sigma_z + L2`` with all signs
folded into ``L2``. The bound only depends on var(L2), so the choice between
``+-2 a^dag a`` conventions is immaterial.

Truncation keeps every coupling whose two endpoints are both retained and drops
the rest. Each retained coupling links two states of equal L, so ``[L, H] = 0``
holds exactly on the truncated space. For the phase-coupled model, the closed-form
propagator exists only for the untruncated operator; see ``dynamics``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .field_states import FieldState, number_stats
from .operator_core import check_operator_dim, check_state_dim, sigma_z

__all__ = [
    "ModelKind",
    "ModelSpec",
    "HamiltonianTerms",
    "ConservedQuantity",
    "jc",
    "phase_model",
    "fn_family",
    "multimode",
    "raman",
    "hamiltonian_terms",
    "build_hamiltonian",
    "conserved_diagonal",
    "conserved_quantity",
    "commutator_residual",
    "raman_commutator_residuals",
    "cql_bound",
    "bound_inputs",
]


class ModelKind(str, enum.Enum):
    JC = "jc"
    MULTIMODE = "multimode"
    RAMAN = "raman"
    FNFAMILY = "fnfamily"
    PHASE = "phase"


MAX_MULTIMODE_MODES = 3
_SINGLE_MODE = (ModelKind.JC, ModelKind.FNFAMILY, ModelKind.PHASE)


@dataclass(frozen=True)
class ModelSpec:
    """One Hamiltonian with its parameters.

    ``couplings`` holds per-mode rates g_k (MULTIMODE) or (g_a, g_b) (RAMAN);
    when empty every mode couples at ``g``. ``detunings`` holds one entry per
    mode and defaults to zeros. ``fn`` is required for FNFAMILY and must cover
    the transitions n = 0 .. cutoff-2.
    """

    kind: ModelKind
    cutoffs: tuple[int, ...]
    g: float = 1.0
    detunings: tuple[float, ...] = ()
    couplings: tuple[float, ...] = ()
    fn: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        object.__setattr__(self, "cutoffs", tuple(int(c) for c in self.cutoffs))
        n_modes = len(self.cutoffs)
        if not self.g > 0:
            raise ValueError(f"coupling g must be positive, got {self.g}")
        if any(c < 2 for c in self.cutoffs):
            raise ValueError(f"every cutoff must be >= 2, got {self.cutoffs}")
        if self.kind in _SINGLE_MODE and n_modes != 1:
            raise ValueError(f"{self.kind.value} takes exactly one mode, got {n_modes}")
        if self.kind is ModelKind.RAMAN and n_modes != 2:
            raise ValueError("raman model needs two field modes (a and b)")
        if self.kind is ModelKind.MULTIMODE and not 1 <= n_modes <= MAX_MULTIMODE_MODES:
            raise ValueError(f"multimode construction supports 1..{MAX_MULTIMODE_MODES} modes")
        det = tuple(float(d) for d in self.detunings) or (0.0,) * n_modes
        if len(det) != n_modes:
            raise ValueError(f"expected {n_modes} detunings, got {len(det)}")
        object.__setattr__(self, "detunings", det)
        cpl = tuple(float(c) for c in self.couplings) or (float(self.g),) * n_modes
        if len(cpl) != n_modes:
            raise ValueError(f"expected {n_modes} couplings, got {len(cpl)}")
        if any(c < 0 for c in cpl):
            raise ValueError("couplings must be non-negative")
        object.__setattr__(self, "couplings", cpl)
        if self.kind is ModelKind.FNFAMILY:
            if self.fn is None or len(self.fn) < self.cutoffs[0] - 1:
                raise ValueError("fnfamily needs fn values for n = 0 .. cutoff-2")
            object.__setattr__(self, "fn", tuple(float(f) for f in self.fn[: self.cutoffs[0] - 1]))

    @property
    def atom_dim(self) -> int:
        return 3 if self.kind is ModelKind.RAMAN else 2

    @property
    def field_dim(self) -> int:
        return int(np.prod(self.cutoffs))

    @property
    def dim(self) -> int:
        return self.atom_dim * self.field_dim

    @property
    def n_modes(self) -> int:
        return len(self.cutoffs)


def jc(cutoff: int, g: float = 1.0, detuning: float = 0.0) -> ModelSpec:
    return ModelSpec(ModelKind.JC, (cutoff,), g=g, detunings=(detuning,))


def phase_model(cutoff: int, g: float = 1.0) -> ModelSpec:
    return ModelSpec(ModelKind.PHASE, (cutoff,), g=g)


def fn_family(fn: Sequence[float], cutoff: int, g: float = 1.0) -> ModelSpec:
    return ModelSpec(ModelKind.FNFAMILY, (cutoff,), g=g, fn=tuple(fn))


def multimode(cutoffs: Sequence[int], couplings: Sequence[float], detunings: Sequence[float] = ()) -> ModelSpec:
    return ModelSpec(ModelKind.MULTIMODE, tuple(cutoffs), couplings=tuple(couplings), detunings=tuple(detunings))


def raman(cutoffs: tuple[int, int], couplings: tuple[float, float] = (1.0, 1.0),
          detunings: tuple[float, float] = (0.0, 0.0)) -> ModelSpec:
    return ModelSpec(ModelKind.RAMAN, tuple(cutoffs), couplings=tuple(couplings), detunings=tuple(detunings))


class HamiltonianTerms(NamedTuple):
    """H = diag(diag) + sum over k of vals[k] |rows[k]><cols[k]| + h.c."""

    diag: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray


def _field_numbers(cutoffs: tuple[int, ...]) -> np.ndarray:
    """Photon numbers of each flattened field index, shape (field_dim, n_modes)."""
    grids = np.meshgrid(*[np.arange(c) for c in cutoffs], indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _lowering_terms(m: ModelSpec, mode: int, lower: int, upper: int, rate: float,
                    amplitude=np.sqrt):
    """Couplings  i*rate*amp(n) |upper, n - 1_mode><lower, n|  over all retained n."""
    numbers = _field_numbers(m.cutoffs)
    strides = np.array([int(np.prod(m.cutoffs[k + 1:])) for k in range(m.n_modes)])
    src = np.nonzero(numbers[:, mode] >= 1)[0]
    dst = src - strides[mode]
    fd = m.field_dim
    rows = upper * fd + dst
    cols = lower * fd + src
    vals = 1j * rate * amplitude(numbers[src, mode])
    return rows, cols, vals


def hamiltonian_terms(m: ModelSpec) -> HamiltonianTerms:
    """Diagonal plus upper-coupling list of the model Hamiltonian (no dense matrix)."""
    check_state_dim(m.dim)
    numbers = _field_numbers(m.cutoffs)
    field_diag = numbers @ np.array(m.detunings, dtype=float)
    diag = np.tile(field_diag, m.atom_dim).astype(float)
    if m.kind is ModelKind.RAMAN:
        parts = [
            _lowering_terms(m, 0, lower=0, upper=2, rate=m.couplings[0]),
            _lowering_terms(m, 1, lower=1, upper=2, rate=m.couplings[1]),
        ]
    elif m.kind is ModelKind.MULTIMODE:
        parts = [_lowering_terms(m, k, lower=0, upper=1, rate=m.couplings[k]) for k in range(m.n_modes)]
    else:
        if m.kind is ModelKind.JC:
            amp = np.sqrt
        elif m.kind is ModelKind.PHASE:
            amp = np.ones_like
        else:
            fn = np.array(m.fn)
            amp = lambda n: fn[n - 1]  # noqa: E731  (f_n couples |n+1> -> |n>)
        parts = [_lowering_terms(m, 0, lower=0, upper=1, rate=m.couplings[0], amplitude=amp)]
    rows = np.concatenate([p[0] for p in parts])
    cols = np.concatenate([p[1] for p in parts])
    vals = np.concatenate([p[2] for p in parts]).astype(complex)
    keep = vals != 0
    return HamiltonianTerms(diag, rows[keep], cols[keep], vals[keep])


def build_hamiltonian(m: ModelSpec) -> np.ndarray:
    """Dense Hermitian matrix of the model (angular frequencies, hbar = 1)."""
    check_operator_dim(m.dim)
    t = hamiltonian_terms(m)
    h = np.diag(t.diag).astype(complex)
    h[t.rows, t.cols] += t.vals
    h[t.cols, t.rows] += t.vals.conj()
    return h


def _l2_diagonal(m: ModelSpec) -> np.ndarray:
    numbers = _field_numbers(m.cutoffs)
    if m.kind is ModelKind.RAMAN:
        return (numbers[:, 1] - numbers[:, 0]).astype(float)
    return -2.0 * numbers.sum(axis=1).astype(float)


def conserved_diagonal(m: ModelSpec) -> np.ndarray:
    """Diagonal of L = sigma_z (x) I + I (x) L2 on the joint space."""
    sz = np.diag(sigma_z(m.atom_dim)).real
    return (sz[:, None] + _l2_diagonal(m)[None, :]).ravel()


@dataclass(frozen=True, eq=False)
class ConservedQuantity:
    l1: np.ndarray
    l2: np.ndarray
    total: np.ndarray


def conserved_quantity(m: ModelSpec) -> ConservedQuantity:
    check_operator_dim(m.dim)
    l1 = sigma_z(m.atom_dim)
    l2 = np.diag(_l2_diagonal(m)).astype(complex)
    total = np.diag(conserved_diagonal(m)).astype(complex)
    return ConservedQuantity(l1=l1, l2=l2, total=total)


def commutator_residual(m: ModelSpec) -> float:
    """max |[L, H]_rc| evaluated term by term; exact and dense-free since L is diagonal."""
    t = hamiltonian_terms(m)
    if t.vals.size == 0:
        return 0.0
    ell = conserved_diagonal(m)
    return float(np.max(np.abs((ell[t.rows] - ell[t.cols]) * t.vals)))


def raman_commutator_residuals(m: ModelSpec) -> dict[str, float]:
    """Dense check of the Raman commutators with sigma_z, a^dag a, b^dag b.

    With X_a = a|e><g1| + a^dag|g1><e| and X_b likewise:
    [sigma_z, H] = -i g_a X_a + i g_b X_b, [a^dag a, H] = -i g_a X_a,
    [b^dag b, H] = -i g_b X_b, hence [sigma_z - a^dag a + b^dag b, H] = 0.
    Returns the max-entry residual of each relation.
    """
    if m.kind is not ModelKind.RAMAN:
        raise ValueError("raman_commutator_residuals needs a raman model")
    h = build_hamiltonian(m)
    numbers = _field_numbers(m.cutoffs)
    eye3 = np.eye(3)
    na = np.kron(eye3, np.diag(numbers[:, 0]).astype(float))
    nb = np.kron(eye3, np.diag(numbers[:, 1]).astype(float))
    sz = np.kron(sigma_z(3), np.eye(m.field_dim))
    xs = []
    for k, lower in ((0, 0), (1, 1)):
        r, c, v = _lowering_terms(m, k, lower=lower, upper=2, rate=1.0)
        x = np.zeros_like(h)
        x[r, c] = (v / 1j).real
        xs.append(x + x.conj().T)
    ga, gb = m.couplings

    def comm(a):
        return a @ h - h @ a

    def res(a):
        return float(np.max(np.abs(a))) if a.size else 0.0

    return {
        "sigma_z": res(comm(sz) - (-1j * ga * xs[0] + 1j * gb * xs[1])),
        "n_a": res(comm(na) - (-1j * ga * xs[0])),
        "n_b": res(comm(nb) - (-1j * gb * xs[1])),
        "total": res(comm(sz) - comm(na) + comm(nb)),
    }


def cql_bound(var_l2: float) -> float:
    """Lower bound 1/4 * 1/(1 + var(L2)) on the worst-case gate error."""
    if var_l2 < 0:
        raise ValueError(f"var(L2) must be non-negative, got {var_l2}")
    return 0.25 / (1.0 + var_l2)


def bound_inputs(m: ModelSpec, fields: Sequence[FieldState]) -> float:
    """var(L2) for a product of per-mode field states."""
    fields = list(fields)
    if len(fields) != m.n_modes:
        raise ValueError(f"{m.kind.value} has {m.n_modes} mode(s), got {len(fields)} field state(s)")
    var = [number_stats(f).var_n for f in fields]
    if m.kind is ModelKind.RAMAN:
        return var[0] + var[1]
    return 4.0 * sum(var)
