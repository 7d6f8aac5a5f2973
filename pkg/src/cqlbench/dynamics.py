"""Exact propagators on the truncated joint space, and gate-time selection.

A :class:`Propagator` stores U as a direct sum of small blocks over disjoint
index sets. Applying U to a state never needs the dense matrix, so the
production paths scale to large photon numbers. ``dense()`` materializes U
when the operator cap allows it.

Methods:

* ``BLOCK_JC``    closed-form 2x2 rotations on span{|g,n+1>, |e,n>}
* ``BLOCK_PHASE`` closed form of the phase-coupled model (cos gt + shift terms
  + vacuum correction)
* ``SECTOR``      eigendecomposition of H inside each eigenspace of L
* ``EXPM``        one dense eigendecomposition of the full H (cross-check only)
* ``CLASSICAL``   the semiclassical 2x2 gate tensored with the field identity
"""
from __future__ import annotations

import enum
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.stats import unitary_group

from .field_states import FieldState, number_stats
from .models import ModelKind, ModelSpec, build_hamiltonian, conserved_diagonal, hamiltonian_terms
from .operator_core import ContractError, check_operator_dim, check_state_dim, herm_expm

__all__ = [
    "Method",
    "Propagator",
    "GateTime",
    "TimeRule",
    "SectorEvolver",
    "jc_propagator",
    "phase_propagator",
    "expm_propagator",
    "sector_propagator",
    "random_conserving_propagator",
    "classical_gate",
    "classical_propagator",
    "propagator",
    "conservation_residual",
    "field_vector",
    "gate_time",
    "scan_window",
]


class Method(str, enum.Enum):
    BLOCK_JC = "block_jc"
    BLOCK_PHASE = "block_phase"
    SECTOR = "sector"
    EXPM = "expm"
    CLASSICAL = "classical"


@dataclass(frozen=True, eq=False)
class Propagator:
    """U = direct sum of ``mats[k]`` acting on index tuples ``idx[k]``.

    ``blocks`` is a tuple of ``(idx, mats)`` pairs grouped by block size:
    ``idx`` has shape (count, size) and ``mats`` shape (count, size, size).
    Together the index sets partition ``range(dim)``.
    """

    dim: int
    atom_dim: int
    t: float
    method: Method
    blocks: tuple

    def apply(self, psi: np.ndarray) -> np.ndarray:
        """U @ psi for a state (dim,) or a stack of states (dim, k)."""
        psi = np.asarray(psi, dtype=complex)
        out = np.empty_like(psi)
        for idx, mats in self.blocks:
            if psi.ndim == 1:
                out[idx] = np.matmul(mats, psi[idx][..., None])[..., 0]
            else:
                out[idx] = np.matmul(mats, psi[idx])
        return out

    def dense(self) -> np.ndarray:
        check_operator_dim(self.dim)
        u = np.zeros((self.dim, self.dim), dtype=complex)
        for idx, mats in self.blocks:
            u[idx[:, :, None], idx[:, None, :]] = mats
        return u

    def unitarity_error(self) -> float:
        err = 0.0
        for _, mats in self.blocks:
            eye = np.eye(mats.shape[1])
            gram = np.einsum("kji,kjl->kil", mats.conj(), mats)
            err = max(err, float(np.max(np.abs(gram - eye))))
        return err


class TimeRule(str, enum.Enum):
    JC_RULE = "jc_rule"
    PHASE_RULE = "phase_rule"
    SCAN = "scan"
    FIXED = "fixed"


@dataclass(frozen=True)
class GateTime:
    t_star: float
    rule: TimeRule
    mean_fidelity: float = math.nan
    flagged: bool = False


def _two_level_propagator(m: ModelSpec, t: float, angles: np.ndarray, method: Method,
                          idle_g0: complex, idle_top: complex) -> Propagator:
    """Rotations exp(-i angle sigma_y) on each (|g,n+1>, |e,n>) pair plus two idle levels."""
    check_state_dim(m.dim)
    n_cut = m.cutoffs[0]
    n = np.arange(n_cut - 1)
    c, s = np.cos(angles), np.sin(angles)
    pair_idx = np.stack([n + 1, n_cut + n], axis=1)  # (|g,n+1>, |e,n>)
    pair_mats = np.empty((n_cut - 1, 2, 2), dtype=complex)
    pair_mats[:, 0, 0] = c
    pair_mats[:, 0, 1] = -s
    pair_mats[:, 1, 0] = s
    pair_mats[:, 1, 1] = c
    idle_idx = np.array([[0], [2 * n_cut - 1]], dtype=np.intp)
    idle_mats = np.array([[[idle_g0]], [[idle_top]]], dtype=complex)
    blocks = ((idle_idx, idle_mats), (pair_idx.astype(np.intp), pair_mats))
    return Propagator(dim=m.dim, atom_dim=2, t=float(t), method=method, blocks=blocks)


def jc_propagator(m: ModelSpec, t: float) -> Propagator:
    """Closed-form resonant JC propagator.

    On (|g,n+1>, |e,n>) the block is [[cos x, -sin x], [sin x, cos x]] with
    x = g t sqrt(n+1). |g,0> is stationary, and so is the truncated top level
    |e,N-1>, whose partner |g,N> lies outside the retained space.
    """
    if m.kind is not ModelKind.JC:
        raise ContractError(f"jc_propagator needs a JC model, got {m.kind.value}")
    if m.detunings[0] != 0.0:
        raise ContractError("closed-form JC propagator is resonant only; use sector_propagator")
    n = np.arange(m.cutoffs[0] - 1)
    angles = m.couplings[0] * t * np.sqrt(n + 1.0)
    return _two_level_propagator(m, t, angles, Method.BLOCK_JC, 1.0, 1.0)


def phase_propagator(m: ModelSpec, t: float, close_boundary: bool = True) -> Propagator:
    """Closed-form propagator of the phase-coupled model.

    U = cos(gt) + [[2 sin^2(gt/2) |0><0|, -sin(gt) E^dag], [sin(gt) E, 0]]
    in the (g, e) atom blocks, where E = sum |n><n+1|. The |g,0> correction
    makes the vacuum stationary. With ``close_boundary`` the same correction is
    applied to |e,N-1>, which the truncation also decouples; that gives the
    exact unitary of the truncated Hamiltonian. Without it the top level
    keeps cos(gt) and U is unitary only off that level.
    """
    if m.kind is not ModelKind.PHASE:
        raise ContractError(f"phase_propagator needs a PHASE model, got {m.kind.value}")
    if m.detunings[0] != 0.0:
        raise ContractError("closed-form phase propagator is resonant only")
    gt = m.couplings[0] * t
    angles = np.full(m.cutoffs[0] - 1, gt)
    vacuum = math.cos(gt) + 2.0 * math.sin(gt / 2.0) ** 2
    top = vacuum if close_boundary else math.cos(gt)
    return _two_level_propagator(m, t, angles, Method.BLOCK_PHASE, vacuum, top)


def expm_propagator(m: ModelSpec, t: float) -> Propagator:
    """Dense exp(-iHt) of the whole truncated Hamiltonian."""
    u = herm_expm(build_hamiltonian(m), t)
    idx = np.arange(m.dim, dtype=np.intp)[None, :]
    return Propagator(dim=m.dim, atom_dim=m.atom_dim, t=float(t), method=Method.EXPM, blocks=((idx, u[None]),))


class SectorEvolver:
    """Eigendecomposition of H restricted to each eigenspace of the conserved L.

    Construction fails if any coupling links two different eigenvalues of L,
    so a propagator built here is conserving by verified structure, not by
    assumption.
    """

    def __init__(self, m: ModelSpec):
        self.model = m
        terms = hamiltonian_terms(m)
        ell = np.rint(conserved_diagonal(m)).astype(np.int64)
        if np.any(ell[terms.rows] != ell[terms.cols]):
            raise ContractError("Hamiltonian couples different eigenspaces of the conserved quantity")
        order = np.argsort(ell, kind="stable")
        values, starts = np.unique(ell[order], return_index=True)
        sectors = np.split(order, starts[1:])
        local = np.empty(m.dim, dtype=np.intp)
        sector_of = np.empty(m.dim, dtype=np.intp)
        for k, sec in enumerate(sectors):
            local[sec] = np.arange(sec.size)
            sector_of[sec] = k
        hs = [np.diag(terms.diag[sec]).astype(complex) for sec in sectors]
        for r, c, v in zip(terms.rows, terms.cols, terms.vals):
            h = hs[sector_of[r]]
            h[local[r], local[c]] += v
            h[local[c], local[r]] += np.conj(v)
        self.sectors = sectors
        self.eig = []
        for h in hs:
            check_operator_dim(h.shape[0])
            self.eig.append(np.linalg.eigh(h))
        by_size = defaultdict(list)
        for sec, (energies, vecs) in zip(sectors, self.eig):
            by_size[sec.size].append((sec, vecs, energies))
        self._groups = [
            (np.array([x[0] for x in items], dtype=np.intp),
             np.array([x[1] for x in items], dtype=complex),
             np.array([x[2] for x in items], dtype=float))
            for _, items in sorted(by_size.items())
        ]

    def propagator(self, t: float) -> Propagator:
        blocks = tuple(
            (idx, np.matmul(vecs * np.exp(-1j * energies * t)[:, None, :], vecs.conj().transpose(0, 2, 1)))
            for idx, vecs, energies in self._groups
        )
        m = self.model
        return Propagator(dim=m.dim, atom_dim=m.atom_dim, t=float(t), method=Method.SECTOR, blocks=blocks)

    def prepare(self, states: np.ndarray) -> list:
        """Project states (dim, k) onto the sector eigenbases once; reuse across times."""
        return [
            (idx, vecs, energies, np.matmul(vecs.conj().transpose(0, 2, 1), states[idx]))
            for idx, vecs, energies in self._groups
        ]

    def evolve(self, prepared: list, t: float) -> np.ndarray:
        out = np.empty((self.model.dim, prepared[0][3].shape[-1]), dtype=complex)
        for idx, vecs, energies, amps in prepared:
            phase = np.exp(-1j * energies * t)[..., None]
            out[idx] = np.matmul(vecs, phase * amps)
        return out


def sector_propagator(m: ModelSpec, t: float) -> Propagator:
    return SectorEvolver(m).propagator(t)


def random_conserving_propagator(m: ModelSpec, rng: np.random.Generator) -> Propagator:
    """Haar-random unitary inside every eigenspace of L: a generic conserving evolution."""
    ell = np.rint(conserved_diagonal(m)).astype(np.int64)
    order = np.argsort(ell, kind="stable")
    _, starts = np.unique(ell[order], return_index=True)
    by_size = defaultdict(list)
    for sec in np.split(order, starts[1:]):
        mat = unitary_group.rvs(sec.size, random_state=rng) if sec.size > 1 else np.exp(2j * np.pi * rng.random((1, 1)))
        by_size[sec.size].append((sec, mat))
    blocks = tuple(
        (np.array([x[0] for x in items], dtype=np.intp), np.array([x[1] for x in items], dtype=complex))
        for _, items in sorted(by_size.items())
    )
    return Propagator(dim=m.dim, atom_dim=m.atom_dim, t=math.nan, method=Method.SECTOR, blocks=blocks)


def classical_gate(phi: float, theta: float) -> np.ndarray:
    """cos(theta) I + sin(theta) [[0, -e^{-i phi}], [e^{i phi}, 0]] in the {|0>, |1>} basis."""
    return np.array(
        [
            [math.cos(theta), -np.exp(-1j * phi) * math.sin(theta)],
            [np.exp(1j * phi) * math.sin(theta), math.cos(theta)],
        ],
        dtype=complex,
    )


def classical_propagator(phi: float, theta: float, field_dim: int) -> Propagator:
    """Semiclassical gate on the atom, identity on a field of dimension ``field_dim``."""
    gate = classical_gate(phi, theta)
    n = np.arange(field_dim)
    idx = np.stack([n, field_dim + n], axis=1).astype(np.intp)
    mats = np.broadcast_to(gate, (field_dim, 2, 2)).copy()
    return Propagator(dim=2 * field_dim, atom_dim=2, t=theta, method=Method.CLASSICAL, blocks=((idx, mats),))


def propagator(m: ModelSpec, t: float) -> Propagator:
    """Production propagator: closed form where it exists, sector eigendecomposition otherwise."""
    resonant = all(d == 0.0 for d in m.detunings)
    if m.kind is ModelKind.JC and resonant:
        return jc_propagator(m, t)
    if m.kind is ModelKind.PHASE and resonant:
        return phase_propagator(m, t)
    return sector_propagator(m, t)


def conservation_residual(u: Propagator, ell: np.ndarray) -> float:
    """max |U^dag L U - L| for diagonal L, evaluated block by block.

    Entries linking two different blocks are U^dag L U entries between blocks,
    which vanish identically for a direct sum, so only in-block terms can be nonzero.
    """
    ell = np.asarray(ell, dtype=float)
    err = 0.0
    for idx, mats in u.blocks:
        lv = ell[idx]
        conj = np.matmul(mats.conj().transpose(0, 2, 1), lv[:, :, None] * mats)
        resid = conj - lv[:, :, None] * np.eye(idx.shape[1])
        err = max(err, float(np.max(np.abs(resid))))
    return err


def field_vector(fields: FieldState | Sequence[FieldState]) -> np.ndarray:
    if isinstance(fields, FieldState):
        return fields.coeffs.astype(complex)
    vec = np.ones(1, dtype=complex)
    for f in fields:
        vec = np.kron(vec, f.coeffs)
    return vec


def _as_list(fields) -> list:
    return [fields] if isinstance(fields, FieldState) else list(fields)


def _is_jc_like(m: ModelSpec) -> bool:
    if m.kind is ModelKind.JC:
        return True
    if m.kind is ModelKind.FNFAMILY:
        return np.allclose(m.fn, np.sqrt(np.arange(1, len(m.fn) + 1)), rtol=0, atol=1e-14)
    return False


def scan_window(m: ModelSpec, fields) -> float:
    """Coarse Rabi period used as the SCAN window."""
    nbars = [number_stats(f).nbar for f in _as_list(fields)]
    if m.kind is ModelKind.RAMAN:
        ga, gb = m.couplings
        delta = max(abs(d) for d in m.detunings)
        if delta == 0.0:
            omega = math.sqrt(ga**2 * (nbars[0] + 1) + gb**2 * (nbars[1] + 1))
        else:
            omega = ga * gb * math.sqrt((nbars[0] + 1) * (nbars[1] + 1)) / delta
    elif m.kind is ModelKind.FNFAMILY:
        p = np.abs(_as_list(fields)[0].coeffs[:-1]) ** 2
        omega = m.couplings[0] * math.sqrt(max(float(p @ np.square(m.fn)), 1e-12))
    else:
        omega = math.sqrt(sum(gk**2 * (nb + 1) for gk, nb in zip(m.couplings, nbars)))
    return 2.0 * math.pi / omega


SCAN_POINTS = 1000
SCAN_FLOOR = 0.5


def gate_time(m: ModelSpec, fields, target_sign: int = 1, target: np.ndarray | None = None) -> GateTime:
    """Gate time for a model and initial field.

    JC (and FNFAMILY with f_n = sqrt(n+1)) uses 2 g t sqrt(nbar+1) = pi/2,
    PHASE uses g t = pi/4. Anything else scans the mean gate fidelity over one
    coarse Rabi period on a 1000-step grid and refines the best grid point by
    golden-section search.
    """
    fields = _as_list(fields)
    if _is_jc_like(m):
        nbar = number_stats(fields[0]).nbar
        return GateTime(math.pi / (4.0 * m.couplings[0] * math.sqrt(nbar + 1.0)), TimeRule.JC_RULE)
    if m.kind is ModelKind.PHASE:
        return GateTime(math.pi / (4.0 * m.couplings[0]), TimeRule.PHASE_RULE)
    return _scan_gate_time(m, fields, target_sign, target)


def _scan_gate_time(m: ModelSpec, fields, target_sign, target) -> GateTime:
    from .gate_metrics import default_target, mean_gate_fidelity_from_branches

    target = default_target(target_sign) if target is None else target
    evolver = SectorEvolver(m)
    psi = field_vector(fields)
    starts = np.zeros((m.dim, 2), dtype=complex)
    fd = psi.size
    starts[:fd, 0] = psi
    starts[fd:2 * fd, 1] = psi
    prepared = evolver.prepare(starts)

    def fidelity(t: float) -> float:
        out = evolver.evolve(prepared, t)
        return mean_gate_fidelity_from_branches(out[:, 0], out[:, 1], m.atom_dim, target)

    window = scan_window(m, fields)
    grid = np.linspace(0.0, window, SCAN_POINTS + 1)[1:]
    values = np.array([fidelity(t) for t in grid])
    k = int(np.argmax(values))
    t_best, f_best = float(grid[k]), float(values[k])
    if 0 < k < grid.size - 1 and values[k] > values[k - 1] and values[k] > values[k + 1]:
        res = minimize_scalar(lambda t: -fidelity(t), bracket=(grid[k - 1], grid[k], grid[k + 1]),
                              method="golden", tol=1e-9)
        if -res.fun >= f_best:
            t_best, f_best = float(res.x), float(-res.fun)
    return GateTime(t_best, TimeRule.SCAN, mean_fidelity=f_best, flagged=f_best <= SCAN_FLOOR)
