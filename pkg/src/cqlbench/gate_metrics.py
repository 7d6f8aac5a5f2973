"""Error operator, gate fidelities, and the conservation-law inequality chain.

Sign convention: ``target_sign = +1`` means D = U^dag sigma_z U + sigma_x, whose
ideal gate is sigma_x H = (1/sqrt 2)[[1, -1], [1, 1]] (the semiclassical JC
gate). ``target_sign = -1`` means D = U^dag sigma_z U - sigma_x with the
Hadamard as ideal gate. Each sign is paired with its own default target, so
the identity <D^2> = 4 - 2 F^2(|-x>) - 2 F^2(|+x>) holds in both conventions.

All moments are taken in the product state |+y> (x) psi.

For a three-level (Raman) atom, sigma_z and sigma_x act on the ground doublet
and annihilate |e>. Fidelity projects onto the target qubit state, so any
population left in |e> counts as error.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize

from .dynamics import Propagator, field_vector
from .field_states import FieldState, number_stats, phase_stats
from .operator_core import PLUS_Y, sigma_x, sigma_z

__all__ = [
    "SIGMA_X_HADAMARD",
    "HADAMARD",
    "TheoremViolation",
    "default_target",
    "DMoments",
    "BranchDecomposition",
    "WorstCase",
    "GateReport",
    "CqlCheck",
    "Decomposition",
    "joint_state",
    "error_operator",
    "d_moments",
    "branch_decomposition",
    "d2_from_branches",
    "bloch_state",
    "fidelity_gram",
    "fidelity_squared",
    "fidelity_at",
    "pm_x_fidelities",
    "mean_gate_fidelity_from_branches",
    "worst_case_fidelity",
    "leakage_gap",
    "leakage_population",
    "gate_report",
    "cql_check",
    "decompose_error",
]

SIGMA_X_HADAMARD = np.array([[1.0, -1.0], [1.0, 1.0]], dtype=complex) / math.sqrt(2.0)
HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / math.sqrt(2.0)

PLUS_X = np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0)
MINUS_X = np.array([1.0, -1.0], dtype=complex) / math.sqrt(2.0)
# Octahedron vertices form a spherical 3-design: their mean of a quadratic
# function of the Bloch vector equals its sphere average.
_AXIS_STATES = np.array(
    [[1, 0], [0, 1], PLUS_X * math.sqrt(2), MINUS_X * math.sqrt(2), [1, 1j], [1, -1j]], dtype=complex
)
_AXIS_STATES /= np.linalg.norm(_AXIS_STATES, axis=1, keepdims=True)

THEOREM_TOL = 1e-9


class TheoremViolation(AssertionError):
    """The fidelity / error-operator inequality chain failed beyond tolerance."""

    def __init__(self, message: str, margins: dict | None = None):
        super().__init__(message)
        self.margins = margins or {}


def default_target(target_sign: int) -> np.ndarray:
    if target_sign not in (1, -1):
        raise ValueError(f"target_sign must be +1 or -1, got {target_sign}")
    return SIGMA_X_HADAMARD if target_sign == 1 else HADAMARD


def _as_fields(fields) -> list:
    return [fields] if isinstance(fields, FieldState) else list(fields)


def joint_state(atom: np.ndarray, fields, atom_dim: int = 2) -> np.ndarray:
    """Product state atom (x) field; a 2-vector is embedded into the qubit levels."""
    a = np.zeros(atom_dim, dtype=complex)
    a[: len(atom)] = atom
    return np.kron(a, field_vector(_as_fields(fields)))


def error_operator(u: Propagator, target_sign: int = 1) -> np.ndarray:
    """Dense D = U^dag (sigma_z (x) I) U + target_sign (sigma_x (x) I)."""
    default_target(target_sign)
    ud = u.dense()
    field_dim = u.dim // u.atom_dim
    eye = np.eye(field_dim)
    sz = np.kron(sigma_z(u.atom_dim), eye)
    sx = np.kron(sigma_x(u.atom_dim), eye)
    return ud.conj().T @ sz @ ud + target_sign * sx


class DMoments(NamedTuple):
    mean_D: float
    mean_D2: float
    var_D: float


def d_moments(u: Propagator, fields, target_sign: int = 1) -> DMoments:
    """<D>, <D^2>, var(D) in |+y> (x) psi without forming D.

    D|chi> = U^dag (sigma_z U|chi> + s U sigma_x|chi>), and U^dag preserves
    norms, so <D^2> = ||sigma_z U chi + s U sigma_x chi||^2.
    """
    default_target(target_sign)
    ad = u.atom_dim
    chi = joint_state(PLUS_Y, fields, ad)
    fd = chi.size // ad
    x_chi = (sigma_x(ad) @ chi.reshape(ad, fd)).ravel()
    out = u.apply(np.stack([chi, x_chi], axis=1))
    u_chi, u_x_chi = out[:, 0], out[:, 1]
    sz = np.diag(sigma_z(ad)).real
    z_u_chi = (sz[:, None] * u_chi.reshape(ad, fd)).ravel()
    mean_d = float(np.vdot(u_chi, z_u_chi).real + target_sign * np.vdot(chi, x_chi).real)
    resid = z_u_chi + target_sign * u_x_chi
    mean_d2 = float(np.vdot(resid, resid).real)
    return DMoments(mean_d, mean_d2, max(mean_d2 - mean_d**2, 0.0))


@dataclass(frozen=True, eq=False)
class BranchDecomposition:
    """Field branches ``e{b}{a}`` = <atom b| U |atom a>|psi>, unnormalized."""

    e00: np.ndarray
    e10: np.ndarray
    e01: np.ndarray
    e11: np.ndarray


def _branches(u: Propagator, fields) -> tuple[np.ndarray, np.ndarray]:
    """U|0>|psi> and U|1>|psi>, each reshaped to (atom_dim, field_dim)."""
    psi = field_vector(_as_fields(fields))
    fd = psi.size
    if u.dim != u.atom_dim * fd:
        raise ValueError(f"propagator dim {u.dim} does not match atom {u.atom_dim} x field {fd}")
    starts = np.zeros((u.dim, 2), dtype=complex)
    starts[:fd, 0] = psi
    starts[fd:2 * fd, 1] = psi
    out = u.apply(starts)
    return out[:, 0].reshape(u.atom_dim, fd), out[:, 1].reshape(u.atom_dim, fd)


def branch_decomposition(u: Propagator, fields) -> BranchDecomposition:
    if u.atom_dim != 2:
        raise ValueError("branch decomposition is defined for a two-level atom")
    phi0, phi1 = _branches(u, fields)
    return BranchDecomposition(e00=phi0[0], e10=phi0[1], e01=phi1[0], e11=phi1[1])


def d2_from_branches(b: BranchDecomposition, target_sign: int = 1) -> float:
    """<D^2> from the four branches.

    target_sign = -1:  ||e00 - e01||^2 + ||e10 + e11||^2
    target_sign = +1:  ||e00 + e01||^2 + ||e10 - e11||^2
    """
    default_target(target_sign)
    s = target_sign
    first = b.e00 + s * b.e01
    second = b.e10 - s * b.e11
    return float(np.vdot(first, first).real + np.vdot(second, second).real)


def bloch_state(theta, phi) -> np.ndarray:
    """cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>; broadcasts over arrays."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    return np.stack([np.cos(theta / 2) + 0j, np.exp(1j * phi) * np.sin(theta / 2)], axis=-1)


def fidelity_gram(phi0: np.ndarray, phi1: np.ndarray) -> np.ndarray:
    """G[i, j, k, l] = <phi_i[j] | phi_k[l]> over the field, qubit outputs j, l only."""
    a = np.stack([phi0[:2], phi1[:2]])
    return np.einsum("ijf,klf->ijkl", a.conj(), a)


def fidelity_squared(gram: np.ndarray, chis: np.ndarray, target: np.ndarray) -> np.ndarray:
    """F^2(chi) = || (<target chi| (x) I) U (|chi> (x) |psi>) ||^2 for each row of ``chis``."""
    chis = np.atleast_2d(chis)
    w = chis @ target.T
    m = np.einsum("nj,nl,ijkl->nik", w, w.conj(), gram)
    return np.einsum("ni,nik,nk->n", chis.conj(), m, chis).real


def fidelity_at(u: Propagator, fields, chi: np.ndarray, target: np.ndarray) -> float:
    gram = fidelity_gram(*_branches(u, fields))
    return float(fidelity_squared(gram, np.asarray(chi, dtype=complex), target)[0])


def pm_x_fidelities(u: Propagator, fields, target: np.ndarray) -> tuple[float, float]:
    """(F^2(|+x>), F^2(|-x>))."""
    gram = fidelity_gram(*_branches(u, fields))
    f = fidelity_squared(gram, np.stack([PLUS_X, MINUS_X]), target)
    return float(f[0]), float(f[1])


def mean_gate_fidelity_from_branches(phi0: np.ndarray, phi1: np.ndarray, atom_dim: int,
                                     target: np.ndarray) -> float:
    """Sphere average of F^2 given flat branch vectors U|0>|psi>, U|1>|psi>."""
    gram = fidelity_gram(phi0.reshape(atom_dim, -1), phi1.reshape(atom_dim, -1))
    return float(fidelity_squared(gram, _AXIS_STATES, target).mean())


class WorstCase(NamedTuple):
    f2_min: float
    theta: float
    phi: float
    state: np.ndarray
    converged: bool


GRID_THETA = 181
GRID_PHI = 360


def worst_case_fidelity(u: Propagator, fields, target: np.ndarray | None = None,
                        target_sign: int = 1) -> WorstCase:
    """Minimum of F^2 over pure qubit inputs.

    A 181 x 360 Bloch-sphere grid (ties go to the smallest polar angle, then
    azimuth) seeds Nelder-Mead refinement from the best point and from the
    best point at least 30 degrees away. The six axis states are always
    candidates too.
    """
    target = default_target(target_sign) if target is None else np.asarray(target, dtype=complex)
    gram = fidelity_gram(*_branches(u, fields))
    theta = np.linspace(0.0, math.pi, GRID_THETA)
    phi = np.arange(GRID_PHI) * (2.0 * math.pi / GRID_PHI)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    tt, pp = tt.ravel(), pp.ravel()
    values = fidelity_squared(gram, bloch_state(tt, pp), target)

    def objective(x):
        return float(fidelity_squared(gram, bloch_state(x[0], x[1])[None], target)[0])

    best_k = int(np.argmin(values))
    seeds = [best_k]
    r = np.stack([np.sin(tt) * np.cos(pp), np.sin(tt) * np.sin(pp), np.cos(tt)], axis=1)
    far = np.nonzero(r @ r[best_k] < math.cos(math.radians(30.0)))[0]
    if far.size:
        seeds.append(int(far[np.argmin(values[far])]))

    best = (float(values[best_k]), float(tt[best_k]), float(pp[best_k]))
    converged = True
    for k in seeds:
        res = minimize(objective, x0=[tt[k], pp[k]], method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-15, "maxiter": 4000})
        if k == best_k:
            converged = bool(res.success)
        if res.fun < best[0]:
            best = (float(res.fun), float(res.x[0]), float(res.x[1]))
    # axis states: exact candidates, including |+-x> used by the chain identity
    axis_vals = fidelity_squared(gram, _AXIS_STATES, target)
    axis_angles = [(0.0, 0.0), (math.pi, 0.0), (math.pi / 2, 0.0), (math.pi / 2, math.pi),
                   (math.pi / 2, math.pi / 2), (math.pi / 2, 3 * math.pi / 2)]
    j = int(np.argmin(axis_vals))
    if axis_vals[j] < best[0]:
        best = (float(axis_vals[j]), *axis_angles[j])
    f2, th, ph = best
    return WorstCase(f2, th, ph, bloch_state(th, ph), converged)


def leakage_population(u: Propagator, fields) -> float:
    """Mean population outside the qubit levels after the gate (sphere average)."""
    if u.atom_dim == 2:
        return 0.0
    phi0, phi1 = _branches(u, fields)
    total = 0.0
    for chi in _AXIS_STATES:
        out = chi[0] * phi0 + chi[1] * phi1
        total += float(np.vdot(out[2:], out[2:]).real)
    return total / len(_AXIS_STATES)


def leakage_gap(u: Propagator, fields, target_sign: int = 1) -> float:
    """4 - 2F^2(-x) - 2F^2(+x) - <D^2>; zero for a two-level atom.

    With a third level, a = P_e U|+x>|psi> and b = P_e U|-x>|psi> give
    gap = 2||a||^2 + 2||b||^2 - ||(1+i) a - (1-i) b||^2 / 4 >= 0.
    """
    default_target(target_sign)
    if u.atom_dim == 2:
        return 0.0
    phi0, phi1 = _branches(u, fields)
    a = ((phi0 + phi1) / math.sqrt(2.0))[2:].ravel()
    b = ((phi0 - phi1) / math.sqrt(2.0))[2:].ravel()
    mix = (1 + 1j) * a - (1 - 1j) * b
    return float(2 * np.vdot(a, a).real + 2 * np.vdot(b, b).real - 0.25 * np.vdot(mix, mix).real)


@dataclass(frozen=True)
class GateReport:
    mean_D: float
    mean_D2: float
    var_D: float
    fidelity_plus_x: float
    fidelity_minus_x: float
    worst_case_infidelity: float
    cql_bound: float
    intensity_term: float
    phase_term: float
    target_sign: int

    def to_dict(self) -> dict:
        return asdict(self)


def gate_report(u: Propagator, fields, var_l2: float, target_sign: int = 1,
                target: np.ndarray | None = None) -> GateReport:
    from .models import cql_bound

    target = default_target(target_sign) if target is None else target
    fields = _as_fields(fields)
    mom = d_moments(u, fields, target_sign)
    f_plus, f_minus = pm_x_fidelities(u, fields, target)
    worst = worst_case_fidelity(u, fields, target)
    intensity = phase = math.nan
    if len(fields) == 1:
        ns = number_stats(fields[0])
        if ns.nbar > 0:
            intensity = math.pi**2 * ns.var_n / (16.0 * ns.nbar**2)
        phase = phase_stats(fields[0]).var_phi_proxy
    return GateReport(
        mean_D=mom.mean_D,
        mean_D2=mom.mean_D2,
        var_D=mom.var_D,
        fidelity_plus_x=f_plus,
        fidelity_minus_x=f_minus,
        worst_case_infidelity=1.0 - worst.f2_min,
        cql_bound=cql_bound(var_l2),
        intensity_term=intensity,
        phase_term=phase,
        target_sign=target_sign,
    )


@dataclass(frozen=True)
class CqlCheck:
    passed: bool
    margins: dict


def cql_check(report: GateReport, tol: float = THEOREM_TOL, strict: bool = True) -> CqlCheck:
    """Check 1 - F_min^2 >= <D^2>/4 >= var(D)/4 >= bound, and 1 - F_min^2 >= bound.

    <D^2> is evaluated at |+y> (x) psi, a lower bound on its maximum over inputs.
    Raises :class:`TheoremViolation` on failure when ``strict``.
    """
    margins = {
        "infidelity_minus_quarter_D2": report.worst_case_infidelity - 0.25 * report.mean_D2,
        "quarter_D2_minus_quarter_varD": 0.25 * (report.mean_D2 - report.var_D),
        "quarter_varD_minus_bound": 0.25 * report.var_D - report.cql_bound,
        "infidelity_minus_bound": report.worst_case_infidelity - report.cql_bound,
    }
    passed = all(v >= -tol for v in margins.values())
    if strict and not passed:
        worst = min(margins, key=margins.get)
        raise TheoremViolation(f"inequality chain broken at {worst} (margin {margins[worst]:.3e})", margins)
    return CqlCheck(passed, margins)


class Decomposition(NamedTuple):
    intensity_term: float
    phase_term: float
    sigma_D2_exact: float
    ratio: float
    valid: bool


def decompose_error(u: Propagator, field: FieldState, target_sign: int = 1) -> Decomposition:
    """Split var(D) into pi^2 var(n) / (16 nbar^2) plus the phase proxy 2 - 2<cos phi>.

    ``ratio`` is (intensity + phase) / exact var(D). The split assumes a
    well-defined phase; ``valid`` is False when the proxy exceeds 0.5.
    """
    ns = number_stats(field)
    if ns.nbar <= 0.0:
        raise ValueError("decomposition needs a field with nonzero mean photon number")
    intensity = math.pi**2 * ns.var_n / (16.0 * ns.nbar**2)
    phase = phase_stats(field).var_phi_proxy
    exact = d_moments(u, [field], target_sign).var_D
    ratio = (intensity + phase) / exact if exact > 0 else math.inf
    return Decomposition(intensity, phase, exact, ratio, phase <= 0.5)
