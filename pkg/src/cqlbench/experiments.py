"""Studies built on the models: bound battery, saturation sweep, multimode and Raman demos.

Rows come out in grid order and every number is written with 12 significant
digits, so an identical config gives byte-identical output.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, fields as dc_fields
from typing import Iterable, Sequence

import numpy as np

from . import models as mdl
from .dynamics import GateTime, Propagator, TimeRule, conservation_residual, gate_time, propagator
from .field_states import AUTO, FieldState, auto_cutoff, coherent_state, custom_state, fock_state, number_stats, state_from_json, state_to_json
from .gate_metrics import (
    GateReport,
    TheoremViolation,
    cql_check,
    gate_report,
    leakage_gap,
    leakage_population,
)
from .models import ModelKind, ModelSpec

__all__ = [
    "SCHEMA_VERSION",
    "SweepConfig",
    "SweepRow",
    "Simulation",
    "MultimodeDemo",
    "RamanDemo",
    "simulate",
    "make_state",
    "build_case",
    "run_bound_battery",
    "run_saturation_sweep",
    "saturation_checks",
    "run_multimode_demo",
    "run_raman_demo",
    "format_number",
    "rows_to_csv",
    "rows_to_jsonl",
    "report_json",
]

SCHEMA_VERSION = "cqlbench-sweep/1"

# Illustrative "driven + spectator" coupling ratio for the multimode looseness demo.
SPECTATOR_COUPLING = 0.05
SPECTATOR_CUTOFF = 4
# Interpolating coupling f_n = (n+1)^(1/4), halfway (in exponent) between phase and JC.
FN_EXPONENT = 0.25
# Raman detuning in units of g sqrt(nbar+1); large enough for a two-photon regime.
RAMAN_DETUNING_FACTOR = 10.0
FOCK_MARGIN = 3


@dataclass(frozen=True)
class SweepConfig:
    """Models x states for a sweep.

    States are the Fock levels ``fock_levels`` followed by one state per
    ``nbar_grid`` entry of ``family`` (coherent: mean photon number, fock:
    photon number). ``family = "random"`` draws ``len(nbar_grid)`` seeded
    real-amplitude states with those mean photon numbers.
    """

    models: tuple[str, ...]
    nbar_grid: tuple[float, ...] = ()
    family: str = "coherent"
    fock_levels: tuple[int, ...] = ()
    cutoff: int | str = AUTO
    fmt: str = "csv"
    seed: int = 0
    custom_path: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "models", tuple(str(m).lower() for m in self.models))
        object.__setattr__(self, "nbar_grid", tuple(float(x) for x in self.nbar_grid))
        object.__setattr__(self, "fock_levels", tuple(int(x) for x in self.fock_levels))
        if not self.models:
            raise ValueError("sweep needs at least one model")
        for m in self.models:
            ModelKind(m)
        if self.family not in ("coherent", "fock", "random", "custom"):
            raise ValueError(f"unknown state family {self.family!r}")
        if self.family == "custom":
            if not self.custom_path:
                raise ValueError("custom family needs custom_path")
        elif not self.nbar_grid and not self.fock_levels:
            raise ValueError("nbar grid must be nonempty")
        if any(b <= a for a, b in zip(self.nbar_grid, self.nbar_grid[1:])):
            raise ValueError("nbar grid must be strictly ascending")
        if any(x < 0 for x in self.nbar_grid) or any(n < 0 for n in self.fock_levels):
            raise ValueError("photon numbers must be non-negative")
        if self.fmt not in ("csv", "json"):
            raise ValueError(f"unknown output format {self.fmt!r}")
        if self.cutoff != AUTO and int(self.cutoff) < 2:
            raise ValueError("cutoff must be >= 2")


@dataclass(frozen=True)
class SweepRow:
    model: str
    state: str
    nbar: float
    var_n: float
    var_l2: float
    t_star: float
    time_rule: str
    sigma_D2: float
    mean_D2: float
    infidelity_worst: float
    bound: float
    saturation_ratio: float
    intensity_term: float
    phase_term: float
    flagged: bool


@dataclass(frozen=True, eq=False)
class Simulation:
    model: ModelSpec
    fields: tuple
    time: GateTime
    var_l2: float
    report: GateReport
    propagator: Propagator
    leakage: float

    @property
    def saturation_ratio(self) -> float:
        return self.report.var_D * (1.0 + self.var_l2)


def simulate(m: ModelSpec, fields: Sequence[FieldState], t: float | None = None,
             target_sign: int = 1, target: np.ndarray | None = None) -> Simulation:
    """Evolve to the gate time (or ``t``) and collect the full report."""
    fields = tuple(fields)
    for f, cut in zip(fields, m.cutoffs):
        if f.cutoff != cut:
            raise ValueError(f"field cutoff {f.cutoff} does not match model cutoff {cut}")
    if t is None:
        gt = gate_time(m, fields, target_sign, target)
    else:
        gt = GateTime(float(t), TimeRule.FIXED)
    u = propagator(m, gt.t_star)
    var_l2 = mdl.bound_inputs(m, fields)
    report = gate_report(u, fields, var_l2, target_sign, target)
    return Simulation(m, fields, gt, var_l2, report, u, leakage_population(u, fields))


def _random_real_state(nbar: float, rng: np.random.Generator, cutoff) -> FieldState:
    width = max(1.0, math.sqrt(nbar))
    n_cut = auto_cutoff(nbar) if cutoff == AUTO else int(cutoff)
    n = np.arange(n_cut)
    envelope = np.exp(-((n - nbar) ** 2) / (4.0 * width**2))
    coeffs = envelope * (1.0 + 0.3 * rng.standard_normal(n_cut))
    return custom_state(np.abs(coeffs), n_cut, label=f"random:{nbar:g}")


def make_state(family: str, value: float, cutoff=AUTO, phase: complex = 1.0,
               rng: np.random.Generator | None = None) -> FieldState:
    """One field state; ``phase`` multiplies a coherent amplitude."""
    if family == "coherent":
        return coherent_state(math.sqrt(value) * phase, cutoff)
    if family == "fock":
        n = int(round(value))
        if abs(n - value) > 1e-12:
            raise ValueError(f"Fock level must be an integer, got {value}")
        return fock_state(n, n + FOCK_MARGIN if cutoff == AUTO else int(cutoff))
    if family == "random":
        return _random_real_state(value, rng if rng is not None else np.random.default_rng(0), cutoff)
    raise ValueError(f"unknown state family {family!r}")


def _modelspec(kind: ModelKind, fields: list, nbar: float, g: float = 1.0) -> ModelSpec:
    cut = tuple(f.cutoff for f in fields)
    if kind is ModelKind.JC:
        return mdl.jc(cut[0], g)
    if kind is ModelKind.PHASE:
        return mdl.phase_model(cut[0], g)
    if kind is ModelKind.FNFAMILY:
        return mdl.fn_family((np.arange(1, cut[0]) ** FN_EXPONENT).tolist(), cut[0], g)
    if kind is ModelKind.MULTIMODE:
        return mdl.multimode(cut, (g, SPECTATOR_COUPLING * g))
    delta = RAMAN_DETUNING_FACTOR * g * math.sqrt(nbar + 1.0)
    return mdl.raman(cut, (g, g), (delta, delta))


def build_case(model: str, family: str, value: float, cutoff=AUTO,
               rng: np.random.Generator | None = None, state: FieldState | None = None):
    """Model and per-mode fields for one battery entry.

    multimode: the state drives mode 1; mode 2 is a vacuum spectator coupled at 0.05 g.
    raman: both modes carry the state; a coherent mode b is phase-shifted by -i
    so the two-photon coupling rotates the qubit about y, like the target gate.
    """
    kind = ModelKind(model)
    first = state if state is not None else make_state(family, value, cutoff, rng=rng)
    if kind is ModelKind.MULTIMODE:
        fields = [first, fock_state(0, SPECTATOR_CUTOFF)]
    elif kind is ModelKind.RAMAN:
        second = first if family != "coherent" else make_state(family, value, cutoff, phase=-1j)
        fields = [first, second]
    else:
        fields = [first]
    nbar = max(number_stats(f).nbar for f in fields)
    return _modelspec(kind, fields, nbar), fields


def _row(model: str, sim: Simulation) -> SweepRow:
    stats = [number_stats(f) for f in sim.fields]
    r = sim.report
    return SweepRow(
        model=model,
        state="+".join(f.label for f in sim.fields),
        nbar=sum(s.nbar for s in stats),
        var_n=sum(s.var_n for s in stats),
        var_l2=sim.var_l2,
        t_star=sim.time.t_star,
        time_rule=sim.time.rule.value,
        sigma_D2=r.var_D,
        mean_D2=r.mean_D2,
        infidelity_worst=r.worst_case_infidelity,
        bound=r.cql_bound,
        saturation_ratio=sim.saturation_ratio,
        intensity_term=r.intensity_term,
        phase_term=r.phase_term,
        flagged=sim.time.flagged,
    )


def _checked_row(model: str, sim: Simulation) -> SweepRow:
    try:
        cql_check(sim.report)
    except TheoremViolation as exc:
        dump = ", ".join(f"{f.label}={state_to_json(f)[:400]}" for f in sim.fields)
        raise TheoremViolation(f"{model} / {dump}: {exc}", exc.margins) from exc
    return _row(model, sim)


def _states(cfg: SweepConfig, model: str) -> Iterable[tuple[str, float, FieldState | None]]:
    for n in cfg.fock_levels:
        yield "fock", float(n), None
    if cfg.family == "custom":
        with open(cfg.custom_path) as fh:
            s = state_from_json(fh.read(), None if cfg.cutoff == AUTO else int(cfg.cutoff))
        yield "custom", number_stats(s).nbar, s
        return
    for x in cfg.nbar_grid:
        yield cfg.family, x, None


def run_bound_battery(cfg: SweepConfig, target_sign: int = 1) -> list[SweepRow]:
    """Simulate every (model, state) pair at its gate time and check the inequality chain.

    A chain violation raises :class:`TheoremViolation` naming the offending state.
    """
    rows = []
    for model in cfg.models:
        rng = np.random.default_rng(cfg.seed)
        for family, value, state in _states(cfg, model):
            m, fields = build_case(model, family, value, cfg.cutoff, rng=rng, state=state)
            rows.append(_checked_row(model, simulate(m, fields, target_sign=target_sign)))
    return rows


def run_saturation_sweep(cfg: SweepConfig) -> list[SweepRow]:
    """JC and PHASE rows for each coherent nbar in the grid (real amplitudes)."""
    if cfg.family != "coherent":
        raise ValueError("saturation sweep uses the coherent family")
    rows = []
    for nbar in cfg.nbar_grid:
        for model in ("jc", "phase"):
            m, fields = build_case(model, "coherent", nbar, cfg.cutoff)
            rows.append(_checked_row(model, simulate(m, fields)))
    return rows


SATURATION_NBAR_MIN = 50.0
SATURATION_RANGE = (0.9, 1.3)
DECOMPOSITION_RTOL = 0.15


def saturation_checks(rows: Sequence[SweepRow]) -> list[tuple[str, bool]]:
    """PHASE saturation ratio in [0.9, 1.3] and JC var(D) within 15% of the two-term estimate."""
    out = []
    for r in rows:
        if r.nbar < SATURATION_NBAR_MIN * (1 - 1e-9):
            continue
        if r.model == "phase":
            lo, hi = SATURATION_RANGE
            out.append((f"phase nbar={r.nbar:.6g} saturation_ratio={r.saturation_ratio:.6g}",
                        lo <= r.saturation_ratio <= hi))
        elif r.model == "jc":
            estimate = r.intensity_term + r.phase_term
            rel = abs(r.sigma_D2 - estimate) / estimate
            out.append((f"jc nbar={r.nbar:.6g} decomposition rel.err={rel:.3g}", rel <= DECOMPOSITION_RTOL))
    return out


@dataclass(frozen=True, eq=False)
class MultimodeDemo:
    simulation: Simulation
    bound: float
    looseness: float
    holds: bool


def run_multimode_demo(nbars: Sequence[float] = (10.0, 10.0),
                       couplings: Sequence[float] = (1.0, SPECTATOR_COUPLING),
                       cutoffs: Sequence[int] | str = AUTO, t: float | None = None) -> MultimodeDemo:
    """Atom coupled to 2-3 coherent modes; compare worst-case error with the total-photon bound.

    The bound only sees the total photon number, so photons in a weakly coupled
    mode loosen it without improving the gate.
    """
    if not 2 <= len(nbars) <= mdl.MAX_MULTIMODE_MODES:
        raise ValueError("multimode demo takes 2 or 3 modes")
    if len(couplings) != len(nbars):
        raise ValueError("need one coupling per mode")
    cuts = [AUTO] * len(nbars) if cutoffs == AUTO else list(cutoffs)
    fields = [coherent_state(math.sqrt(nb), c) for nb, c in zip(nbars, cuts)]
    m = mdl.multimode([f.cutoff for f in fields], couplings)
    sim = simulate(m, fields, t=t)
    check = cql_check(sim.report)
    bound = sim.report.cql_bound
    return MultimodeDemo(sim, bound, sim.report.worst_case_infidelity / bound, check.passed)


@dataclass(frozen=True, eq=False)
class RamanDemo:
    simulation: Simulation
    bound: float
    holds: bool
    conservation_residual: float
    commutator_residual: float
    leakage: float
    leak_gap: float
    identity_residual: float


RAMAN_COMMUTATOR_CUTOFF = 6


def run_raman_demo(family: str = "coherent", nbars: Sequence[float] = (20.0, 20.0),
                   couplings: Sequence[float] = (1.0, 1.0), detuning: float | None = None,
                   t: float | None = None) -> RamanDemo:
    """Raman-coupled three-level atom with a scanned gate time.

    Reports the conservation residual of the propagator, the residual of
    [sigma_z, H] - [a^dag a, H] + [b^dag b, H] = 0, leakage into |e>, and the
    exact leakage-corrected form of <D^2> = 4 - 2F^2(-x) - 2F^2(+x).
    """
    if len(nbars) != 2 or len(couplings) != 2:
        raise ValueError("raman demo takes two modes")
    field_a = make_state(family, nbars[0])
    field_b = make_state(family, nbars[1], phase=-1j) if family == "coherent" else make_state(family, nbars[1])
    fields = [field_a, field_b]
    if detuning is None:
        detuning = RAMAN_DETUNING_FACTOR * max(couplings) * math.sqrt(max(nbars) + 1.0)
    m = mdl.raman((field_a.cutoff, field_b.cutoff), tuple(couplings), (detuning, detuning))
    sim = simulate(m, fields, t=t)
    check = cql_check(sim.report)
    residual = max(conservation_residual(sim.propagator, mdl.conserved_diagonal(m)), mdl.commutator_residual(m))
    small = mdl.raman((RAMAN_COMMUTATOR_CUTOFF,) * 2, tuple(couplings), (detuning, detuning))
    comm = max(mdl.raman_commutator_residuals(small).values())
    gap = leakage_gap(sim.propagator, fields)
    r = sim.report
    identity = abs(r.mean_D2 - (4 - 2 * r.fidelity_minus_x - 2 * r.fidelity_plus_x - gap))
    return RamanDemo(sim, r.cql_bound, check.passed, residual, comm, sim.leakage, gap, identity)


def format_number(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return ""
    return f"{x:.12g}"


def _json_value(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return None if math.isnan(x) or math.isinf(x) else float(f"{x:.12g}")
    return x


def _columns() -> list[str]:
    return ["schema_version"] + [f.name for f in dc_fields(SweepRow)]


def rows_to_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(_columns())
    for r in rows:
        writer.writerow([SCHEMA_VERSION] + [format_number(v) for v in asdict(r).values()])
    return buf.getvalue()


def rows_to_jsonl(rows: Sequence[SweepRow]) -> str:
    lines = []
    for r in rows:
        obj = {"schema_version": SCHEMA_VERSION}
        obj.update({k: _json_value(v) for k, v in asdict(r).items()})
        lines.append(json.dumps(obj))
    return "".join(line + "\n" for line in lines)


def report_json(obj: dict) -> str:
    return json.dumps({k: _json_value(v) for k, v in obj.items()})
