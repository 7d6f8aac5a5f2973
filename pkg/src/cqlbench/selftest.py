"""Reduced-scale end-to-end checks with a deterministic summary table."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import models as mdl
from .dynamics import (
    conservation_residual,
    expm_propagator,
    gate_time,
    jc_propagator,
    phase_propagator,
    propagator,
    random_conserving_propagator,
)
from .experiments import SweepConfig, build_case, run_bound_battery
from .field_states import custom_state
from .gate_metrics import (
    TheoremViolation,
    cql_check,
    d_moments,
    default_target,
    gate_report,
    leakage_gap,
    pm_x_fidelities,
)

CONSERVATION_TOL = 1e-10
IDENTITY_TOL = 1e-9
ORACLE_TOL = 1e-8
TINY = 1e-12


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    tol: float
    passed: bool


def _fmt(x: float) -> str:
    if x < TINY:
        return f"<{TINY:.0e}"
    return f"{x:.3e}"


def format_table(results: list[CheckResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  {'value':>10}  {'tol':>7}  result"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {_fmt(r.value):>10}  {r.tol:>7.0e}  {'PASS' if r.passed else 'FAIL'}")
    n_fail = sum(not r.passed for r in results)
    lines.append(f"{len(results) - n_fail}/{len(results)} checks passed")
    return "\n".join(lines) + "\n"


def _conservation_cases():
    # (label, model, fields) with small auto cutoffs
    nbar = 2.0
    out = []
    for kind in ("jc", "fnfamily", "multimode", "raman"):
        m, fields = build_case(kind, "coherent", nbar)
        out.append((kind, m, fields))
    return out


def check_conservation() -> list[CheckResult]:
    results = []
    for label, m, fields in _conservation_cases():
        t_star = gate_time(m, fields).t_star
        ell = mdl.conserved_diagonal(m)
        worst = max(conservation_residual(propagator(m, t), ell) for t in (0.1, t_star, math.pi))
        results.append(CheckResult(f"conservation {label}", worst, CONSERVATION_TOL, worst <= CONSERVATION_TOL))
    # open-boundary phase closed form: residual only on the top Fock level
    m = mdl.phase_model(12)
    u = phase_propagator(m, math.pi / 4, close_boundary=False).dense()
    ell = np.diag(mdl.conserved_diagonal(m))
    resid = np.abs(u.conj().T @ ell @ u - ell)
    resid[2 * 12 - 1, :] = 0.0
    resid[:, 2 * 12 - 1] = 0.0
    off = float(resid.max())
    results.append(CheckResult("phase residual off boundary", off, CONSERVATION_TOL, off <= CONSERVATION_TOL))
    return results


def _identity_residual(u, fields, sign: int) -> float:
    mom = d_moments(u, fields, sign)
    f_plus, f_minus = pm_x_fidelities(u, fields, default_target(sign))
    return abs(mom.mean_D2 - (4 - 2 * f_minus - 2 * f_plus - leakage_gap(u, fields, sign)))


def check_identity(n_random: int, seed: int = 0) -> list[CheckResult]:
    results = []
    worst = 0.0
    for kind in ("jc", "phase", "fnfamily", "multimode", "raman"):
        m, fields = build_case(kind, "coherent", 2.0)
        u = propagator(m, gate_time(m, fields).t_star)
        worst = max(worst, _identity_residual(u, fields, 1), _identity_residual(u, fields, -1))
    results.append(CheckResult("D^2 identity, models", worst, IDENTITY_TOL, worst <= IDENTITY_TOL))
    rng = np.random.default_rng(seed)
    worst = 0.0
    kinds = (mdl.jc(8), mdl.multimode((4, 3), (1.0, 0.5)), mdl.raman((4, 4)))
    for k in range(n_random):
        m = kinds[k % len(kinds)]
        u = random_conserving_propagator(m, rng)
        fields = [custom_state(rng.normal(size=c) + 1j * rng.normal(size=c)) for c in m.cutoffs]
        worst = max(worst, _identity_residual(u, fields, 1 if k % 2 == 0 else -1))
    results.append(CheckResult(f"D^2 identity, {n_random} random", worst, IDENTITY_TOL, worst <= IDENTITY_TOL))
    return results


def check_oracles(cutoffs) -> list[CheckResult]:
    results = []
    for n in cutoffs:
        for label, m, closed in (
            ("jc", mdl.jc(n), jc_propagator),
            ("phase", mdl.phase_model(n), phase_propagator),
        ):
            err = 0.0
            for t in (0.37, math.pi / 4, 2.9):
                err = max(err, float(np.max(np.abs(closed(m, t).dense() - expm_propagator(m, t).dense()))))
            results.append(CheckResult(f"block vs expm {label} N={n}", err, ORACLE_TOL, err <= ORACLE_TOL))
    return results


FULL_BATTERY = (
    SweepConfig(models=("jc", "phase", "fnfamily"), nbar_grid=(1, 4, 16, 64), fock_levels=(0, 1, 5)),
    SweepConfig(models=("multimode",), nbar_grid=(4, 16), fock_levels=(0, 5)),
    SweepConfig(models=("raman",), nbar_grid=(4,), fock_levels=(0, 1)),
)
FAST_BATTERY = (
    SweepConfig(models=("jc", "phase"), nbar_grid=(1, 4), fock_levels=(0, 1)),
    SweepConfig(models=("multimode", "raman"), nbar_grid=(2,)),
)


def _mutated_battery(configs) -> None:
    """Negative control: error operator built with the wrong target sign."""
    for cfg in configs:
        for model in cfg.models:
            for value in cfg.nbar_grid:
                m, fields = build_case(model, cfg.family, value)
                gt = gate_time(m, fields)
                u = propagator(m, gt.t_star)
                report = gate_report(u, fields, mdl.bound_inputs(m, fields), target_sign=-1, target=default_target(1))
                cql_check(report)


def check_battery(configs) -> list[CheckResult]:
    results = []
    for cfg in configs:
        for row in run_bound_battery(cfg):
            margin = row.infidelity_worst - row.bound
            results.append(CheckResult(f"chain {row.model} {row.state}", margin, 1e-9, margin >= -1e-9))
    return results


def run_selftest(fast: bool = False, mutate: str | None = None, write: Callable[[str], None] = print) -> int:
    """Run every check, print the table, return an exit code (0 pass, 1 fail, 3 theorem breach)."""
    battery = FAST_BATTERY if fast else FULL_BATTERY
    if mutate == "sign":
        try:
            _mutated_battery(battery)
        except TheoremViolation as exc:
            write(f"theorem violation: {exc}")
            return 3
        return 0
    results = []
    results += check_conservation()
    results += check_identity(10 if fast else 100)
    results += check_oracles((8, 32) if fast else (8, 32, 64))
    try:
        results += check_battery(battery)
    except TheoremViolation as exc:
        write(format_table(results).rstrip("\n"))
        write(f"theorem violation: {exc}")
        return 3
    write(format_table(results).rstrip("\n"))
    return 0 if all(r.passed for r in results) else 1
