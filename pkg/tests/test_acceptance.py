"""Acceptance criteria, one test each, at the stated tolerances."""
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from cqlbench import dynamics as dyn
from cqlbench import experiments as ex
from cqlbench import gate_metrics as gm
from cqlbench import models as mdl
from cqlbench.field_states import coherent_state, custom_state, fock_state, number_stats, phase_stats
from cqlbench.selftest import FULL_BATTERY


def battery_cases(kind):
    states = [("fock", 0), ("fock", 1), ("fock", 5), ("coherent", 1), ("coherent", 4), ("coherent", 16)]
    if kind == "raman":
        states = [("fock", 0), ("fock", 1), ("coherent", 1), ("coherent", 4)]
    for family, value in states:
        yield ex.build_case(kind, family, value)


def test_1_conservation(criterion):
    start = time.perf_counter()
    worst = {}
    for kind in ("jc", "multimode", "raman", "fnfamily"):
        worst[kind] = 0.0
        for m, fields in battery_cases(kind):
            ell = mdl.conserved_diagonal(m)
            t_star = dyn.gate_time(m, fields).t_star
            for t in (0.1, t_star, math.pi):
                worst[kind] = max(worst[kind], dyn.conservation_residual(dyn.propagator(m, t), ell))
    # phase closed form without the boundary fix: residual only on the top Fock level
    confined = True
    phase_prod = 0.0
    for n in (8, 32):
        m = mdl.phase_model(n)
        ell = np.diag(mdl.conserved_diagonal(m))
        for t in (0.1, math.pi / 4, math.pi):
            u = dyn.phase_propagator(m, t, close_boundary=False).dense()
            resid = np.abs(u.conj().T @ ell @ u - ell)
            top = 2 * n - 1
            off = resid.copy()
            off[top, :] = 0
            off[:, top] = 0
            confined &= off.max() <= 1e-10
            phase_prod = max(phase_prod, dyn.conservation_residual(dyn.phase_propagator(m, t), mdl.conserved_diagonal(m)))
    elapsed = time.perf_counter() - start
    ok = max(worst.values()) <= 1e-10 and confined and phase_prod <= 1e-10 and elapsed <= 30
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    criterion(1, ok, f"max residual {detail}; phase off-boundary confined={confined}; {elapsed:.1f}s")
    assert ok


def test_2_theorem_chain(criterion):
    rows = []
    worst = math.inf
    for cfg in FULL_BATTERY:
        for model in cfg.models:
            for family, value in [("fock", n) for n in cfg.fock_levels] + [(cfg.family, x) for x in cfg.nbar_grid]:
                m, fields = ex.build_case(model, family, value)
                sim = ex.simulate(m, fields)
                check = gm.cql_check(sim.report, strict=False)
                worst = min(worst, min(check.margins.values()))
                rows.append((model, family, value, check.passed))
    ok = len(rows) >= 20 and all(r[3] for r in rows)
    criterion(2, ok, f"{len(rows)} model/state pairs, smallest chain margin {worst:.3e}")
    assert ok


def _identity_residual(u, fields, sign):
    mom = gm.d_moments(u, fields, sign)
    f_plus, f_minus = gm.pm_x_fidelities(u, fields, gm.default_target(sign))
    return abs(mom.mean_D2 - (4 - 2 * f_minus - 2 * f_plus - gm.leakage_gap(u, fields, sign)))


def test_3_identity(criterion):
    start = time.perf_counter()
    worst_models = 0.0
    for kind in ("jc", "phase", "fnfamily", "multimode", "raman"):
        for family, value in (("coherent", 4.0), ("fock", 1)):
            m, fields = ex.build_case(kind, family, value)
            for t in (0.3, dyn.gate_time(m, fields).t_star):
                u = dyn.propagator(m, t)
                for sign in (1, -1):
                    worst_models = max(worst_models, _identity_residual(u, fields, sign))
    rng = np.random.default_rng(2024)
    shapes = (mdl.jc(6), mdl.phase_model(5), mdl.multimode((3, 3), (1.0, 0.3)), mdl.raman((3, 4)))
    worst_random = 0.0
    for k in range(100):
        m = shapes[k % len(shapes)]
        u = dyn.random_conserving_propagator(m, rng)
        fields = [custom_state(rng.normal(size=c) + 1j * rng.normal(size=c)) for c in m.cutoffs]
        worst_random = max(worst_random, _identity_residual(u, fields, 1 if k % 2 else -1))
    elapsed = time.perf_counter() - start
    ok = max(worst_models, worst_random) <= 1e-9 and elapsed <= 60
    criterion(3, ok, f"models {worst_models:.1e}, 100 random {worst_random:.1e} "
                     f"(three-level atom uses the leakage-corrected form); {elapsed:.1f}s")
    assert ok


def test_4_oracle_equivalence(criterion):
    worst = 0.0
    for n in (8, 32, 64):
        for m, closed in ((mdl.jc(n), dyn.jc_propagator), (mdl.phase_model(n), dyn.phase_propagator)):
            for t in (0.1, math.pi / 4, 2.0, 7.3):
                err = np.max(np.abs(closed(m, t).dense() - dyn.expm_propagator(m, t).dense()))
                worst = max(worst, float(err))
    ok = worst <= 1e-8
    criterion(4, ok, f"max |block - expm| = {worst:.1e} at cutoffs 8, 32, 64")
    assert ok


def test_5_fock_floor(criterion):
    values = {}
    for n in (0, 1, 5):
        f = fock_state(n, n + 3)
        m = mdl.jc(f.cutoff)
        sim = ex.simulate(m, [f])
        values[n] = sim.report.worst_case_infidelity
        assert sim.report.cql_bound == 0.25
    ok = all(v >= 0.25 - 1e-9 for v in values.values())
    criterion(5, ok, "1-F^2_min " + ", ".join(f"|{n}>: {v:.6f}" for n, v in values.items()))
    assert ok


def test_6_jc_decomposition(criterion):
    start = time.perf_counter()
    parts = []
    ok = True
    for nbar in (50.0, 100.0, 400.0):
        f = coherent_state(math.sqrt(nbar))
        m = mdl.jc(f.cutoff)
        u = dyn.propagator(m, dyn.gate_time(m, f).t_star)
        dec = gm.decompose_error(u, f)
        ns = number_stats(f)
        estimate = math.pi**2 * ns.var_n / (16 * ns.nbar**2) + phase_stats(f).var_phi_proxy
        rel = abs(dec.sigma_D2_exact - estimate) / estimate
        coherent_rel = abs(dec.sigma_D2_exact - (math.pi**2 / 16 + 0.25) / nbar) / ((math.pi**2 / 16 + 0.25) / nbar)
        ok &= rel <= 0.15 and coherent_rel <= 0.15
        parts.append(f"nbar={nbar:g}: {rel:.3f}/{coherent_rel:.3f}")
    elapsed = time.perf_counter() - start
    ok &= elapsed <= 60
    criterion(6, ok, "rel. error vs two-term sum / coherent form: " + "; ".join(parts) + f"; {elapsed:.1f}s")
    assert ok


def test_7_phase_saturation(criterion):
    parts = []
    ok = True
    for nbar in (50.0, 100.0, 400.0):
        f = coherent_state(math.sqrt(nbar))
        m = mdl.phase_model(f.cutoff)
        mom = gm.d_moments(dyn.propagator(m, math.pi / 4), [f], 1)
        ns = number_stats(f)
        sat = mom.var_D * 4 * ns.var_n
        c = f.coeffs.real
        identity = abs(mom.var_D - (2 - 2 * np.sum(c[:-1] * c[1:])))
        ok &= 0.9 <= sat <= 1.3 and identity <= 1e-10
        parts.append(f"nbar={nbar:g}: sat {sat:.4f}, identity {identity:.1e}")
    criterion(7, ok, "; ".join(parts))
    assert ok


def test_8_looseness(criterion):
    demo = ex.run_multimode_demo((10.0, 10.0), (1.0, 0.05))
    infid = demo.simulation.report.worst_case_infidelity
    ok = demo.holds and infid >= 10 * demo.bound and demo.bound == pytest.approx(0.25 / 81)
    criterion(8, ok, f"infidelity {infid:.4f} vs bound {demo.bound:.6f} (x{demo.looseness:.1f})")
    assert ok


def test_9_raman(criterion):
    coh = ex.run_raman_demo("coherent", (20.0, 20.0))
    fock = ex.run_raman_demo("fock", (3, 3))
    residual = max(coh.conservation_residual, fock.conservation_residual)
    ok = (residual <= 1e-10 and coh.holds and fock.holds
          and coh.bound == pytest.approx(0.25 / 41) and fock.bound == 0.25
          and max(coh.commutator_residual, fock.commutator_residual) <= 1e-12)
    criterion(9, ok, f"residual {residual:.1e}; coherent 1-F^2 {coh.simulation.report.worst_case_infidelity:.4f} "
                     f">= {coh.bound:.6f}; Fock 1-F^2 {fock.simulation.report.worst_case_infidelity:.4f} >= 0.25; "
                     f"leakage {coh.leakage:.1e}")
    assert ok


def test_10_determinism(criterion):
    cmd = [sys.executable, "-m", "cqlbench", "selftest"]
    first = subprocess.run(cmd, capture_output=True, timeout=300)
    second = subprocess.run(cmd, capture_output=True, timeout=300)
    ok = first.returncode == 0 and second.returncode == 0 and first.stdout == second.stdout and first.stdout
    criterion(10, ok, f"two selftest runs, exit {first.returncode}/{second.returncode}, "
                      f"{len(first.stdout)} bytes, identical={first.stdout == second.stdout}")
    assert ok
