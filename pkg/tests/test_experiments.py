import csv
import io
import json
import math

import numpy as np
import pytest

from cqlbench import experiments as ex
from cqlbench import models as mdl
from cqlbench.field_states import coherent_state, fock_state
from cqlbench.gate_metrics import TheoremViolation


def test_config_validation():
    with pytest.raises(ValueError):
        ex.SweepConfig(models=(), nbar_grid=(1.0,))
    with pytest.raises(ValueError):
        ex.SweepConfig(models=("jc",), nbar_grid=())
    with pytest.raises(ValueError):
        ex.SweepConfig(models=("jc",), nbar_grid=(4.0, 1.0))
    with pytest.raises(ValueError):
        ex.SweepConfig(models=("bogus",), nbar_grid=(1.0,))
    with pytest.raises(ValueError):
        ex.SweepConfig(models=("jc",), nbar_grid=(1.0,), fmt="xml")
    with pytest.raises(ValueError):
        ex.SweepConfig(models=("jc",), family="custom")


def test_jc_battery_rows():
    cfg = ex.SweepConfig(models=("jc",), nbar_grid=(1, 4, 16, 64), fock_levels=(0, 1, 5))
    rows = ex.run_bound_battery(cfg)
    assert [r.state for r in rows] == ["fock:0", "fock:1", "fock:5", "coherent:1", "coherent:4",
                                       "coherent:16", "coherent:64"]
    for r in rows:
        assert r.bound <= r.infidelity_worst + 1e-9
    coherent = [r.bound for r in rows if r.state.startswith("coherent")]
    assert all(b > a for a, b in zip(coherent[1:], coherent))


def test_battery_aborts_with_state_dump(monkeypatch):
    real = ex.simulate

    def sabotaged(m, fields, **kw):
        sim = real(m, fields, **kw)
        report = sim.report.__class__(**{**sim.report.to_dict(), "worst_case_infidelity": 0.0})
        return ex.Simulation(sim.model, sim.fields, sim.time, sim.var_l2, report, sim.propagator, sim.leakage)

    monkeypatch.setattr(ex, "simulate", sabotaged)
    with pytest.raises(TheoremViolation, match=r"coherent:4=\[\["):
        ex.run_bound_battery(ex.SweepConfig(models=("jc",), nbar_grid=(4,)))


def test_random_family_reproducible():
    cfg = ex.SweepConfig(models=("phase",), nbar_grid=(3.0, 6.0), family="random", seed=42)
    a = ex.rows_to_csv(ex.run_bound_battery(cfg))
    b = ex.rows_to_csv(ex.run_bound_battery(cfg))
    assert a == b
    other = ex.rows_to_csv(ex.run_bound_battery(ex.SweepConfig(models=("phase",), nbar_grid=(3.0, 6.0),
                                                                family="random", seed=43)))
    assert other != a


def test_custom_family(tmp_path):
    path = tmp_path / "state.json"
    path.write_text(json.dumps([[0.0, 0.0], [0.6, 0.0], [0.8, 0.0]]))
    rows = ex.run_bound_battery(ex.SweepConfig(models=("jc",), family="custom", custom_path=str(path)))
    assert len(rows) == 1
    assert rows[0].nbar == pytest.approx(0.36 + 2 * 0.64)


def test_saturation_sweep_small():
    rows = ex.run_saturation_sweep(ex.SweepConfig(models=("jc",), nbar_grid=(0.0, 50.0)))
    assert [r.model for r in rows] == ["jc", "phase", "jc", "phase"]
    assert [r.nbar for r in rows] == pytest.approx([0.0, 0.0, 50.0, 50.0])
    vac = rows[0]
    assert vac.bound == 0.25 and vac.infidelity_worst >= 0.25
    checks = ex.saturation_checks(rows)
    assert len(checks) == 2 and all(ok for _, ok in checks)


def test_multimode_reduces_to_jc_with_vacuum_spectator():
    f = coherent_state(math.sqrt(6.0))
    t = 0.37
    jc_sim = ex.simulate(mdl.jc(f.cutoff), [f], t=t)
    mm = mdl.multimode((f.cutoff, 3), (1.0, 0.8))
    mm_sim = ex.simulate(mm, [f, fock_state(0, 3)], t=t)
    # vacuum spectator still changes dynamics through |e,n,0> -> |g,n,1>; decouple it
    mm0 = mdl.multimode((f.cutoff, 3), (1.0, 0.0))
    mm0_sim = ex.simulate(mm0, [f, fock_state(0, 3)], t=t)
    for key in ("mean_D", "mean_D2", "var_D", "worst_case_infidelity", "fidelity_plus_x"):
        assert getattr(mm0_sim.report, key) == pytest.approx(getattr(jc_sim.report, key), abs=1e-6)
    assert mm_sim.report.mean_D2 != pytest.approx(jc_sim.report.mean_D2, abs=1e-6)


def test_multimode_three_modes_smoke():
    demo = ex.run_multimode_demo((1.0, 0.5, 0.5), (1.0, 0.05, 0.05), cutoffs=(6, 4, 4))
    assert demo.holds
    assert demo.simulation.report.worst_case_infidelity >= demo.bound


def test_multimode_demo_validation():
    with pytest.raises(ValueError):
        ex.run_multimode_demo((10.0,), (1.0,))
    with pytest.raises(ValueError):
        ex.run_multimode_demo((1.0, 1.0), (1.0,))


def test_raman_demo_fock():
    demo = ex.run_raman_demo("fock", (2, 2))
    assert demo.bound == 0.25
    assert demo.simulation.report.worst_case_infidelity >= 0.25 - 1e-9
    assert demo.conservation_residual <= 1e-10
    assert demo.commutator_residual <= 1e-12
    assert demo.identity_residual <= 1e-9


def test_format_number():
    assert ex.format_number(1 / 3) == "0.333333333333"
    assert ex.format_number(float("nan")) == ""
    assert ex.format_number(True) == "true"
    assert ex.format_number(7) == "7"


def test_csv_and_jsonl_schema():
    rows = ex.run_bound_battery(ex.SweepConfig(models=("phase",), nbar_grid=(4.0,), fock_levels=(0,)))
    text = ex.rows_to_csv(rows)
    table = list(csv.DictReader(io.StringIO(text)))
    assert len(table) == 2
    assert table[0]["schema_version"] == ex.SCHEMA_VERSION
    assert table[0]["intensity_term"] == ""
    lines = ex.rows_to_jsonl(rows).splitlines()
    obj = json.loads(lines[0])
    assert obj["intensity_term"] is None
    assert list(obj) == list(table[0])
    assert json.loads(lines[1])["bound"] == float(table[1]["bound"])


def test_build_case_raman_phase():
    m, fields = ex.build_case("raman", "coherent", 4.0)
    assert m.kind is mdl.ModelKind.RAMAN
    # mode b carries amplitude -i|beta|
    assert np.angle(fields[1].coeffs[1]) == pytest.approx(-math.pi / 2)
    assert m.detunings[0] == pytest.approx(ex.RAMAN_DETUNING_FACTOR * math.sqrt(5.0))
