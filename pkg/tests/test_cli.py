import json

import pytest

from cqlbench.cli import parse_and_dispatch


def run(argv, capsys):
    code = parse_and_dispatch(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_bound_jc_coherent(capsys):
    code, out, _ = run(["bound", "--model", "jc", "--state", "coherent", "--nbar", "100"], capsys)
    assert code == 0
    assert out.strip() == "bound 0.000623441396509"
    assert float(out.split()[1]) == pytest.approx(6.2344e-4, rel=1e-4)


def test_bound_json_and_raman(capsys):
    code, out, _ = run(["bound", "--model", "raman", "--nbar", "20", "--format", "json"], capsys)
    assert code == 0
    assert json.loads(out)["bound"] == pytest.approx(0.25 / 41)


def test_bound_fock_floor(capsys):
    code, out, _ = run(["bound", "--model", "phase", "--state", "fock", "--nbar", "5"], capsys)
    assert code == 0 and out.strip() == "bound 0.25"


@pytest.mark.parametrize("argv", [
    ["bound", "--model", "jc", "--nbar", "-1"],
    ["bound", "--model", "spin", "--nbar", "1"],
    ["bound", "--nbar", "1", "--unknown", "3"],
    ["bound", "--state", "fock", "--nbar", "1.5"],
    ["sweep", "--models", "jc", "--nbar-grid", "4,1"],
    ["sweep", "--models", "jc"],
    ["simulate", "--config", "/nonexistent/file.cfg"],
    [],
])
def test_config_errors_exit_2(argv, capsys):
    code, out, err = run(argv, capsys)
    assert code == 2
    assert out == ""
    assert len(err.strip().splitlines()) == 1


def test_capacity_error_exit_2(monkeypatch, capsys):
    monkeypatch.setenv("CQLBENCH_MAX_DIM", "50")
    code, _, err = run(["simulate", "--model", "jc", "--nbar", "4"], capsys)
    assert code == 2
    assert "cap" in err or "dimension" in err


def test_simulate_phase_report(capsys):
    code, out, _ = run(["simulate", "--model", "phase", "--state", "coherent", "--nbar", "100", "--time", "auto"],
                       capsys)
    assert code == 0
    obj = json.loads(out)
    assert 0.9 <= obj["saturation_ratio"] <= 1.3
    for key in ("mean_D", "mean_D2", "var_D", "worst_case_infidelity", "cql_bound", "t_star"):
        assert key in obj


def test_flag_config_equivalence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# same run as flags\nmodel = fnfamily\nstate=coherent\nnbar = 3\ntime = 0.4\n")
    _, via_file, _ = run(["simulate", "--config", str(cfg)], capsys)
    _, via_flags, _ = run(["simulate", "--model", "fnfamily", "--nbar", "3", "--time", "0.4"], capsys)
    assert via_file == via_flags and via_file


def test_flags_override_config(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("model = jc\nnbar = 3\n")
    _, out, _ = run(["bound", "--config", str(cfg), "--nbar", "100"], capsys)
    assert out.strip() == "bound 0.000623441396509"


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("model = jc\ncolour = blue\n")
    code, _, err = run(["bound", "--config", str(cfg)], capsys)
    assert code == 2 and "colour" in err


def test_sweep_out_file_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    argv = ["sweep", "--models", "jc,phase", "--nbar-grid", "1,4", "--fock-levels", "0"]
    assert run(argv + ["--out", str(a)], capsys)[0] == 0
    assert run(argv + ["--out", str(b)], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[0].startswith("schema_version,model,state,nbar")
    assert len(a.read_text().splitlines()) == 7


def test_sweep_json(capsys):
    code, out, _ = run(["sweep", "--models", "phase", "--nbar-grid", "4", "--format", "json"], capsys)
    assert code == 0
    row = json.loads(out)
    assert row["model"] == "phase" and row["bound"] == pytest.approx(0.25 / 17)


def test_multimode_and_raman(capsys):
    code, out, _ = run(["multimode", "--nbar", "2,2", "--cutoff", "12,12"], capsys)
    assert code == 0 and json.loads(out)["holds"] is True
    code, out, _ = run(["raman", "--state", "fock", "--nbar", "1"], capsys)
    obj = json.loads(out)
    assert code == 0 and obj["bound"] == 0.25 and obj["worst_case_infidelity"] >= 0.25 - 1e-9


def test_selftest_mutation_exits_3(capsys):
    code, out, _ = run(["selftest", "--fast", "--mutate", "sign"], capsys)
    assert code == 3
    assert "theorem violation" in out


def test_selftest_fast(capsys):
    code, out, _ = run(["selftest", "--fast"], capsys)
    assert code == 0
    assert out.strip().splitlines()[-1].endswith("checks passed")
    assert "FAIL" not in out
