import json
import os
import subprocess
import sys
import xml.etree.ElementTree as ET

import pytest

from skyrmelab import cli, records


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    codes = {cmd: cli.main([cmd, "--out", str(out)])
             for cmd in ("profile", "minimize", "dynsys", "evolve", "verify")}
    codes["report"] = cli.main(["report", "--out", str(out), "--svg"])
    return out, codes


def test_all_commands_pass(pipeline):
    _, codes = pipeline
    assert codes == {c: 0 for c in codes}


def test_profile_outputs(pipeline):
    out, _ = pipeline
    doc = records.read_json(out / "profile.json")
    assert doc["c_shoot"] == pytest.approx(-1.6, abs=1e-6)
    assert {"c_shoot", "residual_sup", "max_closed_form_gap"} <= set(doc)
    first = (out / "profile.csv").read_text().splitlines()[:2]
    assert first == ["# schema_version=1", "rho,y,dy,w,dw,residual"]


def test_minimize_and_dynsys_outputs(pipeline):
    out, _ = pipeline
    m = records.read_json(out / "minimize.json")
    assert m["J_value"] < 0 and m["monotone"] is True
    assert m["max_abs_psi"] <= 1 + 1e-8
    assert m["seed"] == 42
    d = records.read_json(out / "dynsys.json")
    assert d["passed"] is True
    assert (out / "trajectory.csv").read_text().splitlines()[1] == "tau,y,q,rho"


def test_evolve_outputs(pipeline):
    out, _ = pipeline
    diag = records.read_csv(out / "diagnostics.csv")
    assert list(diag) == ["t", "sup_grad", "energy", "flux_accum", "selfsim_err"]
    snap = records.read_csv(out / "snapshots.csv")
    assert list(snap) == ["t", "r", "v", "vt", "u"]
    blow = records.read_json(out / "blowup.json")
    assert blow["exponent"] == pytest.approx(-1.0, abs=0.05)


def test_report_outputs(pipeline):
    out, _ = pipeline
    rep = records.read_json(out / "report.json")
    assert rep["exponent"] == pytest.approx(-1.0, abs=0.05)
    assert rep["all_gates_passed"] is True
    for name in rep["figures"]:
        assert (out / name).read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    assert sorted(rep["svg"]) == ["blowup.svg", "phase.svg", "profile.svg"]
    for name in rep["svg"]:
        root = ET.parse(out / name).getroot()
        lines = [e for e in root.iter() if e.tag.endswith("polyline")]
        assert len(lines) == 1


def test_report_lists_missing_inputs(tmp_path, capsys):
    assert cli.main(["report", "--out", str(tmp_path)]) == cli.EXIT_IO
    err = capsys.readouterr().err
    for name in cli.REQUIRED:
        assert name in err


def test_profile_small_grid(tmp_path):
    assert cli.main(["profile", "--n", "8", "--out", str(tmp_path)]) == 0
    doc = records.read_json(tmp_path / "profile.json")
    assert doc["relaxed"] is True and doc["relaxed_note"]
    assert len(records.read_csv(tmp_path / "profile.csv")["rho"]) == 8


def test_profile_tolerance_below_floor(tmp_path, capsys):
    code = cli.main(["profile", "--n", "1000", "--tol", "1e-9", "--out", str(tmp_path)])
    assert code == cli.EXIT_GATE
    assert records.read_json(tmp_path / "profile.json")["reason"] == "discretization-limited"
    assert "discretization-limited" in capsys.readouterr().err


def test_verify_modes(tmp_path):
    assert cli.main(["verify", "--out", str(tmp_path)]) == 0
    assert cli.main(["verify", "--mode", "literal", "--out", str(tmp_path)]) == cli.EXIT_INVERTED
    doc = records.read_json(tmp_path / "verify.json")
    literal = [c for c in doc["checks"] if c["name"] == "selfsimilar_into_literal_pde"][0]
    assert literal["residual"] > 0.1
    assert cli.main(["verify", "--profile", "zero", "--out", str(tmp_path)]) == 0


def test_config_errors(tmp_path):
    assert cli.main(["profile", "--n", "4", "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    assert cli.main(["profile", "--tol", "-1", "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    assert cli.main(["evolve", "--R", "3", "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    with pytest.raises(SystemExit) as exc:
        cli.main(["nonsense"])
    assert exc.value.code == cli.EXIT_CONFIG


def test_unwritable_output_is_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert cli.main(["verify", "--out", str(blocker / "sub")]) == cli.EXIT_IO


def snapshot(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


def test_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        for argv in (["profile", "--n", "8"], ["verify", "--n", "256"], ["evolve", "--n", "512"],
                     ["dynsys", "--n", "1000"]):
            assert cli.main(argv + ["--out", str(d)]) == 0
    assert snapshot(a) == snapshot(b)


def test_env_overrides_out(tmp_path, monkeypatch):
    target = tmp_path / "env"
    monkeypatch.setenv("SKYRME_OUT", str(target))
    assert cli.main(["verify", "--n", "256", "--out", str(tmp_path / "flag")]) == 0
    assert (target / "verify.json").is_file()
    assert not (tmp_path / "flag").exists()


def test_console_entry_point(tmp_path):
    env = {**os.environ, "SKYRME_OUT": str(tmp_path)}
    proc = subprocess.run([sys.executable, "-m", "skyrmelab.cli", "verify", "--n", "256"],
                          capture_output=True, text=True, env=env)
    assert proc.returncode == 0
    assert "status=0" in proc.stdout
    assert json.loads((tmp_path / "verify.json").read_text())["passed"] is True
