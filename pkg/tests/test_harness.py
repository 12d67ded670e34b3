import csv
import json
import os

import pytest

from rbnlab import cli, harness
from rbnlab.harness import ConfigError, ExperimentConfig, InadmissibleConfig, load_config, run, sweep

SMALL = """
[experiment]
kind = isometry
samples = 16
batch = 8

[physics]
H = 0.2
p = 2
gamma = 0.4
gamma0 = 0.8

[discretization]
n_t = 2^5
K = 8
K_noise = 8

[ladder]
epsilons = 0.2, 0.1
"""


@pytest.fixture
def ini(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text(SMALL)
    return p


def test_load_config(ini):
    cfg = load_config(ini)
    assert cfg.kind == "isometry" and cfg.n_t == 32 and cfg.epsilons == (0.2, 0.1)
    assert cfg.K == 8 and cfg.m == 8  # untouched default
    assert load_config(ini, samples=32).samples == 32


@pytest.mark.parametrize("section,key,value,field", [
    ("physics", "H", "1.5", "H"),
    ("discretization", "n_t", "100", "n_t"),
    ("discretization", "K_noise", "64", "K_noise"),
    ("ladder", "epsilons", "0.1, 0.2", "epsilons"),
    ("experiment", "kind", "nonsense", "kind"),
    ("physics", "gamma", "abc", "gamma"),
    ("physics", "colour", "red", "colour"),
])
def test_validation_names_field(tmp_path, section, key, value, field):
    p = tmp_path / "bad.ini"
    p.write_text(f"[{section}]\n{key} = {value}\n")
    with pytest.raises(ConfigError) as exc:
        load_config(p)
    assert exc.value.field == field and str(exc.value).startswith(field)


@pytest.mark.skipif(os.geteuid() == 0, reason="root ignores permissions")
def test_unwritable_out(tmp_path):
    d = tmp_path / "ro"
    d.mkdir(mode=0o500)
    with pytest.raises(ConfigError, match="out"):
        ExperimentConfig(out=str(d / "x")).validate()


def test_sew_demo_report(tmp_path):
    rep = run(ExperimentConfig(kind="sew-demo"), out=tmp_path)
    assert rep.passed and rep.exit_code == 0 and len(rep.checks) == 3
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["schema_version"] == harness.SCHEMA_VERSION
    assert doc["config"]["kind"] == "sew-demo"
    for c in doc["checks"]:
        assert {"value", "tol", "se", "passed", "mandatory"} <= set(c)
    for a in doc["artifacts"]:
        assert (tmp_path / a).exists()


def test_region_inadmissible_is_reported(tmp_path):
    cfg = ExperimentConfig(kind="region", H=0.3, p=4.0, samples=16, levels=tuple(range(1, 7)))
    rep = run(cfg, out=tmp_path)
    assert rep.admissibility["admissible"] is False
    assert rep.admissibility["H_bound"] == pytest.approx(2 / 7)
    assert rep.checks[0].name == "assumption admissible" and not rep.checks[0].mandatory


def test_spde_needs_override(tmp_path, ini):
    cfg = load_config(ini, H=0.3, p=4.0)
    with pytest.raises(InadmissibleConfig):
        run(cfg, out=tmp_path / "a")
    assert json.loads((tmp_path / "a" / "report.json").read_text())["admissibility"]["admissible"] is False
    rep = run(cfg, override_inadmissible=True, out=tmp_path / "b")
    assert "override" in " ".join(rep.notes)


def test_determinism(tmp_path, ini):
    cfg = load_config(ini)
    a = run(cfg, out=tmp_path / "a").as_dict()
    b = run(cfg, out=tmp_path / "b").as_dict()
    assert a["checks"] == b["checks"]
    assert (tmp_path / "a" / "isometry.csv").read_bytes() == (tmp_path / "b" / "isometry.csv").read_bytes()


def test_exit_code_follows_mandatory_checks():
    from rbnlab.verdict import Check

    rep = harness.ExperimentReport(config={}, kind="x", checks=[Check("a", True),
                                                                Check("b", False, mandatory=False)])
    assert rep.exit_code == 0
    rep.checks.append(Check("c", False))
    assert rep.exit_code == 1
    assert "[WARN] b" in rep.summary() and "[FAIL] c" in rep.summary()


def test_strict_promotes_advisory(tmp_path):
    rep = run(ExperimentConfig(kind="region", samples=16, strict=True, levels=(1, 2, 3, 4, 5, 6)),
              out=tmp_path)
    assert all(c.mandatory for c in rep.checks)


def test_sweep_admissibility_flips(tmp_path):
    base = ExperimentConfig(kind="paths", samples=50, p=1.0, n_steps=256)
    reports, combined = sweep(base, "H", [0.1, 0.15, 0.2, 0.25], out=tmp_path)
    flags = [r.admissibility["admissible"] for r in reports]
    assert flags == [True, True, True, False]  # strict bound H < 1/4 at p = 1
    rows = list(csv.DictReader(open(combined)))
    assert {r["H"] for r in rows} == {"0.1", "0.15", "0.2", "0.25"}
    with pytest.raises(ConfigError):
        sweep(base, "nonsense", [1])


def test_default_output_root(monkeypatch, tmp_path):
    monkeypatch.setenv(harness.OUT_ENV, str(tmp_path))
    rep = run(ExperimentConfig(kind="sew-demo"))
    assert rep.path == str(tmp_path / "sew-demo" / "report.json")


def test_cli_kind_and_exit_status(tmp_path, capsys):
    assert cli.main(["sew-demo", "--out", str(tmp_path)]) == 0
    assert "[PASS] sewing riemann" in capsys.readouterr().out
    assert cli.main(["occ", "region", "--H", "0.3", "--p", "4"]) == 0
    assert json.loads(capsys.readouterr().out)["admissible"] is False


def test_cli_config_error(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[physics]\nH = 2\n")
    assert cli.main(["paths", "--config", str(bad)]) == 2
    assert "H:" in capsys.readouterr().err


def test_cli_paths_and_occ(tmp_path):
    out = tmp_path / "w.csv"
    assert cli.main(["paths", "gen", "--n", "256", "--T", "1", "--H", "0.3", "--seed", "1",
                     "--out", str(out)]) == 0
    assert out.read_text().startswith("t,w\n")
    lt = tmp_path / "lt.csv"
    assert cli.main(["occ", "localtime", "--path", str(out), "--bins", "32", "--out", str(lt)]) == 0
    assert lt.read_text().startswith("x,L\n")
    af = tmp_path / "af.csv"
    assert cli.main(["occ", "avgfield", "--path", str(out), "--out", str(af)]) == 0
    assert af.read_text().startswith("x,Tf\n")


def test_cli_sew_demo_csv(tmp_path):
    out = tmp_path / "gaps.csv"
    assert cli.main(["sew", "demo", "--case", "volterra", "--out", str(out)]) == 0
    assert out.read_text().startswith("level,gap\n")
