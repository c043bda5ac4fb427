import json
import math
import os

import pytest
from click.testing import CliRunner

from shockcert import cli, harness
from shockcert.harness import ConfigError, EocTable, eoc, load_config, parse_config
from shockcert.pipeline import NumericAbort

SMALL = """
# two constants, one shock
name = small
T = 0.1
ladder = 100 200
report_times = 0.05 0.1
segment = -inf 0 const 2
segment = 0 0.3 affine 1 1
segment = 0.3 inf const 0
"""

RD_ABORT = """
name = rd
T = 0.22
ladder = 100
level_set = abort
segment = -inf 0.2 const 2.5
segment = 0.2 0.4 affine 3.5 -5
segment = 0.4 0.625 affine 1.1 1
segment = 0.625 inf const 0
"""


def test_eoc_examples():
    assert eoc([0.2, 0.1], [0.5, 0.25]) == [None, pytest.approx(1.0)]
    hs = [1 / 400, 1 / 800, 1 / 1600, 1 / 3200]
    rates = eoc([3.0 * h**1.7 for h in hs], hs)
    assert all(abs(r - 1.7) < 1e-12 for r in rates[1:])
    got = eoc([0.099, 0.073, 0.050, 0.036], hs)
    assert [round(r, 2) for r in got[1:]] == [0.44, 0.55, 0.47]


def test_eoc_blank_entries():
    assert eoc([0.1, 0.0, 0.05], [1, 0.5, 0.25]) == [None, None, None]
    assert eoc([0.1, None], [1, 0.5]) == [None, None]
    assert eoc([0.1, math.inf], [1, 0.5]) == [None, None]
    with pytest.raises(ValueError):
        eoc([0.1], [1.0])
    with pytest.raises(ValueError):
        eoc([0.1, 0.2], [1.0])


def test_eoc_table_layout():
    tab = EocTable([400, 800])
    tab.add("l2", [2e-3, 1e-3])
    assert tab.header() == ["cells", "l2", "l2_eoc"]
    lines = tab.to_csv().splitlines()
    assert lines[1] == "400,0.002,"
    assert lines[2] == "800,0.001,1"
    assert "l2_eoc" in tab.render()
    with pytest.raises(ValueError):
        tab.add("bad", [1.0])


def test_parse_config_roundtrip():
    cfg = parse_config(SMALL)
    assert cfg.name == "small" and cfg.T == 0.1
    assert cfg.ladder == (100, 200) and cfg.delta is None
    assert cfg.segments[0] == (-math.inf, 0.0, "const", [2.0])
    assert cfg.settings(100).cells == 100
    assert cfg.digest() == parse_config(SMALL).digest()


def test_bundled_configs():
    assert harness.bundled_configs() == ["exp1", "exp2"]
    c1, c2 = load_config("exp1"), load_config("exp2")
    assert c1.T == 0.3 and c2.T == 0.22
    assert c1.ladder == c2.ladder == (400, 800, 1600, 3200)
    assert c1.report_times == (0.05, 0.1, 0.15, 0.2, 0.25, 0.3)


@pytest.mark.parametrize(
    "text, msg",
    [
        ("segment = -inf inf const 0", "missing key 'T'"),
        ("T = 1\nT = 2\nsegment = -inf inf const 0", "duplicate"),
        ("T = 1\ncolour = red\nsegment = -inf inf const 0", "unknown key"),
        ("T = 1\nsegment = -inf inf cubic 0", "unknown segment kind"),
        ("T = 1\nsegment = -inf inf const 0 1", "coefficient"),
        ("T = 1\nsegment = -inf inf", "segment needs"),
        ("T = abc\nsegment = -inf inf const 0", "not a number"),
        ("T = 1\nladder = 800 400\nsegment = -inf inf const 0", "strictly increasing"),
        ("T = 1\nladder = 1.5\nsegment = -inf inf const 0", "integers"),
        ("T = 1\nlevel_set = maybe\nsegment = -inf inf const 0", "level_set"),
        ("T = 1\ncfl = 1.5\nsegment = -inf inf const 0", "cfl"),
        ("T = 1\nplot_window = 0\nsegment = -inf inf const 0", "plot_window"),
        ("T = 1", "segment"),
        ("T 1", "key = value"),
    ],
)
def test_parse_config_errors(text, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config(text)


def test_load_config_missing():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/path.cfg")


def test_fine_reference_identity():
    cfg = parse_config(SMALL)
    assert harness.fine_reference_compare(cfg, 100, mult=1) == 0.0
    assert harness.fine_reference_compare(cfg, 100, mult=4) > 0.0


def test_emit_outputs(tmp_path):
    cfg = parse_config(SMALL)
    results = harness.run_experiment(cfg)
    fine = {c: harness.fine_reference_compare(cfg, c, 4) for c in cfg.ladder}
    written = harness.emit_outputs(str(tmp_path), cfg, results, fine, 1.0)
    names = {os.path.basename(p) for p in written}
    assert {"report_100.csv", "events_200.json", "table.csv", "summary.json", "manifest.json"} <= names
    head = (tmp_path / "table.csv").read_text().splitlines()[0].split(",")
    assert head == ["cells", "max_delta", "max_delta_eoc", "l2", "l2_eoc", "l1", "l1_eoc", "fine_l1", "fine_l1_eoc"]
    rep = (tmp_path / "report_100.csv").read_text().splitlines()
    assert rep[0] == "t,R,l2,l1,delta_0,delta_1" and len(rep) == 3
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["status"] == "ok" and man["rungs"] == [100, 200]
    assert man["config_hash"] == cfg.digest()
    assert os.path.exists(tmp_path / "plots" / "curves_100.dat")
    tab = harness.table_from_summary(str(tmp_path / "summary.json"))
    assert tab.columns["l1"] == pytest.approx([r.final["l1"] for _, r in results])


def test_emit_outputs_empty(tmp_path):
    written = harness.emit_outputs(str(tmp_path), parse_config(SMALL), [])
    assert [os.path.basename(p) for p in written] == ["manifest.json"]


def test_outputs_are_deterministic(tmp_path):
    cfg = parse_config(SMALL)
    a = harness.report_csv(harness.run_rung(cfg, 100))
    b = harness.report_csv(harness.run_rung(cfg, 100))
    assert a == b


def _write_cfg(tmp_path, text, name="c.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_cli_run_and_eoc(tmp_path):
    runner = CliRunner()
    out = str(tmp_path / "out")
    res = runner.invoke(cli.main, ["run", _write_cfg(tmp_path, SMALL), "--out", out])
    assert res.exit_code == 0, res.output
    assert "l1_eoc" in res.output
    res = runner.invoke(cli.main, ["eoc", out])
    assert res.exit_code == 0 and "max_delta" in res.output


def test_cli_compare_fine_and_dump(tmp_path):
    runner = CliRunner()
    cfg = _write_cfg(tmp_path, SMALL)
    res = runner.invoke(cli.main, ["compare-fine", cfg, "--mult", "4"])
    assert res.exit_code == 0 and "fine_l1" in res.output
    out = str(tmp_path / "plots")
    res = runner.invoke(cli.main, ["dump-snapshots", cfg, "--times", "0.02,0.04", "--cells", "100", "--out", out])
    assert res.exit_code == 0
    assert sorted(os.listdir(out)) == ["curves_100.dat", "snap_100_t0.020000.dat", "snap_100_t0.040000.dat", "snap_100_t0.100000.dat"]


def test_cli_exit_codes(tmp_path, monkeypatch):
    runner = CliRunner()
    assert runner.invoke(cli.main, ["run", str(tmp_path / "none.cfg")]).exit_code == 2
    assert runner.invoke(cli.main, ["run", _write_cfg(tmp_path, "T = 1")]).exit_code == 2
    assert runner.invoke(cli.main, ["eoc", str(tmp_path)]).exit_code == 2
    assert runner.invoke(cli.main, ["dump-snapshots", _write_cfg(tmp_path, SMALL), "--times", "a"]).exit_code == 2
    out = tmp_path / "rd"
    res = runner.invoke(cli.main, ["run", _write_cfg(tmp_path, RD_ABORT, "rd.cfg"), "--out", str(out)])
    assert res.exit_code == 3
    assert json.loads((out / "manifest.json").read_text())["status"] == "certificate-failure"

    def boom(*a, **k):
        raise NumericAbort("scheme blew up")

    monkeypatch.setattr(harness, "run_experiment", boom)
    out = tmp_path / "num"
    res = runner.invoke(cli.main, ["run", _write_cfg(tmp_path, SMALL), "--out", str(out)])
    assert res.exit_code == 4
    assert json.loads((out / "manifest.json").read_text())["status"] == "numeric-abort"


def test_run_rung_labels_errors():
    cfg = parse_config(RD_ABORT)
    with pytest.raises(RuntimeError, match=r"\[rd @ 100 cells\]"):
        harness.run_rung(cfg, 100)
