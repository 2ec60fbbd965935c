import csv
import json

import pytest

from latecount import synthetic
from latecount.cli import EXIT_CONFIG, EXIT_DATA, EXIT_DEGENERATE, EXIT_OK, main

FAST = ["--sample-size", "10", "--replicates", "50"]


@pytest.fixture
def paths(fixture_paths):
    return [str(p) for p in fixture_paths]


def test_run_writes_report_and_choropleth(paths, tmp_path):
    out, cho = tmp_path / "r.json", tmp_path / "c.csv"
    rc = main(["run", "--settlements", paths[0], "--tallies", paths[1], "--nvc", "1",
               "--scope", "per-region", "--out", str(out), "--choropleth", str(cho), *FAST])
    assert rc == EXIT_OK
    report = json.loads(out.read_text())
    assert len(report["cells"]) == 18
    with cho.open() as fh:
        assert len(list(csv.DictReader(fh))) == 18


def test_run_to_stdout(paths, capsys):
    rc = main(["run", "--settlements", paths[0], "--tallies", paths[1], "--nvc", "3",
               "--scope", "country", *FAST])
    assert rc == EXIT_OK
    assert json.loads(capsys.readouterr().out)["cells"][0]["nvc"] == 3


def test_flags_override_config(paths, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"settlements_path": paths[0], "tallies_path": paths[1], "nvc": [5],
                               "scope": "country", "plan": {"sample_size": 10, "replicates": 50, "seed": 7}}))
    assert main(["run", "--config", str(cfg), "--seed", "9"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["seed"] == 9 and report["cells"][0]["nvc"] == 5
    assert report["config"]["plan"]["replicates"] == 50


def test_config_relative_paths(tmp_path, capsys):
    synthetic.write_fixture(tmp_path / "data")
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"settlements_path": "data/settlements.csv", "tallies_path": "data/tallies.csv",
                               "nvc": [1], "scope": "country", "plan": {"sample_size": 5, "replicates": 20}}))
    assert main(["run", "--config", str(cfg)]) == EXIT_OK
    capsys.readouterr()


@pytest.mark.parametrize("argv", [
    ["run", "--settlements", "/nonexistent.csv", "--tallies", "/nonexistent.csv"],
    ["run", "--tallies", "/nonexistent.csv"],
])
def test_config_errors(argv):
    assert main(argv) == EXIT_CONFIG


def test_bad_config_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("[1, 2]")
    assert main(["run", "--config", str(cfg)]) == EXIT_CONFIG
    cfg.write_text("{not json")
    assert main(["run", "--config", str(cfg)]) == EXIT_CONFIG


def test_bad_plan_is_config_error(paths):
    assert main(["run", "--settlements", paths[0], "--tallies", paths[1], "--replicates", "0"]) == EXIT_CONFIG


def test_argparse_rejects_unknown_form():
    with pytest.raises(SystemExit) as err:
        main(["run", "--form", "cubic"])
    assert err.value.code == 2


def _tiny(tmp_path, settlements, tallies):
    s, t = tmp_path / "s.csv", tmp_path / "t.csv"
    s.write_text("id,name,region_id,latitude,longitude,population\n" + settlements)
    t.write_text("region_id,unit_id,votes_H,votes_N,votes_other,counted_by_halftime,settlement_id\n" + tallies)
    return ["run", "--settlements", str(s), "--tallies", str(t), "--nvc", "1", "--sample-size", "2",
            "--replicates", "5"]


def test_data_error(tmp_path):
    argv = _tiny(tmp_path, "a,A,R1,14.0,-87.0,10\n", "R2,u1,1,2,0,true,a\n")
    assert main(argv) == EXIT_DATA


def test_malformed_csv_is_data_error(tmp_path):
    argv = _tiny(tmp_path, "a,A,R1,north,-87.0,10\n", "R1,u1,1,2,0,true,a\n")
    assert main(argv) == EXIT_DATA


def test_degenerate_exit(tmp_path, capsys):
    # a single settlement that is its own vote centre has x_M = 0
    argv = _tiny(tmp_path, "a,A,R1,14.0,-87.0,10\n", "R1,u1,1,2,0,true,a\n")
    assert main([*argv, "--scope", "per-region"]) == EXIT_DEGENERATE
    report = json.loads(capsys.readouterr().out)
    assert report["degenerate"] is True


def test_sweep(paths, tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--settlements", paths[0], "--points", "5", "--form", "linear", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 5 and all(r["flag"] == "false" for r in rows)


def test_sweep_unknown_region(paths):
    assert main(["sweep", "--settlements", paths[0], "--region", "XX"]) == EXIT_CONFIG


def test_fairwin(capsys):
    assert main(["fairwin", "534000", "600000"]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["log10"] == pytest.approx(-1676.26, abs=0.01)
    assert out["asymptotic"] is True


def test_fairwin_raw(capsys):
    assert main(["fairwin", "40", "60", "--other", "20", "--convention", "raw"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["log10"] < 0


def test_fairwin_negative_is_config_error():
    assert main(["fairwin", "--", "-1", "5"]) == EXIT_CONFIG


def test_synth(tmp_path, capsys, fixture_paths):
    assert main(["synth", str(tmp_path)]) == EXIT_OK
    printed = capsys.readouterr().out.split()
    assert len(printed) == 2
    for name, shipped in zip(("settlements.csv", "tallies.csv"), fixture_paths):
        assert (tmp_path / name).read_bytes() == open(shipped, "rb").read()
