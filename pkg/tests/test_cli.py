import argparse
import json
from pathlib import Path

import pytest

from crisnoma.cli import main, parse_powers
from crisnoma.qterms import QTermTable

DESK = Path(__file__).resolve().parents[1] / "scenarios" / "desk.ini"


def test_parse_powers():
    assert parse_powers("0:30:10") == [0.0, 10.0, 20.0, 30.0]
    assert parse_powers("0:1:0.25") == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert parse_powers("5, 7") == [5.0, 7.0]
    for bad in ("3:1:1", "0:1:0", "1:2", "a,b"):
        with pytest.raises(argparse.ArgumentTypeError):
            parse_powers(bad)


def test_derive_table(capsys, tmp_path):
    out = tmp_path / "t.txt"
    assert main(["derive-table", "--mod-orders", "4,4", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    table = QTermTable.from_text(text)
    assert table.mod_orders == (4, 4) and out.read_text() == text


def test_stats(capsys):
    assert main(["stats", "--config", str(DESK), "--powers", "60"]) == 0
    users = json.loads(capsys.readouterr().out)["users"]
    assert [u["user"] for u in users] == [1, 2]
    assert all(u["mean_gamma_kk"] > 0 and u["var_gamma_kk"] > 0 for u in users)


def test_ber_with_simulation(capsys):
    assert main(["ber", "--config", str(DESK), "--trials", "2000", "--seed", "5"]) == 0
    users = json.loads(capsys.readouterr().out)["users"]
    for u in users:
        assert u["mc_ci_low"] <= u["ber_mc"] <= u["mc_ci_high"]
        assert 0 <= u["ber_analytic"] <= 0.5


def test_sweep_writes_outputs(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["sweep", "--config", str(DESK), "--methods", "NO", "--powers", "50,60",
                 "--trials", "0", "--out", str(out)]) == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert len(lines) == 1 + 2 * 2
    assert (out / "series" / "NO_user2_analytic.csv").exists()


def test_optimize_trace(tmp_path, capsys):
    trace = tmp_path / "trace.csv"
    assert main(["optimize", "--config", str(DESK), "--method", "AO", "--powers", "64",
                 "--out", str(trace)]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["powers_dbm"] == [64.0, 64.0]
    assert sum(res["widths_fraction"]) == pytest.approx(1.0)
    assert trace.read_text().startswith("outer,")


def test_errors(tmp_path, capsys):
    assert main(["stats", "--config", str(tmp_path / "missing.ini")]) == 2
    bad = tmp_path / "bad.ini"
    bad.write_text("[users]\ndistances_m = 20\nmod_orders = 3\n")
    assert main(["stats", "--config", str(bad)]) == 2
    assert main(["derive-table", "--mod-orders", "8"]) == 2
    with pytest.raises(SystemExit):
        main(["sweep", "--methods", "NO"])
