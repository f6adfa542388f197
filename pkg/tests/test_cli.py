import json

import pytest

from scmadec.cli import main
from scmadec.sim import CSV_COLUMNS, read_csv


def test_dump_config(capsys):
    assert main(["sweep", "--snr-db", "0:4:2", "--algorithm", "dmpa,maxlog", "--approx", "exact,a3",
                 "--iters", "3", "--early-term", "--dump-config"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["snr_db"] == [0.0, 2.0, 4.0]
    assert len(doc["variants"]) == 4
    assert all(v["early_termination"] and v["max_iterations"] == 3 for v in doc["variants"])


def test_dump_config_adapt_and_quantize(capsys):
    main(["sweep", "--adapt", "0.02,1.2,0.8", "--quantize", "on", "--dump-config"])
    (v,) = json.loads(capsys.readouterr().out)["variants"]
    assert (v["epsilon"], v["alpha"], v["beta"]) == (0.02, 1.2, 0.8)
    assert v["self_adaption"] and v["quantization"]["input"] == {"total_bits": 8, "frac_bits": 5}


def test_sweep_writes_csv(tmp_path, capsys):
    out = tmp_path / "r.csv"
    assert main(["sweep", "--snr-db", "6", "--frames", "200", "--oracle", "on", "--out", str(out),
                 "--tradeoff"]) == 0
    rows = read_csv(out.read_text())
    assert tuple(rows[0]) == CSV_COLUMNS
    assert [r["variant"] for r in rows] == ["maxlog-exact-i5", "ml"]
    assert "SNR@" in capsys.readouterr().err


def test_sweep_stdout(capsys):
    main(["sweep", "--snr-db", "8", "--frames", "50", "--approx", "a3"])
    assert capsys.readouterr().out.startswith("# scma sweep")


@pytest.mark.parametrize("args", [["sweep", "--algorithm", "bp"], ["sweep", "--snr-db", "4:1:1"],
                                  ["sweep", "--codebook", "/nonexistent.json"],
                                  ["dfg", "--graph", "/nonexistent.dfg"]])
def test_errors_exit_2(args, capsys):
    assert main(args) == 2
    assert "scma: error" in capsys.readouterr().err


def test_dfg_report(tmp_path, capsys):
    from importlib import resources
    graph = resources.files("scmadec") / "data" / "resource_branch.dfg"
    csv_out = tmp_path / "f.csv"
    assert main(["dfg", "--graph", str(graph), "--report", "all", "--csv", str(csv_out)]) == 0
    text = capsys.readouterr().out
    assert "registers" in text.lower()
    assert csv_out.read_text().strip()


def test_dfg_symbolic_bound(capsys):
    from importlib import resources
    graph = resources.files("scmadec") / "data" / "maxlog_loops.dfg"
    assert main(["dfg", "--graph", str(graph), "--report", "bound", "--times", "T_A=2,T_C=1,T_S=1"]) == 0
    assert "5/4" in capsys.readouterr().out
