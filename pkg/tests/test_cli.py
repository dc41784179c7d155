import os

import pytest

from adauc import data, harness, model
from adauc.cli import main


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["gen-data", "--n", "300", "--d", "6", "--seed", "2", "--out", "train.adset",
                 "--test-out", "test.adset"]) == 0
    return tmp_path


def test_gen_data(workdir):
    tr = data.load_dataset("train.adset")
    te = data.load_dataset("test.adset")
    assert tr.n + te.n == 300 and tr.d == 6
    assert oct(os.stat("train.adset").st_mode & 0o777) != "0o600"


def test_train_zero_epochs(workdir):
    assert main(["train", "--data", "train.adset", "--epochs", "0", "--out-model", "m.ckpt",
                 "--out-history", "h.csv", "--no-figures"]) == 0
    params, extras, mode = model.load_checkpoint("m.ckpt")
    assert params.arch == (6, 1) and len(extras) == 3 and mode == "at_fosc"
    header, rows = harness.read_csv("h.csv")
    assert rows == [] and header[0] == "epoch"


def test_train_eval_plot(workdir, capsys):
    assert main(["train", "--data", "train.adset", "--test-data", "test.adset", "--epochs", "2",
                 "--hidden", "4", "--mode", "at1", "--eta-w", "1.0", "--eval-attack", "fgsm",
                 "--out-model", "at1.ckpt", "--out-history", "h.csv"]) == 0
    assert os.path.exists("h.png")
    os.mkdir("hist")
    assert main(["eval", "--model", "at1.ckpt", "--data", "test.adset", "--attacks",
                 "clean,pgd-2", "--out", "report.csv", "--hist-dir", "hist", "--threads", "2"]) == 0
    header, rows = harness.read_csv("report.csv")
    assert [r[:3] for r in rows] == [["at1", "at_plain", "clean"], ["at1", "at_plain", "pgd-2"]]
    assert os.path.exists("report.png") and os.path.exists("hist/hist_at1_pgd-2.csv")
    assert main(["plot", "--history", "h.csv", "--out", "h.svg"]) == 0
    assert main(["plot", "--histogram", "hist/hist_at1_clean.csv", "--out", "s.svg"]) == 0
    assert "<polyline" in open("h.svg").read()
    assert main(["plot", "--history", "report.csv", "--out", "bad.svg"]) == 2
    assert "not a history CSV" in capsys.readouterr().err


def test_unknown_attack(workdir, capsys):
    main(["train", "--data", "train.adset", "--epochs", "0", "--out-model", "m.ckpt"])
    code = main(["eval", "--model", "m.ckpt", "--data", "test.adset", "--attacks", "clean,pgdx",
                 "--out", "r.csv"])
    assert code == 2
    assert "pgdx" in capsys.readouterr().err
    assert not os.path.exists("r.csv")


def test_config_precedence(workdir):
    with open("run.cfg", "w") as fh:
        fh.write("# training setup\nepochs = 3\nmode = nt\neta_w = 1.5\n")
    assert main(["train", "--config", "run.cfg", "--epochs", "1", "--data", "train.adset",
                 "--out-model", "m.ckpt", "--out-history", "h.csv", "--no-figures"]) == 0
    text = open("h.csv").read()
    assert "# epochs = 1\n" in text and "# eta_w = 1.5\n" in text and "# mode = nt\n" in text
    assert len(harness.read_csv("h.csv")[1]) == 1
    with open("bad.cfg", "w") as fh:
        fh.write("epochz = 3\n")
    assert main(["train", "--config", "bad.cfg", "--data", "train.adset",
                 "--out-model", "m2.ckpt"]) == 2
    assert not os.path.exists("m2.ckpt")


def test_unwritable_output(workdir, capsys):
    code = main(["train", "--data", "train.adset", "--epochs", "0",
                 "--out-model", "nodir/m.ckpt"])
    assert code == 2
    assert "train: error" in capsys.readouterr().err
    assert not os.path.exists("nodir")
    assert [f for f in os.listdir(".") if f.startswith(".tmp-")] == []


def test_missing_input(workdir, capsys):
    assert main(["train", "--data", "nope.adset", "--out-model", "m.ckpt"]) == 2
    assert "nope.adset" in capsys.readouterr().err


def test_verify_all(workdir, capsys):
    assert main(["verify", "--suite", "all", "--seed", "1", "--out", "v.csv"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") >= 10
    assert main(["verify", "--suite", "nope"]) == 2
