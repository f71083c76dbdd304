import json

import numpy as np
import pytest

from vflqn import data
from vflqn.cli import EXIT_CAPPED, EXIT_ERROR, EXIT_OK, main
from vflqn.oracle import oracle_train
from vflqn.config import TrainingConfig


def test_gen_synthetic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["gen-synthetic", "--n", "4", "--T", "100", "--seed", "3", "--out", str(a)]) == EXIT_OK
    assert main(["gen-synthetic", "--n", "4", "--T", "100", "--seed", "3", "--out", str(b)]) == EXIT_OK
    assert len(a.read_text().splitlines()) == 101
    assert a.read_bytes() == b.read_bytes()
    assert "w* =" in capsys.readouterr().out


def test_planted_sign_recovery(tmp_path):
    p = tmp_path / "s.csv"
    main(["gen-synthetic", "--n", "4", "--T", "4000", "--seed", "1", "--signal", "4", "--out", str(p)])
    _, _, w_star = data.make_synthetic(4, 4000, 1, 4.0)
    part = data.prepare(data.load_csv(p), 2, seed=1)
    res = oracle_train(part, TrainingConfig(method="qn", batch_size=400, eta=0.1, seed=1))
    # standardization rescales each column by a positive factor, so signs survive
    assert np.array_equal(np.sign(res.w), np.sign(w_star))


def test_run_synthetic_sgd(tmp_path, capsys):
    rep = tmp_path / "r.json"
    code = main(["run", "--method", "sgd", "--synthetic", "n=10", "T=2000", "--batch", "500",
                 "--backend", "mock", "--max-epochs", "5", "--report", str(rep)])
    assert code in (EXIT_OK, EXIT_CAPPED)
    doc = json.loads(rep.read_text())
    run = doc["runs"][0]
    assert run["epochs"] >= 1 and run["test_auc"] > 0.5
    out = capsys.readouterr().out
    assert f"{run['final_loss']:.6f}" in out and f"{run['test_auc']:.4f}" in out


def test_run_qn_paper_configuration(tmp_path, monkeypatch):
    monkeypatch.setenv("VFLQN_REPORT_DIR", str(tmp_path))
    code = main(["run", "--method", "qn", "--L", "4", "--M", "10", "--sh-equals-s", "--synthetic", "n=6", "T=600",
                 "--batch", "120", "--backend", "mock", "--eta", "0.05"])
    assert code in (EXIT_OK, EXIT_CAPPED)
    doc = json.loads((tmp_path / "report.json").read_text())
    cfg = doc["runs"][0]["config"]
    assert cfg["window"] == 4 and cfg["memory"] == 10 and cfg["hessian_batch_size"] is None
    assert doc["runs"][0]["memory_M"] == 10


def test_backends_agree(tmp_path):
    out = {}
    for be in ("mock", "paillier"):
        rep = tmp_path / f"{be}.json"
        main(["run", "--method", "qn", "--synthetic", "n=4", "T=200", "--batch", "40", "--backend", be,
              "--key-bits", "512", "--max-rounds", "12", "--L", "2", "--report", str(rep)])
        out[be] = json.loads(rep.read_text())["runs"][0]
    wm = np.array(out["mock"]["w_a"] + out["mock"]["w_b"])
    wp = np.array(out["paillier"]["w_a"] + out["paillier"]["w_b"])
    assert np.max(np.abs(wm - wp)) <= 1e-6
    assert out["mock"]["epochs"] == out["paillier"]["epochs"]


def test_capped_exit_code(tmp_path):
    code = main(["run", "--method", "sgd", "--synthetic", "n=4", "T=200", "--batch", "40", "--backend", "mock",
                 "--max-epochs", "2", "--tol", "0", "--report", str(tmp_path / "r.json")])
    assert code == EXIT_CAPPED


def test_audit_report_and_transcript(tmp_path, capsys):
    rep, tr = tmp_path / "r.json", tmp_path / "t.log"
    main(["run", "--method", "qn", "--synthetic", "n=6", "T=500", "--batch", "100", "--backend", "mock",
          "--max-rounds", "16", "--report", str(rep), "--transcript", str(tr)])
    capsys.readouterr()
    assert main(["audit", str(rep)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "match the cost model: True" in out
    assert "= 1; PC" in out
    assert "bound 1+1/L = 5/4" in out
    assert main(["audit", str(tr)]) == EXIT_OK


def test_audit_corrupt_transcript(tmp_path, capsys):
    bad = tmp_path / "bad.log"
    bad.write_text("12 {not json}\n")
    assert main(["audit", str(bad)]) == EXIT_ERROR
    assert "corrupt" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["run", "--data", "/nonexistent.csv", "--backend", "mock"],
    ["run", "--synthetic", "bogus=1", "--backend", "mock"],
    ["run", "--synthetic", "n=4", "T=50", "--eta", "-1", "--backend", "mock"],
])
def test_run_errors(argv):
    assert main(argv) == EXIT_ERROR


def test_run_csv_with_label_column(tmp_path):
    p = tmp_path / "d.csv"
    main(["gen-synthetic", "--n", "5", "--T", "300", "--out", str(p)])
    code = main(["run", "--data", str(p), "--method", "sgd", "--batch", "60", "--backend", "mock",
                 "--n-a", "2", "--max-epochs", "3", "--report", str(tmp_path / "r.json")])
    assert code in (EXIT_OK, EXIT_CAPPED)
    doc = json.loads((tmp_path / "r.json").read_text())
    assert doc["dataset"]["n_a"] == 2 and doc["dataset"]["n_b"] == 3
