import json

import pytest
import yaml

from cmes import cli
from cmes.gp import NumericalError


def test_toy2d_eval(capsys):
    assert cli.main(["toy2d-eval", "--x", "-0.7", "--y", "0.5"]) == 0
    assert capsys.readouterr().out.strip() == "value=0.3 feasible=true"
    assert cli.main(["toy2d-eval", "--x", "1", "--y", "-1"]) == 0
    assert "feasible=false" in capsys.readouterr().out


def test_argument_errors_exit_1():
    assert cli.main(["toy2d-eval", "--x", "3", "--y", "0"]) == 1
    with pytest.raises(SystemExit) as e:
        cli.main(["frobnicate"])
    assert e.value.code == 1
    with pytest.raises(SystemExit) as e:
        cli.main(["toy2d-eval", "--x", "abc", "--y", "0"])
    assert e.value.code == 1


def test_bad_config_exit_1(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("problems: [mars]\n")
    assert cli.main(["run", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == 1
    assert cli.main(["run", "--config", str(tmp_path / "none.yaml"), "--out-dir", str(tmp_path)]) == 1


def test_numerical_failure_exit_2(monkeypatch, tmp_path):
    def boom(*a, **k):
        raise NumericalError("Cholesky failed")
    monkeypatch.setattr("cmes.suite.run_suite", boom)
    cfg = tmp_path / "c.yaml"
    cfg.write_text("problems: [toy2d]\n")
    assert cli.main(["run", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == 2


def test_run_rank_plot_round_trip(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump({
        "problems": ["toy2d"], "seeds": 2, "budget": 7, "n_init": 5,
        "strategies": ["random", {"strategy": "cei", "n_candidates": 32, "n_refine": 1, "hyper_restarts": 1}]}))
    out = tmp_path / "res"
    assert cli.main(["run", "--config", str(cfg), "--out-dir", str(out)]) == 0
    assert "executed 4 cells (28 evaluations)" in capsys.readouterr().out
    assert cli.main(["run", "--config", str(cfg), "--out-dir", str(out), "--resume"]) == 0
    assert "(0 evaluations)" in capsys.readouterr().out
    assert cli.main(["rank", "--in", str(out), "--out", str(out / "ranks.json"), "--bootstrap", "50"]) == 0
    doc = json.loads((out / "ranks.json").read_text())
    assert sorted(doc["mean_rank"]) == ["cei", "random"]
    assert sum(doc["mean_rank"].values()) == pytest.approx(3.0)
    assert cli.main(["plot", "--in", str(out), "--out", str(tmp_path / "fig")]) == 0
    assert (tmp_path / "fig" / "rank_vs_iteration.png").stat().st_size > 0
    assert cli.main(["plot", "--in", str(tmp_path / "nothing"), "--out", str(tmp_path / "fig")]) == 1
    assert cli.main(["rank", "--in", str(tmp_path / "nothing")]) == 1


def test_bias_study_and_histogram_plot(tmp_path, capsys):
    out = tmp_path / "bias.json"
    assert cli.main(["bias-study", "--m-values", "50", "100", "--draws", "200", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert set(doc["joint"]) == {"50", "100"}
    assert "marginal divergence" in capsys.readouterr().out
    assert cli.main(["plot", "--in", str(out), "--out", str(tmp_path / "fig")]) == 0
    assert (tmp_path / "fig" / "ystar_histograms.png").exists()
    assert cli.main(["bias-study", "--m-values", "100", "50"]) == 1
