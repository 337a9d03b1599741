import json
import subprocess
import sys

import pytest

from gansets.cli import main


def write_cfg(tmp_path, **kw):
    base = {"problem": {"kind": "two_point", "mu": 1.0, "sigma": 0.2}, "sample_sizes": [200],
            "replications": 3, "subsampling": {"num_subsamples": 30},
            "limit": {"draws": 500, "covariance_n": 2000}, "out_dir": str(tmp_path / "out")}
    base.update(kw)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(base))
    return str(path)


@pytest.mark.parametrize("cmd", ["solve", "confset", "consistency", "coverage", "limit-check"])
def test_subcommands_succeed(tmp_path, capsys, cmd):
    assert main([cmd, "--config", write_cfg(tmp_path)]) == 0
    json.loads(capsys.readouterr().out)


def test_solve_outputs(tmp_path, capsys):
    assert main(["solve", "--config", write_cfg(tmp_path), "--out-dir", str(tmp_path / "o")]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["n"] == 200 and out["cardinality"] >= 2
    for name in ("dataset.csv", "bundle.csv", "solution_set.csv"):
        assert (tmp_path / "o" / name).exists()


def test_solve_from_dataset_csv(tmp_path, capsys):
    assert main(["solve", "--config", write_cfg(tmp_path, tau=0.0)]) == 0
    first = json.loads(capsys.readouterr().out)
    data = str(tmp_path / "out" / "dataset.csv")
    assert main(["solve", "--config", write_cfg(tmp_path, tau=0.0, data_csv=data)]) == 0
    assert json.loads(capsys.readouterr().out) == first


def test_seed_override_changes_data(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    main(["confset", "--config", cfg, "--seed", "1"])
    a = json.loads(capsys.readouterr().out)
    main(["confset", "--config", cfg, "--seed", "2"])
    b = json.loads(capsys.readouterr().out)
    assert a["seed"] != b["seed"]


def test_config_error_exit_code(tmp_path, capsys):
    assert main(["consistency", "--config", str(tmp_path / "nope.json")]) == 2
    assert main(["consistency", "--config", write_cfg(tmp_path, replications=0)]) == 2
    assert main(["solve", "--config", write_cfg(tmp_path), "--threads", "0"]) == 2
    assert main(["solve", "--config", write_cfg(tmp_path, grid_counts=[5])]) == 2
    assert "config error" in capsys.readouterr().err


def test_numerical_error_exit_code(tmp_path, capsys):
    cfg = write_cfg(tmp_path, problem={"kind": "constant"}, grid_counts=[3, 3])
    assert main(["limit-check", "--config", cfg]) == 3
    assert "numerical error" in capsys.readouterr().err


def test_help_documents_columns():
    out = subprocess.run([sys.executable, "-m", "gansets.cli", "coverage", "--help"],
                         capture_output=True, text=True, check=True).stdout
    for col in ("covered", "strictly_nested", "dH_tau", "statistic", "index, gamma_0"):
        assert col in out
    for flag in ("--config", "--seed", "--out-dir", "--threads"):
        assert flag in out


def test_console_script_installed(tmp_path):
    res = subprocess.run(["gansets", "solve", "--config", write_cfg(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
