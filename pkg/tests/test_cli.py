import csv
import json

from rareprob.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_list_benchmarks(capsys):
    code, out, _ = run_cli(capsys, "list-benchmarks")
    assert code == 0
    assert "example1" in out and "example9" in out
    assert "ref_pf" in out


def test_run_from_config_file(tmp_path, capsys):
    cfg = {
        "problem": "example1", "method": "qnp-hmcmc",
        "method.n_burnin": 40, "method.budget": 300,
        "replications": 2, "master_seed": 7,
        "output.csv": str(tmp_path / "rows.csv"),
        "output.json": str(tmp_path / "agg.json"),
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    code, out, _ = run_cli(capsys, "run", "--config", str(path))
    assert code == 0
    summary = json.loads(out)
    assert summary["n_replications"] == 2
    assert (tmp_path / "rows.csv").exists()
    assert (tmp_path / "agg.json").exists()


def test_run_with_flag_overrides(capsys):
    code, out, _ = run_cli(capsys, "run", "--problem", "example1",
                           "--method", "sus-uniform", "--replications", "2",
                           "--seed", "3", "--set", "method.n_s=400")
    assert code == 0
    summary = json.loads(out)
    assert summary["n_replications"] == 2
    assert summary["mean_pf"] > 0


def test_unknown_key_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"problem": "example1", "method": "hmcmc",
                                "typo_key": 1}))
    code, _, err = run_cli(capsys, "run", "--config", str(path))
    assert code == 2
    assert "configuration error" in err


def test_missing_config_file(capsys):
    code, _, err = run_cli(capsys, "run", "--config", "/nonexistent.json")
    assert code == 2


def test_numerical_failure_exit_code(capsys):
    # budget below the burn-in cost: every replication errors, but the
    # aggregate run still completes; a direct oracle misuse is a config error
    code, _, err = run_cli(capsys, "oracle", "--problem", "example1",
                           "--n", "100")
    assert code == 2
    assert "configuration error" in err


def test_oracle_force(capsys):
    code, out, _ = run_cli(capsys, "oracle", "--problem", "example4",
                           "--n", "20000", "--seed", "5", "--force")
    assert code == 0
    payload = json.loads(out)
    assert payload["p_f_ref"] == 2.20e-3
    assert 0 <= payload["p_hat"] <= 1


def test_sweep_cli(tmp_path, capsys):
    plot = tmp_path / "plot.csv"
    code, out, _ = run_cli(
        capsys, "sweep", "--problem", "example6", "--method", "crude-mc",
        "--replications", "1", "--seed", "2", "--set", "method.n=20000",
        "--set", "method.force=true", "--param", "problem.beta",
        "--values", "1.0,1.5", "--plot-csv", str(plot))
    assert code == 0
    with open(plot) as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 3


def test_tuning_failure_exit_code(capsys):
    # zero pilot iterations: every candidate is unusable -> numerical exit
    code, _, err = run_cli(capsys, "tune", "--problem", "example1",
                           "--candidates", "0.7", "--pilot-iters", "0")
    assert code == 3
    assert "numerical failure" in err


def test_tune_cli(capsys):
    code, out, _ = run_cli(capsys, "tune", "--problem", "example1",
                           "--candidates", "0.7", "--pilot-iters", "20",
                           "--seed", "1")
    assert code == 0
    payload = json.loads(out)
    assert payload["tau"] == 0.7
    assert payload["epsilon"] > 0
