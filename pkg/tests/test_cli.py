import csv
import json
from pathlib import Path

import pytest

import oracles
from mechlab.cli import main
from mechlab.config import config_hash, validate_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def base_config(**extra):
    cfg = {
        "dims": {"n_agents": 2, "n_alternatives": 2},
        "distribution": {"kind": "independent-marginals", "marginals": {"family": "uniform"}},
        "mechanisms": {"util": {"kind": "weighted-utilitarian", "weights": [0.5, 0.5]}},
        "jobs": [{"type": "ex-ante", "mechanism": "util"}],
        "seed": {"master_seed": 5, "stream_id": 0},
        "samples": 20_000,
    }
    cfg.update(extra)
    return cfg


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.json")))
def test_shipped_configs_validate(name, capsys):
    assert main(["validate", "--config", str(CONFIGS / name)]) == 0
    assert capsys.readouterr().out.strip() == "ok"


def test_validate_reports_weight_sum(tmp_path, capsys):
    cfg = base_config(mechanisms={"util": {"kind": "weighted-utilitarian", "weights": [0.5, 0.4]}})
    assert main(["validate", "--config", write(tmp_path, cfg)]) == 1
    assert "weights must sum to 1" in capsys.readouterr().out


def test_validate_reports_bad_correlation(tmp_path, capsys):
    corr = [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 1.1], [0.0, 0.0, 1.1, 1.0]]
    cfg = base_config(distribution={"kind": "gaussian-copula", "correlation": corr})
    assert main(["validate", "--config", write(tmp_path, cfg)]) == 1
    out = capsys.readouterr().out
    assert "distribution.correlation" in out and "-0.1" in out


def test_validate_lists_every_problem():
    cfg = base_config(mechanisms={"util": {"kind": "weighted-utilitarian", "weights": [0.5, 0.4]}},
                      jobs=[{"type": "ex-ante", "mechanism": "nope"}, {"type": "dance"}], samples=0)
    diags = validate_config(cfg)
    assert len(diags) == 4


def test_unreadable_config(tmp_path, capsys):
    assert main(["validate", "--config", str(tmp_path / "missing.json")]) == 1
    (tmp_path / "bad.json").write_text("{not json")
    assert main(["run", "--config", str(tmp_path / "bad.json")]) == 1


def test_run_rejects_invalid_config(tmp_path, capsys):
    cfg = base_config(jobs=[])
    assert main(["run", "--config", write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 1
    assert "jobs" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_minimal_run(tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--config", str(CONFIGS / "minimal.json"), "--out", str(out)]) == 0
    rows = read_rows(out / "job00_ex-ante.csv")
    assert [r["agent"] for r in rows] == ["0", "1"]
    for r in rows:
        assert abs(float(r["mean"]) - 0.5) <= 3 * float(r["se"])
    manifest = json.loads((out / "manifest.json").read_text())
    assert rows[0]["config_hash"] == manifest["config_hash"]
    assert manifest["outcome"] == {"jobs_run": 1, "violations_certified": 0}


def test_audit_run_and_exit_codes(tmp_path):
    cfg = base_config(jobs=[{"type": "audit", "mechanism": "util",
                             "audit": {"agent": 0, "true_type": [0.6, 0.7]}}], samples=200_000)
    path = write(tmp_path, cfg)
    out = tmp_path / "out"
    assert main(["audit", "--config", path, "--out", str(out)]) == 0
    row = read_rows(out / "job00_audit.csv")[0]
    assert row["verdict"] == "violation-certified"
    assert abs(float(row["gain"]) - oracles.RUNNING_GAIN) <= 3 * float(row["se"])
    assert row["deviation"] == "0.59999999999999998;1"
    assert main(["audit", "--config", path, "--out", str(out), "--fail-on-violation"]) == 2


def test_dictatorial_extremization_not_applicable(tmp_path):
    cfg = base_config(mechanisms={"d": {"kind": "dictatorial", "dictator": 0}},
                      jobs=[{"type": "audit", "mechanism": "d", "audit": {"agent": 0, "true_type": [0.6, 0.7]}}])
    out = tmp_path / "out"
    assert main(["run", "--config", write(tmp_path, cfg), "--out", str(out), "--fail-on-violation"]) == 0
    assert read_rows(out / "job00_audit.csv")[0]["verdict"] == "not-applicable"


def test_subcommand_without_matching_jobs(tmp_path):
    assert main(["sweep", "--config", write(tmp_path, base_config()), "--out", str(tmp_path / "o")]) == 1


def test_sweep_csv_schema(tmp_path):
    cfg = base_config(jobs=[{"type": "sweep", "sweep": {"resolution": 4}}])
    out = tmp_path / "out"
    assert main(["sweep", "--config", write(tmp_path, cfg), "--out", str(out)]) == 0
    with open(out / "job00_sweep.csv") as fh:
        header = fh.readline().strip().split(",")
    assert header == ["lambda_1", "lambda_2", "payoff_1", "payoff_2", "se_1", "se_2", "config_hash"]
    assert len(read_rows(out / "job00_sweep.csv")) == 5


def test_overrides_change_seed_and_samples(tmp_path):
    path = write(tmp_path, base_config())
    main(["run", "--config", path, "--out", str(tmp_path / "a")])
    main(["run", "--config", path, "--out", str(tmp_path / "b"), "--seed", "6", "--samples", "1000"])
    a = read_rows(tmp_path / "a" / "job00_ex-ante.csv")
    b = read_rows(tmp_path / "b" / "job00_ex-ante.csv")
    assert b[0]["n"] == "1000" and a[0]["mean"] != b[0]["mean"]
    assert a[0]["config_hash"] != b[0]["config_hash"]


def test_threads_do_not_change_bytes(tmp_path, monkeypatch):
    cfg = base_config(jobs=[{"type": "ex-ante", "mechanism": "util"},
                            {"type": "audit", "mechanism": "util",
                             "audit": {"agent": 0, "true_type": [0.6, 0.7], "mode": "grid"}},
                            {"type": "sweep", "sweep": {"resolution": 2}}],
                      samples=150_000)
    path = write(tmp_path, cfg)
    main(["run", "--config", path, "--out", str(tmp_path / "t1"), "--threads", "1"])
    main(["run", "--config", path, "--out", str(tmp_path / "t4"), "--threads", "4"])
    monkeypatch.setenv("MECHLAB_THREADS", "3")
    main(["run", "--config", path, "--out", str(tmp_path / "env")])
    for f in sorted((tmp_path / "t1").glob("*.csv")):
        assert f.read_bytes() == (tmp_path / "t4" / f.name).read_bytes()
        assert f.read_bytes() == (tmp_path / "env" / f.name).read_bytes()
        assert b"\r" not in f.read_bytes()


def test_config_hash_ignores_key_order_and_output_dir():
    cfg = base_config()
    shuffled = dict(reversed(list(cfg.items())))
    shuffled["output_dir"] = "elsewhere"
    assert config_hash(cfg) == config_hash(shuffled)
    assert config_hash(cfg) != config_hash(base_config(samples=1))


def test_oracle_subcommand(tmp_path):
    out = tmp_path / "out"
    assert main(["oracle", "--config", str(CONFIGS / "oracle_crosscheck.json"), "--out", str(out)]) == 0
    for f in out.glob("*.csv"):
        assert all(r["within_4se"] == "True" for r in read_rows(f))
