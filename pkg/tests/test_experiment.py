import json
import math
from pathlib import Path

import numpy as np
import pytest

from dpnormopt.cli import main
from dpnormopt.experiment import (CSV_HEADER, AuditConfig, ConfigError, ExperimentConfig, ExperimentReport,
                                  derive_seed, emit_csv, read_csv, run_audit_suite, run_experiment)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _base(**over):
    raw = json.loads((CONFIGS / "smoke.json").read_text())
    raw.update(over)
    return raw


def test_config_validation():
    ExperimentConfig.from_dict(_base())
    bad = [dict(variant="nope"), dict(epsilons=[]), dict(epsilons=[0.0]), dict(delta=0.7), dict(repetitions=0),
           dict(sensitivity_factor=3), dict(variant="sc-erm"), dict(geometry={"kind": "frob"}),
           dict(geometry={"kind": "lp", "p": 0.5}), dict(domain={"type": "simplex"}),
           dict(loss={"family": "squared"}), dict(loss={"family": "linear", "data": {"generator": "x"}}),
           dict(sampler={"method": "gibbs"}), dict(bogus=1)]
    for b in bad:
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(_base(**b))
    raw = _base()
    del raw["loss"]
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(raw)
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json("/nonexistent/config.json")


def test_shipped_configs_parse():
    for path in CONFIGS.glob("*.json"):
        raw = json.loads(path.read_text())
        if "audit" in raw:
            AuditConfig.from_dict(raw["audit"])
        else:
            ExperimentConfig.from_dict(raw)


def test_derive_seed_is_stable_and_keyed():
    assert derive_seed(1, "a", 2) == derive_seed(1, "a", 2)
    assert derive_seed(1, "a", 2) != derive_seed(1, "a", 3)
    assert 0 <= derive_seed(5, 1) < 2 ** 63


def test_constant_data_gives_zero_gap():
    cfg = ExperimentConfig.from_dict(_base(loss={"family": "linear", "data": {"generator": "constant"}},
                                           n_list=[50], repetitions=2))
    rep = run_experiment(cfg)
    assert not rep.failures
    assert all(r.empirical_gap == 0.0 and r.analytic_bound == 0.0 for r in rep.records)


def test_bound_scales_as_inverse_epsilon():
    cfg = ExperimentConfig.from_dict(_base(epsilons=[0.5, 1.0, 2.0], n_list=[100], repetitions=1))
    rep = run_experiment(cfg)
    b = {r.epsilon: r.analytic_bound for r in rep.records}
    assert b[0.5] == pytest.approx(2 * b[1.0], rel=1e-12)
    assert b[1.0] == pytest.approx(2 * b[2.0], rel=1e-12)


def test_empty_report_writes_header_only(tmp_path):
    path = tmp_path / "e.csv"
    emit_csv(ExperimentReport(), path)
    assert path.read_text().splitlines() == [",".join(CSV_HEADER)]


def test_csv_round_trip_and_determinism(tmp_path):
    cfg = ExperimentConfig.from_dict(_base(record_runtime=False, repetitions=2))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    rep = run_experiment(cfg, threads=1)
    emit_csv(rep, a)
    emit_csv(run_experiment(cfg, threads=1), b)
    assert a.read_bytes() == b.read_bytes()
    rows = read_csv(a)
    assert len(rows) == len(rep.records)
    recs = rep.sorted_records()
    for row, rec in zip(rows, recs):
        assert row["n"] == rec.n and row["rep"] == rec.rep
        assert row["empirical_gap"] == pytest.approx(rec.empirical_gap, rel=1e-11)
        assert row["runtime_ms"] == 0.0


def test_worker_pool_matches_serial(tmp_path):
    cfg = ExperimentConfig.from_dict(_base(record_runtime=False, repetitions=2))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    emit_csv(run_experiment(cfg, threads=1), a)
    emit_csv(run_experiment(cfg, threads=2), b)
    assert a.read_bytes() == b.read_bytes()


def test_thread_count_from_environment(monkeypatch):
    from dpnormopt.experiment import _threads

    monkeypatch.setenv("DPNORMOPT_THREADS", "3")
    assert _threads(None) == 3
    assert _threads(1) == 1
    with pytest.raises(ConfigError):
        _threads(0)


def test_sampler_failures_are_recorded():
    cfg = ExperimentConfig.from_dict(_base(sampler={"method": "hit-and-run", "max_queries": 20},
                                           n_list=[100], repetitions=2))
    rep = run_experiment(cfg)
    assert len(rep.failures) == 2
    assert all("SamplerError" in r.error for r in rep.failures)
    assert len(rep.notes) == 2


def test_abs_linear_cell_within_bound():
    cfg = ExperimentConfig.from_json(CONFIGS / "abs_linear_cell.json")
    rep = run_experiment(cfg)
    assert not rep.failures
    (cell,) = rep.cells().values()
    assert cell["reps"] == 20
    assert cell["mean"] <= cell["bound"]


def test_sco_population_gap_reported():
    cfg = ExperimentConfig.from_dict(dict(json.loads((CONFIGS / "sco_planted.json").read_text()),
                                          n_list=[250], repetitions=2, population_samples=5000))
    rep = run_experiment(cfg)
    assert not rep.failures
    for r in rep.records:
        assert math.isfinite(r.population_gap)
        assert r.population_gap <= r.analytic_bound


def test_schatten_cell_runs():
    raw = json.loads((CONFIGS / "schatten_erm.json").read_text())
    raw.update(d_list=[[2, 2]], n_list=[100], epsilons=[1.0], repetitions=1)
    rep = run_experiment(ExperimentConfig.from_dict(raw))
    assert not rep.failures
    assert rep.records[0].d == [2, 2]


def test_audit_suite_vacuous_and_quick():
    cfg = AuditConfig(gdp_instances=0, tight_pairs=[], fact_count=0, kmudef_count=0, risk_targets=0,
                      concentration_targets=0, mechanism_instances=0)
    suite = run_audit_suite(cfg)
    assert suite.passed and suite.warnings
    quick = AuditConfig.from_json(CONFIGS / "audit_quick.json")
    assert run_audit_suite(quick).passed


# --- CLI -------------------------------------------------------------------------------


def test_cli_params(capsys):
    code = main(["params", "--variant", "erm", "--G", "1", "--theta", "0.5", "--d", "4", "--n", "100",
                 "--epsilon", "1", "--delta", str(1 / (2 * math.e)), "--c", "1"])
    assert code == 0
    out = json.loads(capsys.readouterr().out)
    assert out["k"] == pytest.approx(200.0) and out["mu"] == pytest.approx(0.04)
    assert main(["params", "--variant", "erm", "--G", "1", "--d", "4", "--n", "100", "--epsilon", "1",
                 "--delta", "1e-6"]) == 2
    assert main(["params", "--variant", "erm", "--G", "1", "--theta", "1", "--d", "4", "--n", "100",
                 "--epsilon", "1", "--delta", "0.9"]) == 2


def test_cli_run_writes_outputs(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(_base(n_list=[100, 200], repetitions=2)))
    out = tmp_path / "r.csv"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    assert len(read_csv(out)) == 4
    assert json.loads(out.with_suffix(".summary.json").read_text())
    assert "slope" in capsys.readouterr().out


def test_cli_exit_codes(tmp_path):
    assert main(["run"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(_base(variant="nope")))
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "x.csv")]) == 2
    broken = tmp_path / "broken.json"
    broken.write_text(json.dumps(_base(sampler={"max_queries": 20}, n_list=[100], repetitions=1)))
    assert main(["run", "--config", str(broken), "--out", str(tmp_path / "y.csv")]) == 3
    quick = str(CONFIGS / "audit_quick.json")
    assert main(["audit", "--config", quick, "--out", str(tmp_path / "a.csv")]) == 0
    assert (tmp_path / "a.csv").read_text().startswith("instance_id,")
    assert main(["audit", "--config", quick, "--inject-bug"]) == 1


def test_cli_sample(tmp_path, capsys):
    data = tmp_path / "d.csv"
    rng = np.random.default_rng(0)
    A = rng.uniform(-0.5, 0.5, (30, 2))
    np.savetxt(data, A, delimiter=",", header="a_1,a_2", comments="")
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(_base()))
    assert main(["sample", "--config", str(cfg), "--data", str(data), "--seed", "3"]) == 0
    first = json.loads(capsys.readouterr().out)
    assert len(first["x"]) == 2 and first["value_queries"] > 0
    assert main(["sample", "--config", str(cfg), "--data", str(data), "--seed", "3"]) == 0
    assert json.loads(capsys.readouterr().out)["x"] == first["x"]
    assert main(["sample", "--config", str(cfg), "--data", str(tmp_path / "missing.csv")]) == 2
