import csv
import json
import os

import numpy as np
import pytest

from ndtsim import cli, harness
from ndtsim.harness import ExperimentSpec, aggregate, confidence_halfwidth, read_trials_csv, run_experiment
from ndtsim.scenario import ConfigError, ScenarioConfig

CONFIGS = os.path.join(os.path.dirname(__file__), os.pardir, "configs")


def small_spec(tmp_path, **kw):
    base = {"base": {"n": 6, "iterations": 20}, "sweep_variable": "n", "sweep_values": [4, 6],
            "schemes": ["NDT", "BS_WF"], "trials": 3, "output_dir": str(tmp_path / "out")}
    base.update(kw)
    return ExperimentSpec.from_dict(base)


def read_bytes(path):
    with open(path, "rb") as fh:
        return fh.read()


def test_single_trial_writes_one_trace_and_one_point(tmp_path):
    spec = small_spec(tmp_path, sweep_values=[5], schemes=["NDT"], trials=1)
    results = run_experiment(spec)
    assert len(results) == 1
    traces = os.listdir(tmp_path / "out" / "traces")
    assert traces == ["0_0_NDT.csv"]
    with open(tmp_path / "out" / "traces" / traces[0]) as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 21  # header + 20 iterations
    agg = json.load(open(tmp_path / "out" / "aggregate.json"))
    assert list(agg["points"]) == ["5"] and list(agg["points"]["5"]) == ["NDT"]
    assert agg["points"]["5"]["NDT"]["count"] == 1


def test_reruns_are_byte_identical(tmp_path):
    a = small_spec(tmp_path / "a")
    b = small_spec(tmp_path / "b")
    run_experiment(a)
    run_experiment(b, threads=4)
    for name in ("trials.csv", "aggregate.json"):
        assert read_bytes(tmp_path / "a" / "out" / name) == read_bytes(tmp_path / "b" / "out" / name)
    for name in os.listdir(tmp_path / "a" / "out" / "traces"):
        assert read_bytes(tmp_path / "a" / "out" / "traces" / name) == \
            read_bytes(tmp_path / "b" / "out" / "traces" / name)


def test_trials_csv_layout_and_aggregate_recomputed(tmp_path):
    spec = small_spec(tmp_path, write_traces=False)
    results = run_experiment(spec)
    assert not os.path.exists(tmp_path / "out" / "traces")
    path = tmp_path / "out" / "trials.csv"
    with open(path) as fh:
        assert next(csv.reader(fh)) == harness.TRIAL_COLUMNS
    back = read_trials_csv(path)
    assert len(back) == len(results) == 2 * 3 * 2
    assert [r.eta_N_bps for r in back] == [r.eta_N_bps for r in results]
    stored = json.load(open(tmp_path / "out" / "aggregate.json"))["points"]
    again = json.loads(json.dumps(aggregate(back, spec.sweep_values, spec.schemes)))
    assert stored == again
    ndt6 = [r.eta_N_bps for r in back if r.sweep_value == "6" and r.scheme == "NDT"]
    assert stored["6"]["NDT"]["mean"] == pytest.approx(np.mean(ndt6), rel=1e-15)


def test_trial_is_independent_of_sweep_position(tmp_path):
    one = run_experiment(small_spec(tmp_path / "a", sweep_values=[6]))
    two = run_experiment(small_spec(tmp_path / "b", sweep_values=[4, 6]))
    assert [r.eta_N_bps for r in one] == [r.eta_N_bps for r in two if r.sweep_value == 6]


def test_confidence_halfwidth():
    assert confidence_halfwidth([1.0]) == 0.0
    x = np.array([1.0, 2.0, 3.0, 4.0])
    # t quantile for 3 dof at 97.5% is 3.182446...
    assert confidence_halfwidth(x) == pytest.approx(3.182446305 * np.std(x, ddof=1) / 2, rel=1e-8)


@pytest.mark.parametrize("bad", [
    {"sweep_variable": "gamma"},
    {"sweep_values": []},
    {"trials": 0},
    {"trials": 2.5},
    {"schemes": ["NDT", "MAGIC"]},
    {"schemes": []},
    {"write_traces": "yes"},
    {"surprise": 1},
    {"sweep_values": [0]},
    {"base": {"n": -1}},
])
def test_invalid_specs_raise(tmp_path, bad):
    with pytest.raises(ConfigError):
        small_spec(tmp_path, **bad)


def test_sweep_overrides_scenario_field():
    spec = ExperimentSpec(base=ScenarioConfig(n=4), sweep_variable="eta_r", sweep_values=[1e6, [1e6, 2e6]])
    assert spec.config_for(1e6).eta_r_model == 1e6
    assert spec.config_for(8.0).n == 4
    assert ExperimentSpec(sweep_variable="n", sweep_values=[8.0]).config_for(8.0).n == 8


def test_convergence_rises_with_threshold(tmp_path):
    spec = ExperimentSpec.from_dict({"base": {"n": 16}, "sweep_variable": "V_hat", "sweep_values": [1e5, 5e6, 1e9],
                                     "schemes": ["NDT"], "trials": 20, "output_dir": str(tmp_path),
                                     "write_traces": False})
    run_experiment(spec)
    points = json.load(open(tmp_path / "aggregate.json"))["points"]
    frac = [points[k]["NDT"]["converged_fraction"] for k in ("100000.0", "5000000.0", "1000000000.0")]
    assert frac[0] <= frac[1] <= frac[2] and frac[2] == 1.0


# command line

def write_json(path, data):
    path.write_text(json.dumps(data))
    return str(path)


def test_cli_run_is_deterministic(tmp_path, capsys):
    spec = write_json(tmp_path / "spec.json", small_spec(tmp_path).to_dict())
    for d in ("a", "b"):
        assert cli.main(["run", spec, "--seed", "3", "--trials", "2", "--output-dir", str(tmp_path / d)]) == 0
    assert read_bytes(tmp_path / "a" / "trials.csv") == read_bytes(tmp_path / "b" / "trials.csv")
    rows = read_trials_csv(tmp_path / "a" / "trials.csv")
    assert len(rows) == 2 * 2 * 2
    assert cli.main(["run", spec, "--seed", "4", "--trials", "2", "--output-dir", str(tmp_path / "c")]) == 0
    assert read_bytes(tmp_path / "a" / "trials.csv") != read_bytes(tmp_path / "c" / "trials.csv")


def test_cli_validate(tmp_path, capsys):
    good = write_json(tmp_path / "spec.json", small_spec(tmp_path).to_dict())
    assert cli.main(["validate", good]) == 0
    assert "ok" in capsys.readouterr().out
    bad = write_json(tmp_path / "bad.json", {"sweep_variable": "nope"})
    assert cli.main(["validate", bad]) == 1
    (tmp_path / "broken.json").write_text("{not json")
    assert cli.main(["validate", str(tmp_path / "broken.json")]) == 1


def test_cli_exit_codes(tmp_path, capsys):
    assert cli.main([]) == 1
    assert cli.main(["bogus"]) == 1
    assert cli.main(["run"]) == 1
    assert cli.main(["run", str(tmp_path / "missing.json")]) == 2
    spec = write_json(tmp_path / "spec.json", small_spec(tmp_path).to_dict())
    assert cli.main(["run", spec, "--threads", "0"]) == 1


def test_cli_fixed_point(capsys):
    assert cli.main(["fixed-point", os.path.join(CONFIGS, "three_relays.json")]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["rho_condition"] and report["fixed_point_valid"] and report["empirical_converged"]
    assert report["gap_inf_norm"] <= 1e-6
    assert len(report["fixed_point_P_d"]) == 6


def test_cli_smallnet(capsys, tmp_path):
    assert cli.main(["smallnet", os.path.join(CONFIGS, "two_user.json")]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["co_mimo"] >= report["aic"] >= report["copt"] >= report["ndt"] * (1 - 1e-6)
    bad = write_json(tmp_path / "bad.json", {"H": [[1, 0], [0, 1]], "g_r": 0, "g_b": 0, "n_d": -1, "n_a": 1})
    assert cli.main(["smallnet", bad]) == 1


def test_shipped_specs_validate():
    for name in ("user_sweep.json", "v_hat_sweep.json"):
        assert cli.main(["validate", os.path.join(CONFIGS, name)]) == 0
    ScenarioConfig.load(os.path.join(CONFIGS, "three_relays.json"))
