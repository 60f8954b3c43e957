import os
import pathlib

import pytest

import mftg

SCENARIOS = pathlib.Path(os.environ.get("MFTG_SCENARIO_DIR", pathlib.Path(__file__).parents[2] / "scenarios"))


def test_one_step_game_by_hand():
    s = mftg.load_scenario_file(str(SCENARIOS / "one_step.json"))
    assert s.family == "deterministic"
    assert (s.agents, s.horizon, s.p) == (2, 1, 2)
    sol = mftg.solve(s)
    for i in range(2):
        assert sol["mean_gain"][i][0] == pytest.approx(1 / 3, abs=1e-12)
        assert sol["alpha_bar"][i][0] == pytest.approx(83 / 81, abs=1e-12)
    x_bar, u_bar = mftg.mean_path(s)
    assert x_bar[1] == pytest.approx(1 / 3, abs=1e-15)


def test_round_trip_through_json():
    s = mftg.load_scenario_file(str(SCENARIOS / "example_b.json"))
    again = mftg.load_scenario(s.to_json())
    assert again.to_json() == s.to_json()


def test_simulate_cost_within_three_standard_errors():
    s = mftg.load_scenario_file(str(SCENARIOS / "example_b.json"))
    out = mftg.simulate(s, paths=10000, seed=42)
    assert len(out["empirical_mean"]) == s.horizon + 1
    for c in out["costs"]:
        assert abs(c["total"] - c["predicted"]) <= 3 * c["standard_error"]


def test_verify_report():
    s = mftg.load_scenario_file(str(SCENARIOS / "example_c.json"))
    report = mftg.verify(s, paths=500)
    assert report["pass"], report["failing_criterion"]
    assert report["stationarity"] <= 1e-9
    assert report["bellman_max"] <= 1e-10


def test_errors_map_to_exception_types():
    with pytest.raises(mftg.ParseError):
        mftg.load_scenario("{")
    with pytest.raises(mftg.SchemaError):
        mftg.load_scenario('{"family": "deterministic"}')
    text = (SCENARIOS / "example_a.json").read_text().replace('"q_bar": [4, 5]', '"q_bar": [0, 5]')
    with pytest.raises(mftg.ValidationError):
        mftg.load_scenario(text)
    assert issubclass(mftg.ValidationError, mftg.Error)


def test_cli_in_process(tmp_path):
    code, out, err = mftg.run_cli(["solve", str(SCENARIOS / "example_a.json"), "--out", str(tmp_path)])
    assert code == 0, err
    lines = (tmp_path / "coefficients.csv").read_text().splitlines()
    assert lines[0] == "k,agent,alpha_bar,alpha,gamma_bar"
    assert len(lines) == 17
    code, _, _ = mftg.run_cli(["solve", str(tmp_path / "missing.json"), "--out", str(tmp_path)])
    assert code == 2
