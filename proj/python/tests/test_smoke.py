import math

import pytest

import prospector

CHEAP = {
    "belief": {"fields": {"shape": {"nx": 16, "ny": 16}}, "n_particles": 8, "ess_sweeps": 1},
    "planner": {
        "discretization": {"n_states": 10, "n_obs_draws": 20, "n_clusters": 3, "stride": 8, "offset": 4},
        "solver": {"max_iterations": 5},
    },
    "null_calibration": 100,
    "profit_mc": 8,
}


def test_matern_at_zero_is_the_variance():
    assert prospector.matern_cov(0.0) == pytest.approx(0.01)
    assert prospector.matern_cov(3.0) < prospector.matern_cov(1.0)


def test_single_point_kriging_matches_closed_form():
    s2, n2 = 0.01, 1e-6
    mean, var = prospector.krige_predict([(0.0, 0.0)], [7.6], [(0.0, 0.0), (2.0, 0.0)], mean=7.5)
    assert mean[0] == pytest.approx(7.5 + s2 / (s2 + n2 + 1e-10) * 0.1, abs=1e-9)
    assert var[0] == pytest.approx(s2 - s2 * s2 / (s2 + n2 + 1e-10), abs=1e-12)
    assert 0.0 < var[1] < s2
    lm = prospector.log_marginal([(0.0, 0.0)], [7.5], mean=7.5)
    assert lm == pytest.approx(-0.5 * math.log(2 * math.pi * (s2 + n2 + 1e-10)), abs=1e-9)


def test_config_validation_names_fields():
    full = prospector.validate_config()
    assert len(full["hypotheses"]) == 4
    with pytest.raises(prospector.ValidationError, match="hypotheses.prior_prob"):
        prospector.validate_config({"hypotheses": [{"id": 1, "prior_prob": 0.9}]})


def test_session_round_trip():
    s = prospector.Session(CHEAP, id="smoke")
    assert s.belief()["hypothesis_weights"] == pytest.approx([0.25] * 4)
    r = s.add_observation(
        {"location": {"x": 3, "y": 4}, "thickness": 7.4, "grade": 0.08, "graben": True, "geochem": True}
    )
    assert sum(r["belief"]["hypothesis_weights"]) + r["belief"]["null_weight"] == pytest.approx(1.0)
    rec = s.recommendation()
    assert rec == s.recommendation()
    with pytest.raises(prospector.Conflict):
        s.add_observation({"location": {"x": 3, "y": 4}, "thickness": 1, "grade": 0, "graben": False, "geochem": False})
    closed = s.record_decision("abandon")
    assert closed["status"] == "terminal"
    assert s.terminal
    again = prospector.Session.replay(s.events(), id="smoke")
    assert again.summary() == s.summary()
    assert again.belief() == s.belief()


def test_tiny_experiment(tmp_path):
    cfg = {
        "belief": {"n_particles": 8, "ess_sweeps": 1},
        "planner": CHEAP["planner"],
        "max_holes": 2,
        "profit_mc": 8,
    }
    out = prospector.run_experiment("falsify", 1, seed=3, trial_config=cfg, out_dir=tmp_path)
    assert out["kind"] == "falsify"
    assert {s["policy"] for s in out["summary"]} == {"grid", "pomdp"}
    assert (tmp_path / "summary.csv").exists()
