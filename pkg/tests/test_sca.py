import numpy as np
import pytest

from conftest import small_scenario
from oracles import matched_filter_ee, single_user_scenario
from isac_ee.errors import InfeasibleScenario, MonotonicityViolation
from isac_ee.model import ScenarioConfig, scenario_channels, validate_solution
from isac_ee.sca import ScaOptions, StartPoint, initialize, run


def test_vacuous_constraints_start_at_idle_power():
    sc = ScenarioConfig.table1(sinr_thresholds=1e-12, beampattern_thresholds=1e-15)
    start = initialize(sc)
    assert start.phase1_power <= 1e-8
    assert start.u == pytest.approx(sc.p_c, rel=1e-5)
    assert start.lam == pytest.approx(start.u / start.t)


def test_paper_normalization_is_infeasible():
    sc = ScenarioConfig.table1(steering_norm_mode="PAPER_1_OVER_N")
    with pytest.raises(InfeasibleScenario) as err:
        initialize(sc)
    cert = err.value.certificate
    assert cert["kind"] == "power_lower_bound"
    # a single beam can deliver at most P_max / N = 0.0625 W < 0.1 W in this mode
    assert cert["dual_bound_w"] > sc.p_max


def test_table1_start_is_feasible(table1, table1_channels):
    start = initialize(table1, table1_channels)
    assert start.covs.transmit_power() <= table1.p_max
    assert validate_solution(start.covs, table1, table1_channels).passed
    assert start.t > 0 and start.lam == pytest.approx(start.u / start.t)


def test_table1_run(table1_result):
    log = table1_result.sca.log
    assert log.termination == "CONVERGED"
    assert log.iterations <= 30
    t = log.t_trace()
    assert np.all(np.diff(t) >= -1e-9)
    for rec in log.records:
        assert rec.lam > 0
        assert rec.lam * rec.t == pytest.approx(rec.u, rel=1e-15)


def test_table1_constraints_hold(table1, table1_result, table1_channels):
    assert validate_solution(table1_result.sca.covs, table1, table1_channels).passed


def test_activeness_at_termination(table1_result):
    act = table1_result.sca.activeness
    assert act["power_link"] <= 1e-6
    assert act["coupling"] <= 1e-6


def test_objective_matches_recomputed_ee(table1_result):
    # t at termination against R/u recomputed from the final covariances
    assert table1_result.sca.activeness["objective_vs_ee"] <= 1e-5


def test_restart_at_converged_point_stops_immediately(table1, table1_channels, table1_result):
    covs = table1_result.sca.covs
    start = StartPoint(covs, covs.t, covs.u, covs.u / covs.t, float("nan"))
    res = run(table1, table1_channels, start=start)
    assert res.log.iterations == 1
    assert abs(res.t - covs.t) <= table1.convergence_eps * max(1.0, covs.t)


def test_overstated_start_trips_monotonicity(table1, table1_channels, table1_result):
    covs = table1_result.sca.covs
    t = 2.0 * covs.t
    with pytest.raises(MonotonicityViolation):
        run(table1, table1_channels, start=StartPoint(covs, t, covs.u, covs.u / t, float("nan")))


def test_single_user_matches_oracle(rng):
    for _ in range(2):
        sc = single_user_scenario(rng)
        h = scenario_channels(sc)
        res = run(sc, h)
        oracle = matched_filter_ee(sc, h[0])
        from isac_ee.model import throughput_and_ee

        assert throughput_and_ee(res.covs, h, sc).ee_prime == pytest.approx(oracle, rel=5e-3)


def test_small_instances_monotone(rng):
    for _ in range(3):
        sc = small_scenario(rng)
        res = run(sc)
        assert np.all(np.diff(res.log.t_trace()) >= -1e-9)
        assert res.log.termination == "CONVERGED"


def test_convergence_csv_layout(table1_result):
    text = table1_result.sca.log.to_csv()
    lines = text.splitlines()
    assert lines[0] == "iter,t,u,lambda,gap,seconds"
    assert len(lines) == table1_result.sca.log.iterations + 2


def test_iteration_cap(table1, table1_channels):
    res = run(table1, table1_channels, ScaOptions(max_iters=1))
    assert res.log.termination == "MAX_ITERS" and res.log.iterations == 1

