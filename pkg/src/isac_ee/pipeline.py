"""End-to-end solve: start point, SCA loop, rank-one extraction, verification, metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (CovarianceSolution, ScenarioConfig, beampattern_profile, circuit_free_power,
                    scenario_channels, throughput_and_ee, validate_solution)
from .rankone import BeamformerSolution, PreservationReport, extract, verify_preservation
from .sca import ScaOptions, ScaResult, run

# detection model: target echo power and radar receiver noise, both in watts
TARGET_POWER_W = 10.0 ** 2.5  # 25 dBW
RADAR_NOISE_W = 1.0  # 0 dBW
FALSE_ALARM = 1e-5


@dataclass
class PipelineResult:
    scenario: ScenarioConfig
    channels: np.ndarray
    sca: ScaResult
    beams: BeamformerSolution
    preservation: PreservationReport
    metrics: dict


def metrics(covs: CovarianceSolution, scenario: ScenarioConfig, channels=None) -> dict:
    from .baselines import detection_probability

    channels = scenario_channels(scenario) if channels is None else channels
    th = throughput_and_ee(covs, channels, scenario)
    transmit = covs.transmit_power()
    gains = (beampattern_profile(scenario.target_angles, covs.total_cov(), scenario)
             if scenario.num_targets else np.zeros(0))
    min_gain = float(gains.min()) if gains.size else float("nan")
    pd = (float(detection_probability(min_gain, TARGET_POWER_W, RADAR_NOISE_W, FALSE_ALARM))
          if gains.size else float("nan"))
    return {
        "rate_bps_hz": th.rate,
        "ee": th.ee,
        "ee_prime": th.ee_prime,
        "sinr_linear": [float(g) for g in th.sinrs],
        "power_w": {
            "transmit": transmit,
            "amplifier": transmit / scenario.amplifier_efficiency,
            "circuit": scenario.p_c,
            "dynamic": scenario.dynamic_power_coeff * th.rate,
            "total": circuit_free_power(covs, scenario) + scenario.dynamic_power_coeff * th.rate,
        },
        "target_gains_w": [float(g) for g in gains],
        "min_target_gain_w": min_gain,
        "detection_prob": pd,
    }


def solve_scenario(scenario: ScenarioConfig, opts: ScaOptions | None = None, channels=None) -> PipelineResult:
    channels = scenario_channels(scenario) if channels is None else channels
    res = run(scenario, channels, opts)
    beams = extract(res.covs, channels)
    report = verify_preservation(res.covs, beams, scenario, channels, res.expansion)
    out = metrics(beams.covariances(), scenario, channels)
    out["feasibility"] = validate_solution(beams.covariances(), scenario, channels).as_dict()
    return PipelineResult(scenario, channels, res, beams, report, out)
