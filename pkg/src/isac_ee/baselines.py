"""Benchmark designs, a Dinkelbach cross-check and the detection-probability metric."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special

from .conic import ConicBuilder, SolverOptions, Status, solve
from .errors import InfeasibleScenario, SolverFailure
from .model import CovarianceSolution, ScenarioConfig, circuit_free_power, scenario_channels, target_steering
from .rankone import BeamformerSolution, extract
from .sca import ScaOptions, initialize
from .surrogate import (LN2, add_beampattern_constraints, add_covariances, add_log_terms, add_power_budget,
                        add_sinr_constraints, covariances_from, linearized_interference_terms,
                        normalized_expansion, normalized_gram, rbar_sum, taylor_coefficients, trace_vec)


@dataclass
class BaselineResult:
    name: str
    covs: CovarianceSolution | None
    beams: BeamformerSolution | None
    metrics: dict
    extra: dict = field(default_factory=dict)


def comm_only(scenario: ScenarioConfig, channels=None, opts: ScaOptions | None = None):
    """The proposed pipeline with the beampattern floors dropped."""
    from .pipeline import solve_scenario

    opts = replace(opts or ScaOptions(), sensing=False)
    res = solve_scenario(scenario, opts, channels)
    return BaselineResult("comm-only", res.sca.covs, res.beams, res.metrics,
                          {"iterations": res.sca.log.iterations, "preservation": res.preservation.as_dict()})


def sensing_dominated(scenario: ScenarioConfig, channels=None, include_users: bool = True,
                      solver_opts: SolverOptions | None = None) -> BaselineResult:
    """maximize the worst target gain subject to the SINR floors and power budget."""
    from .pipeline import metrics

    if not scenario.num_targets:
        raise ValueError("sensing-dominated design needs at least one target")
    channels = scenario_channels(scenario) if channels is None else channels
    n = scenario.num_antennas
    k = scenario.num_users if include_users else 0
    bld = ConicBuilder()
    blocks = add_covariances(bld, n, k)
    g = bld.add_block("NONNEG", 1, name="g")
    if k:
        add_sinr_constraints(bld, blocks, normalized_gram(channels, scenario.noise_power),
                             np.asarray(scenario.sinr_thresholds))
    add_power_budget(bld, blocks, n, scenario.p_max)
    add_beampattern_constraints(bld, blocks, target_steering(scenario), None, gain_var=g)
    problem = bld.build([(g, [1.0])], maximize=True)
    sol = solve(problem, solver_opts)
    if sol.status is Status.PRIMAL_INFEASIBLE:
        raise InfeasibleScenario("SINR floors exceed the power budget",
                                 {"kind": "farkas_ray", "y": [float(v) for v in sol.y]})
    if sol.status is not Status.OPTIMAL:
        raise SolverFailure(f"sensing-dominated solve ended with {sol.status.value}", sol.status)
    extra = {"max_min_gain_w": float(sol.objective)}
    if not k:
        from .hermitian import hmat

        radar = hmat(sol.x[problem.names["V0"]], n)
        return BaselineResult("sensing", None, None, {"max_min_gain_w": float(sol.objective)},
                              {**extra, "radar_cov": radar})
    covs = covariances_from(problem, sol.x, k, n)
    beams = extract(covs, channels)
    out = metrics(beams.covariances(), scenario, channels)
    out["max_min_gain_w"] = float(sol.objective)
    return BaselineResult("sensing", covs, beams, out, extra)


def _dinkelbach_problem(scenario, channels, expansion, eta, sensing):
    n, k = scenario.num_antennas, scenario.num_users
    gram = normalized_gram(channels, scenario.noise_power)
    _, _, slope = normalized_expansion(expansion)
    bld = ConicBuilder()
    blocks = add_covariances(bld, n, k)
    logs = add_log_terms(bld, blocks, gram)
    add_sinr_constraints(bld, blocks, gram, np.asarray(scenario.sinr_thresholds))
    add_power_budget(bld, blocks, n, scenario.p_max)
    if sensing and scenario.num_targets:
        add_beampattern_constraints(bld, blocks, target_steering(scenario),
                                    np.asarray(scenario.beampattern_thresholds))
    tr = trace_vec(n)
    objective = [(slice(e.start, e.start + 1), [1.0 / LN2]) for e in logs]
    objective += [(blk, -c) for blk, c in linearized_interference_terms(blocks, gram, slope)]
    objective += [(blk, -eta / scenario.amplifier_efficiency * tr) for blk in blocks]
    return bld.build(objective, maximize=True)


def dinkelbach_cross_check(scenario: ScenarioConfig, channels=None, sensing: bool = True,
                           max_iters: int = 200, rtol: float = 1e-7,
                           solver_opts: SolverOptions | None = None) -> dict:
    """Parametric outer loop on eta = R/P with the interference linearized at each iterate.

    At the current point the parametric objective is zero, so every solve
    returns a point with ``R >= eta * P``: eta never decreases.
    """
    from .model import throughput_and_ee

    channels = scenario_channels(scenario) if channels is None else channels
    start = initialize(scenario, channels, sensing, solver_opts)
    covs = start.covs
    etas = []
    eta = throughput_and_ee(covs, channels, scenario).ee_prime
    for it in range(1, max_iters + 1):
        etas.append(eta)
        expansion = taylor_coefficients(covs, channels, scenario.noise_power)
        problem = _dinkelbach_problem(scenario, channels, expansion, eta, sensing)
        sol = solve(problem, solver_opts)
        if sol.status is not Status.OPTIMAL:
            raise SolverFailure(f"Dinkelbach solve {it} ended with {sol.status.value}", sol.status)
        covs = covariances_from(problem, sol.x, scenario.num_users, scenario.num_antennas)
        value = rbar_sum(covs, expansion, channels) - eta * circuit_free_power(covs, scenario)
        new = throughput_and_ee(covs, channels, scenario).ee_prime
        done = abs(new - eta) <= rtol * max(abs(eta), 1e-300)
        eta = new
        if done:
            break
    etas.append(eta)
    return {"ee_prime": eta, "iterations": it, "trace": etas, "last_parametric_value": float(value),
            "covs": covs}


# -- detection metric --------------------------------------------------------

def _marcum_scalar(a: float, b: float, tol: float = 1e-17, chunk: int = 64, max_terms: int = 200_000) -> float:
    if a < 0 or b < 0 or not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError("Marcum Q arguments must be finite and nonnegative")
    if b == 0.0:
        return 1.0
    if a == 0.0:
        return math.exp(-0.5 * b * b)
    x = a * b
    pref = math.exp(-0.5 * (a - b) ** 2)
    # Q = pref * sum_{k>=0} (a/b)^k ive(k, ab)        if a < b
    # Q = 1 - pref * sum_{k>=1} (b/a)^k ive(k, ab)    otherwise
    lower = a < b
    r = a / b if lower else b / a
    k0 = 0 if lower else 1
    total = 0.0
    while k0 < max_terms:
        ks = np.arange(k0, k0 + chunk)
        terms = np.power(r, ks) * special.ive(ks, x)
        total += float(terms.sum())
        k0 += chunk
        # ive(k, x) is decreasing in k, so the tail is bounded by a geometric series
        tail = terms[-1] * (r / (1.0 - r) if r < 1.0 else float(max_terms))
        if terms[-1] == 0.0 or (ks[-1] > x and pref * tail < tol):
            break
    else:
        raise RuntimeError("Marcum Q series did not converge")
    q = pref * total
    return min(1.0, max(0.0, q if lower else 1.0 - q))


def marcum_q(a, b):
    """First-order Marcum Q function Q1(a, b) by Bessel series summation."""
    out = np.vectorize(_marcum_scalar, otypes=[float])(a, b)
    return out.item() if out.ndim == 0 else out


def detection_probability(gain, target_power, radar_noise, p_fa):
    """P_D = Q1(sqrt(2 SNR), sqrt(-2 ln p_fa)) with SNR = gain * target_power / radar_noise."""
    gain = np.asarray(gain, dtype=float)
    if np.any(gain < 0) or not np.all(np.isfinite(gain)):
        raise ValueError("gain must be finite and nonnegative")
    if not (target_power > 0 and radar_noise > 0):
        raise ValueError("target_power and radar_noise must be positive")
    if not 0.0 < p_fa < 1.0:
        raise ValueError("p_fa must lie in (0, 1)")
    snr = gain * target_power / radar_noise
    return marcum_q(np.sqrt(2.0 * snr), math.sqrt(-2.0 * math.log(p_fa)))
