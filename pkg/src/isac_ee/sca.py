"""Successive convex approximation loop for the EE problem.

Each iteration linearizes the interference terms at the current covariances,
fixes the over-estimator weight ``lam = u / t`` and solves the conic
surrogate. The objective ``t`` never decreases because the previous iterate
stays feasible for the next surrogate, where both bounds are tight.
"""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .conic import ConicBuilder, SolverOptions, Status, solve
from .errors import InfeasibleScenario, MonotonicityViolation, SolverFailure
from .model import (CovarianceSolution, ScenarioConfig, circuit_free_power, scenario_channels,
                    target_steering, throughput_and_ee)
from .surrogate import (F, ExpansionPoint, add_beampattern_constraints, add_covariances,
                        add_sinr_constraints, build_subproblem, covariances_from, normalized_gram,
                        rbar_sum, taylor_coefficients, trace_vec)

log = logging.getLogger(__name__)

INFLATION = 1e-4
MAX_SCA_ITERS = 100
MONOTONE_TOL = 1e-6
ACTIVE_TOL = 1e-6


@dataclass
class ScaOptions:
    max_iters: int = MAX_SCA_ITERS
    eps: float | None = None  # defaults to the scenario's convergence_eps
    sensing: bool = True
    solver: SolverOptions = field(default_factory=SolverOptions)


@dataclass(frozen=True)
class IterateRecord:
    iteration: int
    t: float
    u: float
    lam: float
    objective: float
    gap: float
    seconds: float


@dataclass
class IterateLog:
    records: list[IterateRecord] = field(default_factory=list)
    termination: str = ""

    @property
    def iterations(self) -> int:
        """Number of surrogate solves (row 0 is the starting point)."""
        return max(0, len(self.records) - 1)

    def t_trace(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iter", "t", "u", "lambda", "gap", "seconds"])
        for r in self.records:
            w.writerow([r.iteration] + [f"{v:.12g}" for v in (r.t, r.u, r.lam, r.gap, r.seconds)])
        return buf.getvalue()


@dataclass
class StartPoint:
    covs: CovarianceSolution
    t: float
    u: float
    lam: float
    phase1_power: float


@dataclass
class ScaResult:
    covs: CovarianceSolution
    log: IterateLog
    expansion: ExpansionPoint
    activeness: dict
    sensing: bool = True

    @property
    def t(self) -> float:
        return self.covs.t

    @property
    def u(self) -> float:
        return self.covs.u


def phase1_problem(scenario: ScenarioConfig, channels, sensing: bool = True):
    """minimize total transmit power subject to the SINR and beampattern floors."""
    n, k = scenario.num_antennas, scenario.num_users
    bld = ConicBuilder()
    blocks = add_covariances(bld, n, k)
    gram = normalized_gram(channels, scenario.noise_power)
    add_sinr_constraints(bld, blocks, gram, np.asarray(scenario.sinr_thresholds))
    if sensing and scenario.num_targets:
        add_beampattern_constraints(bld, blocks, target_steering(scenario),
                                    np.asarray(scenario.beampattern_thresholds))
    tr = trace_vec(n)
    return bld.build([(blk, tr) for blk in blocks])


def initialize(scenario: ScenarioConfig, channels=None, sensing: bool = True,
               solver_opts: SolverOptions | None = None) -> StartPoint:
    """Strictly feasible start from the minimum-power point."""
    channels = scenario_channels(scenario) if channels is None else channels
    n, k = scenario.num_antennas, scenario.num_users
    problem = phase1_problem(scenario, channels, sensing)
    sol = solve(problem, solver_opts)
    if sol.status is Status.PRIMAL_INFEASIBLE:
        raise InfeasibleScenario(
            "SINR/beampattern constraints admit no covariance",
            {"kind": "farkas_ray", "y": [float(v) for v in sol.y], "dual_residual": sol.dual_residual},
        )
    if sol.status is not Status.OPTIMAL:
        raise SolverFailure(f"phase-I solve ended with {sol.status.value}", sol.status)
    if sol.objective > scenario.p_max * (1.0 + 1e-9):
        raise InfeasibleScenario(
            f"minimum power {sol.objective:.6g} W exceeds P_max {scenario.p_max:.6g} W",
            {"kind": "power_lower_bound", "min_power_w": float(sol.objective),
             "dual_bound_w": float(sol.dual_objective), "p_max_w": float(scenario.p_max)},
        )
    covs = covariances_from(problem, sol.x, k, n)
    power = covs.transmit_power()
    if power <= 1e-9 * scenario.p_max:
        # vacuous constraints: seed a faint matched beam so the rate is positive
        floor = 1e-6 * scenario.p_max / k
        users = np.array([floor * np.outer(h, h.conj()) / np.vdot(h, h).real for h in channels])
        covs = CovarianceSolution(covs.user_covs + users, covs.radar_cov)
        power = covs.transmit_power()
    scale = min(1.0 + INFLATION, scenario.p_max / power)
    covs = CovarianceSolution(covs.user_covs * scale, covs.radar_cov * scale)
    u0 = circuit_free_power(covs, scenario)
    rate = throughput_and_ee(covs, channels, scenario).rate
    t0 = rate / u0 * (1.0 - INFLATION)
    covs = replace(covs, t=t0, u=u0)
    return StartPoint(covs, t0, u0, u0 / t0, float(sol.objective))


def activeness(covs: CovarianceSolution, expansion: ExpansionPoint, scenario: ScenarioConfig, channels) -> dict:
    """Relative gaps of the power link and the F-vs-rate coupling at a surrogate optimum."""
    t, u = covs.t, covs.u
    power = circuit_free_power(covs, scenario)
    lhs = F(t, u, expansion.lam)
    rhs = rbar_sum(covs, expansion, channels)
    ee = throughput_and_ee(covs, channels, scenario).ee_prime
    return {
        "power_link": abs(u - power) / max(1.0, abs(u)),
        "coupling": abs(lhs - rhs) / max(1.0, abs(rhs)),
        "objective_vs_ee": abs(t - ee) / max(abs(ee), 1e-300),
    }


def run(scenario: ScenarioConfig, channels=None, opts: ScaOptions | None = None,
        start: StartPoint | None = None) -> ScaResult:
    opts = opts or ScaOptions()
    channels = scenario_channels(scenario) if channels is None else channels
    eps = scenario.convergence_eps if opts.eps is None else opts.eps
    if start is None:
        start = initialize(scenario, channels, opts.sensing, opts.solver)
    covs, t, u, lam = start.covs, start.t, start.u, start.lam
    trace = IterateLog([IterateRecord(0, t, u, lam, float("nan"), float("nan"), 0.0)])
    clock = time.perf_counter()
    expansion = None
    for it in range(1, opts.max_iters + 1):
        expansion = taylor_coefficients(covs, channels, scenario.noise_power, lam)
        problem = build_subproblem(scenario, channels, expansion, sensing=opts.sensing)
        sol = solve(problem, opts.solver)
        if sol.status is not Status.OPTIMAL:
            trace.termination = sol.status.value
            raise SolverFailure(f"surrogate solve {it} ended with {sol.status.value}", sol.status)
        new = covariances_from(problem, sol.x, scenario.num_users, scenario.num_antennas)
        t_new, u_new = new.t, new.u
        if t_new < t - MONOTONE_TOL * max(1.0, abs(t)):
            trace.termination = MonotonicityViolation.code
            raise MonotonicityViolation(f"t dropped from {t:.12g} to {t_new:.12g} at iteration {it}")
        lam = u_new / t_new
        trace.records.append(IterateRecord(it, t_new, u_new, lam, sol.objective, sol.gap,
                                           time.perf_counter() - clock))
        log.debug("sca %3d t=%.10g u=%.10g lam=%.6g gap=%.2e", it, t_new, u_new, lam, sol.gap)
        done = abs(t_new - t) <= eps * max(1.0, abs(t_new))
        covs, t, u = new, t_new, u_new
        if done:
            trace.termination = "CONVERGED"
            break
    else:
        trace.termination = "MAX_ITERS"
    return ScaResult(covs, trace, expansion, activeness(covs, expansion, scenario, channels), opts.sensing)
