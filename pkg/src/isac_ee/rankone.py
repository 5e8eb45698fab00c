"""Rank-one beamformers from relaxed covariances without performance loss.

For each user ``v_k = V_k h_k / sqrt(h_k^H V_k h_k)`` and the radar
covariance absorbs what the users give up:
``V0' = sum_k V_k + V_0 - sum_k v_k v_k^H``. ``V_k - v_k v_k^H`` is PSD by
Cauchy-Schwarz, the total covariance is unchanged, and so is every user's
useful power, hence SINR, power, beampattern and the rate bounds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateUsefulPower, PSDViolation
from .hermitian import fix_phase, psd_residual
from .model import (CovarianceSolution, ScenarioConfig, beampattern_profile, circuit_free_power,
                    hermitian, sinrs, throughput_and_ee)
from .surrogate import ExpansionPoint, rbar

USEFUL_POWER_RTOL = 1e-12
PSD_RTOL = 1e-8


@dataclass(frozen=True)
class BeamformerSolution:
    beamformers: np.ndarray  # (K, N)
    radar_cov: np.ndarray  # (N, N)
    source: CovarianceSolution | None = field(default=None, repr=False, compare=False)

    def covariances(self) -> CovarianceSolution:
        sol = CovarianceSolution.from_beamformers(self.beamformers, self.radar_cov)
        if self.source is not None:
            sol = CovarianceSolution(sol.user_covs, sol.radar_cov, self.source.t, self.source.u)
        return sol

    def to_dict(self, metrics: dict | None = None) -> dict:
        def pairs(v):
            return [[float(f"{z.real:.12g}"), float(f"{z.imag:.12g}")] for z in v]

        doc = {
            "schema_version": 1,
            "beamformers": [pairs(v) for v in self.beamformers],
            "radar_cov": [pairs(row) for row in self.radar_cov],
        }
        if metrics is not None:
            doc["metrics"] = metrics
        return doc

    def dumps(self, metrics: dict | None = None) -> str:
        return json.dumps(self.to_dict(metrics), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "BeamformerSolution":
        def cplx(a):
            arr = np.asarray(a, dtype=float)
            return arr[..., 0] + 1j * arr[..., 1]

        v = cplx(doc["beamformers"])
        r = cplx(doc["radar_cov"])
        if v.ndim != 2 or r.shape != (v.shape[1], v.shape[1]):
            raise ValueError("inconsistent beamformer / radar covariance shapes")
        return cls(v, r)


def extract(covs: CovarianceSolution, channels) -> BeamformerSolution:
    channels = np.atleast_2d(channels)
    total = covs.total_cov()
    scale = max(1.0, float(np.real(np.trace(total))))
    vs = []
    for k, (v, h) in enumerate(zip(covs.user_covs, channels)):
        vh = v @ h
        useful = float(np.real(np.vdot(h, vh)))
        if useful <= USEFUL_POWER_RTOL * scale * np.vdot(h, h).real:
            raise DegenerateUsefulPower(f"user {k}: h^H V h = {useful:.3e}")
        vs.append(fix_phase(vh / np.sqrt(useful)))
    vs = np.array(vs)
    radar = hermitian(total - np.einsum("ki,kj->ij", vs, vs.conj()))
    resid = psd_residual(radar)
    if resid > PSD_RTOL * max(1.0, float(np.real(np.trace(radar)))):
        raise PSDViolation(f"new radar covariance has eigenvalue {-resid:.3e}")
    return BeamformerSolution(vs, radar, covs)


@dataclass
class Check:
    name: str
    error: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(self.error <= self.tol)


@dataclass
class PreservationReport:
    checks: list[Check]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[str]:
        return [f"{c.name}: error {c.error:.3e} > tol {c.tol:.1e}" for c in self.checks if not c.passed]

    def as_dict(self) -> dict:
        return {"passed": self.passed,
                "checks": [{"name": c.name, "error": float(c.error), "tol": c.tol, "passed": c.passed}
                           for c in self.checks]}


def _rel(a, b):
    a, b = np.atleast_1d(a), np.atleast_1d(b)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), np.finfo(float).tiny), initial=0.0))


def verify_preservation(before: CovarianceSolution, after: BeamformerSolution, scenario: ScenarioConfig,
                        channels, expansion: ExpansionPoint | None = None) -> PreservationReport:
    """Constraint-by-constraint comparison of the relaxed and the extracted solution."""
    post = after.covariances()
    tb, ta = before.total_cov(), post.total_cov()
    checks = [
        Check("total_covariance", float(np.linalg.norm(ta - tb) / max(np.linalg.norm(tb), 1e-300)), 1e-10),
        Check("sinr", _rel(sinrs(post, channels, scenario.noise_power),
                           sinrs(before, channels, scenario.noise_power)), 1e-8),
        Check("power", _rel(circuit_free_power(post, scenario), circuit_free_power(before, scenario)), 1e-10),
    ]
    if scenario.num_targets:
        checks.append(Check("beampattern", _rel(beampattern_profile(scenario.target_angles, ta, scenario),
                                                beampattern_profile(scenario.target_angles, tb, scenario)), 1e-10))
    if expansion is not None:
        k = before.num_users
        rb = [rbar(before, expansion, i, channels) for i in range(k)]
        ra = [rbar(post, expansion, i, channels) for i in range(k)]
        checks.append(Check("rbar", float(np.max(np.abs(np.subtract(ra, rb)), initial=0.0)), 1e-8))
    checks.append(Check("ee_prime", _rel(throughput_and_ee(post, channels, scenario).ee_prime,
                                         throughput_and_ee(before, channels, scenario).ee_prime), 1e-8))
    return PreservationReport(checks)
