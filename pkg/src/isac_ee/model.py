"""System model: units, ULA steering, LoS channels, SINR, beampattern, power, EE."""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .hermitian import eig_hermitian

SCHEMA_VERSION = 1


def dbm_to_watts(x):
    return 10.0 ** ((np.asarray(x, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float)) + 30.0


def db_to_linear(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


class SteeringNorm(str, enum.Enum):
    UNIT_NORM = "UNIT_NORM"
    PAPER_1_OVER_N = "PAPER_1_OVER_N"


class ConfigError(ValueError):
    pass


def _as_tuple(value, length: int, name: str) -> tuple:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1 and length != 1:
        arr = np.full(length, arr.item())
    if arr.size != length:
        raise ConfigError(f"{name}: expected {length} entries, got {arr.size}")
    return tuple(float(a) for a in arr)


@dataclass(frozen=True)
class ScenarioConfig:
    """Physical and system parameters, stored in linear units (watts, ratios).

    Per-user and per-target arrays accept a scalar, which is broadcast. Use
    :meth:`from_dict` to build one from dB/dBm-valued configuration.
    """

    num_antennas: int
    num_users: int
    num_targets: int
    user_aods: Sequence[float]
    target_angles: Sequence[float]
    pathloss_db: Sequence[float]
    noise_power: Sequence[float]
    sinr_thresholds: Sequence[float]
    beampattern_thresholds: Sequence[float]
    p_max: float
    p_c: float
    amplifier_efficiency: float
    dynamic_power_coeff: float
    spacing_ratio: float = 0.5
    convergence_eps: float = 1e-3
    steering_norm_mode: SteeringNorm = SteeringNorm.UNIT_NORM

    def __post_init__(self):
        n, k, m = self.num_antennas, self.num_users, self.num_targets
        if int(n) != n or n < 1:
            raise ConfigError("num_antennas must be a positive integer")
        if int(k) != k or k < 1:
            raise ConfigError("num_users must be a positive integer")
        if int(m) != m or m < 0:
            raise ConfigError("num_targets must be a nonnegative integer")
        set_ = lambda name, val: object.__setattr__(self, name, val)  # noqa: E731
        set_("num_antennas", int(n))
        set_("num_users", int(k))
        set_("num_targets", int(m))
        set_("user_aods", _as_tuple(self.user_aods, k, "user_aods"))
        set_("target_angles", _as_tuple(self.target_angles, m, "target_angles") if m else ())
        set_("pathloss_db", _as_tuple(self.pathloss_db, k, "pathloss_db"))
        set_("noise_power", _as_tuple(self.noise_power, k, "noise_power"))
        set_("sinr_thresholds", _as_tuple(self.sinr_thresholds, k, "sinr_thresholds"))
        set_(
            "beampattern_thresholds",
            _as_tuple(self.beampattern_thresholds, m, "beampattern_thresholds") if m else (),
        )
        try:
            set_("steering_norm_mode", SteeringNorm(self.steering_norm_mode))
        except ValueError as exc:
            raise ConfigError(f"unknown steering_norm_mode {self.steering_norm_mode!r}") from exc

        for ang in self.user_aods + self.target_angles:
            if not -90.0 < ang < 90.0:
                raise ConfigError(f"angle {ang} deg outside (-90, 90)")
        if not 0.0 < self.amplifier_efficiency <= 1.0:
            raise ConfigError("amplifier_efficiency must lie in (0, 1]")
        if not self.dynamic_power_coeff >= 0.0:
            raise ConfigError("dynamic_power_coeff must be nonnegative")
        if not self.convergence_eps > 0.0:
            raise ConfigError("convergence_eps must be positive")
        if not self.spacing_ratio > 0.0:
            raise ConfigError("spacing_ratio must be positive")
        positive = {
            "noise_power": self.noise_power,
            "sinr_thresholds": self.sinr_thresholds,
            "beampattern_thresholds": self.beampattern_thresholds,
            "p_max": (self.p_max,),
            "p_c": (self.p_c,),
        }
        for name, vals in positive.items():
            if not all(np.isfinite(v) and v > 0.0 for v in vals):
                raise ConfigError(f"{name} must be finite and strictly positive")
        if not all(np.isfinite(self.pathloss_db)):
            raise ConfigError("pathloss_db must be finite")

    @classmethod
    def table1(cls, **overrides) -> "ScenarioConfig":
        """The reference scenario: N=16, K=2, M=4 with the published parameters."""
        base = dict(
            num_antennas=16,
            num_users=2,
            num_targets=4,
            user_aods=(-30.0, 30.0),
            target_angles=(-54.0, -18.0, 18.0, 54.0),
            pathloss_db=-99.0,
            noise_power=float(dbm_to_watts(-80.0)),
            sinr_thresholds=float(db_to_linear(5.0)),
            beampattern_thresholds=float(dbm_to_watts(20.0)),
            p_max=float(dbm_to_watts(30.0)),
            p_c=float(dbm_to_watts(25.0)),
            amplifier_efficiency=0.35,
            dynamic_power_coeff=float(dbm_to_watts(-26.0)),
            spacing_ratio=0.5,
            convergence_eps=1e-3,
        )
        base.update(overrides)
        return cls(**base)

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioConfig":
        """Build from the JSON document layout (angles in deg, powers in dBm, SINR in dB)."""
        doc = dict(doc)
        version = doc.pop("schema_version", None)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
        required = {
            "num_antennas", "num_users", "num_targets", "user_aods_deg", "pathloss_db",
            "noise_power_dbm", "sinr_thresholds_db", "p_max_dbm", "p_c_dbm",
            "amplifier_efficiency", "dynamic_power_coeff_dbm",
        }
        missing = sorted(required - doc.keys())
        if missing:
            raise ConfigError(f"missing keys: {', '.join(missing)}")
        known = required | {
            "target_angles_deg", "beampattern_thresholds_dbm", "spacing_ratio",
            "convergence_eps", "steering_norm_mode",
        }
        unknown = sorted(doc.keys() - known)
        if unknown:
            raise ConfigError(f"unknown keys: {', '.join(unknown)}")
        m = doc["num_targets"]
        try:
            return cls(
                num_antennas=doc["num_antennas"],
                num_users=doc["num_users"],
                num_targets=m,
                user_aods=doc["user_aods_deg"],
                target_angles=doc.get("target_angles_deg", ()),
                pathloss_db=doc["pathloss_db"],
                noise_power=dbm_to_watts(doc["noise_power_dbm"]),
                sinr_thresholds=db_to_linear(doc["sinr_thresholds_db"]),
                beampattern_thresholds=dbm_to_watts(doc.get("beampattern_thresholds_dbm", ())) if m else (),
                p_max=float(dbm_to_watts(doc["p_max_dbm"])),
                p_c=float(dbm_to_watts(doc["p_c_dbm"])),
                amplifier_efficiency=float(doc["amplifier_efficiency"]),
                dynamic_power_coeff=(0.0 if doc["dynamic_power_coeff_dbm"] is None
                                     else float(dbm_to_watts(doc["dynamic_power_coeff_dbm"]))),
                spacing_ratio=float(doc.get("spacing_ratio", 0.5)),
                convergence_eps=float(doc.get("convergence_eps", 1e-3)),
                steering_norm_mode=doc.get("steering_norm_mode", "UNIT_NORM"),
            )
        except (TypeError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        def r(x):
            return [float(f"{v:.12g}") for v in np.atleast_1d(x)]

        return {
            "schema_version": SCHEMA_VERSION,
            "num_antennas": self.num_antennas,
            "num_users": self.num_users,
            "num_targets": self.num_targets,
            "spacing_ratio": self.spacing_ratio,
            "user_aods_deg": list(self.user_aods),
            "target_angles_deg": list(self.target_angles),
            "pathloss_db": list(self.pathloss_db),
            "noise_power_dbm": r(watts_to_dbm(self.noise_power)),
            "sinr_thresholds_db": r(linear_to_db(self.sinr_thresholds)),
            "beampattern_thresholds_dbm": r(watts_to_dbm(self.beampattern_thresholds)) if self.num_targets else [],
            "p_max_dbm": r(watts_to_dbm(self.p_max))[0],
            "p_c_dbm": r(watts_to_dbm(self.p_c))[0],
            "amplifier_efficiency": self.amplifier_efficiency,
            "dynamic_power_coeff_dbm": r(watts_to_dbm(self.dynamic_power_coeff))[0] if self.dynamic_power_coeff > 0 else None,
            "convergence_eps": self.convergence_eps,
            "steering_norm_mode": self.steering_norm_mode.value,
        }

    def without_targets(self) -> "ScenarioConfig":
        import dataclasses

        return dataclasses.replace(self, num_targets=0, target_angles=(), beampattern_thresholds=())


def steering_vector(theta_deg, n: int, d_over_lambda: float = 0.5,
                    mode: SteeringNorm | str = SteeringNorm.UNIT_NORM) -> np.ndarray:
    """ULA steering vector; amplitude 1/sqrt(N) (UNIT_NORM) or 1/N (PAPER_1_OVER_N)."""
    if not -90.0 < float(theta_deg) < 90.0:
        raise ValueError(f"angle {theta_deg} deg outside (-90, 90)")
    mode = SteeringNorm(mode)
    amp = 1.0 / np.sqrt(n) if mode is SteeringNorm.UNIT_NORM else 1.0 / n
    return amp * _phase_profile(theta_deg, n, d_over_lambda)


def _phase_profile(theta_deg, n, d_over_lambda):
    idx = np.arange(n)
    return np.exp(2j * np.pi * d_over_lambda * idx * np.sin(np.deg2rad(theta_deg)))


def los_channel(phi_deg, pathloss_db: float, n: int, d_over_lambda: float = 0.5) -> np.ndarray:
    """LoS channel with unit-modulus entries scaled by the path-loss amplitude."""
    if not -90.0 < float(phi_deg) < 90.0:
        raise ValueError(f"angle {phi_deg} deg outside (-90, 90)")
    return np.sqrt(10.0 ** (pathloss_db / 10.0)) * _phase_profile(phi_deg, n, d_over_lambda)


def scenario_channels(scenario: ScenarioConfig) -> np.ndarray:
    """K x N array whose row k is h_k."""
    return np.array([
        los_channel(phi, pl, scenario.num_antennas, scenario.spacing_ratio)
        for phi, pl in zip(scenario.user_aods, scenario.pathloss_db)
    ])


def target_steering(scenario: ScenarioConfig, angles=None) -> np.ndarray:
    angles = scenario.target_angles if angles is None else angles
    return np.array([
        steering_vector(a, scenario.num_antennas, scenario.spacing_ratio, scenario.steering_norm_mode)
        for a in angles
    ]).reshape(len(angles), scenario.num_antennas)


@dataclass(frozen=True)
class CovarianceSolution:
    """Lifted transmit covariances: ``user_covs[k]`` is V_{k+1}, ``radar_cov`` is V_0."""

    user_covs: np.ndarray  # (K, N, N)
    radar_cov: np.ndarray  # (N, N)
    t: float = float("nan")
    u: float = float("nan")

    @property
    def num_users(self) -> int:
        return len(self.user_covs)

    def all_covs(self) -> np.ndarray:
        """(K+1, N, N) with V_0 first."""
        return np.concatenate([self.radar_cov[None], self.user_covs], axis=0)

    def total_cov(self) -> np.ndarray:
        return self.user_covs.sum(axis=0) + self.radar_cov

    def transmit_power(self) -> float:
        return float(np.real(np.trace(self.total_cov())))

    @classmethod
    def from_beamformers(cls, beamformers, radar_cov) -> "CovarianceSolution":
        v = np.asarray(beamformers, dtype=complex)
        return cls(np.einsum("ki,kj->kij", v, v.conj()), np.asarray(radar_cov, dtype=complex))


def _quad(h, covs):
    """h^H V h for each V in a stack."""
    return np.real(np.einsum("i,kij,j->k", h.conj(), covs, h))


def received_powers(covs: CovarianceSolution, channels) -> np.ndarray:
    """Matrix P[k, i] = h_k^H V_i h_k with i = 0 the radar covariance."""
    channels = np.atleast_2d(channels)
    stack = covs.all_covs()
    if channels.shape[0] != covs.num_users or channels.shape[1] != stack.shape[-1]:
        raise ValueError("channel / covariance dimension mismatch")
    return np.array([_quad(h, stack) for h in channels])


def sinr(k: int, covs: CovarianceSolution, channels, noise_power) -> float:
    """SINR of user ``k`` (0-based) with the radar covariance counted as interference."""
    p = received_powers(covs, channels)
    noise = np.broadcast_to(np.asarray(noise_power, dtype=float), (covs.num_users,))
    useful = p[k, k + 1]
    return float(useful / (p[k].sum() - useful + noise[k]))


def sinrs(covs: CovarianceSolution, channels, noise_power) -> np.ndarray:
    return np.array([sinr(k, covs, channels, noise_power) for k in range(covs.num_users)])


def sinr_vectors(k: int, beamformers, radar_cov, channels, noise_power) -> float:
    """SINR from beamforming vectors directly, without lifting."""
    h = np.atleast_2d(channels)[k]
    v = np.asarray(beamformers)
    gains = np.abs(v.conj() @ h) ** 2
    radar = float(np.real(h.conj() @ radar_cov @ h))
    noise = np.broadcast_to(np.asarray(noise_power, dtype=float), (len(v),))[k]
    return float(gains[k] / (gains.sum() - gains[k] + radar + noise))


def beampattern_gain(theta_deg, total_cov, scenario: ScenarioConfig, psd_tol: float = 1e-8) -> float:
    """a^H(theta) R a(theta) for the total transmit covariance R."""
    total_cov = np.asarray(total_cov)
    n = scenario.num_antennas
    if total_cov.shape != (n, n):
        raise ValueError(f"covariance shape {total_cov.shape} does not match N={n}")
    w = eig_hermitian(total_cov).eigenvalues if n <= 64 else np.linalg.eigvalsh(total_cov)
    if w[-1] < -psd_tol * max(1.0, float(np.real(np.trace(total_cov)))):
        warnings.warn(f"covariance is not PSD (lambda_min={w[-1]:.3e})", RuntimeWarning, stacklevel=2)
    a = steering_vector(theta_deg, n, scenario.spacing_ratio, scenario.steering_norm_mode)
    return float(np.real(a.conj() @ total_cov @ a))


def beampattern_profile(angles_deg, total_cov, scenario: ScenarioConfig) -> np.ndarray:
    a = target_steering(scenario, angles_deg)
    return np.real(np.einsum("mi,ij,mj->m", a.conj(), total_cov, a))


def beampattern_grid(angles_deg, total_cov, scenario: ScenarioConfig) -> np.ndarray:
    """Gains on a closed angular grid; endfire (+-90 deg) is allowed here."""
    angles = np.asarray(angles_deg, dtype=float)
    if np.any(np.abs(angles) > 90.0):
        raise ValueError("grid angles must lie in [-90, 90]")
    n = scenario.num_antennas
    amp = 1.0 / np.sqrt(n) if scenario.steering_norm_mode is SteeringNorm.UNIT_NORM else 1.0 / n
    a = amp * np.array([_phase_profile(t, n, scenario.spacing_ratio) for t in angles]).reshape(len(angles), n)
    return np.real(np.einsum("mi,ij,mj->m", a.conj(), total_cov, a))


def circuit_free_power(covs: CovarianceSolution, scenario: ScenarioConfig) -> float:
    """(1/rho) * transmit power + P_c, the denominator of the xi-free EE."""
    return covs.transmit_power() / scenario.amplifier_efficiency + scenario.p_c


def total_power(covs: CovarianceSolution, rate: float, scenario: ScenarioConfig) -> float:
    if rate < 0:
        raise ValueError("rate must be nonnegative")
    return circuit_free_power(covs, scenario) + scenario.dynamic_power_coeff * rate


@dataclass(frozen=True)
class Throughput:
    rate: float
    ee: float
    ee_prime: float
    sinrs: np.ndarray = field(repr=False)


def throughput_and_ee(covs: CovarianceSolution, channels, scenario: ScenarioConfig) -> Throughput:
    g = sinrs(covs, channels, scenario.noise_power)
    rate = float(np.sum(np.log2(1.0 + g)))
    denom = circuit_free_power(covs, scenario)
    ee_prime = rate / denom
    ee = rate / (denom + scenario.dynamic_power_coeff * rate)
    return Throughput(rate, ee, ee_prime, g)


@dataclass
class FeasibilityReport:
    sinr_slack: np.ndarray
    power_slack: float
    beampattern_slack: np.ndarray
    psd_min_eigs: np.ndarray
    rank_one_residuals: np.ndarray
    scales: dict
    tol_rel: float

    @property
    def passed(self) -> bool:
        return not self.violations()

    def violations(self) -> list[str]:
        tol = self.tol_rel
        out = []
        for k, s in enumerate(self.sinr_slack):
            if s < -tol * self.scales["sinr"][k]:
                out.append(f"sinr[{k}] slack {s:.6g}")
        if self.power_slack < -tol * self.scales["power"]:
            out.append(f"power slack {self.power_slack:.6g}")
        for m, s in enumerate(self.beampattern_slack):
            if s < -tol * self.scales["beampattern"][m]:
                out.append(f"beampattern[{m}] slack {s:.6g}")
        for i, e in enumerate(self.psd_min_eigs):
            if e < -tol * self.scales["psd"][i]:
                out.append(f"psd[{i}] min eig {e:.6g}")
        return out

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "sinr_slack": [float(x) for x in self.sinr_slack],
            "power_slack": float(self.power_slack),
            "beampattern_slack": [float(x) for x in self.beampattern_slack],
            "psd_min_eigs": [float(x) for x in self.psd_min_eigs],
            "rank_one_residuals": [float(x) for x in self.rank_one_residuals],
            "violations": self.violations(),
        }


def validate_solution(covs: CovarianceSolution, scenario: ScenarioConfig, channels=None,
                      tol_rel: float = 1e-6) -> FeasibilityReport:
    """Per-constraint slacks of the original problem; negative means violated.

    Rank-one residuals (sigma2/sigma1 of each user covariance) are reported
    but do not affect ``passed``.
    """
    channels = scenario_channels(scenario) if channels is None else channels
    tau = np.asarray(scenario.sinr_thresholds)
    g = sinrs(covs, channels, scenario.noise_power)
    used = covs.transmit_power()
    total = covs.total_cov()
    gains = beampattern_profile(scenario.target_angles, total, scenario) if scenario.num_targets else np.zeros(0)
    gamma = np.asarray(scenario.beampattern_thresholds)
    eigs = [eig_hermitian(hermitian(v)).eigenvalues for v in covs.all_covs()]
    mins = np.array([e[-1] for e in eigs])
    ranks = np.array([(max(abs(e[1]), abs(e[-1])) / e[0]) if e[0] > 0 and len(e) > 1 else 0.0 for e in eigs[1:]])
    scales = {
        "sinr": np.maximum(1.0, tau),
        "power": scenario.p_max,
        "beampattern": gamma,
        "psd": np.array([max(1.0, float(np.real(np.trace(v)))) for v in covs.all_covs()]),
    }
    return FeasibilityReport(g - tau, scenario.p_max - used, gains - gamma, mins, ranks, scales, tol_rel)


def hermitian(v):
    v = np.asarray(v)
    return 0.5 * (v + v.conj().T)
