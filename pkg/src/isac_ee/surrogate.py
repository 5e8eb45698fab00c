"""Convex surrogate of the reformulated EE problem and its conic encoding.

The bilinear ``t*u`` is over-estimated by ``F(t, u, lam) = lam/2 t^2 + u^2/(2 lam)``
and the interference term of each user's rate is linearized at the previous
covariances, giving the concave lower bound ``rbar``. The resulting program
is encoded in standard conic form: one complex PSD block per covariance,
one exponential cone per user log term, two rotated cones for ``t^2`` and
``u^2`` and scalar slacks for the linear constraints.

Inside the encoding the channels are divided by the noise amplitude, so
every user sees unit noise power.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conic import ConicBuilder, ConicProblem, ConicSolution
from .hermitian import hmat, hvec
from .model import CovarianceSolution, ScenarioConfig, received_powers, target_steering

LOG2E = np.log2(np.e)
LN2 = np.log(2.0)


def f_bilinear(t, u):
    return t * u


def F(t, u, lam):
    if np.any(np.asarray(lam) <= 0):
        raise ValueError("lambda must be positive")
    return 0.5 * lam * t ** 2 + u ** 2 / (2.0 * lam)


@dataclass(frozen=True)
class ExpansionPoint:
    """Linearization data at the previous iterate.

    ``interference_at_point[k]`` is ``sum_{i != k} h_k^H V_i h_k + sigma_k^2``
    in watts, ``taylor_coeffs[k]`` its log2 and ``slopes[k] = log2(e) / 2^a_k``.
    """

    covs: CovarianceSolution
    lam: float
    taylor_coeffs: np.ndarray
    interference_at_point: np.ndarray
    slopes: np.ndarray
    noise_power: np.ndarray

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if np.any(self.interference_at_point < self.noise_power * (1 - 1e-12)) or np.any(self.noise_power <= 0):
            raise ValueError("interference at the expansion point must be at least the noise power")


def interference(covs: CovarianceSolution, channels, noise_power) -> np.ndarray:
    p = received_powers(covs, channels)
    k = covs.num_users
    noise = np.broadcast_to(np.asarray(noise_power, dtype=float), (k,))
    return p.sum(axis=1) - p[np.arange(k), np.arange(k) + 1] + noise


def taylor_coefficients(covs: CovarianceSolution, channels, noise_power, lam: float = 1.0) -> ExpansionPoint:
    noise = np.broadcast_to(np.asarray(noise_power, dtype=float), (covs.num_users,)).copy()
    interf = interference(covs, channels, noise)
    a = np.log2(interf)
    return ExpansionPoint(covs, float(lam), a, interf, LOG2E / 2.0 ** a, noise)


def rbar(covs: CovarianceSolution, expansion: ExpansionPoint, k: int, channels) -> float:
    """Concave lower bound on user ``k``'s rate, tight at the expansion covariances."""
    p = received_powers(covs, channels)
    noise = expansion.noise_power[k]
    total = p[k].sum() + noise
    interf = total - p[k, k + 1]
    return float(np.log2(total) - expansion.taylor_coeffs[k]
                 - expansion.slopes[k] * (interf - expansion.interference_at_point[k]))


def rbar_sum(covs, expansion, channels) -> float:
    return sum(rbar(covs, expansion, k, channels) for k in range(covs.num_users))


# -- encoding helpers shared with the phase-I and benchmark programs ---------

def normalized_gram(channels, noise_power) -> np.ndarray:
    """hvec of g_k g_k^H with g_k = h_k / sigma_k, one row per user."""
    channels = np.atleast_2d(channels)
    noise = np.broadcast_to(np.asarray(noise_power, dtype=float), (channels.shape[0],))
    return np.array([hvec(np.outer(h, h.conj())) / s for h, s in zip(channels, noise)])


def add_covariances(builder: ConicBuilder, n: int, k: int) -> list[slice]:
    """Blocks for V_0 (radar) followed by V_1..V_K."""
    return [builder.add_hermitian_psd(n, name=f"V{i}") for i in range(k + 1)]


def add_sinr_constraints(builder, blocks, gram, thresholds):
    k_users = len(blocks) - 1
    for k in range(k_users):
        terms = []
        for i, blk in enumerate(blocks):
            coef = gram[k] if i == k + 1 else -thresholds[k] * gram[k]
            terms.append((blk, coef))
        builder.add_ge(terms, thresholds[k], name=f"sinr{k}")


def add_beampattern_constraints(builder, blocks, steering, thresholds, gain_var=None):
    for m, a in enumerate(steering):
        aa = hvec(np.outer(a, a.conj()))
        terms = [(blk, aa) for blk in blocks]
        if gain_var is None:
            builder.add_ge(terms, thresholds[m], name=f"beam{m}")
        else:
            builder.add_ge(terms + [(gain_var, [-1.0])], 0.0, name=f"beam{m}")


def trace_vec(n: int) -> np.ndarray:
    return hvec(np.eye(n))


def add_power_budget(builder, blocks, n, p_max):
    tr = trace_vec(n)
    builder.add_le([(blk, tr) for blk in blocks], p_max, name="power_budget")


def add_log_terms(builder, blocks, gram):
    """One exponential cone per user: (z_k ln2, 1, S_k) with S_k the normalized total received power.

    Returns the slice of each cone; ``x[cone.start] / ln2`` is z_k <= log2(S_k).
    """
    cones = []
    for k, g in enumerate(gram):
        e = builder.add_block("EXP", 3, name=f"exp{k}")
        builder.add_eq([(slice(e.start + 1, e.start + 2), [1.0])], 1.0)
        builder.add_eq([(slice(e.start + 2, e.start + 3), [1.0])] + [(blk, -g) for blk in blocks], 1.0)
        cones.append(e)
    return cones


def linearized_interference_terms(blocks, gram, slopes_norm):
    """Terms of sum_k slope_k * sum_{i != k} <V_i, G_k>."""
    terms = []
    for k, g in enumerate(gram):
        for i, blk in enumerate(blocks):
            if i != k + 1:
                terms.append((blk, slopes_norm[k] * g))
    return terms


def normalized_expansion(expansion: ExpansionPoint):
    """(a_k, I0_k, slope_k) with powers measured in units of sigma_k^2."""
    noise = expansion.noise_power
    interf = expansion.interference_at_point / noise
    a = expansion.taylor_coeffs - np.log2(noise)
    slope = expansion.slopes * noise
    return a, interf, slope


def build_subproblem(scenario: ScenarioConfig, channels, expansion: ExpansionPoint,
                     sensing: bool = True) -> ConicProblem:
    """Encode the per-iteration convex surrogate as a standard-form conic program.

    maximize t subject to
      F(t, u, lam) <= sum_k rbar_k,     u >= (1/rho) sum Tr V_i + P_c,
      SINR_k >= tau_k,  sum Tr V_i <= P_max,  gains >= Gamma_m (if ``sensing``),
      t, u >= 0,  V_i PSD.
    """
    n, k_users = scenario.num_antennas, scenario.num_users
    noise = np.asarray(scenario.noise_power)
    gram = normalized_gram(channels, noise)
    tau = np.asarray(scenario.sinr_thresholds)
    lam = expansion.lam
    a_norm, i0_norm, slope_norm = normalized_expansion(expansion)

    bld = ConicBuilder()
    blocks = add_covariances(bld, n, k_users)
    tu = bld.add_block("NONNEG", 2, name="tu")
    t_sl, u_sl = slice(tu.start, tu.start + 1), slice(tu.start + 1, tu.start + 2)
    logs = add_log_terms(bld, blocks, gram)
    rt = bld.add_block("ROTATED_SOC", 3, name="rsoc_t")
    ru = bld.add_block("ROTATED_SOC", 3, name="rsoc_u")
    for r, var in ((rt, t_sl), (ru, u_sl)):
        bld.add_eq([(slice(r.start + 1, r.start + 2), [1.0])], 0.5)
        bld.add_eq([(slice(r.start + 2, r.start + 3), [1.0]), (var, [-1.0])], 0.0)

    tr = trace_vec(n)
    rho = scenario.amplifier_efficiency
    bld.add_le([(blk, tr / rho) for blk in blocks] + [(u_sl, [-1.0])], -scenario.p_c, name="power_link")
    add_sinr_constraints(bld, blocks, gram, tau)
    add_power_budget(bld, blocks, n, scenario.p_max)
    if sensing and scenario.num_targets:
        add_beampattern_constraints(bld, blocks, target_steering(scenario),
                                    np.asarray(scenario.beampattern_thresholds))

    # lam/2 t^2 + u^2/(2 lam) - sum_k z_k + sum_k slope_k I_k(V) <= sum_k (-a_k - slope_k (1 - I0_k))
    coupling = [(slice(rt.start, rt.start + 1), [0.5 * lam]), (slice(ru.start, ru.start + 1), [0.5 / lam])]
    coupling += [(slice(e.start, e.start + 1), [-1.0 / LN2]) for e in logs]
    coupling += linearized_interference_terms(blocks, gram, slope_norm)
    rhs = float(np.sum(-a_norm - slope_norm * (1.0 - i0_norm)))
    bld.add_le(coupling, rhs, name="coupling")

    problem = bld.build([(t_sl, [1.0])], maximize=True)
    problem.names.update(t=t_sl.start, u=u_sl.start)
    return problem


def covariances_from(problem: ConicProblem, x, k_users: int, n: int) -> CovarianceSolution:
    mats = [hmat(x[problem.names[f"V{i}"]], n) for i in range(k_users + 1)]
    t = float(x[problem.names["t"]]) if "t" in problem.names else float("nan")
    u = float(x[problem.names["u"]]) if "u" in problem.names else float("nan")
    return CovarianceSolution(np.array(mats[1:]), mats[0], t, u)


def subproblem_solution(problem: ConicProblem, sol: ConicSolution, scenario: ScenarioConfig) -> CovarianceSolution:
    return covariances_from(problem, sol.x, scenario.num_users, scenario.num_antennas)


def encode_point(problem: ConicProblem, covs: CovarianceSolution, t: float, u: float,
                 scenario: ScenarioConfig, channels, expansion: ExpansionPoint) -> np.ndarray:
    """Map a natural-form point of the subproblem to the encoded variable vector.

    Log epigraph variables are set to their largest feasible values and every
    slack to its residual, so conic membership mirrors natural-form feasibility.
    """
    x = np.zeros(problem.n)
    for i, v in enumerate(covs.all_covs()):
        x[problem.names[f"V{i}"]] = hvec(v)
    x[problem.names["t"]] = t
    x[problem.names["u"]] = u
    noise = np.asarray(scenario.noise_power)
    gram = normalized_gram(channels, noise)
    for k in range(scenario.num_users):
        e = problem.names[f"exp{k}"]
        s_k = 1.0 + sum(gram[k] @ hvec(v) for v in covs.all_covs())
        x[e] = [np.log(s_k), 1.0, s_k]
    rt, ru = problem.names["rsoc_t"], problem.names["rsoc_u"]
    x[rt] = [t ** 2, 0.5, t]
    x[ru] = [u ** 2, 0.5, u]
    slacks = problem.names["slacks"]
    x[slacks] = 0.0
    resid = problem.b - problem.A @ x
    # each inequality row owns exactly one slack column
    for row in range(problem.A.shape[0]):
        cols = np.flatnonzero(problem.A[row, slacks])
        if cols.size:
            x[slacks.start + cols[0]] = resid[row] / problem.A[row, slacks.start + cols[0]]
    return x
