"""Homogeneous self-dual interior-point method for mixed-cone programs.

The standard-form primal ``min c'x, Ax = b, x in K`` and its dual
``max b'y, A'y + s = c, s in K*`` are embedded in the homogeneous model

    A x - b tau = 0,   A'y + s - c tau = 0,   c'x - b'y + kappa = 0

and followed along the central path ``s + mu grad f(x) = 0, tau kappa = mu``
using only primal barrier oracles, which covers the nonsymmetric exponential
cone. Each iteration solves one Newton system for a predictor and a
centering direction, mixes them with a Mehrotra-style centering weight and
backtracks until the iterate is interior and inside the proximity
neighborhood. Infeasible and unbounded problems are detected from the
``tau -> 0`` limit and returned with Farkas rays.
"""

from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from .cones import make_oracle
from .problem import ConicProblem

log = logging.getLogger(__name__)


class Status(str, enum.Enum):
    OPTIMAL = "OPTIMAL"
    PRIMAL_INFEASIBLE = "PRIMAL_INFEASIBLE"
    DUAL_INFEASIBLE = "DUAL_INFEASIBLE"
    MAX_ITERS = "MAX_ITERS"
    NUMERICAL_FAILURE = "NUMERICAL_FAILURE"


@dataclass(frozen=True)
class SolverOptions:
    max_iters: int = 200
    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    step_fraction: float = 0.98
    verbosity: int = 0
    neighborhood: float = 0.9
    regularization: float = 1e-10
    use_seed: bool = False

    def __post_init__(self):
        if self.gap_tol <= 0 or self.feas_tol <= 0:
            raise ValueError("tolerances must be positive")
        if not 0 < self.step_fraction < 1:
            raise ValueError("step_fraction must lie in (0, 1)")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")


@dataclass
class ConicSolution:
    """Solve result.

    For OPTIMAL, ``x`` is primal optimal and ``(y, s)`` solve the dual of the
    minimization form ``min sense*c'x``. For PRIMAL_INFEASIBLE, ``(y, s)`` is
    a ray with ``A'y + s = 0``, ``s in K*`` and ``b'y = 1``. For
    DUAL_INFEASIBLE, ``x`` is a ray with ``Ax = 0``, ``x in K`` and
    ``sense*c'x = -1``. The primal residual is measured after scaling each
    independent row of ``A`` to unit norm.
    """

    status: Status
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    objective: float
    dual_objective: float
    gap: float
    primal_residual: float
    dual_residual: float
    iterations: int
    solve_time: float = 0.0
    trace: list = field(default_factory=list, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


class _Cones:
    def __init__(self, problem: ConicProblem):
        self.cones = problem.cones
        self.oracles = [make_oracle(c) for c in problem.cones]
        self.slices = [c.slice for c in problem.cones]
        self.nu = float(sum(o.nu for o in self.oracles))

    def central_point(self, n):
        x = np.zeros(n)
        for sl, o in zip(self.slices, self.oracles):
            x[sl] = o.central_point()
        return x

    def in_interior(self, x):
        return all(o.in_interior(x[sl]) for sl, o in zip(self.slices, self.oracles))

    def in_dual_interior(self, s):
        return all(o.in_dual_interior(s[sl]) for sl, o in zip(self.slices, self.oracles))

    def set_point(self, x):
        return all(o.set_point(x[sl]) for sl, o in zip(self.slices, self.oracles))

    def grad(self, n):
        g = np.empty(n)
        for sl, o in zip(self.slices, self.oracles):
            g[sl] = o.grad()
        return g

    def _apply(self, v, method):
        out = np.empty_like(v)
        for sl, o in zip(self.slices, self.oracles):
            out[sl] = getattr(o, method)(v[sl])
        return out

    def hess_prod(self, v):
        return self._apply(v, "hess_prod")

    def inv_hess_prod(self, v):
        return self._apply(v, "inv_hess_prod")

    def set_scaling(self, x, s, mu):
        return all(o.set_scaling(x[sl], s[sl], mu) for sl, o in zip(self.slices, self.oracles))

    def scale_prod(self, v):
        return self._apply(v, "scale_prod")

    def inv_scale_prod(self, v):
        return self._apply(v, "inv_scale_prod")

    def factor_prod(self, v):
        return self._apply(v, "factor_prod")

    def factor_adj_prod(self, v):
        return self._apply(v, "factor_adj_prod")

    def corrector(self, dx, ds):
        out = np.empty_like(dx)
        for sl, o in zip(self.slices, self.oracles):
            out[sl] = o.corrector(dx[sl], ds[sl])
        return out

    def proximity(self, psi, mu):
        """Largest dual local norm of ``psi / mu`` over the cones without NT scaling."""
        worst = 0.0
        for sl, o, cone in zip(self.slices, self.oracles, self.cones):
            if cone.kind != "EXP":
                continue
            p = psi[sl]
            val = p @ o.inv_hess_prod(p)
            if not np.isfinite(val) or val < -1e-12 * max(1.0, p @ p):
                return np.inf
            worst = max(worst, np.sqrt(max(val, 0.0)) / mu)
        return worst


def _presolve(problem: ConicProblem, sign: float):
    a, b = problem.A, problem.b
    if a.shape[0] == 0:
        return a, b, np.zeros((0, 0)), None
    norms = np.linalg.norm(a, axis=1)
    if np.any(norms == 0):
        zero = norms == 0
        if np.any(np.abs(b[zero]) > 0):
            y = np.zeros(a.shape[0])
            y[zero] = np.sign(b[zero])
            return None, None, None, y / (b @ y)
        keep = ~zero
    else:
        keep = np.ones(a.shape[0], dtype=bool)
    idx = np.flatnonzero(keep)
    q, r, piv = scipy.linalg.qr(a[idx].T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > 1e-12 * max(diag.max(initial=0.0), 1.0)))
    rows = np.sort(idx[piv[:rank]])
    # inconsistent redundant rows: b outside range(A) gives a Farkas ray with A'y = 0
    coef, *_ = np.linalg.lstsq(a[rows].T, a.T, rcond=None)
    resid_b = b - coef.T @ b[rows]
    if np.linalg.norm(resid_b) > 1e-9 * max(1.0, np.linalg.norm(b)):
        y = b - a @ np.linalg.lstsq(a, b, rcond=None)[0]
        return None, None, None, y / (b @ y)
    scale = 1.0 / np.linalg.norm(a[rows], axis=1)
    sel = np.zeros((a.shape[0], rows.size))
    sel[rows, np.arange(rows.size)] = scale
    return scale[:, None] * a[rows], scale * b[rows], sel, None


# cost scalings tried in turn after a NUMERICAL_FAILURE
_COST_SCALES = (1.0, 10.0, 0.1)


def solve(problem: ConicProblem, opts: SolverOptions | None = None) -> ConicSolution:
    """Solve a :class:`ConicProblem`; never raises on infeasibility or stalls.

    A stall is retried with the cost vector scaled. Stopping tests and the
    reported quantities are always measured in the original units, so a
    retry changes only the rounding path, never the tolerances.
    """
    opts = opts or SolverOptions()
    problem.validate()
    iters, elapsed = 0, 0.0
    for k in _COST_SCALES:
        sol = _solve(problem, opts, k)
        iters += sol.iterations
        elapsed += sol.solve_time
        if sol.status is not Status.NUMERICAL_FAILURE:
            break
    return replace(sol, iterations=iters, solve_time=elapsed)


def _solve(problem, opts, k):
    """One interior-point run on the problem with cost ``c / k``."""
    start = time.perf_counter()
    sign = -1.0 if problem.maximize else 1.0
    c = sign * problem.c / k
    n = problem.n
    m_orig = problem.A.shape[0]

    a, b, lift, farkas = _presolve(problem, sign)
    if farkas is not None:
        return ConicSolution(Status.PRIMAL_INFEASIBLE, np.full(n, np.nan), farkas, np.zeros(n),
                             np.nan, np.nan, np.nan, np.nan, 0.0, 0, time.perf_counter() - start)
    p = a.shape[0]

    cones = _Cones(problem)
    nu = cones.nu
    x = cones.central_point(n)
    if opts.use_seed and problem.seed is not None and cones.in_interior(problem.seed):
        x = problem.seed.copy()
    if not cones.set_point(x):
        raise ValueError("initial point is not interior")
    s = -cones.grad(n)
    y = np.zeros(p)
    tau, kappa = 1.0, 1.0

    bnorm = 1.0 + np.linalg.norm(problem.b)
    cnorm = 1.0 + np.linalg.norm(problem.c)
    trace = []
    status = Status.MAX_ITERS
    iters = 0
    fail_count = 0  # consecutive stalls

    def residuals(x, y, s, tau, kappa):
        rp = a @ x - b * tau
        rd = a.T @ y + s - c * tau
        rg = c @ x - b @ y + kappa
        return rp, rd, rg

    for iters in range(1, opts.max_iters + 1):
        mu = (x @ s + tau * kappa) / (nu + 1.0)
        rp, rd, rg = residuals(x, y, s, tau, kappa)

        pobj = c @ x / tau
        dobj = b @ y / tau
        pres = np.linalg.norm(rp) / tau / bnorm
        dres = k * np.linalg.norm(rd) / tau / cnorm
        comp = x @ s / tau ** 2
        gap_scale = 1.0 / k + abs(pobj)
        rel_gap = max(abs(pobj - dobj), comp) / gap_scale
        trace.append({"iter": iters - 1, "pobj": sign * k * pobj, "dobj": sign * k * dobj, "gap": rel_gap,
                      "pres": pres, "dres": dres, "mu": mu, "tau": tau, "kappa": kappa,
                      "complementarity": x @ s + tau * kappa})
        if opts.verbosity:
            log.info("%3d pobj=% .9e dobj=% .9e gap=%.2e pres=%.2e dres=%.2e mu=%.2e tau=%.2e",
                     iters - 1, sign * k * pobj, sign * k * dobj, rel_gap, pres, dres, mu, tau)

        if pres <= opts.feas_tol and dres <= opts.feas_tol and rel_gap <= opts.gap_tol:
            status = Status.OPTIMAL
            break
        by = b @ y
        if by > 0 and np.linalg.norm(a.T @ y + s) <= opts.feas_tol * by * cnorm:
            status = Status.PRIMAL_INFEASIBLE
            break
        cx = c @ x
        if cx < 0 and np.linalg.norm(a @ x) <= opts.feas_tol * (-cx) * bnorm:
            status = Status.DUAL_INFEASIBLE
            break
        if mu < 1e-30 or not np.isfinite(mu):
            status = Status.NUMERICAL_FAILURE
            break

        try:
            dirs = _directions(a, b, c, x, y, s, tau, kappa, mu, rp, rd, rg, cones, n, opts)
        except (np.linalg.LinAlgError, FloatingPointError, ValueError):
            status = Status.NUMERICAL_FAILURE
            break
        pred, cent, corr = dirs

        alpha_aff = _max_step(x, s, tau, kappa, pred, cones, opts, neighborhood=None)
        gamma = min(1.0, max(0.0, (1.0 - alpha_aff) ** 3))
        gamma = max(gamma, 1e-3)
        comb = tuple((1 - gamma) * dp + gamma * dc for dp, dc in zip(pred, cent))
        alpha = 0.0
        if corr is not None:
            # corrector weighted by the squared affine step it was derived for
            w = (1 - gamma) ** 2
            comb_c = tuple(d + w * dk for d, dk in zip(comb, corr))
            alpha = _max_step(x, s, tau, kappa, comb_c, cones, opts, neighborhood=opts.neighborhood)
            if alpha >= 0.1:
                comb = comb_c
        if alpha < 0.1:
            alpha_c, comb_c = alpha, comb_c if corr is not None else None
            alpha = _max_step(x, s, tau, kappa, comb, cones, opts, neighborhood=opts.neighborhood)
            if alpha_c > alpha:
                alpha, comb = alpha_c, comb_c
        if alpha >= 1e-6:
            fail_count = 0
        else:
            comb = cent
            alpha = _max_step(x, s, tau, kappa, comb, cones, opts, neighborhood=opts.neighborhood)
            if alpha < 1e-8:
                fail_count += 1
                if fail_count > 2:
                    status = Status.NUMERICAL_FAILURE
                    break
                alpha = _max_step(x, s, tau, kappa, comb, cones, opts, neighborhood=None)
                if alpha < 1e-12:
                    status = Status.NUMERICAL_FAILURE
                    break
        dx, dy, ds, dtau, dkappa = comb
        x = x + alpha * dx
        y = y + alpha * dy
        s = s + alpha * ds
        tau = tau + alpha * dtau
        kappa = kappa + alpha * dkappa
        if not cones.set_point(x):
            status = Status.NUMERICAL_FAILURE
            break
        trace[-1].update(alpha=alpha, sigma=gamma)

    elapsed = time.perf_counter() - start
    mu = (x @ s + tau * kappa) / (nu + 1.0)
    rp, rd, rg = residuals(x, y, s, tau, kappa)
    y_full = lift @ y if lift is not None and lift.size else np.zeros(m_orig)

    if status is Status.PRIMAL_INFEASIBLE:
        by = b @ y
        return ConicSolution(status, np.full(n, np.nan), y_full / by, s / by, np.nan, np.nan, np.nan,
                             np.nan, np.linalg.norm(a.T @ y + s) / by, iters, elapsed, trace)
    if status is Status.DUAL_INFEASIBLE:
        cx = -(c @ x)
        return ConicSolution(status, x / cx, np.full(m_orig, np.nan), np.full(n, np.nan), np.nan, np.nan,
                             np.nan, np.linalg.norm(a @ x) / cx, np.nan, iters, elapsed, trace)

    xs, ys, ss = x / tau, k * y_full / tau, k * s / tau
    c = k * c
    pobj = c @ xs
    dobj = k * (b @ (y / tau))
    gap = max(abs(pobj - dobj), xs @ ss) / (1.0 + abs(pobj))
    # same measure as the stopping test: rows of A normalized to unit length
    pres = np.linalg.norm(a @ xs - b) / bnorm
    dres = np.linalg.norm(problem.A.T @ ys + ss - c) / cnorm
    return ConicSolution(status, xs, ys, ss, sign * pobj, sign * dobj, gap, pres, dres, iters, elapsed, trace)


def _directions(a, b, c, x, y, s, tau, kappa, mu, rp, rd, rg, cones, n, opts):
    """Predictor and centering directions from one factorization.

    Solves the linearized system with general right-hand sides

        A dx - b dtau = r1,   A'dy + ds - c dtau = r2,   c'dx - b'dy + dkappa = r3,
        ds + M dx = r4,       kappa dtau + tau dkappa = r5

    where ``M`` is the Nesterov-Todd scaling on orthant and PSD blocks and
    ``mu H(x)`` on the remaining cones. ds, dkappa and dx are eliminated and
    the result is refined against the primal, tau-kappa and F*-scaled
    complementarity rows; the scaled form never multiplies by ``M``.
    """
    g = cones.grad(n)
    p = a.shape[0]
    if not cones.set_scaling(x, s, mu):
        raise ValueError("iterate left the cone interior")
    # With u = F^-1 dx the system reduces to (G G' + E) z = h for z = (dy, dtau),
    # G' = [F*A', -F*c] and E = [[0, -b], [b', kappa/tau]]. G' = QR is never
    # squared; R^-T E R^-1 is skew plus PSD, so I + R^-T E R^-1 is well conditioned.
    at = cones.factor_adj_prod(a.T) if p else np.zeros((n, 0))
    ct = cones.factor_adj_prod(c)
    gt = np.concatenate([at, -ct[:, None]], axis=1)
    if p:
        reg = np.zeros((p, p + 1))
        reg[:, :p] = np.sqrt(opts.regularization) * np.eye(p)
        gt = np.vstack([gt, reg])
    q, r = scipy.linalg.qr(gt, mode="economic")
    q = q[:n]
    rinv = scipy.linalg.solve_triangular(r, np.eye(p + 1))
    e = np.zeros((p + 1, p + 1))
    e[:p, p] = -b
    e[p, :p] = b
    e[p, p] = kappa / tau
    core = np.eye(p + 1) + rinv.T @ e @ rinv
    lu = scipy.linalg.lu_factor(core, check_finite=True)

    def reduced(r1, r2, r3, w4, r5):
        # w4 = F* r4: the complementarity row enters in scaled form
        wf = w4 - cones.factor_adj_prod(r2)
        h = np.concatenate([r1, [r5 / tau - r3]])
        v = scipy.linalg.lu_solve(lu, rinv.T @ h - q.T @ wf)
        z = rinv @ v
        dy, dtau = z[:p], z[p]
        u = q @ v + wf  # u = F^-1 dx
        dx = cones.factor_prod(u)
        ds = r2 - a.T @ dy + c * dtau
        dkappa = r3 - c @ dx + b @ dy
        return (dx, dy, ds, dtau, dkappa), u

    def full(r1, r2, r3, r4, r5):
        # rows 2-3 hold by construction; refine the primal, tau-kappa and scaled complementarity rows
        w4 = cones.factor_adj_prod(r4)
        d, u = reduced(r1, r2, r3, w4, r5)
        zero_n = np.zeros(n)
        for _ in range(3):
            dx, dy, ds, dtau, dkappa = d
            e1 = r1 - (a @ dx - b * dtau)
            e4 = w4 - cones.factor_adj_prod(ds) - u
            e5 = r5 - (kappa * dtau + tau * dkappa)
            corr, cu = reduced(e1, zero_n, 0.0, e4, e5)
            d = tuple(di + ci for di, ci in zip(d, corr))
            u = u + cu
        return d

    pred = full(-rp, -rd, -rg, -s, -tau * kappa)
    cent = full(0 * rp, 0 * rd, 0.0, -s - mu * g, mu - tau * kappa)
    dx, _, ds, dtau, dkappa = pred
    try:
        corr = full(0 * rp, 0 * rd, 0.0, cones.corrector(dx, ds), -dtau * dkappa)
    except (np.linalg.LinAlgError, FloatingPointError, ValueError):
        corr = None
    if corr is not None and not all(np.all(np.isfinite(v)) for v in corr):
        corr = None
    return pred, cent, corr


_STEPS = np.array([1.0, 0.99, 0.97, 0.95, 0.9, 0.85, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.15, 0.1,
                   0.07, 0.05, 0.03, 0.02, 0.01, 5e-3, 2e-3, 1e-3, 5e-4, 2e-4, 1e-4, 3e-5, 1e-5,
                   3e-6, 1e-6, 3e-7, 1e-7, 1e-8, 1e-10, 1e-12])


def _max_step(x, s, tau, kappa, d, cones, opts, neighborhood):
    dx, dy, ds, dtau, dkappa = d
    limit = 1.0
    for v, dv in ((tau, dtau), (kappa, dkappa)):
        if dv < 0:
            limit = min(limit, -v / dv)
    nu1 = cones.nu + 1.0
    for alpha in _STEPS:
        if alpha >= limit:
            continue
        xa = x + alpha * dx
        sa = s + alpha * ds
        ta = tau + alpha * dtau
        ka = kappa + alpha * dkappa
        if not (cones.in_interior(xa) and cones.in_dual_interior(sa)):
            continue
        frac = opts.step_fraction * alpha if alpha < 1.0 else alpha
        if neighborhood is None:
            return frac
        xa = x + frac * dx
        sa = s + frac * ds
        ta = tau + frac * dtau
        ka = kappa + frac * dkappa
        mu_a = (xa @ sa + ta * ka) / nu1
        if mu_a <= 0:
            continue
        if not cones.set_point(xa):
            continue
        prox = cones.proximity(sa + mu_a * cones.grad(xa.size), mu_a)
        prox = max(prox, abs(ta * ka / mu_a - 1.0))
        if prox <= neighborhood:
            cones.set_point(x)
            return frac
    cones.set_point(x)
    return 0.0
