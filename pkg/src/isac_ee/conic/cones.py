"""Barrier oracles and membership tests for the supported cones.

Every cone carries a logarithmically homogeneous self-concordant barrier
``f`` with parameter ``nu``. The solver only needs ``grad``, products with
the Hessian and its inverse, and interior tests for the cone and its dual.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.linalg
from scipy import optimize

from ..hermitian import hmat, hvec, smat, svec
from .problem import Cone


class Oracle:
    nu: float

    def __init__(self, cone: Cone):
        self.cone = cone

    def central_point(self) -> np.ndarray:
        raise NotImplementedError

    def in_interior(self, x) -> bool:
        raise NotImplementedError

    def in_dual_interior(self, s) -> bool:
        raise NotImplementedError

    def set_point(self, x):
        """Cache x-dependent factorizations; returns False if x is not interior."""
        raise NotImplementedError

    def grad(self) -> np.ndarray:
        raise NotImplementedError

    def hess_prod(self, v) -> np.ndarray:
        raise NotImplementedError

    def inv_hess_prod(self, v) -> np.ndarray:
        raise NotImplementedError

    # Newton-system scaling ``ds + M dx``. The default is the primal barrier
    # Hessian ``mu H(x)``; symmetric cones override it with Nesterov-Todd scaling.
    def set_scaling(self, x, s, mu) -> bool:
        self._mu = mu
        return True

    def scale_prod(self, v):
        return self._mu * self.hess_prod(v)

    def inv_scale_prod(self, v):
        return self.inv_hess_prod(v) / self._mu

    def factor_prod(self, v):
        """``F v`` for a factor with ``F F* = M^-1``."""
        raise NotImplementedError

    def corrector(self, dx, ds):
        """Second-order term added to the right-hand side of ``ds + M dx`` after a predictor step."""
        raise NotImplementedError

    def factor_adj_prod(self, v):
        """``F* v``."""
        raise NotImplementedError


class DenseOracle(Oracle):
    """Small cones with explicit Hessians and closed-form inverse Hessians.

    Near the boundary the Hessian is dominated by a rank-one term of size
    ``1/psi^2``, so its inverse is never obtained by factoring it.
    """

    def set_point(self, x):
        self.x = np.asarray(x, dtype=float)
        if not self.in_interior(self.x):
            return False
        self._g, self._h = self._derivatives(self.x)
        self._hinv = self._inverse_hessian(self.x)
        return bool(np.all(np.isfinite(self._g)) and np.all(np.isfinite(self._hinv)))

    def _inverse_hessian(self, x):
        raise NotImplementedError

    def grad(self):
        return self._g

    def hess_prod(self, v):
        return self._h @ v

    def inv_hess_prod(self, v):
        return self._hinv @ v

    def set_scaling(self, x, s, mu):
        self._mu = mu
        w, q = np.linalg.eigh(self._hinv)
        # F F' = H^-1 / mu
        self._factor = q * np.sqrt(np.maximum(w, 0.0) / mu)
        return True

    def factor_prod(self, v):
        return self._factor @ v

    def factor_adj_prod(self, v):
        return self._factor.T @ v

    def third_order(self, d):
        """``D^3 f(x)[d, d]`` by a complex step on the Hessian."""
        step = 1e-30
        _, h = self._derivatives(self.x + 1j * step * np.asarray(d, dtype=float))
        return (h.imag / step) @ d

    def corrector(self, dx, ds):
        # second derivative of s + mu grad f(x) along the predictor path
        return self._mu * (self.hess_prod(dx) - 0.5 * self.third_order(dx))


class Nonneg(Oracle):
    def __init__(self, cone):
        super().__init__(cone)
        self.nu = float(cone.dim)

    def central_point(self):
        return np.ones(self.cone.dim)

    def in_interior(self, x):
        return bool(np.all(x > 0))

    in_dual_interior = in_interior

    def set_point(self, x):
        self.x = np.asarray(x, dtype=float)
        return self.in_interior(self.x)

    def grad(self):
        return -1.0 / self.x

    def hess_prod(self, v):
        d = 1.0 / self.x ** 2
        return d[:, None] * v if np.ndim(v) == 2 else d * v

    def inv_hess_prod(self, v):
        d = self.x ** 2
        return d[:, None] * v if np.ndim(v) == 2 else d * v

    def set_scaling(self, x, s, mu):
        self._d = np.asarray(s, dtype=float) / np.asarray(x, dtype=float)
        return bool(np.all(self._d > 0))

    def scale_prod(self, v):
        return self._d[:, None] * v if np.ndim(v) == 2 else self._d * v

    def inv_scale_prod(self, v):
        return v / self._d[:, None] if np.ndim(v) == 2 else v / self._d

    def factor_prod(self, v):
        f = 1.0 / np.sqrt(self._d)
        return f[:, None] * v if np.ndim(v) == 2 else f * v

    factor_adj_prod = factor_prod

    def corrector(self, dx, ds):
        return -dx * ds / self.x


def _soc_det(x):
    """x0^2 - ||x1:||^2 without cancellation."""
    r = np.linalg.norm(x[1:])
    return (x[0] - r) * (x[0] + r)


class _NTSecondOrder:
    """Nesterov-Todd scaling ``W`` (symmetric, ``W x = W^-1 s``) for a second-order cone."""

    def __init__(self, x, s, xn=None, sn=None):
        j = np.ones(x.size)
        j[1:] = -1.0
        xn = _soc_det(x) if xn is None else xn
        sn = _soc_det(s) if sn is None else sn
        if not (xn > 0 and sn > 0 and x[0] > 0 and s[0] > 0):
            raise ValueError("not interior")
        xb, sb = x / np.sqrt(xn), s / np.sqrt(sn)
        gam = np.sqrt(0.5 * (1.0 + xb @ sb))
        wb = (sb + j * xb) / (2.0 * gam)
        eta = (sn / xn) ** 0.25
        w1 = wb[1:]
        # W = eta P(wb)^(1/2), so W^2 = eta^2 (2 wb wb' - J) maps x to s
        root = np.empty((x.size, x.size))
        root[0, 0] = wb[0]
        root[0, 1:] = w1
        root[1:, 0] = w1
        root[1:, 1:] = np.eye(x.size - 1) + np.outer(w1, w1) / (1.0 + wb[0])
        self.w = eta * root
        root[0, 1:] = -w1
        root[1:, 0] = -w1
        self.winv = root / eta
        self.lam = self.w @ x

    def corrector(self, dx, ds):
        a, b = self.w @ dx, self.winv @ ds
        jp = np.concatenate([[a @ b], a[0] * b[1:] + b[0] * a[1:]])
        lam = self.lam
        arw = lam[0] * np.eye(lam.size)
        arw[0, 1:] = lam[1:]
        arw[1:, 0] = lam[1:]
        return self.w @ np.linalg.solve(arw, -jp)


class SecondOrder(DenseOracle):
    """``x0 >= ||x1:||`` with barrier ``-log(x0^2 - ||x1:||^2)``."""

    nu = 2.0

    def set_scaling(self, x, s, mu):
        try:
            self._nt = _NTSecondOrder(np.asarray(x, dtype=float), np.asarray(s, dtype=float))
        except ValueError:
            return False
        return True

    def scale_prod(self, v):
        return self._nt.w @ (self._nt.w @ v)

    def inv_scale_prod(self, v):
        return self._nt.winv @ (self._nt.winv @ v)

    def factor_prod(self, v):
        return self._nt.winv @ v

    factor_adj_prod = factor_prod

    def corrector(self, dx, ds):
        return self._nt.corrector(dx, ds)

    def central_point(self):
        e = np.zeros(self.cone.dim)
        e[0] = np.sqrt(2.0)
        return e

    def in_interior(self, x):
        return bool(x[0] > 0 and x[0] ** 2 - x[1:] @ x[1:] > 0 and x[0] > np.linalg.norm(x[1:]))

    in_dual_interior = in_interior

    def _inverse_hessian(self, x):
        j = np.ones(x.size)
        j[1:] = -1.0
        return np.outer(x, x) - 0.5 * (x @ (j * x)) * np.diag(j)

    def _derivatives(self, x):
        j = np.ones_like(x)
        j[1:] = -1.0
        jx = j * x
        phi = x @ jx
        g = -2.0 * jx / phi
        h = 4.0 * np.outer(jx, jx) / phi ** 2 - 2.0 * np.diag(j) / phi
        return g, h


def _rsoc_det(x):
    """2 x0 x1 - ||x2:||^2, the determinant of the rotated point mapped onto the standard cone."""
    return 2.0 * x[0] * x[1] - x[2:] @ x[2:]


class RotatedSecondOrder(DenseOracle):
    """``2 x0 x1 >= ||x2:||^2, x0, x1 >= 0`` with barrier ``-log(2 x0 x1 - ||x2:||^2)``."""

    nu = 2.0

    def central_point(self):
        e = np.zeros(self.cone.dim)
        e[:2] = 1.0
        return e

    def in_interior(self, x):
        return bool(x[0] > 0 and x[1] > 0 and 2 * x[0] * x[1] - x[2:] @ x[2:] > 0)

    in_dual_interior = in_interior

    # NT scaling through the orthogonal map onto a standard second-order cone
    def _t(self, v):
        out = np.array(v, dtype=float, copy=True)
        out[0] = (v[0] + v[1]) / np.sqrt(2.0)
        out[1] = (v[0] - v[1]) / np.sqrt(2.0)
        return out

    def set_scaling(self, x, s, mu):
        try:
            x, s = np.asarray(x, dtype=float), np.asarray(s, dtype=float)
            self._nt = _NTSecondOrder(self._t(x), self._t(s), _rsoc_det(x), _rsoc_det(s))
        except ValueError:
            return False
        return True

    def scale_prod(self, v):
        return self._t(self._nt.w @ (self._nt.w @ self._t(v)))

    def inv_scale_prod(self, v):
        return self._t(self._nt.winv @ (self._nt.winv @ self._t(v)))

    def factor_prod(self, v):
        return self._t(self._nt.winv @ self._t(v))

    factor_adj_prod = factor_prod

    def corrector(self, dx, ds):
        return self._t(self._nt.corrector(self._t(dx), self._t(ds)))

    def _inverse_hessian(self, x):
        phi = 2 * x[0] * x[1] - x[2:] @ x[2:]
        tjt = -np.eye(x.size)
        tjt[:2, :2] = [[0.0, 1.0], [1.0, 0.0]]
        return np.outer(x, x) - 0.5 * phi * tjt

    def _derivatives(self, x):
        r = x[2:]
        phi = 2 * x[0] * x[1] - r @ r
        dphi = np.concatenate([[2 * x[1], 2 * x[0]], -2 * r])
        d2 = np.zeros((x.size, x.size))
        d2[0, 1] = d2[1, 0] = 2.0
        d2[2:, 2:] = -2.0 * np.eye(r.size)
        g = -dphi / phi
        h = np.outer(dphi, dphi) / phi ** 2 - d2 / phi
        return g, h


def _exp_derivatives(p):
    x, y, z = p
    lzy = np.log(z / y)
    psi = y * lzy - x
    dpsi = np.array([-1.0, lzy - 1.0, y / z])
    d2 = np.array([[0.0, 0.0, 0.0], [0.0, -1.0 / y, 1.0 / z], [0.0, 1.0 / z, -y / z ** 2]])
    g = -dpsi / psi - np.array([0.0, 1.0 / y, 1.0 / z])
    h = np.outer(dpsi, dpsi) / psi ** 2 - d2 / psi + np.diag([0.0, 1.0 / y ** 2, 1.0 / z ** 2])
    return g, h


@lru_cache(maxsize=None)
def exp_central_point() -> tuple:
    """Point ``p`` of the exponential cone with ``-grad f(p) = p``."""
    sol = optimize.fsolve(lambda p: _exp_derivatives(p)[0] + p, [-1.05, 0.556, 1.259], xtol=1e-15)
    return tuple(float(v) for v in sol)


class Exponential(DenseOracle):
    """``cl{(x, y, z): y > 0, y exp(x / y) <= z}``.

    Barrier ``-log(y log(z / y) - x) - log y - log z``.
    """

    nu = 3.0

    def central_point(self):
        return np.array(exp_central_point())

    def in_interior(self, p):
        x, y, z = p
        return bool(y > 0 and z > 0 and y * np.log(z / y) - x > 0)

    def in_dual_interior(self, s):
        u, v, w = s
        return bool(u < 0 and w > 0 and np.log(-u) + v / u < 1.0 + np.log(w))

    def _derivatives(self, p):
        return _exp_derivatives(p)

    def _inverse_hessian(self, p):
        x, y, z = p
        lzy = np.log(z / y)
        psi = y * lzy - x
        d = psi + 2 * y
        h00 = (y * y * lzy * lzy * (psi + y) + psi ** 3 + 2 * psi * psi * y + 2 * psi * y * y * (1 - lzy)) / d
        h01 = y * y * ((psi + y) * lzy - psi) / d
        h02 = y * z * (psi + y * lzy) / d
        h11 = y * y * (psi + y) / d
        h12 = y * y * z / d
        h22 = z * z * (psi + y) / d
        return np.array([[h00, h01, h02], [h01, h11, h12], [h02, h12, h22]])


class PositiveSemidefinite(Oracle):
    """Real symmetric (``svec``) or complex Hermitian (``hvec``) PSD block.

    For a complex block the barrier is ``-logdet`` of the real embedding,
    i.e. twice ``-logdet`` of the Hermitian matrix, so ``nu`` equals the
    embedded side.
    """

    def __init__(self, cone):
        super().__init__(cone)
        self.order = cone.matrix_order
        self.factor = 2.0 if cone.complex else 1.0
        self.nu = self.factor * self.order
        self._vec, self._mat = (hvec, hmat) if cone.complex else (svec, smat)

    def mat(self, x):
        return self._mat(x, self.order)

    def _mats(self, v):
        return np.stack([self._mat(col, self.order) for col in v.T])

    def _vecs(self, ms):
        return np.stack([self._vec(m) for m in ms], axis=1)

    def central_point(self):
        return self._vec(np.eye(self.order) * np.sqrt(self.factor))

    def _posdef(self, m):
        try:
            np.linalg.cholesky(m)
        except np.linalg.LinAlgError:
            return False
        return True

    def in_interior(self, x):
        return self._posdef(self.mat(x))

    in_dual_interior = in_interior

    def set_point(self, x):
        m = self.mat(x)
        try:
            chol = np.linalg.cholesky(m)
        except np.linalg.LinAlgError:
            return False
        linv = np.linalg.inv(chol)
        self._x = m
        self._xinv = linv.conj().T @ linv
        return True

    def grad(self):
        return -self.factor * self._vec(self._xinv)

    def _sandwich(self, w, v, scale):
        if np.ndim(v) == 1:
            m = self._mat(v, self.order)
            return scale * self._vec(w @ m @ w)
        ms = self._mats(v)
        return scale * self._vecs(w @ ms @ w)

    def hess_prod(self, v):
        return self._sandwich(self._xinv, v, self.factor)

    def inv_hess_prod(self, v):
        return self._sandwich(self._x, v, 1.0 / self.factor)

    def set_scaling(self, x, s, mu):
        """Nesterov-Todd point ``G`` with ``G S G = X``, built from Cholesky factors and an SVD."""
        try:
            lx = np.linalg.cholesky(self.mat(x))
            ls = np.linalg.cholesky(self.mat(s))
        except np.linalg.LinAlgError:
            return False
        u, sig, vh = np.linalg.svd(ls.conj().T @ lx)
        r = lx @ vh.conj().T / np.sqrt(sig)
        rinv = (np.sqrt(sig)[:, None] * vh) @ np.linalg.inv(lx)
        self._r = r
        self._rinv = rinv
        self._lam = sig
        self._g = r @ r.conj().T
        self._ginv = rinv.conj().T @ rinv
        return True

    def _congruence(self, left, v):
        right = left.conj().T
        if np.ndim(v) == 1:
            return self._vec(left @ self._mat(v, self.order) @ right)
        return self._vecs(left @ self._mats(v) @ right)

    def factor_prod(self, v):
        return self._congruence(self._r, v)

    def factor_adj_prod(self, v):
        return self._congruence(self._r.conj().T, v)

    def corrector(self, dx, ds):
        # Mehrotra term -R^-H (Lambda^-1 <> (dx~ o ds~)) R^-1 in the NT-scaled frame
        dxs = self._rinv @ self._mat(dx, self.order) @ self._rinv.conj().T
        dss = self._r.conj().T @ self._mat(ds, self.order) @ self._r
        jordan = 0.5 * (dxs @ dss + dss @ dxs)
        lam = self._lam
        y = 2.0 * jordan / (lam[:, None] + lam[None, :])
        return -self._vec(self._rinv.conj().T @ y @ self._rinv)

    def scale_prod(self, v):
        return self._sandwich(self._ginv, v, 1.0)

    def inv_scale_prod(self, v):
        return self._sandwich(self._g, v, 1.0)


_ORACLES = {
    "NONNEG": Nonneg,
    "SOC": SecondOrder,
    "ROTATED_SOC": RotatedSecondOrder,
    "EXP": Exponential,
    "PSD": PositiveSemidefinite,
}


def make_oracle(cone: Cone) -> Oracle:
    return _ORACLES[cone.kind](cone)


def check_membership(point, cone: Cone) -> float:
    """Signed membership margin of ``point`` in ``cone`` (>= 0 inside).

    NONNEG: ``min(x)``; SOC: ``x0 - ||x1:||``; ROTATED_SOC: ``2 x0 x1 - ||x2:||^2``
    when ``x0, x1 >= 0`` and ``min(x0, x1)`` otherwise; EXP: ``y log(z/y) - x``
    for ``y, z > 0`` with the closure handled at ``y = 0``; PSD: smallest
    eigenvalue (of the Hermitian matrix for complex blocks).
    """
    x = np.asarray(point, dtype=float)
    if x.size != cone.dim:
        raise ValueError(f"point has {x.size} entries, cone expects {cone.dim}")
    kind = cone.kind
    if kind == "NONNEG":
        return float(np.min(x)) if x.size else 0.0
    if kind == "SOC":
        return float(x[0] - np.linalg.norm(x[1:]))
    if kind == "ROTATED_SOC":
        if x[0] < 0 or x[1] < 0:
            return float(min(x[0], x[1]))
        return float(2 * x[0] * x[1] - x[2:] @ x[2:])
    if kind == "EXP":
        ex, ey, ez = x
        if ey > 0:
            if ez <= 0:
                return float(min(ez, -ey))
            return float(ey * np.log(ez / ey) - ex)
        if ey == 0:
            return float(min(0.0, -ex, ez))
        return float(ey)
    if kind == "PSD":
        m = hmat(x, cone.matrix_order) if cone.complex else smat(x, cone.matrix_order)
        return float(np.linalg.eigvalsh(m)[0])
    raise ValueError(kind)


def check_dual_membership(point, cone: Cone) -> float:
    """Signed margin in the dual cone; equals :func:`check_membership` for self-dual cones."""
    if cone.kind != "EXP":
        return check_membership(point, cone)
    u, v, w = np.asarray(point, dtype=float)
    if u < 0:
        if w <= 0:
            return float(min(w, u))
        return float(v - u * (1.0 + np.log(w / -u)))
    if u == 0:
        return float(min(0.0, v, w))
    return float(-u)
