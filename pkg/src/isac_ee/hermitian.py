"""Complex Hermitian linear algebra.

Eigendecomposition by cyclic Jacobi rotations, PSD checks, rank-one
factorization, the real symmetric embedding ``H = A + jB -> [[A, -B], [B, A]]``
and orthonormal coordinate maps (``hvec``/``svec``) used by the conic solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HERMITIAN_RTOL = 1e-12
PSD_RTOL = 1e-8
RANK_ONE_RTOL = 1e-6
JACOBI_MAX_SWEEPS = 100
JACOBI_TOL = 1e-12


class NotHermitianError(ValueError):
    pass


class NotRankOneError(ValueError):
    pass


class JacobiConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues in descending order with matching orthonormal columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        q = self.eigenvectors
        return (q * self.eigenvalues) @ q.conj().T


def check_hermitian(h, rtol: float = HERMITIAN_RTOL) -> np.ndarray:
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise NotHermitianError(f"expected a square matrix, got shape {h.shape}")
    if not np.all(np.isfinite(h)):
        raise NotHermitianError("matrix has non-finite entries")
    scale = np.max(np.abs(h)) if h.size else 0.0
    if np.max(np.abs(h - h.conj().T), initial=0.0) > rtol * max(scale, np.finfo(float).tiny):
        raise NotHermitianError("matrix is not Hermitian within tolerance")
    return h


def hermitian_part(h) -> np.ndarray:
    h = np.asarray(h)
    return 0.5 * (h + h.conj().T)


def eig_hermitian(h, max_sweeps: int = JACOBI_MAX_SWEEPS, tol: float = JACOBI_TOL) -> EigenDecomposition:
    """Cyclic Jacobi eigendecomposition of a Hermitian (or real symmetric) matrix.

    Each rotation first removes the phase of the pivot ``a[p, q]`` and then
    applies a real plane rotation, so the iteration works unchanged for real
    and complex input. Raises ``JacobiConvergenceError`` after ``max_sweeps``.
    """
    h = check_hermitian(h)
    n = h.shape[0]
    a = hermitian_part(h).astype(complex)
    q = np.eye(n, dtype=complex)
    peak = float(np.max(np.abs(a)))
    if n == 1 or peak == 0.0:
        return _sorted(np.real(np.diag(a)).copy(), q)
    # power-of-two normalization is exact and keeps tiny or huge entries away from under/overflow
    unit = 2.0 ** np.frexp(peak)[1]
    a = a / unit
    scale = np.linalg.norm(a)

    threshold = tol * scale
    for _ in range(max_sweeps):
        off = _off_norm(a)
        if off <= threshold:
            break
        for p in range(n - 1):
            for r in range(p + 1, n):
                apq = a[p, r]
                mag = abs(apq)
                if mag <= 1e-300:
                    continue
                phase = apq / mag
                app, arr = a[p, p].real, a[r, r].real
                theta = 0.5 * np.arctan2(2.0 * mag, app - arr)
                c, s = np.cos(theta), np.sin(theta)
                # U = diag(1, conj(phase)) @ [[c, -s], [s, c]]
                u = np.array([[c, -s], [s * np.conj(phase), c * np.conj(phase)]])
                idx = [p, r]
                a[:, idx] = a[:, idx] @ u
                a[idx, :] = u.conj().T @ a[idx, :]
                a[p, r] = a[r, p] = 0.0
                a[p, p] = a[p, p].real
                a[r, r] = a[r, r].real
                q[:, idx] = q[:, idx] @ u
    else:
        off = _off_norm(a)
        if off > threshold:
            raise JacobiConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps (off={off:.3e})")

    w = np.real(np.diag(a)) * unit
    if np.isrealobj(h):
        q = np.real(q)
    return _sorted(w, q)


def _off_norm(a) -> float:
    return float(np.linalg.norm(a - np.diag(np.diag(a))))


def _sorted(w, q) -> EigenDecomposition:
    order = np.argsort(-w, kind="stable")
    return EigenDecomposition(w[order], q[:, order])


def psd_residual(h) -> float:
    """``max(0, -lambda_min(h))``."""
    w = eig_hermitian(h).eigenvalues
    return float(max(0.0, -w[-1]))


def is_psd(h, rtol: float = PSD_RTOL) -> bool:
    h = np.asarray(h)
    return psd_residual(h) <= rtol * max(1.0, float(np.real(np.trace(h))))


def rank_one_factor(h, rtol: float = RANK_ONE_RTOL) -> np.ndarray:
    """Return ``v`` with ``v v^H = h`` for a numerically rank-one PSD ``h``.

    Phase convention: the first entry with non-negligible magnitude is real
    and nonnegative.
    """
    eig = eig_hermitian(h)
    w = eig.eigenvalues
    lead = w[0]
    n = len(w)
    if lead <= 0.0:
        if np.max(np.abs(np.asarray(h)), initial=0.0) == 0.0:
            return np.zeros(n, dtype=complex)
        raise NotRankOneError("matrix has no positive eigenvalue")
    second = max(abs(w[1]), abs(w[-1])) if n > 1 else 0.0
    if second > rtol * lead:
        raise NotRankOneError(f"sigma2/sigma1 = {second / lead:.3e} exceeds {rtol:g}")
    v = np.sqrt(lead) * eig.eigenvectors[:, 0].astype(complex)
    return fix_phase(v)


def fix_phase(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    mags = np.abs(v)
    if not mags.any():
        return v
    first = int(np.argmax(mags > 1e-12 * mags.max()))
    return v * (np.conj(v[first]) / mags[first])


def embed_real(h) -> np.ndarray:
    """Real symmetric embedding ``[[Re H, -Im H], [Im H, Re H]]``."""
    h = check_hermitian(h)
    a, b = np.real(h), np.imag(h)
    return np.block([[a, -b], [b, a]])


def extract_real(e) -> np.ndarray:
    """Inverse of :func:`embed_real`."""
    e = np.asarray(e, dtype=float)
    n2 = e.shape[0]
    if e.shape != (n2, n2) or n2 % 2:
        raise ValueError(f"embedding must be square with even side, got {e.shape}")
    n = n2 // 2
    return e[:n, :n] + 1j * e[n:, :n]


# Orthonormal coordinates w.r.t. <X, Y> = Re tr(X^H Y).

_ROOT2 = np.sqrt(2.0)


def hvec_dim(n: int) -> int:
    return n * n


def svec_dim(n: int) -> int:
    return n * (n + 1) // 2


def hvec(h) -> np.ndarray:
    h = np.asarray(h)
    n = h.shape[0]
    iu = np.triu_indices(n, 1)
    upper = h[iu]
    return np.concatenate([np.real(np.diag(h)), _ROOT2 * np.real(upper), _ROOT2 * np.imag(upper)])


def hmat(v, n: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    m = n * (n - 1) // 2
    iu = np.triu_indices(n, 1)
    h = np.zeros((n, n), dtype=complex)
    h[iu] = (v[n:n + m] + 1j * v[n + m:]) / _ROOT2
    h = h + h.conj().T
    h[np.diag_indices(n)] = v[:n]
    return h


def svec(s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    n = s.shape[0]
    iu = np.triu_indices(n, 1)
    return np.concatenate([np.diag(s), _ROOT2 * s[iu]])


def smat(v, n: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    iu = np.triu_indices(n, 1)
    s = np.zeros((n, n))
    s[iu] = v[n:] / _ROOT2
    s = s + s.T
    s[np.diag_indices(n)] = v[:n]
    return s
