import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from isac_ee.hermitian import (NotHermitianError, NotRankOneError, eig_hermitian, embed_real, extract_real,
                               hmat, hvec, is_psd, psd_residual, rank_one_factor, smat, svec)


def hermitian_matrices(max_n=6):
    def build(args):
        n, re, im = args
        g = re[:n, :n] + 1j * im[:n, :n]
        return 0.5 * (g + g.conj().T)

    elems = st.floats(-10, 10, allow_nan=False)
    return st.integers(1, max_n).flatmap(
        lambda n: st.tuples(st.just(n), arrays(float, (n, n), elements=elems), arrays(float, (n, n), elements=elems))
    ).map(build)


def test_identity_spectrum():
    np.testing.assert_allclose(eig_hermitian(np.eye(3)).eigenvalues, [1, 1, 1])


def test_rank_one_spectrum():
    v = np.array([1.0, 2.0j, 0.0])
    np.testing.assert_allclose(eig_hermitian(np.outer(v, v.conj())).eigenvalues, [5, 0, 0], atol=1e-12)


def test_sorted_descending():
    np.testing.assert_allclose(eig_hermitian(np.diag([3.0, 1.0, 2.0])).eigenvalues, [3, 2, 1])


@settings(max_examples=60, deadline=None)
@given(hermitian_matrices())
def test_eig_reconstruction_and_orthonormality(h):
    e = eig_hermitian(h)
    q = e.eigenvectors
    peak = np.max(np.abs(h))
    # Frobenius norm computed without squaring tiny entries into underflow
    scale = max(peak * np.linalg.norm(h / peak) if peak else 0.0, 1e-300)
    assert np.linalg.norm(e.reconstruct() - h) <= 1e-10 * scale + 1e-300
    np.testing.assert_allclose(q.conj().T @ q, np.eye(len(h)), atol=1e-10)
    assert np.all(np.diff(e.eigenvalues) <= 0)
    np.testing.assert_allclose(e.eigenvalues, np.linalg.eigvalsh(h)[::-1], atol=1e-10 * scale)


def test_eig_deterministic(rng):
    g = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    h = g + g.conj().T
    a, b = eig_hermitian(h), eig_hermitian(h)
    assert np.array_equal(a.eigenvalues, b.eigenvalues) and np.array_equal(a.eigenvectors, b.eigenvectors)


def test_eig_tiny_offdiagonal_converges():
    # near-diagonal matrices must not stall on the off-diagonal stopping test
    h = np.diag([1.0, 1e-3, 1e-9]).astype(complex)
    h[0, 1], h[1, 0] = 1e-9j, -1e-9j
    e = eig_hermitian(h)
    assert np.linalg.norm(e.reconstruct() - h) <= 1e-12


def test_eig_rejects_non_hermitian():
    with pytest.raises(NotHermitianError):
        eig_hermitian(np.array([[1.0, 2.0], [0.0, 1.0]]))


@pytest.mark.parametrize("h,res", [(np.eye(2), 0.0), (np.diag([1.0, -2.0]), 2.0), (np.zeros((3, 3)), 0.0)])
def test_psd_residual(h, res):
    assert psd_residual(h) == pytest.approx(res)


def test_is_psd_tolerance():
    assert is_psd(np.diag([1.0, -1e-9]))
    assert not is_psd(np.diag([1.0, -1e-6]))


def test_rank_one_factor_examples():
    np.testing.assert_allclose(rank_one_factor(np.diag([4.0, 0.0])), [2, 0], atol=1e-12)
    v = np.array([1.0, 1j]) / np.sqrt(2)
    np.testing.assert_allclose(rank_one_factor(9 * np.outer(v, v.conj())), 3 * v, atol=1e-12)
    with pytest.raises(NotRankOneError):
        rank_one_factor(np.eye(2))


@settings(max_examples=60, deadline=None)
@given(arrays(float, 8, elements=st.floats(-5, 5, allow_nan=False)))
def test_rank_one_factor_recovers_vector(parts):
    v = parts[:4] + 1j * parts[4:]
    if np.linalg.norm(v) < 1e-3:
        return
    w = rank_one_factor(np.outer(v, v.conj()))
    # same vector up to a unit phase, fixed so the first sizeable entry is real positive
    phase = np.vdot(w, v) / abs(np.vdot(w, v))
    np.testing.assert_allclose(w * phase, v, atol=1e-9 * np.linalg.norm(v))
    lead = np.flatnonzero(np.abs(w) > 1e-12 * np.abs(w).max())[0]
    assert abs(w[lead].imag) <= 1e-12 * abs(w[lead]) and w[lead].real > 0


def test_embed_examples():
    np.testing.assert_array_equal(embed_real(np.eye(3)), np.eye(6))
    pauli = np.array([[0, -1j], [1j, 0]])
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(embed_real(pauli))), [-1, -1, 1, 1], atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(hermitian_matrices())
def test_embedding_spectrum_and_round_trip(h):
    e = embed_real(h)
    w = np.linalg.eigvalsh(h)
    np.testing.assert_allclose(np.linalg.eigvalsh(e), np.sort(np.repeat(w, 2)), atol=1e-9 * (1 + np.abs(w).max()))
    assert np.trace(e) == pytest.approx(2 * np.trace(h).real, abs=1e-9)
    np.testing.assert_array_equal(extract_real(e), h)


@settings(max_examples=60, deadline=None)
@given(hermitian_matrices(), hermitian_matrices())
def test_hvec_is_an_isometry(a, b):
    n = min(len(a), len(b))
    a, b = a[:n, :n], b[:n, :n]
    assert hvec(a) @ hvec(b) == pytest.approx(np.real(np.trace(a.conj().T @ b)), abs=1e-8)
    np.testing.assert_allclose(hmat(hvec(a), n), a, atol=1e-12)


def test_svec_round_trip(rng):
    s = rng.normal(size=(4, 4))
    s = s + s.T
    np.testing.assert_allclose(smat(svec(s), 4), s)
    assert svec(s) @ svec(s) == pytest.approx(np.sum(s * s))
