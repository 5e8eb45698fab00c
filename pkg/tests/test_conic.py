import json

import numpy as np
import pytest

from isac_ee.conic import (Cone, ConicBuilder, ConicProblem, SolverOptions, Status, check_dual_membership,
                           check_membership, solve)
from isac_ee.hermitian import hvec, svec

LN2 = np.log(2.0)


def scalar_lp(c_scale=1.0, b_scale=1.0):
    bld = ConicBuilder()
    x = bld.add_block("NONNEG", 1)
    bld.add_le([(x, [1.0])], 1.0 * b_scale)
    return bld.build([(x, [c_scale])], maximize=True)


def log2_of_four():
    bld = ConicBuilder()
    e = bld.add_block("EXP", 3)
    bld.add_eq([(slice(1, 2), [1.0])], 1.0)
    bld.add_eq([(slice(2, 3), [1.0])], 4.0)
    return bld.build([(slice(0, 1), [1.0 / LN2])], maximize=True)


def pinned_psd():
    bld = ConicBuilder()
    x = bld.add_block("PSD", side=2)
    e11 = np.zeros((2, 2))
    e11[0, 0] = 1.0
    bld.add_eq([(x, svec(e11))], 1.0)
    return bld.build([(x, svec(np.eye(2)))])


def replay(problem, sol, tol=1e-7):
    """Independent re-check of residuals, memberships and the gap of an OPTIMAL result."""
    x, y, s = sol.x, sol.y, sol.s
    c = -problem.c if problem.maximize else problem.c
    scale_b = 1.0 + np.linalg.norm(problem.b)
    assert np.linalg.norm(problem.A @ x - problem.b) <= tol * scale_b * max(1.0, np.abs(problem.A).max())
    assert np.linalg.norm(problem.A.T @ y + s - c) <= tol * (1.0 + np.linalg.norm(c))
    for cone in problem.cones:
        assert check_membership(x[cone.slice], cone) >= -tol
        assert check_dual_membership(s[cone.slice], cone) >= -tol
    pobj, dobj = c @ x, problem.b @ y
    assert pobj - dobj >= -tol * (1 + abs(pobj))  # weak duality, minimization form
    assert abs(pobj - dobj) <= 10 * tol * (1 + abs(pobj))


def test_scalar_lp():
    p = scalar_lp()
    sol = solve(p)
    assert sol.status is Status.OPTIMAL
    assert sol.x[0] == pytest.approx(1.0, abs=1e-7)
    assert sol.gap <= 1e-8
    replay(p, sol)


def test_exp_cone_log2():
    p = log2_of_four()
    sol = solve(p)
    assert sol.status is Status.OPTIMAL
    assert sol.objective == pytest.approx(2.0, abs=1e-7)
    assert sol.gap <= 1e-8
    replay(p, sol)


def test_psd_diagonal_pin():
    from isac_ee.hermitian import smat

    p = pinned_psd()
    sol = solve(p)
    assert sol.status is Status.OPTIMAL
    assert sol.objective == pytest.approx(1.0, abs=1e-7)
    assert sol.gap <= 1e-8
    np.testing.assert_allclose(smat(sol.x, 2), [[1, 0], [0, 0]], atol=1e-6)
    replay(p, sol)


def test_complex_psd_block():
    # minimize Re X12 over Hermitian PSD X with unit diagonal: X12 = -1
    bld = ConicBuilder()
    x = bld.add_hermitian_psd(2)
    for i in range(2):
        e = np.zeros((2, 2))
        e[i, i] = 1.0
        bld.add_eq([(x, hvec(e))], 1.0)
    off = np.array([[0, 0.5], [0.5, 0]], dtype=complex)
    p = bld.build([(x, hvec(off))])
    sol = solve(p)
    assert sol.status is Status.OPTIMAL
    assert sol.objective == pytest.approx(-1.0, abs=1e-7)
    replay(p, sol)


def test_socp_and_rotated():
    # min t s.t. ||(1, 2)|| <= t and 2 a b >= 9 with b = 1/2 -> a = 9
    bld = ConicBuilder()
    q = bld.add_block("SOC", 3)
    r = bld.add_block("ROTATED_SOC", 3)
    bld.add_eq([(slice(1, 2), [1.0])], 1.0)
    bld.add_eq([(slice(2, 3), [1.0])], 2.0)
    bld.add_eq([(slice(4, 5), [1.0])], 0.5)
    bld.add_eq([(slice(5, 6), [1.0])], 3.0)
    p = bld.build([(slice(0, 1), [1.0]), (slice(3, 4), [1.0])])
    sol = solve(p)
    assert sol.status is Status.OPTIMAL
    assert sol.objective == pytest.approx(np.sqrt(5.0) + 9.0, abs=1e-6)
    replay(p, sol)


def test_primal_infeasible_certificate():
    bld = ConicBuilder()
    x = bld.add_block("NONNEG", 2)
    bld.add_eq([(x, [1.0, 1.0])], -1.0)
    p = bld.build([(x, [1.0, 2.0])])
    sol = solve(p)
    assert sol.status is Status.PRIMAL_INFEASIBLE
    y, s = sol.y, sol.s
    assert p.b @ y == pytest.approx(1.0)
    assert np.linalg.norm(p.A.T @ y + s) <= 1e-7
    assert check_dual_membership(s, p.cones[0]) >= -1e-9


def test_infeasible_psd_certificate():
    # X PSD with X11 = -1 is empty
    bld = ConicBuilder()
    x = bld.add_block("PSD", side=2)
    e11 = np.zeros((2, 2))
    e11[0, 0] = 1.0
    bld.add_eq([(x, svec(e11))], -1.0)
    p = bld.build([(x, svec(np.eye(2)))])
    sol = solve(p)
    assert sol.status is Status.PRIMAL_INFEASIBLE
    assert p.b @ sol.y == pytest.approx(1.0)
    assert np.linalg.norm(p.A.T @ sol.y + sol.s) <= 1e-7
    assert check_dual_membership(sol.s, p.cones[0]) >= -1e-8


def test_unbounded_certificate():
    bld = ConicBuilder()
    x = bld.add_block("NONNEG", 2)
    bld.add_eq([(x, [1.0, -1.0])], 0.0)
    p = bld.build([(x, [1.0, 0.0])], maximize=True)
    sol = solve(p)
    assert sol.status is Status.DUAL_INFEASIBLE
    ray = sol.x
    assert np.linalg.norm(p.A @ ray) <= 1e-7
    assert check_membership(ray, p.cones[0]) >= -1e-9
    assert -(p.c @ ray) == pytest.approx(-1.0)


def test_inconsistent_equalities_detected_in_presolve():
    bld = ConicBuilder()
    x = bld.add_block("NONNEG", 2)
    bld.add_eq([(x, [1.0, 1.0])], 1.0)
    bld.add_eq([(x, [2.0, 2.0])], 3.0)
    p = bld.build([(x, [1.0, 1.0])])
    sol = solve(p)
    assert sol.status is Status.PRIMAL_INFEASIBLE
    assert p.b @ sol.y == pytest.approx(1.0)
    assert np.linalg.norm(p.A.T @ sol.y) <= 1e-9


@pytest.mark.parametrize("c_scale,b_scale", [(3.0, 1.0), (1.0, 2.0), (0.1, 50.0)])
def test_scaling_invariance(c_scale, b_scale):
    base = solve(scalar_lp())
    sol = solve(scalar_lp(c_scale, b_scale))
    assert sol.status is base.status
    assert sol.objective == pytest.approx(base.objective * c_scale * b_scale, rel=1e-7)


def test_iterates_keep_nonnegative_complementarity():
    sol = solve(log2_of_four())
    assert all(rec["complementarity"] >= 0 for rec in sol.trace)
    assert all(rec["tau"] > 0 and rec["kappa"] > 0 for rec in sol.trace)


def test_deterministic():
    a, b = solve(log2_of_four()), solve(log2_of_four())
    assert np.array_equal(a.x, b.x) and a.iterations == b.iterations


@pytest.mark.parametrize("cone,point,margin", [
    (Cone("NONNEG", 0, 2), [1.0, 2.0], 1.0),
    (Cone("SOC", 0, 3), [1.0, 1.0, 0.0], 0.0),
    (Cone("SOC", 0, 3), [5.0, 3.0, 4.0], 0.0),
    (Cone("SOC", 0, 3), [2.0, 0.0, 1.0], 1.0),
    (Cone("ROTATED_SOC", 0, 3), [2.0, 1.0, 1.0], 3.0),
    (Cone("ROTATED_SOC", 0, 3), [-1.0, 1.0, 0.0], -1.0),
    (Cone("EXP", 0, 3), [0.0, 1.0, 1.0], 0.0),
    (Cone("EXP", 0, 3), [1.0, 1.0, np.e ** 2], 1.0),
    (Cone("EXP", 0, 3), [-1.0, 0.0, 2.0], 0.0),
    (Cone("PSD", 0, 3, side=2), svec(np.diag([3.0, -0.5])), -0.5),
    (Cone("PSD", 0, 4, side=4, complex=True), hvec(np.array([[0, -1j], [1j, 0]])), -1.0),
])
def test_membership_margins(cone, point, margin):
    assert check_membership(point, cone) == pytest.approx(margin, abs=1e-10)


def test_self_dual_cones_agree_with_projection(rng):
    # membership margin >= 0 exactly when the Euclidean projection is the identity
    from isac_ee.hermitian import smat

    cone = Cone("PSD", 0, 6, side=3)
    for _ in range(50):
        v = rng.normal(size=6)
        w, q = np.linalg.eigh(smat(v, 3))
        proj = svec((q * np.maximum(w, 0)) @ q.T)
        inside = np.allclose(proj, v, atol=1e-12)
        assert inside == (check_membership(v, cone) >= 0)
        assert check_dual_membership(v, cone) == check_membership(v, cone)
    soc = Cone("SOC", 0, 3)
    for _ in range(50):
        v = rng.normal(size=3)
        t, x = v[0], v[1:]
        nx = np.linalg.norm(x)
        proj = v if nx <= t else (np.zeros(3) if nx <= -t else 0.5 * (1 + t / nx) * np.r_[nx, x])
        assert np.allclose(proj, v) == (check_membership(v, soc) >= 0)


def test_dump_round_trip(tmp_path):
    p = log2_of_four()
    path = tmp_path / "p.json"
    p.dump(path)
    q = ConicProblem.load(path)
    assert q.dumps() == p.dumps()
    assert json.loads(p.dumps())["schema_version"] == 1


def test_malformed_problem_rejected():
    with pytest.raises(ValueError):
        ConicProblem(np.zeros(2), np.zeros((1, 2)), np.zeros(2), [Cone("NONNEG", 0, 2)])
    with pytest.raises(ValueError):
        ConicProblem(np.zeros(3), np.zeros((0, 3)), np.zeros(0), [Cone("NONNEG", 0, 2)])
    with pytest.raises(ValueError):
        Cone("EXP", 0, 4)
    with pytest.raises(ValueError):
        SolverOptions(step_fraction=1.0)


def test_max_iters_is_a_status():
    sol = solve(log2_of_four(), SolverOptions(max_iters=2))
    assert sol.status is Status.MAX_ITERS
