import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from conftest import random_stable_system
from hpmpc.numerics import QpProblem, QpUnboundedError, QpWorkspace, expm, rk4_step, solve_qp, zoh_discretize


@given(st.integers(1, 6), st.floats(0.01, 50.0), st.integers(0, 2**31 - 1))
def test_expm_matches_scipy(n, scale, seed):
    a = np.random.default_rng(seed).normal(size=(n, n)) * scale / n
    ref = scipy.linalg.expm(a)
    assert np.allclose(expm(a), ref, rtol=1e-10, atol=1e-12 * np.max(np.abs(ref)))


def test_expm_of_zero_and_diagonal():
    assert np.array_equal(expm(np.zeros((3, 3))), np.eye(3))
    d = np.array([-1.0, 0.5, 2.0])
    assert np.allclose(expm(np.diag(d)), np.diag(np.exp(d)), rtol=1e-13)


def test_expm_rejects_non_square():
    with pytest.raises(ValueError):
        expm(np.ones((2, 3)))


def test_zoh_scalar_closed_form():
    a, b, dt = -0.3, 2.0, 4.0
    ad, bd, ed = zoh_discretize([[a]], [b], [0.0], dt)
    assert ad[0, 0] == pytest.approx(np.exp(a * dt), rel=1e-13)
    assert bd[0, 0] == pytest.approx(b * np.expm1(a * dt) / a, rel=1e-12)
    assert ed[0, 0] == 0.0


def test_zoh_rejects_bad_dt():
    with pytest.raises(ValueError):
        zoh_discretize(np.eye(2), np.ones(2), np.ones(2), 0.0)


def test_zoh_matches_adaptive_integration(rng):
    A, B, E = random_stable_system(rng)
    u, d, dt = np.array([0.7]), rng.normal(size=3), 1.3
    ad, bd, ed = zoh_discretize(A, B, E, dt)
    x0 = rng.normal(size=2)
    sol = solve_ivp(lambda t, x: A @ x + B @ u + E @ d, (0, dt), x0, rtol=1e-12, atol=1e-14)
    assert np.allclose(ad @ x0 + bd @ u + ed @ d, sol.y[:, -1], rtol=1e-9, atol=1e-12)


def test_rk4_exact_for_cubic_polynomial():
    f = lambda t, x: np.array([3 * t**2])  # noqa: E731
    assert rk4_step(f, 1.0, np.array([1.0]), 0.5)[0] == pytest.approx(1.5**3, rel=1e-14)


def _random_qp(rng, n, m_in, m_eq=1):
    L = rng.normal(size=(n, n))
    H = L @ L.T + 0.1 * np.eye(n)
    g = rng.normal(size=n)
    x_feas = rng.uniform(-0.5, 0.5, n)
    Ain = rng.normal(size=(m_in, n))
    bin_ = Ain @ x_feas + rng.uniform(0.0, 1.0, m_in)
    Aeq = rng.normal(size=(m_eq, n))
    beq = Aeq @ x_feas
    return QpProblem(H, g, Aeq, beq, Ain, bin_, None, -np.ones(n), np.ones(n))


@given(st.integers(1, 8), st.integers(0, 10), st.integers(0, 2**31 - 1))
def test_qp_routes_agree(n, m_in, seed):
    p = _random_qp(np.random.default_rng(seed), n, m_in, m_eq=min(1, n - 1))
    a = solve_qp(p, method="active-set")
    b = solve_qp(p, method="interior-point")
    assert a.optimal and b.optimal
    assert a.objective == pytest.approx(b.objective, rel=1e-6, abs=1e-6)
    assert p.max_violation(a.x) < 1e-7
    assert a.kkt_residual < 1e-6


def test_qp_known_solution():
    # min (x-2)^2 + (y-1)^2 with x + y <= 1
    p = QpProblem(2 * np.eye(2), np.array([-4.0, -2.0]), Ain=[[1.0, 1.0]], bin=[1.0])
    for method in ("active-set", "interior-point"):
        r = solve_qp(p, method=method)
        assert np.allclose(r.x, [1.0, 0.0], atol=1e-6)


def test_qp_infeasible_and_unbounded():
    infeasible = QpProblem(np.eye(1), [0.0], Ain=[[1.0], [-1.0]], bin=[-1.0, -1.0])
    assert solve_qp(infeasible, method="interior-point").status == "Infeasible"
    assert solve_qp(infeasible, method="active-set").status == "Infeasible"
    unbounded = QpProblem(np.zeros((1, 1)), [-1.0])
    with pytest.raises(QpUnboundedError):
        solve_qp(unbounded, method="interior-point")


def test_qp_rejects_indefinite_hessian():
    with pytest.raises(ValueError, match="positive semidefinite"):
        solve_qp(QpProblem(np.diag([1.0, -1.0]), np.zeros(2)))


def test_workspace_resolves_with_new_bounds(rng):
    p = _random_qp(rng, 4, 3)
    ws = QpWorkspace(p)
    lb = p.lb.copy()
    lb[0] = ub0 = 0.25
    ub = p.ub.copy()
    ub[0] = ub0
    r = ws.solve(lb, ub)
    direct = solve_qp(QpProblem(p.H, p.g, p.Aeq, p.beq, p.Ain, p.bin, None, lb, ub))
    assert r.x[0] == pytest.approx(0.25, abs=1e-7)
    assert r.objective == pytest.approx(direct.objective, rel=1e-6, abs=1e-7)
    assert ws.solve(ub + 1, ub).status == "Infeasible"
