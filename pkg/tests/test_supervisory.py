from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_miocp
from hpmpc.efficiency import APPENDIX_B_FITS, Direction, fit_efficiency, heat_from_power, tangent_cuts
from hpmpc.sample_data import hp_samples
from hpmpc.supervisory import (
    _Builder,
    build_miocp,
    downtime_feasible,
    encode_downtime,
    enumerate_exact,
    feasible_patterns,
    heat_budget,
    problem_to_json,
    repair_downtime,
    solution_to_json,
    solve_branch_and_bound,
    validate_solution,
)

FIT = APPENDIX_B_FITS["2023-01-27"]


@lru_cache(maxsize=None)
def count_patterns(n, M, prev=0, lock=0):
    """Recursive count of on/off sequences obeying the minimum down-time."""
    if n == 0:
        return 1
    off = count_patterns(n - 1, M, 0, M - 1 if prev == 1 else max(lock - 1, 0))
    on = count_patterns(n - 1, M, 1, 0) if lock == 0 else 0
    return off + on


def patterns_satisfying_rows(N, M, history=()):
    b = _Builder(N)
    ub = np.ones(N)
    encode_downtime(b, np.arange(N), M, history, ub)
    A = np.array(b.in_rows).reshape(-1, N)
    rhs = np.array(b.in_rhs)
    bits = ((np.arange(2**N)[:, None] >> np.arange(N)) & 1).astype(float)
    ok = np.all(bits @ A.T <= rhs + 1e-9, axis=1) & np.all(bits <= ub, axis=1)
    return int(ok.sum())


def test_downtime_examples():
    assert not downtime_feasible([1, 0, 1], 3)
    assert not downtime_feasible([1, 0, 0, 1], 3)
    assert downtime_feasible([1, 0, 0, 0, 1], 3)
    assert sum(1 for _ in feasible_patterns(5, 1)) == 32
    assert patterns_satisfying_rows(6, 3) == count_patterns(6, 3)


def test_downtime_history_enters_rule():
    assert not downtime_feasible([1], 2, history=(1, 0))
    assert downtime_feasible([1], 2, history=(0, 0))
    assert patterns_satisfying_rows(3, 3, (1, 0)) == sum(1 for _ in feasible_patterns(3, 3, (1, 0)))


@given(st.lists(st.floats(0, 1), min_size=1, max_size=10), st.integers(1, 4))
def test_repair_yields_feasible_pattern(values, M):
    assert downtime_feasible(repair_downtime(values, M).astype(int), M)


def _solve(spec, x0, t0, **kw):
    mip = build_miocp(spec, x0, t0)
    return mip, solve_branch_and_bound(mip, gap_tol=1e-9, **kw)


def test_equal_price_objective_is_grid_cost():
    rng = np.random.default_rng(1)
    spec, x0, t0 = random_miocp(rng, N=2, M=1, c_cmf=np.zeros(24), buy=[0.3, 0.3],
                                sell=[0.1, 0.1], P_pv=np.zeros(2), P_app=[400.0, 600.0])
    _, sol = _solve(spec, np.array([22.0, 23.0]), t0)
    assert np.all(sol.delta == 0)
    assert sol.objective == pytest.approx(0.3 * (0.4 + 0.6), rel=1e-7)


@pytest.mark.parametrize("seed", range(8))
def test_both_curve_directions_validate(seed):
    rng = np.random.default_rng(seed)
    pf = fit_efficiency(hp_samples(0), direction=Direction.POWER_FROM_HEAT)
    for spec_kw in ({}, {"delta_op": 0, "fit": pf}):
        spec, x0, t0 = random_miocp(rng, N=4, M=2, **spec_kw)
        mip, sol = _solve(spec, x0, t0)
        rep = validate_solution(spec, x0, t0, sol)
        assert rep.ok, rep.violations
        assert rep.objective == pytest.approx(sol.objective, rel=1e-6, abs=1e-6)
        rows = mip.qp.Ain[mip.families["in:efficiency"]]
        P_col = rows[:, mip.layout["P"]].sum(axis=1)
        assert np.all(P_col < 0) if spec.delta_op == 1 else np.all(P_col == -1.0)


def test_rate_limit_only_while_running():
    rng = np.random.default_rng(2)
    spec, x0, t0 = random_miocp(rng, N=3, M=1, P_prev=2500.0, delta_history=(1,),
                                dP_min=-1000.0, unavailable=1)
    _, sol = _solve(spec, x0, t0)
    assert sol.delta[0] == 0 and sol.P_hp[0] == 0.0  # full stop from 2.5 kW is allowed
    spec, x0, t0 = random_miocp(rng, N=3, M=1, P_prev=2500.0, delta_history=(1,),
                                c_cmf=np.full(24, 50.0), T_ref=np.full(24, 24.0))
    _, sol = _solve(spec, np.array([20.5, 21.0]), t0)
    assert sol.delta[0] == 1 and sol.P_hp[0] >= 1500.0 - 1e-3


def test_relaxation_admits_half_power():
    rng = np.random.default_rng(3)
    spec, x0, t0 = random_miocp(rng, N=2, M=1)
    mip = build_miocp(spec, x0, t0)
    x = np.zeros(mip.n)
    x[mip.layout["delta"][0]] = 0.5
    x[mip.layout["P"][0]] = spec.P_max / 2 / 1000.0
    rows = mip.families["in:gated-range"]
    assert np.all(mip.qp.Ain[rows] @ x <= mip.qp.bin[rows] + 1e-12)


def test_single_cut_caps_heat():
    rng = np.random.default_rng(4)
    spec, x0, t0 = random_miocp(rng, N=2, M=1, n_cuts=1, c_cmf=np.full(24, 5.0),
                                T_ref=np.full(24, 25.0))
    _, sol = _solve(spec, np.array([20.0, 20.0]), t0)
    for k in np.flatnonzero(sol.delta):
        (cut,) = tangent_cuts(FIT, spec.P_min, spec.P_max, spec.T_a[k], 1)
        assert sol.Q_hp[k] <= cut(sol.P_hp[k]) + 1e-3


@pytest.mark.parametrize("T_a", [-10.0, 0.0, 10.0])
def test_eight_cuts_are_within_one_percent(T_a):
    P = np.linspace(200.0, 2500.0, 1000)
    curve = heat_from_power(P, T_a, FIT)
    env = np.min([c(P) for c in tangent_cuts(FIT, 200.0, 2500.0, T_a, 8)], axis=0)
    assert np.all(env >= curve - 1e-9)
    assert np.max((env - curve) / curve) <= 0.01


def test_fully_fixed_binaries_need_one_node():
    rng = np.random.default_rng(5)
    spec, x0, t0 = random_miocp(rng, N=4, M=1, unavailable=4)
    _, sol = _solve(spec, x0, t0)
    assert sol.nodes == 1 and sol.gap == 0.0
    assert np.all(sol.delta == 0) and np.all(heat_budget(sol) == 0)


@given(st.integers(0, 2**31 - 1))
def test_branch_and_bound_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    spec, x0, t0 = random_miocp(rng, N=6, M=2)
    mip = build_miocp(spec, x0, t0)
    bb = solve_branch_and_bound(mip, gap_tol=1e-9)
    ex = enumerate_exact(mip)
    assert bb.objective == pytest.approx(ex.objective, rel=1e-6, abs=1e-9)
    assert bb.nodes <= 2 ** (spec.N + 1)


def test_comfort_drives_heating_decision():
    rng = np.random.default_rng(6)
    spec, _, t0 = random_miocp(rng, N=3, M=1, T_ref=np.full(24, 23.0), c_cmf=np.full(24, 5.0),
                               P_pv=np.zeros(3))
    _, sol = _solve(spec, np.array([20.5, 20.5]), t0)
    assert sol.delta.sum() >= 1
    spec, _, t0 = random_miocp(rng, N=3, M=1, c_cmf=np.zeros(24), T_min=15.0, P_pv=np.zeros(3))
    _, sol = _solve(spec, np.array([21.0, 22.0]), t0)
    assert np.all(sol.delta == 0)


def test_slack_keeps_impossible_comfort_feasible():
    rng = np.random.default_rng(7)
    spec, x0, t0 = random_miocp(rng, N=3, M=1, T_min=30.0, T_max=31.0)
    _, sol = _solve(spec, x0, t0)
    rep = validate_solution(spec, x0, t0, sol)
    assert sol.status == "Optimal" and rep.ok and rep.slack_binding
    assert np.all(sol.slack[:, 0] > 0)


def test_budget_equals_planned_heat():
    rng = np.random.default_rng(8)
    spec, x0, t0 = random_miocp(rng, N=5, M=2, c_cmf=np.full(24, 1.0), T_ref=np.full(24, 23.0))
    _, sol = _solve(spec, x0, t0)
    assert heat_budget(sol).sum() == pytest.approx(np.sum(sol.Q_hp))


def test_validator_flags_tampered_schedule():
    rng = np.random.default_rng(9)
    spec, x0, t0 = random_miocp(rng, N=4, M=3, c_cmf=np.full(24, 2.0), T_ref=np.full(24, 23.0))
    _, sol = _solve(spec, x0, t0)
    sol.delta = np.array([1.0, 0.0, 1.0, 0.0])
    sol.P_hp = np.where(sol.delta > 0, 1000.0, 0.0)
    families = {v.family for v in validate_solution(spec, x0, t0, sol).violations}
    assert "downtime" in families


def test_hull_and_big_m_agree():
    rng = np.random.default_rng(10)
    spec, x0, t0 = random_miocp(rng, N=5, M=2)
    hull = _solve(spec, x0, t0)[1]
    from dataclasses import replace
    bigm = _solve(replace(spec, gating="big-m"), x0, t0)[1]
    assert hull.objective == pytest.approx(bigm.objective, rel=1e-6)


def test_serialization_is_stable():
    rng = np.random.default_rng(11)
    spec, x0, t0 = random_miocp(rng, N=3, M=2)
    mip, sol = _solve(spec, x0, t0)
    assert problem_to_json(mip) == problem_to_json(build_miocp(spec, x0, t0))
    assert solution_to_json(sol) == solution_to_json(_solve(spec, x0, t0)[1])


def test_spec_validation():
    rng = np.random.default_rng(12)
    with pytest.raises(ValueError, match="buy price"):
        random_miocp(rng, N=2, M=1, buy=[0.1, 0.1], sell=[0.2, 0.0])
    with pytest.raises(ValueError):
        random_miocp(rng, N=2, M=1, unavailable=3)
    with pytest.raises(ValueError):
        random_miocp(rng, N=1, M=1)
