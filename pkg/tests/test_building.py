import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from hpmpc.building import (
    DegenerateExcitationError,
    InsufficientDataError,
    ThermalParams,
    ZoneSnapshot,
    assemble_state_space,
    discretize,
    disturbance_vector,
    fit_thermal_params,
    solar_gain,
    steady_state,
    weighted_room_temperature,
)
from hpmpc.sample_data import house_samples
from hpmpc.scenarios import DEFAULT_HOUSE

positive = st.floats(1e-2, 1e8, allow_nan=False)
params = st.builds(ThermalParams, positive, positive, positive, positive, positive, positive)


@pytest.mark.parametrize("areas, temps, expected", [
    ([10, 10], [20, 22], 21.0),
    ([30, 10], [20, 24], 21.0),
    ([15], [22.5], 22.5),
])
def test_weighted_room_temperature(areas, temps, expected):
    assert weighted_room_temperature(ZoneSnapshot(areas, temps)) == pytest.approx(expected)


def test_zone_snapshot_validation():
    with pytest.raises(ValueError):
        ZoneSnapshot([10, 0], [20, 21])
    with pytest.raises(ValueError):
        ZoneSnapshot([10], [20, 21])


def test_solar_gain_cases():
    assert solar_gain(800, 1.0, 2.0, 0.0) == 0.0
    assert solar_gain(0.0, 0.3, 2.0, 1.0) == 0.0
    assert solar_gain(500, 0.5, 2.0, 1.0) == pytest.approx(1000.0)
    with pytest.raises(ValueError):
        solar_gain(100, 1.5, 1, 1)


def test_unit_parameters_give_hand_matrix():
    ss = assemble_state_space(ThermalParams(1, 1, 1, 1, 1, 1))
    assert np.array_equal(ss.A, [[-2, 1], [1, -1]])
    assert ss.B[0, 0] == 0.0


@given(params)
def test_state_matrix_is_hurwitz_and_heat_enters_floor(p):
    ss = assemble_state_space(p)
    assert np.trace(ss.A) < 0 and np.linalg.det(ss.A) > 0
    assert ss.B[0, 0] == 0.0 and ss.B[1, 0] > 0


def test_invalid_params_rejected():
    with pytest.raises(ValueError):
        ThermalParams(1, 1, 0, 1, 1, 1)


def test_hourly_discretization_matches_adaptive_integration():
    ss = assemble_state_space(DEFAULT_HOUSE)
    m = discretize(DEFAULT_HOUSE, 3600.0)
    x0, u, d = np.array([21.0, 24.0]), 3000.0, np.array([2.0, 150.0, 300.0])
    sol = solve_ivp(lambda t, x: ss.A @ x + ss.B[:, 0] * u + ss.E @ d, (0, 3600), x0,
                    method="DOP853", rtol=1e-13, atol=1e-12)
    got = m.Ad @ x0 + m.Bd[:, 0] * u + m.Ed @ d
    assert np.allclose(got, sol.y[:, -1], rtol=1e-8)


def test_steady_state_is_fixed_point():
    d = np.array([0.0, 50.0, 100.0])
    x = steady_state(DEFAULT_HOUSE, 2000.0, d)
    m = discretize(DEFAULT_HOUSE, 3600.0)
    assert np.allclose(m.Ad @ x + m.Bd[:, 0] * 2000.0 + m.Ed @ d, x, atol=1e-9)
    # heat balance: loss through the envelope equals the inputs
    p = DEFAULT_HOUSE
    gain = solar_gain(100.0, 0.5, p.g_s1, p.g_s2)
    assert p.U_a * (x[0] - 0.0) == pytest.approx(2000.0 + gain, rel=1e-9)


def test_disturbance_vector_layout():
    d = disturbance_vector([1.0, 2.0], [100.0, 0.0], [0.25, 0.5])
    assert np.allclose(d, [[1.0, 75.0, 100.0], [2.0, 0.0, 0.0]])


def test_fit_recovers_noiseless_parameters():
    fit = fit_thermal_params(house_samples(seed=0, noise=0.0, gaps=False))
    rel = np.abs(fit.params.as_array() / DEFAULT_HOUSE.as_array() - 1.0)
    assert np.max(rel) < 0.02
    assert fit.n_segments == 1


def test_fit_with_gaps_reports_segments():
    fit = fit_thermal_params(house_samples(seed=1))
    assert fit.n_segments == 2
    assert set(fit.rmse) == {1, 12, 72}


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(20))
def test_one_step_rmse_under_sensor_noise(seed):
    fit = fit_thermal_params(house_samples(seed=seed, noise=0.05, gaps=False))
    assert fit.rmse[1] <= 0.1


def test_constant_series_is_degenerate():
    n = 1000
    flat = {"T_r": np.full(n, 20.0), "Q_hp": np.zeros(n), "T_a": np.full(n, 20.0),
            "I_dir": np.zeros(n), "cloud": np.zeros(n)}
    with pytest.raises(DegenerateExcitationError):
        fit_thermal_params(flat)


def test_short_series_rejected():
    data = {k: v[:100] for k, v in house_samples(seed=0).items()}
    with pytest.raises(InsufficientDataError):
        fit_thermal_params(data)
