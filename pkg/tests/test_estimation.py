import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st

from hpmpc.building import ContinuousStateSpace, ThermalParams, assemble_state_space, discretize
from hpmpc.estimation import (
    FILTER_PERIOD,
    KalmanState,
    NoiseConfig,
    innovation,
    kf_predict,
    kf_update,
    observability_matrix,
)
from hpmpc.scenarios import DEFAULT_HOUSE

MODEL = discretize(DEFAULT_HOUSE, FILTER_PERIOD)
D0 = np.array([0.0, 0.0, 0.0])


def test_observability_unit_params():
    O, rank = observability_matrix(assemble_state_space(ThermalParams(1, 5, 1, 1, 1, 1)))
    assert np.allclose(O, [[1, 0], [-2, 1]])
    assert rank == 2


def test_observability_lost_without_coupling():
    ss = assemble_state_space(ThermalParams(1, 1, 1, 1, 1, 1))
    A = ss.A.copy()
    A[0, 1] = A[1, 0] = 0.0
    A[0, 0], A[1, 1] = -1.0, 0.0
    _, rank = observability_matrix(ContinuousStateSpace(A, ss.B, ss.E))
    assert rank == 1


@given(st.lists(st.floats(1e-1, 1e8), min_size=6, max_size=6))
def test_observable_for_positive_params(values):
    p = ThermalParams(*values)
    O, _ = observability_matrix(assemble_state_space(p))
    # det [C; CA] is the room-floor coupling U_r / C_r, never zero
    assert np.linalg.det(O) == pytest.approx(p.U_r / p.C_r, rel=1e-9)


@given(st.lists(st.floats(0.2, 5.0), min_size=6, max_size=6))
def test_observable_rank_near_default_house(scales):
    p = ThermalParams(*(DEFAULT_HOUSE.as_array() * np.array(scales)))
    assert observability_matrix(assemble_state_space(p))[1] == 2


def test_noise_free_propagation_is_exact():
    noise = NoiseConfig(np.zeros((2, 2)), 1.0)
    s = KalmanState([21.0, 23.0], np.zeros((2, 2)))
    x = s.x.copy()
    for k in range(50):
        d = np.array([np.sin(k), 10.0, 20.0])
        s = kf_predict(s, 1500.0, d, MODEL, noise)
        x = MODEL.Ad @ x + MODEL.Bd[:, 0] * 1500.0 + MODEL.Ed @ d
        s = kf_update(s, x[0], noise)
    assert np.allclose(s.x, x, atol=1e-10)


def test_predict_from_zero_covariance():
    q = 0.3
    s = kf_predict(KalmanState([0, 0], np.zeros((2, 2))), 0.0, D0, MODEL, NoiseConfig(q * np.eye(2), 1.0))
    assert np.allclose(s.P, q * np.eye(2))
    assert s.timestamp == FILTER_PERIOD


def test_uninformative_measurement_leaves_state():
    s = KalmanState([20.0, 22.0], np.eye(2))
    out = kf_update(s, 35.0, NoiseConfig(R_meas=1e12))
    assert np.allclose(out.x, s.x, atol=1e-6)


def test_gain_by_hand():
    s = KalmanState([0.0, 0.0], np.eye(2))
    out = kf_update(s, 1.0, NoiseConfig(R_meas=1.0))
    assert np.allclose(out.x, [0.5, 0.0])  # gain [0.5, 0] times innovation 1
    assert innovation(s, 1.0, NoiseConfig(R_meas=1.0)) == (1.0, 2.0)


def test_rejects_non_psd_and_nan():
    with pytest.raises(ValueError):
        KalmanState([0, 0], [[1, 0], [0, -1]])
    with pytest.raises(ValueError):
        kf_update(KalmanState([0, 0], np.eye(2)), np.nan, NoiseConfig())


def _cycle(s, noise, model):
    return kf_update(kf_predict(s, 0.0, D0, model, noise), 0.0, noise)


def test_covariance_psd_over_many_cycles():
    noise = NoiseConfig()
    s = KalmanState([0, 0], 10 * np.eye(2))
    worst = np.inf
    for _ in range(100_000):
        s = _cycle(s, noise, MODEL)
        worst = min(worst, np.linalg.eigvalsh(s.P)[0])
    assert worst >= 0.0


@pytest.mark.parametrize("seed", range(5))
def test_riccati_fixed_point(seed):
    rng = np.random.default_rng(seed)
    p = ThermalParams(*(DEFAULT_HOUSE.as_array() * rng.uniform(0.5, 2.0, 6)))
    model = discretize(p, FILTER_PERIOD)
    noise = NoiseConfig(np.diag(rng.uniform(1e-5, 1e-3, 2)), float(rng.uniform(1e-3, 1e-1)))
    s = KalmanState([0, 0], np.eye(2))
    for _ in range(1000):
        prior = kf_predict(s, 0.0, D0, model, noise)
        s = kf_update(prior, 0.0, noise)
    C = np.array([[1.0, 0.0]])
    ref = scipy.linalg.solve_discrete_are(model.Ad.T, C.T, noise.Q_proc, np.array([[noise.R_meas]]))
    assert np.allclose(prior.P, ref, rtol=1e-8, atol=1e-12)


def test_floor_estimate_converges_in_a_day():
    noise = NoiseConfig()
    x = np.array([21.0, 24.0])
    s = KalmanState([21.0, 21.0], np.diag([0.01, 4.0]))
    steps = int(24 * 3600 / FILTER_PERIOD)
    for k in range(steps):
        hour = (k * FILTER_PERIOD / 3600) % 24
        d = np.array([3 + 3 * np.sin(2 * np.pi * hour / 24), 0.0, 0.0])
        u = 3000.0 if hour < 6 else 800.0
        s = kf_predict(s, u, d, MODEL, noise)
        x = MODEL.Ad @ x + MODEL.Bd[:, 0] * u + MODEL.Ed @ d
        s = kf_update(s, x[0], noise)
    assert abs(s.x[1] - x[1]) <= 0.05
