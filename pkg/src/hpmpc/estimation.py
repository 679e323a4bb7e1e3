"""Linear Kalman filter for the unmeasured floor temperature."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .building import ContinuousStateSpace, DiscreteStateSpace

__all__ = [
    "FILTER_PERIOD",
    "KalmanState",
    "NoiseConfig",
    "kf_predict",
    "innovation",
    "kf_update",
    "observability_matrix",
]

FILTER_PERIOD = 300.0
_PSD_TOL = 1e-10


def _check_psd(P: np.ndarray, name: str) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.shape != (2, 2) or not np.all(np.isfinite(P)):
        raise ValueError(f"{name} must be a finite 2x2 matrix")
    if np.max(np.abs(P - P.T)) > 1e-9 * max(1.0, np.max(np.abs(P))):
        raise ValueError(f"{name} must be symmetric")
    if np.min(np.linalg.eigvalsh(P)) < -_PSD_TOL:
        raise ValueError(f"{name} must be positive semidefinite")
    return P


@dataclass(frozen=True)
class NoiseConfig:
    """Process covariance per filter step (K²) and measurement variance (K²).

    Defaults are artifact tuning: the room measurement is trusted, the floor
    state is smoothed.
    """

    Q_proc: np.ndarray = field(default_factory=lambda: np.diag([1e-4, 1e-5]))
    R_meas: float = 1e-2

    def __post_init__(self):
        object.__setattr__(self, "Q_proc", _check_psd(self.Q_proc, "Q_proc"))
        if not (np.isfinite(self.R_meas) and self.R_meas > 0):
            raise ValueError("R_meas must be positive")


@dataclass(frozen=True)
class KalmanState:
    x: np.ndarray
    P: np.ndarray
    timestamp: float = 0.0

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).reshape(2)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "P", _check_psd(self.P, "P"))


def observability_matrix(ss: ContinuousStateSpace, tol: float = 1e-10):
    """Return ``([C; C A], rank)`` for the room-temperature output."""
    C = np.asarray(ss.C, dtype=float).reshape(1, -1)
    O = np.vstack([C, C @ ss.A])
    s = np.linalg.svd(O, compute_uv=False)
    rank = int(np.sum(s > tol * max(1.0, s[0])))
    return O, rank


def kf_predict(s: KalmanState, u: float, d, model: DiscreteStateSpace,
               noise: NoiseConfig) -> KalmanState:
    x = model.Ad @ s.x + model.Bd[:, 0] * float(u) + model.Ed @ np.asarray(d, dtype=float)
    P = model.Ad @ s.P @ model.Ad.T + noise.Q_proc
    P = 0.5 * (P + P.T)
    return KalmanState(x, P, s.timestamp + model.dt)


def kf_update(s: KalmanState, y: float, noise: NoiseConfig) -> KalmanState:
    """Measurement update with ``C = [1, 0]`` in Joseph form."""
    if not np.isfinite(y):
        raise ValueError("measurement must be finite")
    P = s.P
    innovation_var = P[0, 0] + noise.R_meas
    gain = P[:, 0] / innovation_var
    x = s.x + gain * (float(y) - s.x[0])
    I_KC = np.eye(2)
    I_KC[:, 0] -= gain
    P_new = I_KC @ P @ I_KC.T + noise.R_meas * np.outer(gain, gain)
    P_new = 0.5 * (P_new + P_new.T)
    return KalmanState(x, P_new, s.timestamp)


def innovation(s: KalmanState, y: float, noise: NoiseConfig) -> tuple[float, float]:
    """Innovation and its variance for a prior state."""
    return float(y) - float(s.x[0]), float(s.P[0, 0] + noise.R_meas)
