"""Weather series, PV output regression and forecast-error injection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "InsufficientDaylightError",
    "PvModel",
    "WeatherSeries",
    "fit_pv_model",
    "perturb_forecast",
    "predict_pv",
    "pv_features",
]

PERTURBATIONS = ("cloud-bias", "temp-bias", "cloud-flip")


@dataclass(frozen=True)
class WeatherSeries:
    """Per-step weather; ``timestamps`` are seconds since an arbitrary epoch."""

    timestamps: np.ndarray
    T_a: np.ndarray
    I_dir: np.ndarray
    cloud: np.ndarray

    def __post_init__(self):
        arrays = [np.asarray(getattr(self, n), dtype=float).ravel()
                  for n in ("timestamps", "T_a", "I_dir", "cloud")]
        n = arrays[0].size
        if any(a.size != n for a in arrays):
            raise ValueError("weather columns must have equal length")
        ts, T_a, I_dir, cloud = arrays
        if n > 1 and np.any(np.diff(ts) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if np.any((cloud < 0) | (cloud > 1)):
            raise ValueError("cloud fraction must lie in [0, 1]")
        if np.any(I_dir < 0):
            raise ValueError("irradiance must be nonnegative")
        for name, arr in zip(("timestamps", "T_a", "I_dir", "cloud"), arrays):
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return self.timestamps.size

    def slice(self, start: int, stop: int) -> "WeatherSeries":
        return WeatherSeries(self.timestamps[start:stop], self.T_a[start:stop],
                             self.I_dir[start:stop], self.cloud[start:stop])


def pv_features(w: WeatherSeries) -> np.ndarray:
    return np.column_stack([np.ones(len(w)), w.I_dir, w.I_dir * (1.0 - w.cloud)])


@dataclass(frozen=True)
class PvModel:
    coefficients: np.ndarray
    P_peak: float

    def __post_init__(self):
        coef = np.asarray(self.coefficients, dtype=float).ravel()
        if coef.size != 3:
            raise ValueError("PV model needs three coefficients")
        if not self.P_peak > 0:
            raise ValueError("P_peak must be positive")
        object.__setattr__(self, "coefficients", coef)


class InsufficientDaylightError(ValueError):
    pass


def fit_pv_model(history: WeatherSeries, P_pv, P_peak: float = 4000.0,
                 min_days: float = 7.0) -> PvModel:
    """Least-squares PV regression on ``{1, I_dir, I_dir·(1−cloud)}``.

    At least ``min_days`` distinct days must contain daylight samples.
    """
    P_pv = np.asarray(P_pv, dtype=float).ravel()
    if P_pv.size != len(history):
        raise ValueError("PV history must match the weather series in length")
    daylight = history.I_dir > 0
    days = np.unique(np.floor(history.timestamps[daylight] / 86400.0))
    if days.size < min_days:
        raise InsufficientDaylightError(
            f"need daylight samples on at least {min_days:g} days, found {days.size}"
        )
    X = pv_features(history)
    coef, *_ = np.linalg.lstsq(X, P_pv, rcond=None)
    return PvModel(coef, P_peak)


def predict_pv(m: PvModel, w: WeatherSeries) -> np.ndarray:
    return np.clip(pv_features(w) @ m.coefficients, 0.0, m.P_peak)


def perturb_forecast(w: WeatherSeries, kind: str, magnitude: float, seed: int = 0) -> WeatherSeries:
    """Inject a forecast error.

    ``cloud-bias`` adds ``magnitude`` to the cloud fraction (clipped to [0, 1]),
    ``temp-bias`` adds ``magnitude`` K to the ambient temperature, and
    ``cloud-flip`` replaces ``c`` by ``1 − c`` at each step with probability
    ``magnitude``.
    """
    if kind not in PERTURBATIONS:
        raise ValueError(f"kind must be one of {PERTURBATIONS}")
    T_a, cloud = w.T_a.copy(), w.cloud.copy()
    if kind == "cloud-bias":
        cloud = np.clip(cloud + magnitude, 0.0, 1.0)
    elif kind == "temp-bias":
        T_a = T_a + magnitude
    else:
        if not 0 <= magnitude <= 1:
            raise ValueError("flip probability must lie in [0, 1]")
        flip = np.random.default_rng(seed).random(len(w)) < magnitude
        cloud = np.where(flip, 1.0 - cloud, cloud)
    return WeatherSeries(w.timestamps.copy(), T_a, w.I_dir.copy(), cloud)
