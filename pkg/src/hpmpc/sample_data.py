"""Deterministic synthetic measurement sets for the fitting commands."""

from __future__ import annotations

import numpy as np

from .building import ThermalParams, discretize, disturbance_vector
from .efficiency import APPENDIX_B_FITS, heat_from_power
from .forecasting import WeatherSeries, predict_pv
from .scenarios import DEFAULT_HOUSE, DEFAULT_PV

__all__ = ["hp_samples", "house_samples", "pv_samples"]


def hp_samples(seed: int = 0, n: int = 400, noise: float = 30.0) -> dict[str, np.ndarray]:
    """Heat-pump operating points scattered around a known efficiency curve."""
    rng = np.random.default_rng(seed)
    fit = APPENDIX_B_FITS["2023-01-27"]
    T_a = rng.uniform(-8.0, 12.0, n)
    P = rng.uniform(300.0, 2500.0, n)
    Q = heat_from_power(P, T_a, fit) + rng.normal(0.0, noise, n)
    return {"time": np.arange(n) * 600.0, "P_hp": P, "Q_hp": Q, "T_a": T_a}


def _weather(rng, hours):
    h = np.arange(hours)
    hod = h % 24
    T_a = 3.0 + 3.0 * np.sin(2 * np.pi * (hod - 8) / 24) + np.cumsum(rng.normal(0, 0.15, hours))
    I_dir = 300.0 * np.where((hod >= 8) & (hod <= 16), np.sin(np.pi * (hod - 8) / 8), 0.0)
    cloud = np.clip(np.repeat(rng.uniform(0.1, 0.9, hours // 24 + 1), 24)[:hours]
                    + rng.normal(0, 0.05, hours), 0.0, 1.0)
    return T_a, I_dir, cloud


def house_samples(seed: int = 0, days: int = 6, house: ThermalParams = DEFAULT_HOUSE,
                  noise: float = 0.02, gaps: bool = True) -> dict[str, np.ndarray]:
    """Five-minute room-temperature log of a house driven by a random heat schedule.

    With ``gaps`` a short hole (interpolated by the fit) and a long hole
    (which splits the data) are punched into the room temperature.
    """
    rng = np.random.default_rng(seed)
    dt = 300.0
    n = days * 288
    hours = n // 12 + 1
    T_h, I_h, c_h = _weather(rng, hours)
    idx = np.arange(n) // 12
    T_a, I_dir, cloud = T_h[idx], I_h[idx], c_h[idx]
    levels = rng.choice([0.0, 1500.0, 3000.0, 4500.0], size=n // 24 + 1)
    Q = np.repeat(levels, 24)[:n]
    model = discretize(house, dt)
    d = disturbance_vector(T_a, I_dir, cloud)
    x = np.array([21.5, 23.0])
    T_r = np.empty(n)
    for k in range(n):
        T_r[k] = x[0]
        x = model.Ad @ x + model.Bd[:, 0] * Q[k] + model.Ed @ d[k]
    T_r = T_r + rng.normal(0.0, noise, n)
    if gaps:
        T_r[500:503] = np.nan
        T_r[1000:1040] = np.nan
    return {"time": np.arange(n) * dt, "T_r": T_r, "Q_hp": Q, "T_a": T_a,
            "I_dir": I_dir, "cloud": cloud}


def pv_samples(seed: int = 0, days: int = 14, noise: float = 40.0) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    hours = days * 24
    T_a, I_dir, cloud = _weather(rng, hours)
    w = WeatherSeries(np.arange(hours) * 3600.0, T_a, I_dir, cloud)
    P = np.clip(predict_pv(DEFAULT_PV, w) + rng.normal(0.0, noise, hours) * (I_dir > 0), 0, None)
    return {"time": w.timestamps, "I_dir": I_dir, "cloud": cloud, "T_a": T_a, "P_pv": P}
