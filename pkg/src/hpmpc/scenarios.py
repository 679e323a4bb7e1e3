"""Synthetic winter scenarios and comfort presets for desk-scale studies."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .building import ThermalParams
from .forecasting import PvModel, WeatherSeries, perturb_forecast, predict_pv
from .pricing import DEFAULT_TARIFF, PriceInputs, TariffSchedule, buy_price, sell_price

__all__ = [
    "COMFORT_LEVELS",
    "ComfortLevel",
    "DEFAULT_HOUSE",
    "DEFAULT_PV",
    "Scenario",
    "ScenarioGapError",
    "comfort_level",
    "synthetic_scenario",
]

DEFAULT_HOUSE = ThermalParams(C_r=3.5e6, C_f=9.2e7, U_r=2300.0, U_a=90.0, g_s1=3.0, g_s2=1.0)
# 4 kWp array: 0.4 W per W/m² of raw irradiance plus 3.6 W per W/m² of unclouded irradiance
DEFAULT_PV = PvModel(np.array([0.0, 0.4, 3.6]), 4000.0)


class ScenarioGapError(ValueError):
    """Scenario series do not cover the requested horizon."""


@dataclass(frozen=True)
class ComfortLevel:
    name: str
    T_ref: np.ndarray
    c_cmf: np.ndarray

    def __post_init__(self):
        for attr in ("T_ref", "c_cmf"):
            v = np.asarray(getattr(self, attr), dtype=float).ravel()
            if v.size != 24:
                raise ValueError(f"{attr} must have 24 hourly entries")
            object.__setattr__(self, attr, v)
        if np.any(self.c_cmf < 0):
            raise ValueError("comfort prices must be nonnegative")


def _profile(day: float, night: float, start: int = 6, stop: int = 22) -> np.ndarray:
    h = np.arange(24)
    return np.where((h >= start) & (h < stop), day, night).astype(float)


COMFORT_LEVELS: dict[int, ComfortLevel] = {
    1: ComfortLevel("level-1", _profile(21.0, 20.5), _profile(0.05, 0.02)),
    2: ComfortLevel("level-2", _profile(21.5, 21.0), _profile(0.08, 0.04)),
    3: ComfortLevel("level-3", _profile(22.0, 21.5), _profile(0.12, 0.06)),
    4: ComfortLevel("level-4", _profile(22.5, 22.0), _profile(0.20, 0.10)),
}


def comfort_level(level: int = 4) -> ComfortLevel:
    try:
        return COMFORT_LEVELS[int(level)]
    except KeyError:
        raise ValueError(f"comfort level must be one of {sorted(COMFORT_LEVELS)}") from None


@dataclass(frozen=True)
class Scenario:
    """Hourly inputs for a closed-loop run starting at midnight.

    ``weather`` is the truth seen by the plant, ``forecast`` what the
    supervisor plans with.  Every hourly series must cover ``days·24`` hours
    plus the planning horizon.
    """

    weather: WeatherSeries
    forecast: WeatherSeries
    spot: np.ndarray
    P_app: np.ndarray
    days: int
    comfort: ComfortLevel = field(default_factory=comfort_level)
    house: ThermalParams = DEFAULT_HOUSE
    pv: PvModel = DEFAULT_PV
    co2: np.ndarray | None = None
    tariff: TariffSchedule = DEFAULT_TARIFF
    c_co2: float = 0.0
    seed: int = 0

    def __post_init__(self):
        spot = np.asarray(self.spot, float).ravel()
        object.__setattr__(self, "spot", spot)
        object.__setattr__(self, "P_app", np.asarray(self.P_app, float).ravel())
        co2 = np.zeros_like(spot) if self.co2 is None else np.asarray(self.co2, float).ravel()
        object.__setattr__(self, "co2", co2)
        if self.days < 1:
            raise ValueError("a scenario needs at least one day")
        n = len(self.weather)
        for name, size in (("forecast", len(self.forecast)), ("spot", spot.size),
                           ("P_app", self.P_app.size), ("co2", co2.size)):
            if size != n:
                raise ValueError(f"{name} has {size} hours, weather has {n}")

    @property
    def hours(self) -> int:
        return len(self.weather)

    def require(self, horizon: int) -> None:
        need = self.days * 24 + horizon
        if self.hours < need:
            raise ScenarioGapError(f"scenario covers {self.hours} h, run needs {need} h "
                                   f"({self.days} days plus a {horizon} h horizon)")

    def prices(self) -> PriceInputs:
        return PriceInputs(self.spot, self.co2, self.tariff, c_co2=self.c_co2)

    def buy(self) -> np.ndarray:
        return buy_price(self.prices())

    def sell(self) -> np.ndarray:
        return sell_price(self.prices())

    def pv_true(self) -> np.ndarray:
        return predict_pv(self.pv, self.weather)

    def pv_forecast(self) -> np.ndarray:
        return predict_pv(self.pv, self.forecast)


def _daily_weather(rng, hours, T_mean_range, I_peak, cloud_range):
    days = int(np.ceil(hours / 24))
    lo, hi = T_mean_range
    # daily means wander inside the range so neighbouring days resemble each other
    T_day = np.empty(days)
    T_day[0] = rng.uniform(lo, hi)
    for d in range(1, days):
        T_day[d] = np.clip(T_day[d - 1] + rng.normal(0.0, 0.35 * (hi - lo)), lo, hi)
    cloud_day = rng.uniform(*cloud_range, size=days)
    h = np.arange(days * 24)
    hod = h % 24
    d = h // 24
    T_a = T_day[d] + 2.5 * np.sin(2 * np.pi * (hod - 8) / 24) + rng.normal(0, 0.3, h.size)
    clear = np.where((hod >= 8) & (hod <= 16), np.sin(np.pi * (hod - 8) / 8), 0.0)
    I_dir = I_peak * np.maximum(clear, 0.0)
    cloud = np.clip(cloud_day[d] + rng.normal(0, 0.1, h.size), 0.0, 1.0)
    return T_a[:hours], I_dir[:hours], cloud[:hours]


def _spot(rng, hours, night, day):
    hod = np.arange(hours) % 24
    shape = np.where(hod < 6, night, day)
    shape = shape + np.where((hod >= 7) & (hod < 10), 0.03, 0.0) + np.where(
        (hod >= 16) & (hod < 20), 0.05, 0.0)
    level = np.repeat(rng.lognormal(0.0, 0.15, size=hours // 24 + 1), 24)[:hours]
    return np.round(shape * level, 5)


def synthetic_scenario(days: int = 10, seed: int = 0, horizon: int = 48,
                       T_mean_range: tuple[float, float] = (2.0, 8.0),
                       cloud_range: tuple[float, float] = (0.1, 0.9),
                       I_peak: float = 300.0, spot_night: float = 0.03,
                       spot_day: float = 0.12, comfort: int = 4,
                       house: ThermalParams = DEFAULT_HOUSE,
                       forecast_error: tuple[str, float] | None = None) -> Scenario:
    """Winter scenario with a cheap night and an expensive evening.

    The default price levels put the day/night ratio of the buy price well
    above three.  ``forecast_error`` is an optional ``(kind, magnitude)``
    handed to :func:`hpmpc.forecasting.perturb_forecast`.
    """
    rng = np.random.default_rng(seed)
    hours = days * 24 + horizon
    T_a, I_dir, cloud = _daily_weather(rng, hours, T_mean_range, I_peak, cloud_range)
    weather = WeatherSeries(np.arange(hours) * 3600.0, T_a, I_dir, cloud)
    forecast = weather
    if forecast_error is not None:
        forecast = perturb_forecast(weather, forecast_error[0], forecast_error[1], seed + 1)
    spot = _spot(rng, hours, spot_night, spot_day)
    hod = np.arange(hours) % 24
    P_app = 250.0 + np.where((hod >= 17) & (hod < 22), 400.0, 0.0) + np.where(
        (hod >= 7) & (hod < 9), 300.0, 0.0)
    return Scenario(weather, forecast, spot, P_app, days, comfort_level(comfort), house,
                    seed=seed)
