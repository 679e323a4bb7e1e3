"""Electricity buy/sell prices and PV-aware billing of heat-pump energy."""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from typing import Sequence

import numpy as np

__all__ = [
    "DEFAULT_TARIFF",
    "HourlyEnergy",
    "PriceInputs",
    "TariffSchedule",
    "buy_price",
    "corrected_benchmark_billable",
    "hp_billable_energy",
    "sell_price",
    "tariff_at",
    "to_euro",
]

EURO_QUANTUM = Decimal("0.000001")


def to_euro(value) -> Decimal:
    """Round a float amount to a Decimal with 1e-6 € resolution."""
    return Decimal(repr(float(value))).quantize(EURO_QUANTUM, rounding=ROUND_HALF_EVEN)


@dataclass(frozen=True)
class TariffSchedule:
    """Grid tariff as ``(start_hour, end_hour, rate)`` bands partitioning the day."""

    bands: tuple[tuple[int, int, float], ...]

    def __post_init__(self):
        bands = tuple(sorted((int(a), int(b), float(r)) for a, b, r in self.bands))
        edge = 0
        for a, b, rate in bands:
            if a != edge or b <= a:
                raise ValueError(f"tariff bands must partition [0, 24) without gaps; problem at hour {edge}")
            if rate < 0:
                raise ValueError("tariff rates must be nonnegative")
            edge = b
        if edge != 24:
            raise ValueError("tariff bands must end at hour 24")
        object.__setattr__(self, "bands", bands)

    def hourly(self) -> np.ndarray:
        return np.array([tariff_at(h, self) for h in range(24)])


DEFAULT_TARIFF = TariffSchedule(((0, 6, 0.027), (6, 17, 0.081), (17, 21, 0.26), (21, 24, 0.081)))


def tariff_at(hour: int, t: TariffSchedule = DEFAULT_TARIFF) -> float:
    if not 0 <= hour < 24:
        raise ValueError(f"hour must be in 0..23, got {hour}")
    for a, b, rate in t.bands:
        if a <= hour < b:
            return rate
    raise AssertionError("unreachable: bands partition the day")


@dataclass(frozen=True)
class PriceInputs:
    """Price components for a run of whole hours starting at ``start_hour``.

    ``spot`` and ``co2_intensity`` may cover any number of hours; the tariff
    is looked up by hour of day.
    """

    spot: np.ndarray
    co2_intensity: np.ndarray | None = None
    tariff: TariffSchedule = DEFAULT_TARIFF
    c_tso: float = 0.02
    c_co2: float = 0.0
    vat_rate: float = 0.25
    start_hour: int = 0

    def __post_init__(self):
        spot = np.asarray(self.spot, dtype=float).ravel()
        co2 = (np.zeros_like(spot) if self.co2_intensity is None
               else np.asarray(self.co2_intensity, dtype=float).ravel())
        if co2.shape != spot.shape:
            raise ValueError("co2_intensity must match spot in length")
        for name, arr in (("spot", spot), ("co2_intensity", co2)):
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise ValueError(f"{name} must be finite and nonnegative")
        for name in ("c_tso", "c_co2", "vat_rate"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        object.__setattr__(self, "spot", spot)
        object.__setattr__(self, "co2_intensity", co2)

    def tariff_series(self) -> np.ndarray:
        table = self.tariff.hourly()
        return table[(self.start_hour + np.arange(self.spot.size)) % 24]


def buy_price(p: PriceInputs) -> np.ndarray:
    """Hourly buy price in €/kWh, VAT applied to the whole sum."""
    base = p.spot + p.tariff_series() + p.co2_intensity * p.c_co2 + p.c_tso
    return base * (1.0 + p.vat_rate)


def sell_price(p: PriceInputs) -> np.ndarray:
    return p.spot.copy()


@dataclass(frozen=True)
class HourlyEnergy:
    E_IM: float
    E_EX: float
    E_PV: float
    E_HP: float

    def __post_init__(self):
        for name in ("E_IM", "E_EX", "E_PV", "E_HP"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


def hp_billable_energy(e: HourlyEnergy) -> tuple[float, float]:
    """Net import and the part of it attributable to the heat pump (kWh)."""
    net = e.E_IM - e.E_EX
    billable = 0.0 if net <= 0 else min(e.E_HP, net)
    return net, billable


def corrected_benchmark_billable(E_HP_cmp: float, E_HP_exp: float, dE_G_exp: float) -> float:
    """Billable energy of a comparator day re-netted against the experiment day's PV.

    The comparator's extra heat-pump consumption is added to the experiment
    day's net import before applying the billing rule.
    """
    if E_HP_cmp < 0 or E_HP_exp < 0:
        raise ValueError("heat-pump energies must be nonnegative")
    net = dE_G_exp + (E_HP_cmp - E_HP_exp)
    return 0.0 if net <= 0 else min(E_HP_cmp, net)


def billable_series(E_HP: Sequence[float], net_import: Sequence[float]) -> np.ndarray:
    """Vectorized billing rule over hours."""
    E_HP = np.asarray(E_HP, float)
    net = np.asarray(net_import, float)
    return np.where(net <= 0, 0.0, np.minimum(E_HP, net))


def corrected_series(E_HP_cmp, E_HP_exp, dE_G_exp) -> np.ndarray:
    E_HP_cmp = np.asarray(E_HP_cmp, float)
    net = np.asarray(dE_G_exp, float) + E_HP_cmp - np.asarray(E_HP_exp, float)
    return np.where(net <= 0, 0.0, np.minimum(E_HP_cmp, net))
