"""Comparison-day savings estimate, price-ratio statistics and the peak-block heuristic.

Each experiment day is compared with benchmark days of similar mean ambient
temperature and PV yield.  The benchmark days' hourly consumption is priced
with the experiment day's prices, and the mean of those virtual costs is the
counterfactual cost of that day.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .pricing import billable_series, corrected_series

__all__ = [
    "CoverageWarning",
    "DayRecord",
    "NoComparatorsError",
    "PeakBlockReport",
    "SavingsReport",
    "SearchBounds",
    "day_night_price_ratio",
    "day_records",
    "peak_block_analysis",
    "peak_window_share",
    "production_pattern",
    "savings_report",
    "select_comparison_days",
    "virtual_cost",
]


class CoverageWarning(UserWarning):
    """An experiment day found no comparable benchmark day."""


class NoComparatorsError(ValueError):
    """No experiment day has a comparator."""


def _hours(v, name, allow_none=False):
    if v is None and allow_none:
        return None
    a = np.asarray(v, dtype=float).ravel()
    if a.size != 24:
        raise ValueError(f"{name} must have 24 hourly entries, got {a.size}")
    return a


@dataclass(frozen=True)
class DayRecord:
    """Hourly data of one day.

    ``E_G`` is the billable heat-pump electricity (kWh).  The optional
    ``E_HP`` (total heat-pump electricity) and ``dE_G`` (net grid import,
    negative when exporting) enable the PV re-netting of comparator days.
    """

    date: str
    E_G: np.ndarray
    T_a: np.ndarray
    c_buy: np.ndarray
    E_PV: np.ndarray
    E_HP: np.ndarray | None = None
    dE_G: np.ndarray | None = None

    def __post_init__(self):
        for name in ("E_G", "T_a", "c_buy", "E_PV"):
            object.__setattr__(self, name, _hours(getattr(self, name), name))
        for name in ("E_HP", "dE_G"):
            object.__setattr__(self, name, _hours(getattr(self, name), name, allow_none=True))
        for name in ("E_G", "E_PV", "E_HP"):
            a = getattr(self, name)
            if a is not None and np.any(a < 0):
                raise ValueError(f"{name} must be nonnegative")

    @property
    def mean_T_a(self) -> float:
        return float(np.mean(self.T_a))

    @property
    def total_PV(self) -> float:
        return float(np.sum(self.E_PV))

    @property
    def cost(self) -> float:
        return float(self.c_buy @ self.E_G)

    @property
    def complete(self) -> bool:
        arrays = [self.E_G, self.T_a, self.c_buy, self.E_PV]
        return all(np.all(np.isfinite(a)) for a in arrays)


@dataclass(frozen=True)
class SearchBounds:
    dT_dn: float = 0.5
    dT_up: float = 0.5
    dPV_dn: float = 2.0
    dPV_up: float = 2.0

    def __post_init__(self):
        if min(self.dT_dn, self.dT_up, self.dPV_dn, self.dPV_up) < 0:
            raise ValueError("search bounds must be nonnegative")


def select_comparison_days(exp: DayRecord, bench: Sequence[DayRecord],
                           b: SearchBounds = SearchBounds()) -> list[DayRecord]:
    """Benchmark days whose mean temperature and PV yield fall inside the bounds."""
    if not bench:
        raise ValueError("benchmark set is empty")
    T, PV = exp.mean_T_a, exp.total_PV
    tol = 1e-9  # keeps boundary days inside despite rounding of the means
    return [d for d in bench
            if -b.dT_dn - tol <= d.mean_T_a - T <= b.dT_up + tol
            and -b.dPV_dn - tol <= d.total_PV - PV <= b.dPV_up + tol]


def virtual_cost(cmp: DayRecord, exp_prices) -> float:
    """Comparator consumption priced at the experiment day's prices."""
    return float(_hours(exp_prices, "exp_prices") @ cmp.E_G)


def _corrected_cost(cmp: DayRecord, exp: DayRecord) -> float:
    if cmp.E_HP is None or exp.E_HP is None or exp.dE_G is None:
        return virtual_cost(cmp, exp.c_buy)
    return float(exp.c_buy @ corrected_series(cmp.E_HP, exp.E_HP, exp.dE_G))


@dataclass
class DayComparison:
    date: str
    mean_T_a: float
    total_PV: float
    exp_cost: float
    comparator_costs: list[float]

    @property
    def mean_virtual_cost(self) -> float:
        return float(np.mean(self.comparator_costs))

    @property
    def saving(self) -> float:
        return self.mean_virtual_cost - self.exp_cost


@dataclass
class SavingsReport:
    days: list[DayComparison]
    excluded: list[str] = field(default_factory=list)

    @property
    def benchmark_cost(self) -> float:
        return float(sum(d.mean_virtual_cost for d in self.days))

    @property
    def experiment_cost(self) -> float:
        return float(sum(d.exp_cost for d in self.days))

    @property
    def reduction(self) -> float:
        return self.benchmark_cost - self.experiment_cost

    @property
    def saving_rate(self) -> float:
        return self.reduction / self.benchmark_cost if self.benchmark_cost > 0 else 0.0

    def accumulated_saving_rate(self) -> np.ndarray:
        bench = np.cumsum([d.mean_virtual_cost for d in self.days])
        exp = np.cumsum([d.exp_cost for d in self.days])
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(bench > 0, (bench - exp) / bench, 0.0)

    def summary(self) -> dict:
        return {
            "days_compared": len(self.days),
            "days_excluded": len(self.excluded),
            "benchmark_cost": self.benchmark_cost,
            "experiment_cost": self.experiment_cost,
            "reduction": self.reduction,
            "saving_rate": self.saving_rate,
        }


def savings_report(exp_days: Sequence[DayRecord], bench: Sequence[DayRecord],
                   b: SearchBounds = SearchBounds()) -> SavingsReport:
    """Per-day and accumulated savings against comparison days.

    Days with missing data are dropped on both sides.  Experiment days without
    comparators are excluded and listed in ``excluded``.
    """
    bench = [d for d in bench if d.complete]
    if not bench:
        raise ValueError("benchmark set has no complete day")
    rows, excluded = [], []
    for e in exp_days:
        if not e.complete:
            excluded.append(e.date)
            continue
        cmp = select_comparison_days(e, bench, b)
        if not cmp:
            warnings.warn(f"no comparison day for {e.date} (mean T_a {e.mean_T_a:.2f}, "
                          f"PV {e.total_PV:.2f} kWh)", CoverageWarning, stacklevel=2)
            excluded.append(e.date)
            continue
        rows.append(DayComparison(e.date, e.mean_T_a, e.total_PV, e.cost,
                                  [_corrected_cost(c, e) for c in cmp]))
    if not rows:
        raise NoComparatorsError("no experiment day has a comparison day within the bounds")
    return SavingsReport(rows, excluded)


def day_night_price_ratio(prices) -> float:
    """Mean price 06:00–24:00 over mean price 00:00–06:00."""
    p = _hours(prices, "prices")
    if np.any(p < 0):
        raise ValueError("prices must be nonnegative")
    night = float(np.mean(p[:6]))
    if night <= 0:
        raise ZeroDivisionError("night mean price is zero")
    return float(np.mean(p[6:])) / night


def production_pattern(days: Sequence[DayRecord], use: str = "E_G") -> np.ndarray:
    """Share of consumption per hour of day, summed over ``days``."""
    total = np.sum([getattr(d, use) for d in days], axis=0)
    s = total.sum()
    return total / s if s > 0 else np.zeros(24)


def peak_window_share(days: Sequence[DayRecord], window=(17, 21), use: str = "E_G") -> float:
    return float(production_pattern(days, use)[window[0]:window[1]].sum())


@dataclass(frozen=True)
class PeakBlockReport:
    peak_energy: float  # kWh moved out of the peak window
    peak_cost: float
    shifted_cost: float
    assumed_cop: float
    mpc_reduction: float | None

    @property
    def reduction(self) -> float:
        return self.peak_cost - self.shifted_cost

    @property
    def heat_moved(self) -> float:
        return self.peak_energy * self.assumed_cop

    @property
    def fraction_of_mpc(self) -> float | None:
        if self.mpc_reduction is None or self.mpc_reduction == 0:
            return None
        return self.reduction / self.mpc_reduction


def peak_block_analysis(bench_days: Sequence[DayRecord],
                        exp_days: Sequence[DayRecord] | None = None,
                        mpc_reduction: float | None = None, assumed_cop: float = 4.2,
                        peak=(17, 21), post=(21, 25)) -> PeakBlockReport:
    """What blocking the heat pump in the peak window alone would have saved.

    The benchmark's peak-window electricity (less the experiment's, when
    given) is moved unchanged to the post-peak window and re-priced at that
    window's mean price.  ``post`` may extend past midnight (hours ≥ 24 take
    the next day's prices; the last day wraps to its own early hours).
    ``assumed_cop`` only converts the moved electricity to heat for the
    report; equal efficiency in both windows is assumed.
    """
    if not bench_days:
        raise ValueError("no benchmark days")
    if not (0 <= peak[0] < peak[1] <= 24 and peak[1] <= post[0] < post[1] <= 48):
        raise ValueError("peak and post-peak windows must be ordered hour ranges")
    if exp_days is not None and len(exp_days) != len(bench_days):
        raise ValueError("experiment and benchmark days must pair up")
    energy = cost = shifted = 0.0
    for i, d in enumerate(bench_days):
        E = d.E_G[peak[0]:peak[1]]
        c = d.c_buy[peak[0]:peak[1]]
        if exp_days is not None:
            E = E - exp_days[i].E_G[peak[0]:peak[1]]
        nxt = bench_days[i + 1] if i + 1 < len(bench_days) else d
        prices = np.concatenate([d.c_buy, nxt.c_buy])[post[0]:post[1]]
        energy += float(E.sum())
        cost += float(c @ E)
        shifted += float(E.sum()) * float(prices.mean())
    return PeakBlockReport(energy, cost, shifted, assumed_cop, mpc_reduction)


def day_records(trace, start_day: int = 0, tag: str = "day") -> list[DayRecord]:
    """Split a simulation trace (or its hourly column mapping) into day records."""
    H = trace.hourly if hasattr(trace, "hourly") else trace
    n = H["E_HP"].size // 24
    net = H["E_IM"] - H["E_EX"]
    billable = billable_series(H["E_HP"], net)
    out = []
    for d in range(start_day, n):
        s = slice(d * 24, (d + 1) * 24)
        out.append(DayRecord(f"{tag}-{d:03d}", billable[s], H["T_a"][s], H["buy"][s],
                             H["E_PV"][s], H["E_HP"][s], net[s]))
    return out
