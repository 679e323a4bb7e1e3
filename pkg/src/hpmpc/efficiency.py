"""Carnot-factor heat-pump efficiency model.

The heat output is ``Q = k + (k0 + k1·p + k2·p²)·COP_C`` with ``p`` the
electrical power in kW, ``Q`` in W and ``COP_C`` the Carnot ratio at a fixed
forward temperature.  The inverse direction ``P = k + (k0 + k1·q + k2·q²)/COP_C``
is fitted separately with ``q`` the heat in kW and ``P`` in W.  Inside the
polynomial the variable is always in kW; outputs are always in W.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import lsq_linear, minimize_scalar

__all__ = [
    "APPENDIX_B_FITS",
    "CollinearBasisError",
    "Direction",
    "HpEfficiencyFit",
    "InsufficientDataError",
    "OperatingSample",
    "SignConstraintError",
    "TangentCut",
    "carnot_cop",
    "cop",
    "fit_efficiency",
    "fits_from_records",
    "fits_to_records",
    "heat_from_power",
    "power_from_heat",
    "tangent_cut",
    "tangent_cuts",
]

KELVIN = 273.15


class Direction(str, Enum):
    HEAT_FROM_POWER = "HeatFromPower"
    POWER_FROM_HEAT = "PowerFromHeat"


@dataclass(frozen=True)
class HpEfficiencyFit:
    k: float
    k0: float
    k1: float
    k2: float
    T_F_bar: float
    direction: Direction = Direction.HEAT_FROM_POWER
    r2: float | None = None
    date: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "direction", Direction(self.direction))
        if self.direction is Direction.HEAT_FROM_POWER and not self.k2 < 0:
            raise ValueError("heat-from-power fits need k2 < 0 (concave curve)")
        if self.direction is Direction.POWER_FROM_HEAT and not self.k2 > 0:
            raise ValueError("power-from-heat fits need k2 > 0 (convex curve)")

    def scaled(self, factor: float) -> "HpEfficiencyFit":
        """Heat-from-power fit whose heat output is multiplied by ``factor``."""
        if self.direction is not Direction.HEAT_FROM_POWER:
            raise ValueError("only heat-from-power fits can be scaled")
        return replace(self, k=self.k * factor, k0=self.k0 * factor,
                       k1=self.k1 * factor, k2=self.k2 * factor)


@dataclass(frozen=True)
class OperatingSample:
    P_hp: float
    Q_hp: float
    T_a: float
    timestamp: float | None = None


# Fitted curves recorded during the field trial (columns k_0, c_0, c_1, c_2, T_F).
APPENDIX_B_FITS: dict[str, HpEfficiencyFit] = {
    row[0]: HpEfficiencyFit(*row[1:], date=row[0])
    for row in [
        ("2022-11-05", 125.256, -25.348, 414.026, -62.854, 26.63),
        ("2022-11-24", -9288.9, 2363.53, 1325.13, -210.53, 50.00),
        ("2022-12-01", -1880.2, 273.2, 694.6, -101.28, 50.00),
        ("2023-01-27", -793.31, 105.79, 509.07, -46.854, 41.00),
    ]
}


def carnot_cop(T_F, T_a):
    """Carnot ratio ``(T_F + 273.15)/(T_F − T_a)`` with temperatures in °C."""
    T_F = np.asarray(T_F, dtype=float)
    T_a = np.asarray(T_a, dtype=float)
    gap = T_F - T_a
    if np.any(gap <= 0):
        raise ValueError("forward temperature must exceed the ambient temperature")
    out = (T_F + KELVIN) / gap
    return float(out) if out.ndim == 0 else out


def _require(fit: HpEfficiencyFit, direction: Direction) -> None:
    if fit.direction is not direction:
        raise ValueError(f"fit direction is {fit.direction.value}, need {direction.value}")


def heat_from_power(P, T_a, fit: HpEfficiencyFit):
    """Heat output in W for electrical power ``P`` in W."""
    _require(fit, Direction.HEAT_FROM_POWER)
    p = np.asarray(P, dtype=float) / 1000.0
    out = fit.k + (fit.k0 + fit.k1 * p + fit.k2 * p * p) * carnot_cop(fit.T_F_bar, T_a)
    return float(out) if np.ndim(out) == 0 else out


def power_from_heat(Q, T_a, fit: HpEfficiencyFit):
    """Electrical power in W for heat output ``Q`` in W."""
    _require(fit, Direction.POWER_FROM_HEAT)
    q = np.asarray(Q, dtype=float) / 1000.0
    out = fit.k + (fit.k0 + fit.k1 * q + fit.k2 * q * q) / carnot_cop(fit.T_F_bar, T_a)
    return float(out) if np.ndim(out) == 0 else out


def cop(P, T_a, fit: HpEfficiencyFit):
    P = np.asarray(P, dtype=float)
    if np.any(P <= 0):
        raise ValueError("COP is undefined for nonpositive power")
    out = heat_from_power(P, T_a, fit) / P
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# tangent cuts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TangentCut:
    """Supporting line ``slope·x + intercept`` of the efficiency curve.

    For heat-from-power, ``x`` is power and the line bounds heat from above.
    For power-from-heat, ``x`` is heat and the line bounds power from below.
    """

    slope: float
    intercept: float
    at_point: float
    direction: Direction

    def __call__(self, x):
        return self.slope * np.asarray(x, dtype=float) + self.intercept


def tangent_cut(fit: HpEfficiencyFit, at_point: float, T_a: float) -> TangentCut:
    c = carnot_cop(fit.T_F_bar, T_a)
    v = at_point / 1000.0
    if fit.direction is Direction.HEAT_FROM_POWER:
        value = heat_from_power(at_point, T_a, fit)
        slope = c * (fit.k1 + 2 * fit.k2 * v) / 1000.0
    else:
        value = power_from_heat(at_point, T_a, fit)
        slope = (fit.k1 + 2 * fit.k2 * v) / (1000.0 * c)
    return TangentCut(slope, value - slope * at_point, float(at_point), fit.direction)


def tangent_cuts(fit: HpEfficiencyFit, lo: float, hi: float, T_a: float,
                 count: int = 8) -> list[TangentCut]:
    """``count`` tangents at equally spaced points of ``[lo, hi]``."""
    if count < 1 or hi < lo:
        raise ValueError("need count >= 1 and hi >= lo")
    points = np.linspace(lo, hi, count) if count > 1 else np.array([(lo + hi) / 2])
    return [tangent_cut(fit, float(x), T_a) for x in points]


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------


class InsufficientDataError(ValueError):
    pass


class CollinearBasisError(ValueError):
    pass


class SignConstraintError(ValueError):
    pass


T_F_BOUNDS = (25.0, 55.0)
MIN_SAMPLES = 50
MIN_AMBIENT_SPAN = 5.0


def _arrays(samples):
    if isinstance(samples, dict):
        P, Q, T_a = (np.asarray(samples[k], float) for k in ("P_hp", "Q_hp", "T_a"))
    else:
        samples = list(samples)
        P = np.array([s.P_hp for s in samples], float)
        Q = np.array([s.Q_hp for s in samples], float)
        T_a = np.array([s.T_a for s in samples], float)
    on = P > 0
    return P[on], Q[on], T_a[on]


def _design(direction, P, Q, T_a, T_F):
    c = carnot_cop(T_F, T_a)
    if direction is Direction.HEAT_FROM_POWER:
        p = P / 1000.0
        return np.column_stack([np.ones_like(p), c, c * p, c * p * p]), Q
    q = Q / 1000.0
    return np.column_stack([np.ones_like(q), 1 / c, q / c, q * q / c]), P


def _solve_linear(direction, X, y):
    """Least squares with the curvature sign constraint on the last coefficient."""
    scale = np.linalg.norm(X, axis=0)
    scale[scale == 0] = 1.0
    Xs = X / scale
    lo = np.full(4, -np.inf)
    hi = np.full(4, np.inf)
    if direction is Direction.HEAT_FROM_POWER:
        hi[3] = 0.0
    else:
        lo[3] = 0.0
    res = lsq_linear(Xs, y, bounds=(lo, hi), method="bvls", tol=1e-14)
    theta = res.x / scale
    sse = float(np.sum((X @ theta - y) ** 2))
    return theta, sse


def _fit_fixed_set(direction, P, Q, T_a, bounds):
    lo = max(bounds[0], float(np.max(T_a)) + 1.0)
    hi = bounds[1]
    if lo >= hi:
        raise InsufficientDataError("ambient temperatures leave no room for the forward temperature")

    def sse(T_F):
        return _solve_linear(direction, *_design(direction, P, Q, T_a, T_F))[1]

    grid = np.linspace(lo, hi, 31)
    values = [sse(t) for t in grid]
    i = int(np.argmin(values))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    best_T = grid[i]
    if b > a:
        res = minimize_scalar(sse, bounds=(a, b), method="bounded",
                              options={"xatol": 1e-6})
        if res.fun <= values[i]:
            best_T = float(res.x)
    theta, err = _solve_linear(direction, *_design(direction, P, Q, T_a, best_T))
    return theta, float(best_T), err


def _build_fit(direction, theta, T_F, y, sse):
    sst = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - sse / sst if sst > 0 else 1.0
    k2_limit = 1e-12 * max(1.0, float(np.max(np.abs(theta))))
    if abs(theta[3]) <= k2_limit:
        raise SignConstraintError(
            "the data favour the wrong curvature sign; the constrained optimum sits at k2 = 0"
        )
    return HpEfficiencyFit(*(float(t) for t in theta), T_F_bar=T_F, direction=direction, r2=r2)


def fit_efficiency(samples, direction=Direction.HEAT_FROM_POWER, robust: bool = False,
                   seed: int = 0, iterations: int = 200,
                   T_F_bounds: tuple[float, float] = T_F_BOUNDS) -> HpEfficiencyFit:
    """Least-squares fit of the efficiency curve, optionally with outlier rejection.

    ``samples`` is a sequence of :class:`OperatingSample` or a dict with
    arrays ``P_hp``, ``Q_hp`` and ``T_a``.  Compressor-off samples are dropped.
    The forward temperature is fitted within ``T_F_bounds`` by a 1-D search
    around an inner linear least-squares problem.  With ``robust=True`` a
    random-sample consensus pass (inlier threshold twice the median absolute
    residual of the plain fit) selects the samples for the final fit.
    """
    direction = Direction(direction)
    P, Q, T_a = _arrays(samples)
    if P.size < MIN_SAMPLES:
        raise InsufficientDataError(f"need at least {MIN_SAMPLES} on-state samples, got {P.size}")
    span = float(np.ptp(T_a))
    if span < 1e-9:
        raise CollinearBasisError("all samples share one ambient temperature; COP_C is constant")
    if span < MIN_AMBIENT_SPAN:
        raise InsufficientDataError(f"ambient span {span:.2f} K is below {MIN_AMBIENT_SPAN} K")
    theta, T_F, sse = _fit_fixed_set(direction, P, Q, T_a, T_F_bounds)
    if robust:
        X, y = _design(direction, P, Q, T_a, T_F)
        threshold = 2.0 * float(np.median(np.abs(X @ theta - y)))
        rng = np.random.default_rng(seed)
        best_mask, best_key = None, None
        subset = 6
        for _ in range(iterations):
            pick = rng.choice(P.size, size=subset, replace=False)
            cand, *_ = np.linalg.lstsq(X[pick], y[pick], rcond=None)
            resid = np.abs(X @ cand - y)
            mask = resid < threshold
            key = (int(mask.sum()), -float(np.sum(resid[mask] ** 2)))
            if best_key is None or key > best_key:
                best_key, best_mask = key, mask
        if best_mask is not None and best_mask.sum() >= 4:
            P, Q, T_a = P[best_mask], Q[best_mask], T_a[best_mask]
            theta, T_F, sse = _fit_fixed_set(direction, P, Q, T_a, T_F_bounds)
    _, y = _design(direction, P, Q, T_a, T_F)
    return _build_fit(direction, theta, T_F, y, sse)


# ---------------------------------------------------------------------------
# text records
# ---------------------------------------------------------------------------

RECORD_FIELDS = ("date", "k_0", "c_0", "c_1", "c_2", "T_F_bar", "direction", "r2")


def fits_to_records(fits: Iterable[HpEfficiencyFit]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RECORD_FIELDS)
    for f in fits:
        writer.writerow([
            f.date or "", repr(f.k), repr(f.k0), repr(f.k1), repr(f.k2), repr(f.T_F_bar),
            f.direction.value, "" if f.r2 is None else repr(f.r2),
        ])
    return buf.getvalue()


def fits_from_records(text: str) -> list[HpEfficiencyFit]:
    body = "\n".join(line for line in text.splitlines() if not line.startswith("#"))
    reader = csv.DictReader(io.StringIO(body))
    if tuple(reader.fieldnames or ()) != RECORD_FIELDS:
        raise ValueError(f"efficiency record header must be {','.join(RECORD_FIELDS)}")
    out = []
    for row in reader:
        out.append(HpEfficiencyFit(
            float(row["k_0"]), float(row["c_0"]), float(row["c_1"]), float(row["c_2"]),
            float(row["T_F_bar"]), Direction(row["direction"]),
            float(row["r2"]) if row["r2"] else None, row["date"] or None,
        ))
    return out


def fit_quality(fit: HpEfficiencyFit, P: Sequence[float], T_a: Sequence[float]) -> dict:
    """Flag operating points where modelled COP reaches the Carnot bound."""
    P = np.asarray(P, float)
    T_a = np.asarray(T_a, float)
    modelled = cop(P, T_a, fit)
    ideal = carnot_cop(fit.T_F_bar, T_a)
    bad = modelled >= ideal
    return {"points": int(P.size), "carnot_violations": int(np.sum(bad))}
