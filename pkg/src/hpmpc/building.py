"""Two-state lumped thermal model of the house (room air and floor slab)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import least_squares

from .numerics import zoh_discretize

__all__ = [
    "ContinuousStateSpace",
    "DegenerateExcitationError",
    "DiscreteStateSpace",
    "InsufficientDataError",
    "ThermalFit",
    "ThermalParams",
    "ZoneSnapshot",
    "assemble_state_space",
    "default_initial_guess",
    "discretize",
    "disturbance_vector",
    "fit_thermal_params",
    "solar_gain",
    "steady_state",
    "weighted_room_temperature",
]

PARAM_NAMES = ("C_r", "C_f", "U_r", "U_a", "g_s1", "g_s2")


@dataclass(frozen=True)
class ThermalParams:
    """Room/floor capacities (J/K), conductances (W/K) and solar apertures (m²)."""

    C_r: float
    C_f: float
    U_r: float
    U_a: float
    g_s1: float
    g_s2: float

    def __post_init__(self):
        for name in PARAM_NAMES:
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be strictly positive, got {value}")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in PARAM_NAMES], dtype=float)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "ThermalParams":
        return cls(*(float(v) for v in values))


@dataclass(frozen=True)
class ContinuousStateSpace:
    """``x' = A x + B u + E d`` with ``x = (T_r, T_f)``, ``u = Q_hp`` and
    ``d = (T_a, I_dir·(1-cloud), I_dir)``; output ``y = C x = T_r``."""

    A: np.ndarray
    B: np.ndarray
    E: np.ndarray
    C: np.ndarray = field(default_factory=lambda: np.array([[1.0, 0.0]]))


@dataclass(frozen=True)
class DiscreteStateSpace:
    Ad: np.ndarray
    Bd: np.ndarray
    Ed: np.ndarray
    dt: float
    C: np.ndarray = field(default_factory=lambda: np.array([[1.0, 0.0]]))


@dataclass(frozen=True)
class ZoneSnapshot:
    areas: np.ndarray
    temperatures: np.ndarray
    references: np.ndarray | None = None

    def __post_init__(self):
        areas = np.asarray(self.areas, dtype=float).ravel()
        temps = np.asarray(self.temperatures, dtype=float).ravel()
        if areas.size == 0:
            raise ValueError("zone snapshot has no rooms")
        if areas.size != temps.size:
            raise ValueError("areas and temperatures must have equal length")
        if np.any(areas <= 0):
            raise ValueError("room areas must be strictly positive")
        object.__setattr__(self, "areas", areas)
        object.__setattr__(self, "temperatures", temps)
        if self.references is not None:
            refs = np.asarray(self.references, dtype=float).ravel()
            if refs.size != areas.size:
                raise ValueError("references must have one entry per room")
            object.__setattr__(self, "references", refs)


def weighted_room_temperature(z: ZoneSnapshot) -> float:
    """Floor-area weighted mean of the room temperatures."""
    return float(np.dot(z.areas, z.temperatures) / np.sum(z.areas))


def solar_gain(I_dir, cloud, g_s1: float, g_s2: float):
    """Solar heat gain in W from direct irradiance and cloud fraction.

    The first aperture sees the cloud-attenuated irradiance, the second the
    raw forecast value.  Works elementwise on arrays.
    """
    I_dir = np.asarray(I_dir, dtype=float)
    cloud = np.asarray(cloud, dtype=float)
    if np.any((cloud < 0) | (cloud > 1)):
        raise ValueError("cloud fraction must lie in [0, 1]")
    if np.any(I_dir < 0):
        raise ValueError("irradiance must be nonnegative")
    gain = g_s1 * I_dir * (1.0 - cloud) + g_s2 * I_dir
    return float(gain) if gain.ndim == 0 else gain


def disturbance_vector(T_a, I_dir, cloud) -> np.ndarray:
    """Stack ``(T_a, I_dir·(1-cloud), I_dir)``; rows are time steps for array input."""
    T_a, I_dir, cloud = np.broadcast_arrays(
        np.asarray(T_a, float), np.asarray(I_dir, float), np.asarray(cloud, float)
    )
    return np.stack([T_a, I_dir * (1.0 - cloud), I_dir], axis=-1)


def assemble_state_space(p: ThermalParams) -> ContinuousStateSpace:
    A = np.array(
        [
            [-(p.U_r + p.U_a) / p.C_r, p.U_r / p.C_r],
            [p.U_r / p.C_f, -p.U_r / p.C_f],
        ]
    )
    B = np.array([[0.0], [1.0 / p.C_f]])
    E = np.array([[p.U_a / p.C_r, p.g_s1 / p.C_r, p.g_s2 / p.C_r], [0.0, 0.0, 0.0]])
    return ContinuousStateSpace(A, B, E)


def discretize(p: ThermalParams | ContinuousStateSpace, dt: float) -> DiscreteStateSpace:
    ss = assemble_state_space(p) if isinstance(p, ThermalParams) else p
    Ad, Bd, Ed = zoh_discretize(ss.A, ss.B, ss.E, dt)
    return DiscreteStateSpace(Ad, Bd, Ed, float(dt))


def steady_state(p: ThermalParams, Q_hp: float, d) -> np.ndarray:
    """Equilibrium ``(T_r, T_f)`` under constant heat input and disturbance."""
    ss = assemble_state_space(p)
    rhs = ss.B[:, 0] * Q_hp + ss.E @ np.asarray(d, dtype=float)
    return np.linalg.solve(ss.A, -rhs)


# ---------------------------------------------------------------------------
# grey-box fit
# ---------------------------------------------------------------------------


class InsufficientDataError(ValueError):
    pass


class DegenerateExcitationError(ValueError):
    pass


@dataclass
class ThermalFit:
    params: ThermalParams
    rmse: dict[int, float]
    initial_guess: ThermalParams
    cost: float
    nfev: int
    n_segments: int
    notes: list[str] = field(default_factory=list)


def default_initial_guess(floor_area: float = 230.0, ceiling_height: float = 2.5) -> ThermalParams:
    """Rough physical starting point for the fit.

    The slab is taken as 0.4 MJ/(m²K), the air capacity is inflated five-fold
    for furniture, and the envelope conductance follows from a 20 kWh/m²/yr
    demand spread over about 72 000 degree-hours.
    """
    C_f = floor_area * 0.4e6
    C_r = floor_area * ceiling_height * 1.2 * 1005.0 * 5.0
    U_a = floor_area * 20e3 / 72_000.0
    U_r = floor_area * 10.0
    return ThermalParams(C_r, C_f, U_r, U_a, 2.0, 1.0)


_FIT_COLUMNS = ("T_r", "Q_hp", "T_a", "I_dir", "cloud")
_MAX_INTERP_GAP = 4


def _segments(series: Mapping[str, Sequence[float]]) -> list[dict[str, np.ndarray]]:
    missing = [c for c in _FIT_COLUMNS if c not in series]
    if missing:
        raise ValueError(f"series lacks columns {missing}")
    data = {c: np.asarray(series[c], dtype=float) for c in _FIT_COLUMNS}
    n = len(data["T_r"])
    if any(len(v) != n for v in data.values()):
        raise ValueError("all series columns must have equal length")
    bad = np.zeros(n, dtype=bool)
    for v in data.values():
        bad |= ~np.isfinite(v)
    # split on long gaps, interpolate the short ones
    cuts = []
    start = None
    idx = np.arange(n)
    run_start = None
    for i in range(n + 1):
        is_bad = i < n and bad[i]
        if is_bad and run_start is None:
            run_start = i
        if not is_bad and run_start is not None:
            if i - run_start > _MAX_INTERP_GAP:
                cuts.append((run_start, i))
            run_start = None
    bounds = []
    start = 0
    for a, b in cuts:
        if a > start:
            bounds.append((start, a))
        start = b
    if start < n:
        bounds.append((start, n))
    segments = []
    for a, b in bounds:
        seg = {}
        good = ~bad[a:b]
        if good.sum() < 2:
            continue
        for c, v in data.items():
            part = v[a:b].copy()
            part[~good] = np.interp(idx[a:b][~good], idx[a:b][good], part[good])
            seg[c] = part
        segments.append(seg)
    return segments


class _Predictor:
    """Kalman-filtered multi-step predictions of room temperature."""

    def __init__(self, segment, dt, horizons, q_proc, r_meas, burn_in):
        self.y = segment["T_r"]
        self.u = segment["Q_hp"]
        self.d = disturbance_vector(segment["T_a"], segment["I_dir"], segment["cloud"])
        self.dt = dt
        self.horizons = tuple(sorted(horizons))
        self.q = q_proc
        self.r = r_meas
        self.burn_in = burn_in

    def errors(self, params: ThermalParams) -> dict[int, np.ndarray]:
        m = discretize(params, self.dt)
        Ad, bd = m.Ad, m.Bd[:, 0]
        forcing = self.u[:, None] * bd[None, :] + self.d @ m.Ed.T
        a11, a12, a21, a22 = Ad[0, 0], Ad[0, 1], Ad[1, 0], Ad[1, 1]
        q1, q2 = self.q
        r = self.r
        y = self.y
        n = y.size
        filtered = np.empty((n, 2))
        x1, x2 = y[0], y[0]
        p11, p12, p22 = r, 0.0, 4.0
        for t in range(n):
            if t:
                f1, f2 = forcing[t - 1]
                x1, x2 = a11 * x1 + a12 * x2 + f1, a21 * x1 + a22 * x2 + f2
                n11 = a11 * (a11 * p11 + a12 * p12) + a12 * (a11 * p12 + a12 * p22) + q1
                n12 = a21 * (a11 * p11 + a12 * p12) + a22 * (a11 * p12 + a12 * p22)
                n22 = a21 * (a21 * p11 + a22 * p12) + a22 * (a21 * p12 + a22 * p22) + q2
                p11, p12, p22 = n11, n12, n22
            s = p11 + r
            k1, k2 = p11 / s, p12 / s
            innov = y[t] - x1
            x1, x2 = x1 + k1 * innov, x2 + k2 * innov
            p11, p12, p22 = (1 - k1) * p11, (1 - k1) * p12, p22 - k2 * p12
            filtered[t] = x1, x2
        out = {}
        X = filtered[self.burn_in:]
        start = self.burn_in
        for j in range(1, self.horizons[-1] + 1):
            rows = n - start - j
            if rows <= 0:
                break
            X = X[:rows] @ Ad.T + forcing[start + j - 1 : start + j - 1 + rows]
            if j in self.horizons:
                out[j] = y[start + j : start + j + rows] - X[:, 0]
        return out


def fit_thermal_params(
    series: Mapping[str, Sequence[float]],
    dt: float = 300.0,
    horizons: Sequence[int] = (1, 12, 72),
    initial: ThermalParams | None = None,
    q_proc: tuple[float, float] = (1e-4, 1e-5),
    r_meas: float = 1e-2,
) -> ThermalFit:
    """Fit the six thermal parameters to measured room temperature.

    Parameters
    ----------
    series : mapping
        Equal-length columns ``T_r`` (°C), ``Q_hp`` (W), ``T_a`` (°C),
        ``I_dir`` (W/m²) and ``cloud`` (0..1) sampled every ``dt`` seconds.
        NaN marks a missing sample; runs of up to four are interpolated and
        longer gaps split the data into independent segments.
    horizons : sequence of int
        Prediction horizons (in samples) whose squared errors form the loss.
        Each horizon contributes with equal total weight.

    Returns
    -------
    ThermalFit
        Parameters, RMSE per horizon and the initial guess used.

    Raises
    ------
    InsufficientDataError
        Fewer than 48 h of usable samples.
    DegenerateExcitationError
        Heat input or room temperature never varies, so the parameters
        cannot be identified.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    segments = _segments(series)
    burn_in = int(round(6 * 3600 / dt))
    horizons = tuple(sorted(int(h) for h in horizons))
    usable = [s for s in segments if s["T_r"].size > burn_in + horizons[-1] + 1]
    total = sum(s["T_r"].size for s in usable) * dt
    if total < 48 * 3600:
        raise InsufficientDataError(
            f"need at least 48 h of gap-free samples, got {total / 3600:.1f} h"
        )
    all_q = np.concatenate([s["Q_hp"] for s in usable])
    all_y = np.concatenate([s["T_r"] for s in usable])
    if np.std(all_q) < 1e-6 * max(1.0, np.max(np.abs(all_q))) or np.std(all_y) < 1e-9:
        raise DegenerateExcitationError(
            "heat input or room temperature is constant; parameters are not identifiable"
        )
    guess = initial or default_initial_guess()
    predictors = [_Predictor(s, dt, horizons, q_proc, r_meas, burn_in) for s in usable]
    counts = {h: sum(max(0, s["T_r"].size - burn_in - h) for s in usable) for h in horizons}

    def residuals(theta):
        params = ThermalParams.from_array(np.exp(theta))
        parts = []
        for pred in predictors:
            errs = pred.errors(params)
            for h in horizons:
                if h in errs:
                    parts.append(errs[h] / np.sqrt(counts[h]))
        return np.concatenate(parts)

    theta0 = np.log(guess.as_array())
    sol = least_squares(residuals, theta0, method="trf", x_scale=1.0, xtol=1e-12,
                        ftol=1e-12, gtol=1e-12, max_nfev=400)
    params = ThermalParams.from_array(np.exp(sol.x))
    rmse = {}
    for h in horizons:
        sq = [np.sum(p.errors(params).get(h, np.zeros(0)) ** 2) for p in predictors]
        rmse[h] = float(np.sqrt(np.sum(sq) / max(counts[h], 1)))
    notes = [f"initial guess {guess}", f"optimizer status {sol.status}: {sol.message}"]
    return ThermalFit(params, rmse, guess, float(sol.cost), int(sol.nfev), len(usable), notes)
