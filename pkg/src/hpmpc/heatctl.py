"""Mid-level heat controller.

Tracks the hourly heat budget by commanding an artificial ambient
temperature to the heat pump's own weather compensation, and blocks the
compressor through long zero-budget stretches.  A colder artificial ambient
makes the heat pump produce more heat.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

__all__ = [
    "HeatCtlCommand",
    "HeatCtlConfig",
    "HeatCtlState",
    "Measurements",
    "Mode",
    "PidGains",
    "PidState",
    "budget_step",
    "detect_defrost",
    "mpc_track_step",
    "pid_step",
    "schedule_block_release",
    "step",
]

T_ART_MIN, T_ART_MAX = -30.0, 40.0


class Mode(str, Enum):
    ACTIVE = "ACTIVE"
    STANDBY_DEFROST = "STANDBY_DEFROST"
    STANDBY_DHW = "STANDBY_DHW"
    BLOCKED = "BLOCKED"
    PRESTART = "PRESTART"


@dataclass(frozen=True)
class PidGains:
    kp: float = 0.005
    ki: float = 2e-5
    kd: float = 0.0
    out_min: float = T_ART_MIN
    out_max: float = T_ART_MAX


@dataclass(frozen=True)
class PidState:
    integral: float = 0.0
    prev_error: float | None = None


@dataclass(frozen=True)
class HeatCtlCommand:
    T_a_artificial: float
    compressor_block: bool

    def __post_init__(self):
        if not T_ART_MIN <= self.T_a_artificial <= T_ART_MAX:
            raise ValueError("artificial ambient outside the plausible sensor range")


def pid_step(dQ_meas: float, dQ_ref: float, gains: PidGains, dt: float, state: PidState,
             bias: float = 0.0) -> tuple[float, PidState]:
    """One PID update on the heat-flow error; returns the artificial ambient.

    A heat deficit (positive error) lowers the output below ``bias``.  The
    integrator is frozen whenever the output sits on a clamp and the error
    would push it further out.
    """
    error = dQ_ref - dQ_meas
    deriv = 0.0 if state.prev_error is None or dt <= 0 else (error - state.prev_error) / dt
    integral = state.integral + error * dt
    raw = bias - (gains.kp * error + gains.ki * integral + gains.kd * deriv)
    out = min(max(raw, gains.out_min), gains.out_max)
    if out != raw:
        pushing_low = raw < gains.out_min and error > 0
        pushing_high = raw > gains.out_max and error < 0
        if pushing_low or pushing_high:
            integral = state.integral
    return out, PidState(integral, error)


@dataclass(frozen=True)
class TrackerModel:
    """Short-horizon prediction model for the heat flow.

    The heat pump is assumed to answer a change of its filtered ambient with
    ``gain`` W/K, the filter having time constant ``tau``.  The optimizer
    holds one artificial ambient over ``horizon`` samples and pays
    ``move_weight`` W²/K² for moving it.
    """

    gain: float = -150.0
    tau: float = 900.0
    horizon: int = 10
    move_weight: float = 2e3


def mpc_track_step(dQ_meas: float, dQ_ref: float, T_lpf_est: float, T_prev: float,
                   model: TrackerModel, dt: float) -> float:
    """Artificial ambient minimizing the predicted tracking error over a short horizon.

    With ``u`` the command offset from the filter state, the predicted flow
    after ``j`` samples is ``dQ_meas + gain·(1 − e^{−j·dt/tau})·u``.  The
    quadratic cost in ``u`` has a closed-form minimizer, clamped to the
    sensor range.
    """
    j = np.arange(1, model.horizon + 1)
    a = model.gain * -np.expm1(-j * dt / model.tau)
    r = dQ_ref - dQ_meas
    u = (a.sum() * r + model.move_weight * (T_prev - T_lpf_est)) / (a @ a + model.move_weight)
    return float(min(max(T_lpf_est + u, T_ART_MIN), T_ART_MAX))


def budget_step(Q_ref_hour: float, E_acc: float, minutes_left: float, dQ_max: float) -> float:
    """Heat-flow setpoint (W) that spends the rest of the hour's budget evenly."""
    if not 0 < minutes_left <= 60:
        raise ValueError("minutes_left must lie in (0, 60]")
    need = (Q_ref_hour - E_acc) / (minutes_left / 60.0)
    return min(max(need, 0.0), dQ_max)


def detect_defrost(dQ_samples: Sequence[float], threshold: float = 100.0, count: int = 2) -> bool:
    """True when the last ``count`` heat-flow samples are all below ``−threshold``."""
    recent = list(dQ_samples)[-count:]
    return len(recent) == count and all(v < -threshold for v in recent)


def schedule_block_release(Q_ref: Sequence[float], lead: float = 90.0) -> np.ndarray:
    """Per-minute compressor block over the budget horizon.

    The block is lifted ``lead`` minutes before every hour with a nonzero
    budget and stays lifted through that hour, so consecutive budget hours and
    short gaps never re-block.
    """
    if not 0 <= lead <= 180:
        raise ValueError("lead must lie in [0, 180] minutes")
    Q_ref = np.asarray(Q_ref, dtype=float)
    minutes = Q_ref.size * 60
    blocked = np.ones(minutes, dtype=bool)
    lead_min = int(round(lead))
    for h in np.flatnonzero(Q_ref > 0):
        blocked[max(0, h * 60 - lead_min): (h + 1) * 60] = False
    return blocked


TRACKING = ("budget", "pid", "mpc")


@dataclass(frozen=True)
class HeatCtlConfig:
    gains: PidGains = PidGains()
    lead: float = 90.0
    dQ_max: float = 7000.0
    dt: float = 60.0
    defrost_threshold: float = 100.0
    defrost_count: int = 2
    tracking: str = "budget"  # "pid": constant hourly-average setpoint; "mpc": short-horizon tracker
    idle_T_a: float = T_ART_MAX
    tracker: TrackerModel = TrackerModel()

    def __post_init__(self):
        if self.tracking not in TRACKING:
            raise ValueError(f"tracking must be one of {TRACKING}")


@dataclass(frozen=True)
class Measurements:
    dQ_meas: float
    dhw_active: bool = False
    T_a_meas: float = 0.0


@dataclass(frozen=True)
class HeatCtlState:
    mode: Mode = Mode.BLOCKED
    E_acc: float = 0.0
    pid: PidState = PidState()
    minute: int = 0
    last_command: HeatCtlCommand = HeatCtlCommand(T_ART_MAX, True)
    recent_dQ: tuple[float, ...] = ()
    setpoint: float = 0.0
    shortfall: float = 0.0
    lpf_est: float | None = None  # controller-side copy of the plant's ambient filter

    @property
    def hour(self) -> int:
        return self.minute // 60


def step(meas: Measurements, Q_ref: Sequence[float], blocked: Sequence[bool],
         state: HeatCtlState, cfg: HeatCtlConfig = HeatCtlConfig()):
    """Advance the controller by one sample.

    ``meas.dQ_meas`` is the mean heat flow over the sample that just ended,
    which belongs to ``state.minute``.  ``Q_ref`` (Wh per hour) and the block
    timeline ``blocked`` (per minute) share the plan's time origin.  Returns
    the command for the next sample and the new state.
    """
    minute = state.minute
    per_step_h = cfg.dt / 3600.0
    E_acc = state.E_acc + max(meas.dQ_meas, 0.0) * per_step_h
    recent = (state.recent_dQ + (float(meas.dQ_meas),))[-cfg.defrost_count:]
    minute += int(round(cfg.dt / 60.0))
    shortfall = state.shortfall
    if minute % 60 == 0:
        hour_done = minute // 60 - 1
        if 0 <= hour_done < len(Q_ref):
            shortfall = max(0.0, float(Q_ref[hour_done]) - E_acc)
        E_acc = 0.0
    hour = minute // 60
    budget = float(Q_ref[hour]) if hour < len(Q_ref) else 0.0
    is_blocked = bool(blocked[minute]) if minute < len(blocked) else True
    last = state.last_command
    pid = state.pid
    # filter state now, after the previous command acted over the last sample
    lpf = meas.T_a_meas if state.lpf_est is None else state.lpf_est
    setpoint = 0.0

    if detect_defrost(recent, cfg.defrost_threshold, cfg.defrost_count):
        mode, cmd = Mode.STANDBY_DEFROST, last
    elif meas.dhw_active:
        mode, cmd = Mode.STANDBY_DHW, last
    elif is_blocked:
        mode, cmd = Mode.BLOCKED, HeatCtlCommand(cfg.idle_T_a, True)
    elif budget <= 0:
        mode, cmd = Mode.PRESTART, HeatCtlCommand(cfg.idle_T_a, False)
    else:
        mode = Mode.ACTIVE
        if cfg.tracking == "pid":
            setpoint = budget
        else:
            setpoint = budget_step(budget, E_acc, 60 - minute % 60, cfg.dQ_max)
        if setpoint <= 0:
            cmd = HeatCtlCommand(cfg.idle_T_a, False)
        elif cfg.tracking == "mpc":
            out = mpc_track_step(meas.dQ_meas, setpoint, lpf, last.T_a_artificial, cfg.tracker,
                                 cfg.dt)
            cmd = HeatCtlCommand(out, False)
        else:
            out, pid = pid_step(meas.dQ_meas, setpoint, cfg.gains, cfg.dt, pid, meas.T_a_meas)
            cmd = HeatCtlCommand(out, False)
    lpf_next = lpf + (cmd.T_a_artificial - lpf) * -np.expm1(-cfg.dt / cfg.tracker.tau)
    new = HeatCtlState(mode, E_acc, pid, minute, cmd, recent, setpoint, shortfall, lpf_next)
    return cmd, new

