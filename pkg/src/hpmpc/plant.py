"""Closed-loop plant: house thermodynamics plus a behavioural heat-pump emulator.

The emulated heat pump runs its own weather compensation from a low-pass
filtered ambient reading, switches on and off with heat demand, moves
between discrete compressor steps at a limited rate, honours a minimum
off-time, serves domestic hot water first and occasionally defrosts.  Its
efficiency is always evaluated at the true ambient temperature, whatever
the controller feeds to the ambient sensor.

Time steps: plant 10 s, heat controller and trace records 60 s, state
estimator 300 s, valve dispatch 900 s, supervisor hourly.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .building import ThermalParams, discretize, disturbance_vector, steady_state
from .efficiency import APPENDIX_B_FITS, HpEfficiencyFit, heat_from_power
from .estimation import NoiseConfig, KalmanState, kf_predict, kf_update
from .heatctl import HeatCtlCommand, HeatCtlConfig, HeatCtlState, Measurements, Mode
from .heatctl import schedule_block_release, step as heatctl_step
from .scenarios import Scenario
from .supervisory import (
    MiocpSpec,
    build_miocp,
    heat_budget,
    solve_branch_and_bound,
    validate_solution,
)
from .valves import FlowModel, ValveLimits, comfort_prices, flow_from_config, select_valves

__all__ = [
    "BenchmarkConfig",
    "DefrostConfig",
    "DhwConfig",
    "HpPlantConfig",
    "MpcConfig",
    "PlantOutput",
    "PlantState",
    "RoomLayout",
    "SimTrace",
    "heat_curve",
    "hp_step",
    "house_step",
    "lpf_ambient",
    "run_benchmark_controller",
    "run_closed_loop",
]

PLANT_DT = 10.0
CONTROLLER = ("mpc", "benchmark", "schedule")
EV_DEFROST, EV_DHW, EV_ROD, EV_BLOCKED = 1, 2, 4, 8
MODE_CODES = {m: i for i, m in enumerate(Mode)}


@dataclass(frozen=True)
class DhwConfig:
    times: tuple[float, ...] = (6.5, 21.5)  # hour of day
    duration: float = 1800.0
    jitter: float = 900.0
    power: float = 1500.0


@dataclass(frozen=True)
class DefrostConfig:
    """Frost builds up while the compressor runs below ``trigger_T_a``.

    A defrost starts once the frosting runtime reaches ``interval`` seconds
    scaled by a factor drawn uniformly from ``1 ± jitter``.
    """

    interval: float = 7200.0
    jitter: float = 0.2
    trigger_T_a: float = 5.0
    duration: float = 480.0
    reversed_flow: float = 1000.0

    def __post_init__(self):
        if self.interval < 0 or not 0 <= self.jitter < 1:
            raise ValueError("defrost interval must be >= 0 and jitter in [0, 1)")


def _plant_fit() -> HpEfficiencyFit:
    return APPENDIX_B_FITS["2023-01-27"].scaled(0.9)


@dataclass(frozen=True)
class HpPlantConfig:
    P_min: float = 200.0
    P_max: float = 2500.0
    capacity: float = 7000.0
    n_steps: int = 12
    rate_limit: float = 250.0  # W per plant step
    min_down: float = 600.0  # s
    lpf_tau: float = 900.0
    curve_a: float = 38.0
    curve_b: float = 0.6
    T_F_min: float = 25.0
    T_F_max: float = 55.0
    heating_limit: float = 18.0  # filtered ambient above which space heating stops
    g_fh: float = 250.0  # W/K from forward-to-floor temperature difference at full flow
    demand_on: float = 300.0
    demand_off: float = 150.0
    rod_power: float = 10000.0
    startup_penalty: float = 0.3  # share of heat lost right after a compressor start
    startup_time: float = 600.0
    start_delay: tuple[float, float] = (3600.0, 7200.0)
    block_space_heating_only: bool = False
    low_flow_cutout: float | None = None
    dhw: DhwConfig = DhwConfig()
    defrost: DefrostConfig = DefrostConfig()
    efficiency: HpEfficiencyFit = field(default_factory=_plant_fit)
    dt: float = PLANT_DT

    def __post_init__(self):
        if not 0 < self.P_min < self.P_max:
            raise ValueError("need 0 < P_min < P_max")
        if self.n_steps < 2:
            raise ValueError("need at least two compressor steps")
        if not self.start_delay[0] <= self.start_delay[1]:
            raise ValueError("start delay bounds are reversed")
        if self.rate_limit <= 0 or self.lpf_tau <= 0:
            raise ValueError("rate limit and filter time constant must be positive")
        if not 0 <= self.startup_penalty < 1 or self.startup_time < 0:
            raise ValueError("start-up penalty must lie in [0, 1) and its duration be >= 0")

    @property
    def steps(self) -> np.ndarray:
        return np.linspace(self.P_min, self.P_max, self.n_steps)


def lpf_ambient(T_in: float, state: float, tau: float, dt: float) -> float:
    """Exact first-order filter update for an input held over ``dt``."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    return state + (T_in - state) * -math.expm1(-dt / tau)


def heat_curve(T_a_filtered, cfg: HpPlantConfig = HpPlantConfig()):
    """Target forward temperature; linear in the filtered ambient, clamped."""
    out = np.clip(cfg.curve_a - cfg.curve_b * np.asarray(T_a_filtered, float),
                  cfg.T_F_min, cfg.T_F_max)
    return float(out) if out.ndim == 0 else out


@dataclass
class PlantState:
    """Mutable heat-pump state; :func:`hp_step` advances it in place."""

    T_lpf: float
    P: float = 0.0
    ready_at: float = 0.0
    blocked: bool = False
    off_since: float = -math.inf
    defrost_until: float = -math.inf
    frost: float = 0.0
    frost_limit: float | None = None
    started_at: float = -math.inf


@dataclass(frozen=True)
class PlantOutput:
    dQ: float
    P: float
    P_dhw: float
    events: int
    T_F_ref: float


def hp_step(command: HeatCtlCommand, T_a_true: float, T_return: float, flow: float,
            dhw_request: bool, state: PlantState, cfg: HpPlantConfig,
            rng: np.random.Generator, t: float) -> PlantOutput:
    """Advance the heat pump by ``cfg.dt`` seconds starting at time ``t``.

    ``flow`` is the circuit flow as a fraction of the all-open flow and
    ``T_return`` the water return temperature (the floor temperature here).
    """
    dt = cfg.dt
    state.T_lpf = lpf_ambient(command.T_a_artificial, state.T_lpf, cfg.lpf_tau, dt)
    T_F_ref = heat_curve(state.T_lpf, cfg)
    blocked = command.compressor_block
    if blocked:
        state.ready_at = math.inf
    elif state.blocked:
        state.ready_at = t + rng.uniform(*cfg.start_delay)
    state.blocked = blocked
    events = EV_BLOCKED if blocked else 0

    if dhw_request:
        if state.P > 0:
            state.P = 0.0
        state.defrost_until = -math.inf
        if blocked and not cfg.block_space_heating_only:
            return PlantOutput(0.0, 0.0, cfg.rod_power, events | EV_DHW | EV_ROD, T_F_ref)
        return PlantOutput(0.0, 0.0, cfg.dhw.power, events | EV_DHW, T_F_ref)

    if state.P > 0 and t < state.defrost_until:
        return PlantOutput(-cfg.defrost.reversed_flow, state.P, 0.0, events | EV_DEFROST, T_F_ref)

    demand = 0.0
    if state.T_lpf <= cfg.heating_limit:
        demand = cfg.g_fh * flow * (T_F_ref - T_return)
    if cfg.low_flow_cutout is not None and flow < cfg.low_flow_cutout:
        demand = 0.0
    can_run = not blocked and t >= state.ready_at
    if state.P > 0:
        want = demand > cfg.demand_off
    else:
        want = demand > cfg.demand_on and t - state.off_since >= cfg.min_down
    if not (can_run and want):
        if state.P > 0:
            state.off_since = t
        state.P = 0.0
        return PlantOutput(0.0, 0.0, 0.0, events, T_F_ref)

    fit = cfg.efficiency
    if state.P == 0:
        state.P = cfg.P_min
        state.started_at = t
    else:
        steps = cfg.steps
        reachable = steps[np.abs(steps - state.P) <= cfg.rate_limit + 1e-9]
        heat = heat_from_power(reachable, T_a_true, fit)
        state.P = float(reachable[int(np.argmin(np.abs(heat - demand)))])
    df = cfg.defrost
    if df.interval > 0 and T_a_true < df.trigger_T_a:
        if state.frost_limit is None:
            state.frost_limit = df.interval * rng.uniform(1 - df.jitter, 1 + df.jitter)
        state.frost += dt
    if state.frost_limit is not None and state.frost >= state.frost_limit:
        state.frost, state.frost_limit = 0.0, None
        state.defrost_until = t + df.duration
        return PlantOutput(-cfg.defrost.reversed_flow, state.P, 0.0, events | EV_DEFROST, T_F_ref)
    dQ = max(heat_from_power(state.P, T_a_true, fit), 0.0)
    if t - state.started_at < cfg.startup_time:
        dQ *= 1.0 - cfg.startup_penalty
    return PlantOutput(dQ, state.P, 0.0, events, T_F_ref)


def house_step(x, dQ: float, d, dt: float, p: ThermalParams) -> tuple[float, float]:
    """RK4 step of the two-node house with inputs held over ``dt``."""
    if dt > 60.0:
        raise ValueError("house_step is meant for steps of at most 60 s")
    T_a, I_clear, I_raw = d
    drive_r = p.U_a * T_a + p.g_s1 * I_clear + p.g_s2 * I_raw
    a_rr, a_rf = -(p.U_r + p.U_a) / p.C_r, p.U_r / p.C_r
    a_fr, a_ff = p.U_r / p.C_f, -p.U_r / p.C_f
    br, bf = drive_r / p.C_r, dQ / p.C_f

    def f(r, fl):
        return a_rr * r + a_rf * fl + br, a_fr * r + a_ff * fl + bf

    r0, f0 = float(x[0]), float(x[1])
    k1 = f(r0, f0)
    k2 = f(r0 + 0.5 * dt * k1[0], f0 + 0.5 * dt * k1[1])
    k3 = f(r0 + 0.5 * dt * k2[0], f0 + 0.5 * dt * k2[1])
    k4 = f(r0 + dt * k3[0], f0 + dt * k3[1])
    return (r0 + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
            f0 + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]))


@dataclass(frozen=True)
class RoomLayout:
    """Floor-heating circuits: per-room offset from the mean room temperature."""

    areas: tuple[float, ...] = (30, 25, 20, 20, 18, 18, 16, 15, 14, 30, 24)
    references: tuple[float, ...] = (22.5, 22.5, 22.5, 21.0, 22.5, 22.5, 22.5, 22.5, 22.5,
                                     19.0, 22.5)
    offsets: tuple[float, ...] = (0.2, 0.1, -0.1, -0.3, 0.0, 0.15, -0.2, 0.05, -0.05, -1.5, 0.1)

    def __post_init__(self):
        if not len(self.areas) == len(self.references) == len(self.offsets):
            raise ValueError("room layout columns differ in length")

    @property
    def M(self) -> int:
        return len(self.areas)


@dataclass(frozen=True)
class MpcConfig:
    horizon: int = 48
    gap_tol: float = 1e-4
    node_limit: int = 3000
    fit: HpEfficiencyFit = field(default_factory=lambda: APPENDIX_B_FITS["2023-01-27"])
    model: ThermalParams | None = None  # None: the scenario's house
    min_down: int = 2
    dP: float = 1000.0
    noise: NoiseConfig = NoiseConfig()
    sensor_noise: float = 0.05
    heatctl: HeatCtlConfig = HeatCtlConfig()
    valve_weight: float = 1.0
    flow_weight: float = 1e4
    max_close: int = 3
    force_open_margin: float = 1.0
    design_heat: float = 5000.0
    appliance_forecast: bool = False  # plan with the scenario's appliance load instead of zero


@dataclass(frozen=True)
class BenchmarkConfig:
    hysteresis: float = 0.5


@dataclass
class SimTrace:
    """Per-minute records, hourly aggregates and run metadata."""

    minute: dict[str, np.ndarray]
    hourly: dict[str, np.ndarray]
    meta: dict

    @property
    def days(self) -> int:
        return self.hourly["E_HP"].size // 24


def _dhw_windows(days: int, cfg: DhwConfig, rng) -> list[tuple[float, float]]:
    out = []
    for d in range(days):
        for h in cfg.times:
            start = d * 86400.0 + h * 3600.0 + rng.uniform(-cfg.jitter, cfg.jitter)
            out.append((start, start + cfg.duration))
    return sorted(out)


def _initial_state(p: ThermalParams, T_a: float, T_r: float = 22.0) -> np.ndarray:
    # heat input that holds the room at T_r without sun
    Q = p.U_a * (T_r - T_a)
    return steady_state(p, Q, [T_a, 0.0, 0.0])


def run_benchmark_controller(scenario: Scenario, seed: int = 0, **kwargs) -> SimTrace:
    return run_closed_loop(scenario, "benchmark", seed, **kwargs)


def run_closed_loop(scenario: Scenario, controller: str = "mpc", seed: int = 0,
                    plant: HpPlantConfig = HpPlantConfig(), mpc: MpcConfig = MpcConfig(),
                    bench: BenchmarkConfig = BenchmarkConfig(),
                    rooms: RoomLayout = RoomLayout(), flow: FlowModel | None = None,
                    schedule=None) -> SimTrace:
    """Simulate ``scenario.days`` days under the chosen controller.

    ``controller`` is ``"mpc"`` (supervisor, valve dispatch and heat
    controller), ``"benchmark"`` (weather compensation with room thermostats,
    price-blind) or ``"schedule"`` (heat controller following the fixed hourly
    heat budget ``schedule`` in Wh, all valves open).
    """
    if controller not in CONTROLLER:
        raise ValueError(f"controller must be one of {CONTROLLER}")
    horizon = mpc.horizon if controller == "mpc" else 0
    scenario.require(horizon)
    if controller == "schedule":
        schedule = np.asarray(schedule, float).ravel()
        if schedule.size < scenario.days * 24:
            raise ValueError("schedule must cover every simulated hour")
    fm = flow or FlowModel.saturating(rooms.M)
    if fm.M != rooms.M:
        raise ValueError("flow model and room layout disagree on the circuit count")
    q_all = flow_from_config(np.ones(fm.M), fm)

    ss_plant, ss_dhw, ss_sensor = np.random.SeedSequence(seed).spawn(3)
    rng = np.random.default_rng(ss_plant)
    sensor = np.random.default_rng(ss_sensor)
    days = scenario.days
    n_hours, n_min = days * 24, days * 1440
    dhw = _dhw_windows(days, plant.dhw, np.random.default_rng(ss_dhw))
    W = scenario.weather
    house = scenario.house
    buy, sell = scenario.buy(), scenario.sell()
    pv_true = scenario.pv_true()
    sub = int(round(60.0 / plant.dt))

    x = _initial_state(house, float(W.T_a[0]))
    T_r, T_f = float(x[0]), float(x[1])
    pstate = PlantState(T_lpf=float(W.T_a[0]))

    refs = np.asarray(rooms.references, float)
    offsets = np.asarray(rooms.offsets, float)
    v = np.ones(fm.M)
    flow_frac = 1.0

    # controller-side state
    ctl_params = mpc.model or house
    Q_abs = np.zeros(n_hours + horizon + 1)
    blocked_abs = np.ones((n_hours + horizon + 1) * 60, dtype=bool)
    if controller == "schedule":
        Q_abs[:n_hours] = schedule[:n_hours]
        blocked_abs[: n_hours * 60] = schedule_block_release(Q_abs[:n_hours],
                                                             mpc.heatctl.lead)
    hstate = HeatCtlState()
    command = HeatCtlCommand(float(np.clip(W.T_a[0], -30.0, 40.0)), False)
    model_est = discretize(ctl_params, 300.0)
    model_plan = discretize(ctl_params, 3600.0)
    kf = KalmanState(np.array([T_r, T_f]), np.diag([0.1, 1.0]), 0.0)
    plan_delta = np.zeros(0)
    executed_delta: list[int] = []
    P_prev = 0.0
    plan_P_hour = np.zeros(n_hours)
    slack_binding = np.zeros(n_hours, dtype=bool)
    plan_status: list[str] = []
    est_u = 0.0
    est_dsum = np.zeros(3)

    rec = {k: np.zeros(n_min) for k in (
        "time", "T_r", "T_f", "T_a", "T_a_art", "T_lpf", "dQ", "P_HP", "P_DHW",
        "setpoint", "flow")}
    rec_int = {k: np.zeros(n_min, dtype=np.int64) for k in ("mode", "events", "valves")}
    dhw_idx = 0
    bits = (1 << np.arange(fm.M)).astype(np.int64)

    pv_fc = scenario.pv_forecast()
    F = scenario.forecast

    def replan(h: int) -> None:
        nonlocal plan_delta, P_prev
        N = mpc.horizon
        sl = slice(h, h + N)
        dist = disturbance_vector(F.T_a[sl], F.I_dir[sl], F.cloud[sl])
        spec = MiocpSpec(
            N, model_plan, mpc.fit, buy[sl], sell[sl], dist,
            scenario.comfort.T_ref, scenario.comfort.c_cmf,
            P_pv=pv_fc[sl], P_app=scenario.P_app[sl] if mpc.appliance_forecast else None,
            P_min=plant.P_min, P_max=plant.P_max, dP_min=-mpc.dP, dP_max=mpc.dP,
            min_down=mpc.min_down, P_prev=P_prev,
            delta_history=tuple(executed_delta[-mpc.min_down:]),
            unavailable=int(blocked_abs[h * 60]),
        )
        mip = build_miocp(spec, kf.x, h % 24)
        hint = np.concatenate([plan_delta[1:], [0.0]]) if plan_delta.size == N else None
        sol = solve_branch_and_bound(mip, mpc.gap_tol, mpc.node_limit, hint=hint)
        report = validate_solution(spec, kf.x, h % 24, sol)
        slack_binding[h] = report.slack_binding
        plan_status.append(sol.status)
        plan_delta = sol.delta.copy()
        executed_delta.append(int(sol.delta[0]))
        P_prev = float(sol.P_hp[0])
        plan_P_hour[h] = P_prev
        Q_abs[h:h + N] = heat_budget(sol)
        blocked_abs[h * 60:(h + N) * 60] = schedule_block_release(Q_abs[h:h + N],
                                                                  mpc.heatctl.lead)

    if controller == "mpc":
        replan(0)
    if controller != "benchmark":
        command = HeatCtlCommand(40.0, bool(blocked_abs[0]))

    for h in range(n_hours):
        T_a0, T_a1 = float(W.T_a[h]), float(W.T_a[h + 1]) if h + 1 < len(W) else float(W.T_a[h])
        d_clear = float(W.I_dir[h] * (1 - W.cloud[h]))
        d_raw = float(W.I_dir[h])
        for m in range(60):
            M = h * 60 + m
            t_min = M * 60.0
            frac = m / 60.0
            T_a_now = T_a0 + (T_a1 - T_a0) * frac
            if controller == "mpc" and m % 15 == 0:
                T_rooms = T_r + offsets
                c = comfort_prices(T_rooms, refs, mpc.valve_weight)
                share = Q_abs[h] / mpc.design_heat
                q_ref = q_all * min(max(share, 0.3), 1.0)
                forced = frozenset(int(i) for i in np.flatnonzero(
                    T_rooms < refs - mpc.force_open_margin))
                dec = select_valves(q_ref, c, fm, ValveLimits(mpc.max_close, forced), v,
                                    mpc.flow_weight)
                v = dec.v
                flow_frac = dec.q / q_all
            elif controller == "benchmark":
                T_rooms = T_r + offsets
                v = np.where(T_rooms < refs - bench.hysteresis, 1.0,
                             np.where(T_rooms > refs + bench.hysteresis, 0.0, v))
                flow_frac = flow_from_config(v, fm) / q_all if v.any() else 0.0
                command = HeatCtlCommand(min(max(T_a_now, -30.0), 40.0), False)

            sum_dQ = sum_P = sum_dhw = 0.0
            events = 0
            dhw_on = False
            for s in range(sub):
                t = t_min + s * plant.dt
                while dhw_idx < len(dhw) and dhw[dhw_idx][1] <= t:
                    dhw_idx += 1
                request = dhw_idx < len(dhw) and dhw[dhw_idx][0] <= t
                T_a_sub = T_a0 + (T_a1 - T_a0) * (t - h * 3600.0) / 3600.0
                out = hp_step(command, T_a_sub, T_f, flow_frac, request, pstate, plant, rng, t)
                T_r, T_f = house_step((T_r, T_f), out.dQ, (T_a_sub, d_clear, d_raw),
                                      plant.dt, house)
                sum_dQ += out.dQ
                sum_P += out.P
                sum_dhw += out.P_dhw
                events |= out.events
                dhw_on = dhw_on or request
            dQ_mean, P_mean, dhw_mean = sum_dQ / sub, sum_P / sub, sum_dhw / sub
            rec["time"][M] = t_min
            rec["T_r"][M], rec["T_f"][M], rec["T_a"][M] = T_r, T_f, T_a_now
            rec["T_a_art"][M], rec["T_lpf"][M] = command.T_a_artificial, pstate.T_lpf
            rec["dQ"][M], rec["P_HP"][M], rec["P_DHW"][M] = dQ_mean, P_mean, dhw_mean
            rec["flow"][M] = flow_frac
            rec_int["events"][M] = events
            rec_int["valves"][M] = int(v.astype(np.int64) @ bits)
            rec_int["mode"][M] = MODE_CODES[hstate.mode] if controller != "benchmark" else -1
            rec["setpoint"][M] = hstate.setpoint

            if controller == "mpc":
                est_u += dQ_mean
                est_dsum += (T_a_now, d_clear, d_raw)
                if (M + 1) % 5 == 0:
                    kf = kf_predict(kf, est_u / 5, est_dsum / 5, model_est, mpc.noise)
                    y = T_r + sensor.normal(0.0, mpc.sensor_noise) if mpc.sensor_noise else T_r
                    kf = kf_update(kf, y, mpc.noise)
                    est_u = 0.0
                    est_dsum[:] = 0.0
                if m == 59 and h + 1 < n_hours:
                    replan(h + 1)  # new budget takes over exactly at the hour boundary
            if controller != "benchmark":
                meas = Measurements(dQ_mean, dhw_on, T_a_now)
                # plan clock counts from the start of the run; minute M just ended
                command, hstate = heatctl_step(meas, Q_abs, blocked_abs, hstate, mpc.heatctl)

    hourly = _hourly(rec, buy[:n_hours], sell[:n_hours], pv_true[:n_hours],
                     scenario.P_app[:n_hours], Q_abs[:n_hours], W)
    hourly["slack_binding"] = slack_binding.astype(np.int64)
    hourly["plan_P"] = plan_P_hour
    meta = {
        "controller": controller,
        "seed": int(seed),
        "scenario_seed": int(scenario.seed),
        "days": days,
        "plant": _jsonable(asdict(plant)),
        "plan_status": plan_status,
    }
    rec.update(rec_int)
    return SimTrace(rec, hourly, meta)


def _hourly(rec, buy, sell, pv, P_app, Q_ref, W) -> dict[str, np.ndarray]:
    n = buy.size
    per_hour = lambda k: rec[k].reshape(n, 60)  # noqa: E731
    E_HP = per_hour("P_HP").sum(axis=1) * 60.0 / 3.6e6
    E_DHW = per_hour("P_DHW").sum(axis=1) * 60.0 / 3.6e6
    Q_del = np.maximum(per_hour("dQ"), 0.0).sum(axis=1) * 60.0 / 3600.0
    E_PV = pv / 1000.0
    E_APP = P_app / 1000.0
    net = E_HP + E_DHW + E_APP - E_PV
    return {
        "hour": np.arange(n, dtype=np.int64),
        "E_HP": E_HP,
        "E_DHW": E_DHW,
        "E_PV": E_PV,
        "E_APP": E_APP,
        "E_IM": np.maximum(net, 0.0),
        "E_EX": np.maximum(-net, 0.0),
        "Q_ref": Q_ref.copy(),
        "Q_del": Q_del,
        "T_r": per_hour("T_r").mean(axis=1),
        "T_a": np.asarray(W.T_a[:n], float).copy(),
        "buy": buy.copy(),
        "sell": sell.copy(),
    }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "value") and not isinstance(obj, (int, float)):
        return obj.value
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj
