"""Supervisory mixed-integer MPC: hourly heat-pump schedule and heat budget.

Internally powers and heat flows are in kW (better scaling for the node
QPs); every public result is reported in W.

Variable groups per hour ``i`` of the horizon:

``P``      compressor electrical power
``delta``  on/off binary
``Q``      heat delivered to the floor (the gated auxiliary)
``PG``     net grid power ``P − PV + APP``
``PGp``    positive part of ``PG`` (bought electricity)
``s_lo``   undershoot of the room-temperature box
``s_hi``   overshoot of the room-temperature box
``Tr, Tf`` room and floor temperature at the end of hour ``i``
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .building import DiscreteStateSpace
from .efficiency import (
    Direction,
    HpEfficiencyFit,
    heat_from_power,
    power_from_heat,
    tangent_cuts,
)
from .mip import BnbResult, MixedIntegerProblem, branch_and_bound, diagnose_infeasibility
from .numerics import INFEASIBLE, OPTIMAL, QpProblem, QpWorkspace

__all__ = [
    "MiocpSolution",
    "MiocpSpec",
    "build_miocp",
    "downtime_feasible",
    "encode_downtime",
    "encode_efficiency_cuts",
    "encode_gated_range",
    "enumerate_exact",
    "feasible_patterns",
    "heat_budget",
    "problem_to_json",
    "repair_downtime",
    "solution_to_json",
    "solve_branch_and_bound",
    "validate_solution",
]

GROUPS = ("P", "delta", "Q", "PG", "PGp", "s_lo", "s_hi", "Tr", "Tf")


@dataclass(frozen=True)
class MiocpSpec:
    """One supervisory problem instance.

    Arrays indexed by horizon step have length ``N``; ``T_ref`` and
    ``c_cmf`` are 24-hour profiles indexed by hour of day.  ``disturbance``
    rows are ``(T_a, I_dir·(1−cloud), I_dir)``.  ``delta_history`` lists the
    most recent on/off states before the horizon, oldest first.
    ``unavailable`` leading steps are forced off (compressor still blocked).
    """

    N: int
    model: DiscreteStateSpace
    fit: HpEfficiencyFit
    buy: np.ndarray
    sell: np.ndarray
    disturbance: np.ndarray
    T_ref: np.ndarray
    c_cmf: np.ndarray
    P_pv: np.ndarray | None = None
    P_app: np.ndarray | None = None
    delta_op: int = 1
    T_min: float = 20.0
    T_max: float = 25.0
    c_slack: float = 10.0
    P_min: float = 200.0
    P_max: float = 2500.0
    dP_min: float = -1000.0
    dP_max: float = 1000.0
    min_down: int = 2
    n_cuts: int = 8
    P_prev: float = 0.0
    delta_history: tuple[int, ...] = ()
    gating: str = "hull"
    unavailable: int = 0

    def __post_init__(self):
        N = int(self.N)
        if N < 2:
            raise ValueError("horizon N must be at least 2")
        if abs(self.model.dt - 3600.0) > 1e-9:
            raise ValueError("supervisory model must be discretized at 3600 s")
        arr = lambda v, n, name: _vector(v, n, name)  # noqa: E731
        object.__setattr__(self, "buy", arr(self.buy, N, "buy"))
        object.__setattr__(self, "sell", arr(self.sell, N, "sell"))
        if np.any(self.buy <= self.sell):
            bad = int(np.flatnonzero(self.buy <= self.sell)[0])
            raise ValueError(f"buy price must exceed sell price; violated at step {bad}")
        d = np.asarray(self.disturbance, float)
        if d.shape != (N, 3):
            raise ValueError(f"disturbance must have shape ({N}, 3)")
        object.__setattr__(self, "disturbance", d)
        object.__setattr__(self, "T_ref", arr(self.T_ref, 24, "T_ref"))
        object.__setattr__(self, "c_cmf", arr(self.c_cmf, 24, "c_cmf"))
        if np.any(self.c_cmf < 0):
            raise ValueError("comfort prices must be nonnegative")
        zeros = np.zeros(N)
        object.__setattr__(self, "P_pv", zeros if self.P_pv is None else arr(self.P_pv, N, "P_pv"))
        object.__setattr__(self, "P_app", zeros if self.P_app is None else arr(self.P_app, N, "P_app"))
        if self.delta_op not in (0, 1):
            raise ValueError("delta_op must be 0 or 1")
        need = Direction.HEAT_FROM_POWER if self.delta_op == 1 else Direction.POWER_FROM_HEAT
        if self.fit.direction is not need:
            raise ValueError(f"delta_op={self.delta_op} needs a {need.value} fit")
        if not 0 < self.P_min <= self.P_max:
            raise ValueError("need 0 < P_min <= P_max")
        if self.dP_min > 0 or self.dP_max < 0:
            raise ValueError("rate limits must satisfy dP_min <= 0 <= dP_max")
        if self.min_down < 1:
            raise ValueError("minimum down-time must be at least one step")
        if self.T_min > self.T_max:
            raise ValueError("T_min must not exceed T_max")
        if not 0 <= self.unavailable <= N:
            raise ValueError("unavailable must lie in [0, N]")
        if self.gating not in ("big-m", "hull"):
            raise ValueError("gating must be 'big-m' or 'hull'")
        object.__setattr__(self, "N", N)
        object.__setattr__(self, "delta_history", tuple(int(v) for v in self.delta_history))

    @property
    def T_a(self) -> np.ndarray:
        return self.disturbance[:, 0]


def _vector(v, n, name):
    a = np.asarray(v, dtype=float).ravel()
    if a.size != n:
        raise ValueError(f"{name} must have length {n}, got {a.size}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must be finite")
    return a


@dataclass
class MiocpSolution:
    P_hp: np.ndarray
    delta: np.ndarray
    Q_hp: np.ndarray
    z_hp: np.ndarray
    P_G: np.ndarray
    P_G_plus: np.ndarray
    slack: np.ndarray
    T_r: np.ndarray
    T_f: np.ndarray
    objective: float
    gap: float
    nodes: int
    status: str
    t0: int = 0


# ---------------------------------------------------------------------------
# problem construction
# ---------------------------------------------------------------------------


class _Builder:
    def __init__(self, n_vars):
        self.n = n_vars
        self.eq_rows, self.eq_rhs = [], []
        self.in_rows, self.in_rhs = [], []
        self.families: dict[str, list[int]] = {}

    def _row(self, coeffs):
        row = np.zeros(self.n)
        for idx, val in coeffs:
            row[idx] += val
        return row

    def eq(self, family, coeffs, rhs):
        self.families.setdefault("eq:" + family, []).append(len(self.eq_rows))
        self.eq_rows.append(self._row(coeffs))
        self.eq_rhs.append(float(rhs))

    def le(self, family, coeffs, rhs):
        self.families.setdefault("in:" + family, []).append(len(self.in_rows))
        self.in_rows.append(self._row(coeffs))
        self.in_rhs.append(float(rhs))


def _layout(N):
    return {name: np.arange(k * N, (k + 1) * N) for k, name in enumerate(GROUPS)}


def encode_gated_range(b: _Builder, P, delta, P_min, P_max) -> None:
    """``P_min·δ ≤ P ≤ P_max·δ`` for every step."""
    for p, d in zip(P, delta):
        b.le("gated-range", [(p, 1.0), (d, -P_max)], 0.0)
        b.le("gated-range", [(p, -1.0), (d, P_min)], 0.0)


def downtime_pairs(N: int, M: int, history: Sequence[int] = ()):
    """Yield ``(prev, cur, later)`` index triples of the down-time rule.

    Indices below zero refer to ``history`` (``-1`` is the most recent
    value).  A 1→0 change from ``prev`` to ``cur`` forces ``later`` to zero.
    """
    start = -len(history) + 1 if history else 0
    for k in range(start, N):
        for j in range(1, M):
            if 0 <= k + j < N:
                yield k - 1, k, k + j


def encode_downtime(b: _Builder, delta, M: int, history: Sequence[int] = (),
                    ub: np.ndarray | None = None) -> None:
    """Linear form ``δ[k−1] − δ[k] + δ[k+j] ≤ 1`` of the minimum down-time rule.

    Terms that fall before the horizon use ``history``; if a forced-off step
    follows a historical switch-off, the variable's upper bound is set to 0.
    """
    hist = list(history)

    def term(i):
        if i >= 0:
            return ("var", delta[i])
        if -i <= len(hist):
            return ("const", hist[i])
        return ("const", 0)

    for prev, cur, later in downtime_pairs(len(delta), M, hist):
        coeffs, const = [], 0.0
        for idx, sign in ((prev, 1.0), (cur, -1.0), (later, 1.0)):
            kind, value = term(idx)
            if kind == "var":
                coeffs.append((value, sign))
            else:
                const += sign * value
        rhs = 1.0 - const
        if sum(max(0.0, c) for _, c in coeffs) <= rhs + 1e-12:
            continue  # cannot bind for any binary values
        if len(coeffs) == 1 and ub is not None:
            ub[coeffs[0][0]] = 0.0  # switched off just before the horizon
            continue
        b.le("downtime", coeffs, rhs)


def _max_heat(fit, T_a, P_max):
    if fit.direction is Direction.HEAT_FROM_POWER:
        grid = np.linspace(0.0, P_max, 64)
        return float(np.max(heat_from_power(grid, T_a, fit)))
    # invert the convex power curve by bisection
    lo, hi = 0.0, 1.0
    while power_from_heat(hi, T_a, fit) < P_max and hi < 1e7:
        hi *= 2.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if power_from_heat(mid, T_a, fit) < P_max else (lo, mid)
    return lo


def _heat_at(fit, T_a, P):
    if fit.direction is Direction.HEAT_FROM_POWER:
        return heat_from_power(P, T_a, fit)
    lo, hi = 0.0, _max_heat(fit, T_a, 1e9)
    lo = 0.0
    hi = max(hi, 1.0)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if power_from_heat(mid, T_a, fit) < P else (lo, mid)
    return lo


def efficiency_base_points(spec: MiocpSpec, T_a: float) -> np.ndarray:
    """Equally spaced tangent points (W) over the operating range of step ``T_a``."""
    if spec.delta_op == 1:
        return np.linspace(spec.P_min, spec.P_max, spec.n_cuts)
    q_lo = max(0.0, _heat_at(spec.fit, T_a, spec.P_min))
    q_hi = max(q_lo, _max_heat(spec.fit, T_a, spec.P_max))
    return np.linspace(q_lo, q_hi, spec.n_cuts)


def encode_efficiency_cuts(b: _Builder, spec: MiocpSpec, P, delta, Q) -> dict:
    """Gated outer approximation of the efficiency curve, one family per step.

    With ``gating='big-m'`` each cut is relaxed by ``M(1−δ)`` with the
    smallest ``M`` that keeps ``P = Q = 0`` feasible; ``'hull'`` scales the
    cut intercept by ``δ`` instead, which is exact for binary ``δ`` and gives
    tighter relaxations.  Returns the big-M constants used (kW).
    """
    bigm = {"Q_max": [], "cuts": []}
    for i in range(spec.N):
        T_a = float(spec.T_a[i])
        points = efficiency_base_points(spec, T_a)
        lo, hi = (spec.P_min, spec.P_max) if spec.delta_op == 1 else (points[0], points[-1])
        cuts = tangent_cuts(spec.fit, lo, hi, T_a, spec.n_cuts)
        q_max = 1.05 * _max_heat(spec.fit, T_a, spec.P_max) / 1000.0 + 1e-3
        bigm["Q_max"].append(q_max)
        step_m = []
        for cut in cuts:
            slope, icpt = cut.slope, cut.intercept / 1000.0  # kW units
            if spec.delta_op == 1:
                # Q ≤ slope·P + icpt, gated by δ
                if spec.gating == "hull":
                    b.le("efficiency", [(Q[i], 1.0), (P[i], -slope), (delta[i], -icpt)], 0.0)
                    step_m.append(0.0)
                else:
                    m = max(0.0, -icpt)
                    b.le("efficiency", [(Q[i], 1.0), (P[i], -slope), (delta[i], m)], icpt + m)
                    step_m.append(m)
            else:
                # P ≥ slope·Q + icpt, gated by δ
                if spec.gating == "hull":
                    b.le("efficiency", [(Q[i], slope), (P[i], -1.0), (delta[i], icpt)], 0.0)
                    step_m.append(0.0)
                else:
                    m = max(0.0, icpt)
                    b.le("efficiency", [(Q[i], slope), (P[i], -1.0), (delta[i], m)], m - icpt)
                    step_m.append(m)
        bigm["cuts"].append(step_m)
        b.le("heat-gate", [(Q[i], 1.0), (delta[i], -q_max)], 0.0)
    return bigm


def build_miocp(spec: MiocpSpec, x0, t0: int) -> MixedIntegerProblem:
    """Assemble the supervisory problem for initial state ``x0`` at hour ``t0``."""
    x0 = np.asarray(x0, dtype=float).reshape(2)
    if not np.all(np.isfinite(x0)):
        raise ValueError("initial state must be finite")
    N = spec.N
    L = _layout(N)
    n = len(GROUPS) * N
    P, delta, Q = L["P"], L["delta"], L["Q"]
    PG, PGp, s_lo, s_hi, Tr, Tf = L["PG"], L["PGp"], L["s_lo"], L["s_hi"], L["Tr"], L["Tf"]
    kw = 1000.0
    b = _Builder(n)
    Ad, Bd, Ed = spec.model.Ad, spec.model.Bd[:, 0], spec.model.Ed
    lb = np.full(n, -np.inf)
    ub = np.full(n, np.inf)
    lb[P], ub[P] = 0.0, spec.P_max / kw
    lb[delta], ub[delta] = 0.0, 1.0
    ub[delta[: spec.unavailable]] = 0.0
    lb[Q] = 0.0
    lb[PGp] = 0.0
    lb[s_lo] = lb[s_hi] = 0.0

    # dynamics
    for i in range(N):
        forcing = Ed @ spec.disturbance[i]
        for r, (own, other) in enumerate(((Tr, Tf), (Tf, Tr))):
            coeffs = [(own[i], 1.0), (Q[i], -Bd[r] * kw)]
            rhs = forcing[r]
            if i == 0:
                rhs += Ad[r] @ x0
            else:
                coeffs += [(Tr[i - 1], -Ad[r, 0]), (Tf[i - 1], -Ad[r, 1])]
            b.eq("dynamics", coeffs, rhs)
    # electricity balance
    for i in range(N):
        b.eq("balance", [(PG[i], 1.0), (P[i], -1.0)], (spec.P_app[i] - spec.P_pv[i]) / kw)
        b.le("grid-positive", [(PG[i], 1.0), (PGp[i], -1.0)], 0.0)
    encode_gated_range(b, P, delta, spec.P_min / kw, spec.P_max / kw)
    bigm = encode_efficiency_cuts(b, spec, P, delta, Q)
    # rate limits: up-rate always, down-rate only while staying on
    m_rate = max(0.0, (spec.P_max + spec.dP_min) / kw)
    for i in range(N):
        prev = [(P[i - 1], -1.0)] if i else []
        prev_const = 0.0 if i else spec.P_prev / kw
        b.le("rate", [(P[i], 1.0)] + prev, spec.dP_max / kw + prev_const)
        b.le("rate", [(P[i], -1.0), (delta[i], m_rate)] + [(c, -v) for c, v in prev],
             m_rate - spec.dP_min / kw - prev_const)
    encode_downtime(b, delta, spec.min_down, spec.delta_history, ub)
    # soft comfort box
    for i in range(N):
        b.le("state-box", [(Tr[i], -1.0), (s_lo[i], -1.0)], -spec.T_min)
        b.le("state-box", [(Tr[i], 1.0), (s_hi[i], -1.0)], spec.T_max)

    # objective
    H = np.zeros((n, n))
    g = np.zeros(n)
    const = 0.0
    g[PG] = spec.sell
    g[PGp] = spec.buy - spec.sell
    hours = (t0 + 1 + np.arange(N)) % 24
    w = spec.c_cmf[hours]
    ref = spec.T_ref[hours]
    H[Tr, Tr] = 2.0 * w
    g[Tr] += -2.0 * w * ref
    const += float(np.sum(w * ref * ref))
    g[s_lo] = spec.c_slack
    g[s_hi] = spec.c_slack

    qp = QpProblem(H, g, np.array(b.eq_rows), np.array(b.eq_rhs), np.array(b.in_rows),
                   np.array(b.in_rhs), None, lb, ub)
    families = {k: np.array(v, dtype=int) for k, v in b.families.items()}
    return MixedIntegerProblem(qp, delta.copy(), L, families, const,
                               meta={"spec": spec, "x0": x0, "t0": int(t0), "bigm": bigm})


# ---------------------------------------------------------------------------
# binary patterns
# ---------------------------------------------------------------------------


def downtime_feasible(pattern: Sequence[int], M: int, history: Sequence[int] = ()) -> bool:
    """Direct scan of the minimum down-time rule, history included."""
    seq = list(history) + [int(v) for v in pattern]
    offset = len(history)
    for k in range(1, len(seq)):
        if seq[k - 1] == 1 and seq[k] == 0:
            for j in range(1, M):
                if k + j < len(seq) and k + j >= offset and seq[k + j] == 1:
                    return False
    return True


def feasible_patterns(N: int, M: int, history: Sequence[int] = ()):
    """All down-time-feasible binary patterns of length ``N`` (lexicographic order)."""
    for bits in itertools.product((0, 1), repeat=N):
        if downtime_feasible(bits, M, history):
            yield np.array(bits, dtype=float)


def repair_downtime(values, M: int, history: Sequence[int] = ()) -> np.ndarray:
    """Round to binary, then switch off any step that violates the down-time rule."""
    seq = list(history) + [1 if v >= 0.5 else 0 for v in values]
    off_until = -1
    for k in range(len(seq)):
        if k <= off_until and k >= len(history):
            seq[k] = 0
        if k and seq[k - 1] == 1 and seq[k] == 0:
            off_until = k + M - 1
    return np.array(seq[len(history):], dtype=float)


# ---------------------------------------------------------------------------
# solving
# ---------------------------------------------------------------------------


def _solution(mip: MixedIntegerProblem, x, objective, gap, nodes, status) -> MiocpSolution:
    spec: MiocpSpec = mip.meta["spec"]
    L = mip.layout
    kw = 1000.0
    if x is None:
        nan = np.full(spec.N, np.nan)
        return MiocpSolution(nan, nan, nan, nan, nan, nan, np.full((spec.N, 2), np.nan),
                             np.full(spec.N + 1, np.nan), np.full(spec.N + 1, np.nan),
                             np.inf, np.inf, nodes, status, mip.meta["t0"])
    delta = np.round(x[L["delta"]])
    P = np.where(delta > 0, x[L["P"]], 0.0) * kw
    Q = np.where(delta > 0, np.maximum(x[L["Q"]], 0.0), 0.0) * kw
    x0 = mip.meta["x0"]
    return MiocpSolution(
        P_hp=P, delta=delta, Q_hp=Q, z_hp=Q.copy(),
        P_G=x[L["PG"]] * kw, P_G_plus=x[L["PGp"]] * kw,
        slack=np.column_stack([x[L["s_lo"]], x[L["s_hi"]]]),
        T_r=np.concatenate([[x0[0]], x[L["Tr"]]]),
        T_f=np.concatenate([[x0[1]], x[L["Tf"]]]),
        objective=float(objective), gap=float(gap), nodes=int(nodes), status=status,
        t0=mip.meta["t0"],
    )


def solve_branch_and_bound(mip: MixedIntegerProblem, gap_tol: float = 1e-6,
                           node_limit: int = 100_000, method: str = "interior-point",
                           hint: Sequence[float] | None = None) -> MiocpSolution:
    """Branch and bound on the on/off binaries.

    The all-off schedule and, when given, a ``hint`` schedule (for example the
    shifted previous plan) seed the incumbent.  If the root relaxation is
    infeasible a ``ValueError`` names the constraint families responsible.
    """
    spec: MiocpSpec = mip.meta["spec"]
    history = spec.delta_history
    candidates = [np.zeros(spec.N)]
    if hint is not None:
        candidates.append(repair_downtime(hint, spec.min_down, history))
    res: BnbResult = branch_and_bound(
        mip, gap_tol, node_limit, method, candidates,
        repair=lambda v: repair_downtime(v, spec.min_down, history),
    )
    if res.status == INFEASIBLE and res.x is None:
        culprits = diagnose_infeasibility(mip, method)
        raise ValueError(f"supervisory problem is infeasible; constraint families involved: {culprits}")
    return _solution(mip, res.x, res.objective, res.gap, res.nodes, res.status)


def enumerate_exact(mip: MixedIntegerProblem, max_N: int = 10,
                    method: str = "interior-point") -> MiocpSolution:
    """Oracle: solve the QP for every down-time-feasible on/off pattern."""
    spec: MiocpSpec = mip.meta["spec"]
    if spec.N > max_N:
        raise ValueError(f"enumeration limited to N <= {max_N}, got {spec.N}")
    ws = QpWorkspace(mip.qp, method)
    bins = mip.binaries
    best = (np.inf, None)
    count = 0
    for pattern in feasible_patterns(spec.N, spec.min_down, spec.delta_history):
        lb, ub = mip.qp.lb.copy(), mip.qp.ub.copy()
        if np.any(pattern > ub[bins]):
            continue
        lb[bins] = ub[bins] = pattern
        res = ws.solve(lb, ub)
        count += 1
        if res.status == OPTIMAL:
            obj = res.objective + mip.objective_constant
            if obj < best[0]:
                x = res.x.copy()
                x[bins] = pattern
                best = (obj, x)
    status = OPTIMAL if best[1] is not None else INFEASIBLE
    return _solution(mip, best[1], best[0], 0.0, count, status)


def heat_budget(s: MiocpSolution) -> np.ndarray:
    """Hourly heat reference in Wh (the hour-long average heat flow)."""
    return np.maximum(np.nan_to_num(s.Q_hp), 0.0) * 1.0


# ---------------------------------------------------------------------------
# independent validation
# ---------------------------------------------------------------------------


@dataclass
class Violation:
    family: str
    step: int
    amount: float


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)
    curve_slack: np.ndarray | None = None
    objective: float = np.nan
    slack_binding: bool = False

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_solution(spec: MiocpSpec, x0, t0: int, s: MiocpSolution,
                      tol: float = 1e-5) -> ValidationReport:
    """Re-check a schedule against the problem rules without solver bookkeeping.

    Temperatures are re-simulated from ``x0`` with the model matrices, the
    efficiency family is checked against freshly computed tangents, and the
    down-time rule is checked by a direct scan.  ``curve_slack`` reports
    how far the heat lies below the true curve (negative means the tangent
    envelope granted heat above the curve).
    """
    rep = ValidationReport()
    add = lambda fam, k, amt: rep.violations.append(Violation(fam, int(k), float(amt)))  # noqa: E731
    N = spec.N
    P, Q, delta = s.P_hp, s.Q_hp, s.delta
    scale = 1000.0 * tol
    for k in range(N):
        if delta[k] not in (0.0, 1.0):
            add("binary", k, delta[k])
        if k < spec.unavailable and delta[k] != 0.0:
            add("unavailable", k, delta[k])
        if delta[k] == 0 and (abs(P[k]) > scale or abs(Q[k]) > scale):
            add("gating", k, max(abs(P[k]), abs(Q[k])))
        if delta[k] == 1 and not (spec.P_min - scale <= P[k] <= spec.P_max + scale):
            add("gated-range", k, P[k])
        if Q[k] < -scale:
            add("heat-sign", k, Q[k])
    # efficiency envelope
    slack = np.zeros(N)
    for k in range(N):
        if delta[k] != 1:
            continue
        T_a = float(spec.T_a[k])
        points = efficiency_base_points(spec, T_a)
        if spec.delta_op == 1:
            cuts = tangent_cuts(spec.fit, spec.P_min, spec.P_max, T_a, spec.n_cuts)
            envelope = min(c(P[k]) for c in cuts)
            if Q[k] > envelope + scale:
                add("efficiency", k, Q[k] - envelope)
            slack[k] = heat_from_power(P[k], T_a, spec.fit) - Q[k]
        else:
            cuts = tangent_cuts(spec.fit, points[0], points[-1], T_a, spec.n_cuts)
            envelope = max(c(Q[k]) for c in cuts)
            if P[k] < envelope - scale:
                add("efficiency", k, envelope - P[k])
            slack[k] = P[k] - power_from_heat(Q[k], T_a, spec.fit)
    rep.curve_slack = slack
    # rate limits
    prev = spec.P_prev
    for k in range(N):
        step = P[k] - prev
        if step > spec.dP_max + scale:
            add("rate-up", k, step)
        if delta[k] == 1 and step < spec.dP_min - scale:
            add("rate-down", k, step)
        prev = P[k]
    if not downtime_feasible(delta.astype(int), spec.min_down, spec.delta_history):
        add("downtime", 0, 1.0)
    # balance and grid positive part
    PG = P - spec.P_pv + spec.P_app
    if np.max(np.abs(PG - s.P_G)) > scale:
        add("balance", int(np.argmax(np.abs(PG - s.P_G))), float(np.max(np.abs(PG - s.P_G))))
    pos = np.maximum(PG, 0.0)
    if np.max(np.abs(pos - s.P_G_plus)) > 10 * scale:
        add("grid-positive", int(np.argmax(np.abs(pos - s.P_G_plus))),
            float(np.max(np.abs(pos - s.P_G_plus))))
    # dynamics re-simulated
    x = np.asarray(x0, float).copy()
    Tr = np.empty(N)
    for k in range(N):
        x = spec.model.Ad @ x + spec.model.Bd[:, 0] * Q[k] + spec.model.Ed @ spec.disturbance[k]
        Tr[k] = x[0]
        if abs(x[0] - s.T_r[k + 1]) > 1e3 * tol or abs(x[1] - s.T_f[k + 1]) > 1e3 * tol:
            add("dynamics", k, max(abs(x[0] - s.T_r[k + 1]), abs(x[1] - s.T_f[k + 1])))
    lo = np.maximum(spec.T_min - Tr, 0.0)
    hi = np.maximum(Tr - spec.T_max, 0.0)
    rep.slack_binding = bool(np.any(lo > 1e-4) or np.any(hi > 1e-4))
    hours = (t0 + 1 + np.arange(N)) % 24
    energy = spec.sell * PG / 1000.0 + (spec.buy - spec.sell) * pos / 1000.0
    comfort = spec.c_cmf[hours] * (Tr - spec.T_ref[hours]) ** 2
    rep.objective = float(np.sum(energy) + np.sum(comfort) + spec.c_slack * np.sum(lo + hi))
    return rep


# ---------------------------------------------------------------------------
# text serialization
# ---------------------------------------------------------------------------


def _round(a, digits=10):
    arr = np.asarray(a, dtype=float)
    out = np.vectorize(lambda v: float(f"{v:.{digits}g}") if np.isfinite(v) else None,
                       otypes=[object])(arr) if arr.size else arr
    return out.tolist()


def problem_to_json(mip: MixedIntegerProblem) -> str:
    """Stable JSON text of the assembled problem (sparse triplets, 10 significant digits)."""
    qp = mip.qp

    def triplets(A):
        r, c = np.nonzero(A)
        return {"shape": list(A.shape), "rows": r.tolist(), "cols": c.tolist(),
                "values": _round(A[r, c])}

    doc = {
        "n": qp.n,
        "binaries": mip.binaries.tolist(),
        "H": triplets(qp.H),
        "g": _round(qp.g),
        "Aeq": triplets(qp.Aeq),
        "beq": _round(qp.beq),
        "Ain": triplets(qp.Ain),
        "bin": _round(qp.bin),
        "lb": _round(qp.lb),
        "ub": _round(qp.ub),
        "objective_constant": _round(mip.objective_constant),
        "families": {k: v.tolist() for k, v in sorted(mip.families.items())},
        "layout": {k: v.tolist() for k, v in mip.layout.items()},
    }
    return json.dumps(doc, sort_keys=True, indent=1)


def solution_to_json(s: MiocpSolution, digits: int = 8) -> str:
    doc = {
        "P_hp": _round(s.P_hp, digits), "delta": _round(s.delta, digits),
        "Q_hp": _round(s.Q_hp, digits), "P_G": _round(s.P_G, digits),
        "P_G_plus": _round(s.P_G_plus, digits), "slack": _round(s.slack, digits),
        "T_r": _round(s.T_r, digits), "T_f": _round(s.T_f, digits),
        "objective": _round(s.objective, digits), "status": s.status, "t0": s.t0,
    }
    return json.dumps(doc, sort_keys=True, indent=1)
