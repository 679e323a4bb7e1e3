"""Reactive valve selection: follow a flow reference, favour the coldest rooms."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .mip import MixedIntegerProblem, branch_and_bound
from .numerics import QpProblem

__all__ = [
    "FlowModel",
    "InfeasibleValveProblem",
    "ProductPlan",
    "ValveDecision",
    "ValveLimits",
    "comfort_prices",
    "enumerate_valves",
    "flow_from_config",
    "linearize_products",
    "select_valves",
    "select_valves_mld",
]

MAX_ENUMERATION = 15
MAX_ORACLE = 20


@dataclass(frozen=True)
class FlowModel:
    """Circuit contributions ``q_bar`` (kg/s) and a saturating flow polynomial."""

    q_bar: np.ndarray
    c0: float = 0.0
    c1: float = 1.0
    c2: float = 0.0
    q_min: float = 0.0

    def __post_init__(self):
        q = np.asarray(self.q_bar, dtype=float).ravel()
        if q.size == 0 or np.any(q <= 0):
            raise ValueError("circuit contributions must be strictly positive")
        object.__setattr__(self, "q_bar", q)
        total = np.linspace(0.0, q.sum(), 50)
        if np.any(self.c0 + self.c1 * total + self.c2 * total**2 < -1e-12):
            raise ValueError("flow polynomial turns negative over the reachable range")

    @property
    def M(self) -> int:
        return self.q_bar.size

    @classmethod
    def saturating(cls, M: int = 11, q_all: float = 0.3, q_min: float = 0.0) -> "FlowModel":
        """Identical circuits; flow rises with diminishing gains to ``q_all`` when all open.

        The polynomial peaks exactly at the all-open sum, so opening a valve
        never reduces the flow.
        """
        s = q_all
        return cls(np.full(M, s / M), 0.0, 2.0 * q_all / s, -q_all / s**2, q_min)


@dataclass(frozen=True)
class ValveLimits:
    """At most ``max_close`` valves may close relative to ``v_prev``; ``forced_open`` stay open."""

    max_close: int | None = None
    forced_open: frozenset[int] = frozenset()


@dataclass(frozen=True)
class ValveDecision:
    v: np.ndarray
    q: float
    objective: float


class InfeasibleValveProblem(ValueError):
    pass


def flow_from_config(v, fm: FlowModel) -> float:
    v = np.asarray(v, dtype=float).ravel()
    if v.size != fm.M:
        raise ValueError(f"configuration has {v.size} entries, flow model has {fm.M} circuits")
    total = float(v @ fm.q_bar)
    return fm.c0 + fm.c1 * total + fm.c2 * total * total


def comfort_prices(T_r, T_ref, a: float = 1.0) -> np.ndarray:
    """``a·(T_r − T_ref)`` per room; cold rooms get negative prices."""
    if a <= 0:
        raise ValueError("comfort weight a must be positive")
    return a * (np.asarray(T_r, float) - np.asarray(T_ref, float))


@dataclass(frozen=True)
class ProductPlan:
    """Auxiliary AND-variables ``y_ij = v_i·v_j`` for all pairs ``i < j``."""

    M: int
    pairs: tuple[tuple[int, int], ...]

    @property
    def n_aux(self) -> int:
        return len(self.pairs)

    @property
    def n_binaries(self) -> int:
        return self.M + self.n_aux

    def constraints(self):
        """Rows ``(A, b)`` of ``A [v; y] <= b`` encoding each product."""
        n = self.n_binaries
        rows, rhs = [], []
        for k, (i, j) in enumerate(self.pairs):
            y = self.M + k
            for coeffs, r in (({y: 1, i: -1}, 0), ({y: 1, j: -1}, 0), ({i: 1, j: 1, y: -1}, 1)):
                row = np.zeros(n)
                for idx, val in coeffs.items():
                    row[idx] = val
                rows.append(row)
                rhs.append(r)
        return np.array(rows).reshape(-1, n), np.array(rhs, float)

    def bounds(self, v: np.ndarray):
        """Feasible interval of every ``y`` for fixed binary ``v`` (rows: configs)."""
        v = np.atleast_2d(v)
        i = np.array([p[0] for p in self.pairs], dtype=int)
        j = np.array([p[1] for p in self.pairs], dtype=int)
        lower = np.maximum(0.0, v[:, i] + v[:, j] - 1.0)
        upper = np.minimum(v[:, i], v[:, j])
        return lower, upper


def linearize_products(M: int) -> ProductPlan:
    if M < 1:
        raise ValueError("need at least one circuit")
    return ProductPlan(M, tuple(itertools.combinations(range(M), 2)))


def _check_inputs(q_ref, c_cmf, fm, limits, v_prev):
    c = np.asarray(c_cmf, float).ravel()
    if c.size != fm.M:
        raise ValueError("one comfort price per circuit is required")
    v0 = np.ones(fm.M) if v_prev is None else np.asarray(v_prev, float).ravel()
    if v0.size != fm.M:
        raise ValueError("previous configuration has the wrong length")
    if any(not 0 <= k < fm.M for k in limits.forced_open):
        raise ValueError("forced-open index out of range")
    return c, v0


def _configs(M):
    codes = np.arange(2**M, dtype=np.int64)
    return ((codes[:, None] >> np.arange(M)) & 1).astype(float)


def select_valves(q_ref: float, c_cmf, fm: FlowModel, limits: ValveLimits = ValveLimits(),
                  v_prev=None, c_q: float = 1e4) -> ValveDecision:
    """Minimise ``c_q (q_ref − q)² + c_cmf·v`` over admissible configurations.

    The flow is evaluated through the linearized products: the squared sum of
    open contributions is written with one auxiliary per valve pair whose value
    is pinned by the AND constraints.  Configurations are scanned in order of
    their binary code (bit ``i`` is valve ``i``), so ties go to the lowest code.
    """
    c, v0 = _check_inputs(q_ref, c_cmf, fm, limits, v_prev)
    if fm.M > MAX_ENUMERATION:
        return select_valves_mld(q_ref, c_cmf, fm, limits, v_prev, c_q)
    V = _configs(fm.M)
    plan = linearize_products(fm.M)
    lower, upper = plan.bounds(V)
    if np.any(lower != upper):
        raise AssertionError("product constraints failed to pin the auxiliaries")
    cross = np.array([fm.q_bar[i] * fm.q_bar[j] for i, j in plan.pairs])
    linear_sum = V @ fm.q_bar
    square = V @ (fm.q_bar**2) + 2.0 * (lower @ cross if cross.size else 0.0)
    q = fm.c0 + fm.c1 * linear_sum + fm.c2 * square
    ok = q >= fm.q_min - 1e-12
    reason = "minimum flow"
    for k in sorted(limits.forced_open):
        ok &= V[:, k] == 1
    if limits.max_close is not None:
        ok &= np.sum(np.maximum(v0 - V, 0.0), axis=1) <= limits.max_close
    if not np.any(ok):
        raise InfeasibleValveProblem(f"no valve configuration satisfies the {reason}, "
                                     "closing-limit and forced-open constraints together")
    obj = c_q * (q_ref - q) ** 2 + V @ c
    obj[~ok] = np.inf
    best = int(np.argmin(obj))
    v = V[best]
    return ValveDecision(v, flow_from_config(v, fm), float(obj[best]))


def enumerate_valves(q_ref: float, c_cmf, fm: FlowModel, limits: ValveLimits = ValveLimits(),
                     v_prev=None, c_q: float = 1e4) -> ValveDecision:
    """Oracle scan of all configurations using the direct flow polynomial."""
    c, v0 = _check_inputs(q_ref, c_cmf, fm, limits, v_prev)
    if fm.M > MAX_ORACLE:
        raise ValueError(f"enumeration is limited to {MAX_ORACLE} circuits")
    best = None
    for code in range(2**fm.M):
        v = [(code >> i) & 1 for i in range(fm.M)]
        if any(v[k] == 0 for k in limits.forced_open):
            continue
        if limits.max_close is not None:
            closed = sum(1 for a, b in zip(v0, v) if a == 1 and b == 0)
            if closed > limits.max_close:
                continue
        q = flow_from_config(v, fm)
        if q < fm.q_min - 1e-12:
            continue
        obj = c_q * (q_ref - q) ** 2 + sum(ci * vi for ci, vi in zip(c, v))
        if best is None or obj < best[0]:
            best = (obj, v, q)
    if best is None:
        raise InfeasibleValveProblem("no valve configuration satisfies the minimum flow, "
                                     "closing-limit and forced-open constraints together")
    return ValveDecision(np.array(best[1], float), best[2], float(best[0]))


def build_valve_mip(q_ref: float, c_cmf, fm: FlowModel, limits: ValveLimits = ValveLimits(),
                    v_prev=None, c_q: float = 1e4) -> MixedIntegerProblem:
    """The linearized formulation as a mixed-integer QP over ``[v, y, q]``.

    Only ``v`` is declared binary: once ``v`` is integral the AND constraints
    pin every ``y`` to ``v_i·v_j``.
    """
    c, v0 = _check_inputs(q_ref, c_cmf, fm, limits, v_prev)
    plan = linearize_products(fm.M)
    nb = plan.n_binaries
    n = nb + 1
    qi = nb
    A_and, b_and = plan.constraints()
    A_and = np.hstack([A_and, np.zeros((A_and.shape[0], 1))])
    rows, rhs = [A_and], [b_and]
    # flow definition: q − c1·Σq̄v − c2(Σq̄²v + 2Σq̄iq̄j y) = c0
    eq = np.zeros((1, n))
    eq[0, qi] = 1.0
    eq[0, : fm.M] = -(fm.c1 * fm.q_bar + fm.c2 * fm.q_bar**2)
    for k, (i, j) in enumerate(plan.pairs):
        eq[0, fm.M + k] = -2.0 * fm.c2 * fm.q_bar[i] * fm.q_bar[j]
    row = np.zeros(n)
    row[qi] = -1.0
    rows.append(row[None, :])
    rhs.append(np.array([-fm.q_min]))
    if limits.max_close is not None:
        row = np.zeros(n)
        row[: fm.M] = -v0
        rows.append(row[None, :])
        rhs.append(np.array([limits.max_close - float(v0.sum())]))
    lb = np.zeros(n)
    ub = np.ones(n)
    lb[qi], ub[qi] = -np.inf, np.inf
    for k in limits.forced_open:
        lb[k] = 1.0
    H = np.zeros((n, n))
    H[qi, qi] = 2.0 * c_q
    g = np.zeros(n)
    g[: fm.M] = c
    g[qi] = -2.0 * c_q * q_ref
    qp = QpProblem(H, g, eq, np.array([fm.c0]), np.vstack(rows), np.concatenate(rhs),
                   None, lb, ub)
    return MixedIntegerProblem(qp, np.arange(fm.M), {"v": np.arange(fm.M)}, {},
                               objective_constant=c_q * q_ref**2)


def select_valves_mld(q_ref: float, c_cmf, fm: FlowModel, limits: ValveLimits = ValveLimits(),
                      v_prev=None, c_q: float = 1e4, method: str = "interior-point") -> ValveDecision:
    """Solve the linearized formulation by branch and bound."""
    mip = build_valve_mip(q_ref, c_cmf, fm, limits, v_prev, c_q)
    res = branch_and_bound(mip, gap_tol=1e-9, method=method)
    if res.x is None:
        raise InfeasibleValveProblem("no valve configuration satisfies the minimum flow, "
                                     "closing-limit and forced-open constraints together")
    v = np.round(res.x[: fm.M])
    q = flow_from_config(v, fm)
    c = np.asarray(c_cmf, float)
    return ValveDecision(v, q, float(c_q * (q_ref - q) ** 2 + c @ v))
