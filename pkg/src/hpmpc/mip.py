"""Branch and bound over binary variables with convex QP relaxations."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .numerics import INFEASIBLE, OPTIMAL, QpProblem, QpWorkspace

__all__ = ["BnbResult", "MixedIntegerProblem", "branch_and_bound", "diagnose_infeasibility"]

INTEGRALITY_TOL = 1e-6
NODE_LIMIT = "NodeLimit"


@dataclass
class MixedIntegerProblem:
    """A convex QP whose ``binaries`` must take values in {0, 1}.

    ``families`` maps a constraint-family name to the row indices it owns in
    ``qp.Aeq`` (key prefixed ``eq:``) or ``qp.Ain`` (prefixed ``in:``); it is
    used to name the culprit when the root relaxation is infeasible.
    ``layout`` maps variable-group names to index arrays.
    """

    qp: QpProblem
    binaries: np.ndarray
    layout: dict[str, np.ndarray] = field(default_factory=dict)
    families: dict[str, np.ndarray] = field(default_factory=dict)
    objective_constant: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.binaries = np.asarray(self.binaries, dtype=int)
        lb, ub = self.qp.lb, self.qp.ub
        if np.any(lb[self.binaries] < 0) or np.any(ub[self.binaries] > 1):
            raise ValueError("binary variables must be bounded within [0, 1]")

    @property
    def n(self) -> int:
        return self.qp.n

    def objective(self, x) -> float:
        return self.qp.objective(x) + self.objective_constant


@dataclass
class BnbResult:
    x: np.ndarray | None
    objective: float
    bound: float
    status: str
    nodes: int
    gap: float

    @property
    def feasible(self) -> bool:
        return self.x is not None


def _gap(incumbent: float, bound: float) -> float:
    if not np.isfinite(incumbent):
        return np.inf
    return max(0.0, incumbent - bound) / max(1.0, abs(incumbent))


def branch_and_bound(
    mip: MixedIntegerProblem,
    gap_tol: float = 1e-6,
    node_limit: int = 100_000,
    method: str = "interior-point",
    candidates: Sequence[np.ndarray] = (),
    repair: Callable[[np.ndarray], np.ndarray] | None = None,
    workspace: QpWorkspace | None = None,
) -> BnbResult:
    """Solve ``mip`` to a relative gap of ``gap_tol``.

    Node selection is depth first; among nodes of equal depth the one with the
    lowest parent bound goes first, and remaining ties go to the older node.
    Branching picks the most fractional binary (lowest index on ties).
    ``candidates`` are binary assignments tried as incumbents before the
    search; ``repair`` maps a rounded relaxation to a feasible assignment and
    is used as a rounding heuristic at the root.
    """
    ws = workspace or QpWorkspace(mip.qp, method)
    base_lb, base_ub = mip.qp.lb.copy(), mip.qp.ub.copy()
    bins = mip.binaries
    const = mip.objective_constant
    best_x, best_obj = None, np.inf
    nodes = 0

    def try_assignment(values) -> None:
        nonlocal best_x, best_obj
        values = np.round(np.asarray(values, float))
        lb, ub = base_lb.copy(), base_ub.copy()
        if np.any(values < lb[bins] - 1e-9) or np.any(values > ub[bins] + 1e-9):
            return
        lb[bins] = ub[bins] = values
        res = ws.solve(lb, ub)
        if res.status == OPTIMAL and res.objective + const < best_obj:
            x = res.x.copy()
            x[bins] = values
            best_x, best_obj = x, res.objective + const

    for cand in candidates:
        try_assignment(cand)

    root = ws.solve(base_lb, base_ub)
    nodes += 1
    if root.status == INFEASIBLE:
        return BnbResult(best_x, best_obj, np.inf, INFEASIBLE, nodes, np.inf)
    if root.status != OPTIMAL:
        raise RuntimeError(f"root relaxation failed with status {root.status}")
    if repair is not None:
        try_assignment(repair(root.x[bins]))

    counter = 0
    heap: list = []

    def push(depth, bound, lb, ub, x):
        nonlocal counter
        heapq.heappush(heap, (-depth, bound, counter, lb, ub, x))
        counter += 1

    push(0, root.objective + const, base_lb, base_ub, root.x)
    status = OPTIMAL
    while heap:
        open_bound = min(item[1] for item in heap)
        if _gap(best_obj, open_bound) <= gap_tol:
            heap.clear()
            break
        neg_depth, bound, _, lb, ub, x = heapq.heappop(heap)
        if bound >= best_obj - gap_tol * max(1.0, abs(best_obj)):
            continue
        if x is None:
            if nodes >= node_limit:
                push(-neg_depth, bound, lb, ub, None)
                status = NODE_LIMIT
                break
            res = ws.solve(lb, ub)
            nodes += 1
            if res.status != OPTIMAL:
                continue
            bound = res.objective + const
            if bound >= best_obj - gap_tol * max(1.0, abs(best_obj)):
                continue
            x = res.x
        frac = np.abs(x[bins] - np.round(x[bins]))
        if np.max(frac, initial=0.0) <= INTEGRALITY_TOL:
            try_assignment(x[bins])
            continue
        j = int(np.argmax(frac))  # argmax returns the lowest index among ties
        var = bins[j]
        value = x[var]
        down = (lb, ub.copy())
        down[1][var] = 0.0
        up = (lb.copy(), ub)
        up[0][var] = 1.0
        children = [up, down] if value >= 0.5 else [down, up]
        for clb, cub in children:
            push(-neg_depth + 1, bound, clb, cub, None)

    remaining = [item[1] for item in heap]
    lower = min(remaining) if remaining else best_obj
    lower = min(lower, best_obj)
    if best_x is None:
        if status == NODE_LIMIT:
            return BnbResult(None, np.inf, lower, NODE_LIMIT, nodes, np.inf)
        return BnbResult(None, np.inf, np.inf, INFEASIBLE, nodes, np.inf)
    return BnbResult(best_x, best_obj, lower, status, nodes, _gap(best_obj, lower))


def diagnose_infeasibility(mip: MixedIntegerProblem, method: str = "interior-point") -> list[str]:
    """Names of constraint families whose removal makes the relaxation feasible."""
    culprits = []
    qp = mip.qp
    for name, rows in mip.families.items():
        kind, _, _ = name.partition(":")
        keep_eq = np.ones(qp.Aeq.shape[0], bool)
        keep_in = np.ones(qp.Ain.shape[0], bool)
        if kind == "eq":
            keep_eq[rows] = False
        else:
            keep_in[rows] = False
        trial = QpProblem(qp.H, qp.g, qp.Aeq[keep_eq], qp.beq[keep_eq], qp.Ain[keep_in],
                          qp.bin[keep_in], tuple(np.array(qp.sense)[keep_in]), qp.lb, qp.ub)
        if QpWorkspace(trial, method, check_psd=False).solve().status == OPTIMAL:
            culprits.append(name)
    return culprits
