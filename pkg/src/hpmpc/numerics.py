"""Small dense numerics: matrix exponential, ZOH discretization and convex QP.

Two QP routes are available.  ``method="active-set"`` is a self-contained
primal active-set solver with deterministic pivoting, intended for problems
of up to a few hundred variables.  ``method="interior-point"`` hands the same
problem to the Clarabel interior-point solver, which is much faster on the
sparse, banded problems produced by the supervisory controller.  Both return
the same :class:`QpResult` and are checked against each other in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np

__all__ = [
    "QpProblem",
    "QpResult",
    "QpUnboundedError",
    "QpWorkspace",
    "as_matrix",
    "expm",
    "rk4_step",
    "solve_qp",
    "zoh_discretize",
]

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
MAX_ITER = "MaxIter"


def as_matrix(a, name: str = "matrix", ndim: int = 2) -> np.ndarray:
    """Return ``a`` as a finite float array with ``ndim`` dimensions."""
    arr = np.asarray(a, dtype=float)
    if ndim == 2 and arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must have {ndim} dimensions, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


# ---------------------------------------------------------------------------
# matrix exponential and discretization
# ---------------------------------------------------------------------------

_PADE_ORDER = 6
_PADE_COEFFS = np.array(
    [
        factorial(2 * _PADE_ORDER - j)
        * factorial(_PADE_ORDER)
        / (factorial(2 * _PADE_ORDER) * factorial(j) * factorial(_PADE_ORDER - j))
        for j in range(_PADE_ORDER + 1)
    ]
)
# Scaled 1-norm threshold; keeps the truncation error of the [6/6] Pade
# approximant far below double precision round-off.
_SCALING_THRESHOLD = 0.5


def expm(a) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a [6/6] Pade approximant."""
    a = as_matrix(a, "a")
    n, m = a.shape
    if n != m:
        raise ValueError(f"expm needs a square matrix, got {a.shape}")
    norm = np.linalg.norm(a, 1)
    squarings = 0
    if norm > _SCALING_THRESHOLD:
        squarings = int(np.ceil(np.log2(norm / _SCALING_THRESHOLD)))
    scaled = a / (2.0**squarings)

    ident = np.eye(n)
    power = ident
    num = _PADE_COEFFS[0] * ident
    den = _PADE_COEFFS[0] * ident
    for j in range(1, _PADE_ORDER + 1):
        power = power @ scaled
        term = _PADE_COEFFS[j] * power
        num = num + term
        den = den + term if j % 2 == 0 else den - term
    result = np.linalg.solve(den, num)
    for _ in range(squarings):
        result = result @ result
    return result


def zoh_discretize(ac, bc, ec, dt: float):
    """Exact zero-order-hold discretization of ``x' = Ac x + Bc u + Ec d``.

    Parameters
    ----------
    ac, bc, ec : array_like
        Continuous state, input and disturbance matrices.  ``bc`` and ``ec``
        may be 1-D, in which case they are treated as single columns.
    dt : float
        Sample time in seconds, strictly positive.

    Returns
    -------
    ad, bd, ed : ndarray
        Discrete matrices such that piecewise-constant ``u`` and ``d`` give
        ``x[k+1] = ad x[k] + bd u[k] + ed d[k]`` exactly at sample instants.
    """
    ac = as_matrix(ac, "Ac")
    n = ac.shape[0]
    if ac.shape[1] != n:
        raise ValueError(f"Ac must be square, got {ac.shape}")
    bc = as_matrix(bc, "Bc")
    ec = as_matrix(ec, "Ec")
    if bc.shape[0] != n or ec.shape[0] != n:
        raise ValueError("Bc and Ec must have as many rows as Ac")
    if not (np.isfinite(dt) and dt > 0):
        raise ValueError(f"dt must be positive and finite, got {dt}")
    nu, nd = bc.shape[1], ec.shape[1]
    block = np.zeros((n + nu + nd, n + nu + nd))
    block[:n, :n] = ac
    block[:n, n : n + nu] = bc
    block[:n, n + nu :] = ec
    phi = expm(block * dt)
    return phi[:n, :n], phi[:n, n : n + nu], phi[:n, n + nu :]


def rk4_step(f, t: float, x: np.ndarray, h: float) -> np.ndarray:
    """One classical Runge-Kutta step of ``x' = f(t, x)``."""
    k1 = f(t, x)
    k2 = f(t + h / 2, x + h / 2 * k1)
    k3 = f(t + h / 2, x + h / 2 * k2)
    k4 = f(t + h, x + h * k3)
    return x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


# ---------------------------------------------------------------------------
# quadratic programming
# ---------------------------------------------------------------------------


class QpUnboundedError(ValueError):
    """Raised when the QP objective is unbounded below on the feasible set."""


@dataclass(frozen=True)
class QpProblem:
    """``min ½xᵀHx + gᵀx`` subject to equalities, inequalities and bounds.

    ``sense`` holds one of ``"<="`` / ``">="`` per inequality row; it defaults
    to ``"<="`` everywhere.  Infinite bounds are allowed.
    """

    H: np.ndarray
    g: np.ndarray
    Aeq: np.ndarray | None = None
    beq: np.ndarray | None = None
    Ain: np.ndarray | None = None
    bin: np.ndarray | None = None
    sense: tuple[str, ...] | None = None
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None

    def __post_init__(self):
        H = as_matrix(self.H, "H")
        n = H.shape[0]
        if H.shape != (n, n):
            raise ValueError(f"H must be square, got {H.shape}")
        scale = max(1.0, float(np.max(np.abs(H))) if H.size else 1.0)
        if np.max(np.abs(H - H.T), initial=0.0) > 1e-12 * scale:
            raise ValueError("H must be symmetric")
        g = as_matrix(self.g, "g", ndim=1)
        if g.shape != (n,):
            raise ValueError(f"g has length {g.size}, expected {n}")
        Aeq, beq = _rows(self.Aeq, self.beq, n, "Aeq")
        Ain, bin_ = _rows(self.Ain, self.bin, n, "Ain")
        sense = self.sense
        if sense is None:
            sense = ("<=",) * Ain.shape[0]
        sense = tuple(sense)
        if len(sense) != Ain.shape[0] or any(s not in ("<=", ">=") for s in sense):
            raise ValueError("sense must hold '<=' or '>=' for every inequality row")
        lb = np.full(n, -np.inf) if self.lb is None else np.asarray(self.lb, float)
        ub = np.full(n, np.inf) if self.ub is None else np.asarray(self.ub, float)
        if lb.shape != (n,) or ub.shape != (n,):
            raise ValueError("bounds must have one entry per variable")
        if np.any(np.isnan(lb)) or np.any(np.isnan(ub)):
            raise ValueError("bounds must not be NaN")
        for name, value in (
            ("H", H), ("g", g), ("Aeq", Aeq), ("beq", beq), ("Ain", Ain),
            ("bin", bin_), ("sense", sense), ("lb", lb), ("ub", ub),
        ):
            object.__setattr__(self, name, value)

    @property
    def n(self) -> int:
        return self.H.shape[0]

    def objective(self, x) -> float:
        x = np.asarray(x, float)
        return float(0.5 * x @ self.H @ x + self.g @ x)

    def inequality_form(self):
        """All inequalities and finite bounds as rows of ``G x <= h``."""
        sign = np.array([1.0 if s == "<=" else -1.0 for s in self.sense])
        rows = [self.Ain * sign[:, None]]
        rhs = [self.bin * sign]
        eye = np.eye(self.n)
        up = np.isfinite(self.ub)
        lo = np.isfinite(self.lb)
        rows += [eye[up], -eye[lo]]
        rhs += [self.ub[up], -self.lb[lo]]
        return np.vstack(rows), np.concatenate(rhs)

    def max_violation(self, x) -> float:
        x = np.asarray(x, float)
        G, h = self.inequality_form()
        viol = [0.0]
        if G.shape[0]:
            viol.append(float(np.max(G @ x - h)))
        if self.Aeq.shape[0]:
            viol.append(float(np.max(np.abs(self.Aeq @ x - self.beq))))
        return max(viol)


def _rows(A, b, n, name):
    if A is None:
        return np.zeros((0, n)), np.zeros(0)
    A = as_matrix(A, name)
    if A.shape[0] == 0:
        return np.zeros((0, n)), np.zeros(0)
    b = as_matrix(b, name.replace("A", "b"), ndim=1)
    if A.shape[1] != n or b.shape != (A.shape[0],):
        raise ValueError(f"{name} has shape {A.shape}, rhs {b.shape}; expected (m, {n}) and (m,)")
    return A, b


@dataclass
class QpResult:
    """Solution report; ``eq_multipliers``/``ineq_multipliers`` follow ``inequality_form`` order."""

    x: np.ndarray | None
    objective: float
    status: str
    iterations: int = 0
    eq_multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ineq_multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    kkt_residual: float = np.nan
    dual_bound: float = -np.inf

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def _check_psd(H: np.ndarray) -> None:
    if H.size == 0:
        return
    eig = np.linalg.eigvalsh(H)
    scale = max(1.0, float(np.max(np.abs(eig))))
    if eig[0] < -1e-10 * scale:
        raise ValueError(
            f"H is not positive semidefinite: smallest eigenvalue {eig[0]:.3e}"
        )


def solve_qp(p: QpProblem, tol: float = 1e-8, max_iter: int | None = None,
             method: str = "active-set") -> QpResult:
    """Solve a convex QP.

    ``method`` is ``"active-set"`` (own implementation) or ``"interior-point"``
    (Clarabel).  Raises ``ValueError`` for a non-PSD Hessian and
    :class:`QpUnboundedError` when the objective has no lower bound.
    """
    _check_psd(p.H)
    if method == "active-set":
        return _solve_active_set(p, tol, max_iter)
    if method == "interior-point":
        return _solve_interior_point(p, tol, max_iter)
    raise ValueError(f"unknown QP method {method!r}")


def _finish(p: QpProblem, x, lam_eq, lam_in, status, iterations) -> QpResult:
    G, h = p.inequality_form()
    grad = p.H @ x + p.g
    stat = grad + p.Aeq.T @ lam_eq + G.T @ lam_in
    slack = G @ x - h
    residuals = [np.max(np.abs(stat), initial=0.0)]
    residuals.append(max(0.0, np.max(slack, initial=0.0)))
    if p.Aeq.shape[0]:
        residuals.append(np.max(np.abs(p.Aeq @ x - p.beq)))
    residuals.append(max(0.0, -np.min(lam_in, initial=0.0)))
    residuals.append(np.max(np.abs(lam_in * slack), initial=0.0))
    obj = p.objective(x)
    dual = obj + float(lam_in @ slack) + float(lam_eq @ (p.Aeq @ x - p.beq))
    return QpResult(
        x=x, objective=obj, status=status, iterations=iterations,
        eq_multipliers=lam_eq, ineq_multipliers=lam_in,
        kkt_residual=float(max(residuals)), dual_bound=dual,
    )


# --- primal active set -----------------------------------------------------


def _null_space(A: np.ndarray, n: int, rtol: float = 1e-10):
    if A.shape[0] == 0:
        return np.eye(n)
    _, s, vt = np.linalg.svd(A, full_matrices=True)
    rank = int(np.sum(s > rtol * max(1.0, s[0]))) if s.size else 0
    return vt[rank:].T


def _active_set_core(H, g, E, G, h, x, working, tol, max_iter):
    """Primal active-set iterations from a feasible ``x``.

    Returns ``(x, working, lam_eq, lam_work, status, iterations)``.
    """
    n = x.size
    working = sorted(working)
    degenerate_steps = 0
    for it in range(1, max_iter + 1):
        A_w = np.vstack([E, G[working]]) if working else E
        Z = _null_space(A_w, n)
        grad = H @ x + g
        step = np.zeros(n)
        newton = True
        if Z.shape[1]:
            Hr = Z.T @ H @ Z
            gz = Z.T @ grad
            lam, V = np.linalg.eigh(Hr)
            curv_tol = 1e-10 * max(1.0, float(np.max(np.abs(lam))))
            coef = V.T @ gz
            flat = lam <= curv_tol
            gscale = max(1.0, float(np.max(np.abs(grad))))
            if np.any(flat & (np.abs(coef) > 1e-12 * gscale)):
                # zero-curvature descent direction: move until something blocks
                pz = -(V[:, flat] @ coef[flat])
                newton = False
            else:
                pz = -(V[:, ~flat] @ (coef[~flat] / lam[~flat]))
            step = Z @ pz
        xscale = max(1.0, float(np.max(np.abs(x))))
        if np.max(np.abs(step)) <= 1e-12 * xscale and newton:
            A_rows = A_w.T
            if A_rows.shape[1]:
                mult, *_ = np.linalg.lstsq(A_rows, -grad, rcond=None)
            else:
                mult = np.zeros(0)
            lam_eq = mult[: E.shape[0]]
            lam_w = mult[E.shape[0]:]
            if lam_w.size == 0 or np.min(lam_w) >= -tol:
                return x, working, lam_eq, lam_w, OPTIMAL, it
            if degenerate_steps > 2 * n:
                drop = int(np.flatnonzero(lam_w < -tol)[0])  # Bland fallback
            else:
                drop = int(np.argmin(lam_w))  # ties resolve to the lowest index
            working = working[:drop] + working[drop + 1:]
            continue
        # ratio test over constraints outside the working set
        alpha = 1.0 if newton else np.inf
        blocking = -1
        Gp = G @ step
        ws = set(working)
        slack = h - G @ x
        for i in np.flatnonzero(Gp > 1e-14 * max(1.0, np.max(np.abs(step)))):
            if i in ws:
                continue
            ratio = max(slack[i], 0.0) / Gp[i]
            if ratio < alpha - 1e-15:
                alpha = ratio
                blocking = int(i)
        if not np.isfinite(alpha):
            raise QpUnboundedError("QP objective is unbounded below")
        degenerate_steps = degenerate_steps + 1 if alpha <= 1e-14 else 0
        x = x + alpha * step
        if blocking >= 0:
            working = sorted(working + [blocking])
    return x, working, np.zeros(E.shape[0]), np.zeros(len(working)), MAX_ITER, max_iter


def _solve_active_set(p: QpProblem, tol: float, max_iter: int | None) -> QpResult:
    n = p.n
    G, h = p.inequality_form()
    E, e = p.Aeq, p.beq
    m_in, m_eq = G.shape[0], E.shape[0]
    limit = max_iter or 50 * (n + m_in + m_eq + 10)

    # Phase 1: minimise t + sum(r+ + r-) with G x - t <= h, E x + r+ - r- = e.
    x0 = np.clip(np.zeros(n), p.lb, p.ub)
    resid = e - E @ x0
    rp, rm = np.maximum(resid, 0.0), np.maximum(-resid, 0.0)
    t0 = max(0.0, float(np.max(G @ x0 - h, initial=0.0)))
    nv = n + 1 + 2 * m_eq
    z0 = np.concatenate([x0, [t0], rp, rm])
    G1 = np.zeros((m_in + 1 + 2 * m_eq, nv))
    G1[:m_in, :n] = G
    G1[:m_in, n] = -1.0
    G1[m_in:, n:] = -np.eye(1 + 2 * m_eq)
    h1 = np.concatenate([h, np.zeros(1 + 2 * m_eq)])
    E1 = np.hstack([E, np.zeros((m_eq, 1)), np.eye(m_eq), -np.eye(m_eq)])
    c1 = np.concatenate([np.zeros(n), np.ones(1 + 2 * m_eq)])
    z, _, _, _, status, it1 = _active_set_core(
        np.zeros((nv, nv)), c1, E1, G1, h1, z0, [], tol, limit
    )
    if status != OPTIMAL:
        return QpResult(None, np.nan, MAX_ITER, it1)
    scale = max(1.0, float(np.max(np.abs(h), initial=0.0)), float(np.max(np.abs(e), initial=0.0)))
    if c1 @ z > max(tol, 1e-9) * scale:
        return QpResult(None, np.nan, INFEASIBLE, it1)
    x = z[:n]
    # remove the tiny residual infeasibility left by phase one
    if m_eq:
        dx, *_ = np.linalg.lstsq(E, e - E @ x, rcond=None)
        x = x + dx
    x, working, lam_eq, lam_w, status, it2 = _active_set_core(
        p.H, p.g, E, G, h, x, [], tol, limit
    )
    if status != OPTIMAL:
        return QpResult(x, p.objective(x), MAX_ITER, it1 + it2)
    lam_in = np.zeros(m_in)
    lam_in[working] = lam_w
    lam_in = np.maximum(lam_in, 0.0)
    return _finish(p, x, lam_eq, lam_in, OPTIMAL, it1 + it2)


# --- interior point (Clarabel) --------------------------------------------


class QpWorkspace:
    """A QP prepared once and re-solved under changing variable bounds.

    Branch-and-bound visits many relaxations that differ only in bounds; the
    workspace keeps the sparse constraint data (and, for the interior-point
    route, the Clarabel solver object) across those solves.
    """

    def __init__(self, p: QpProblem, method: str = "interior-point", tol: float = 1e-8,
                 check_psd: bool = True):
        if method not in ("active-set", "interior-point"):
            raise ValueError(f"unknown QP method {method!r}")
        if check_psd:
            _check_psd(p.H)
        self.problem = p
        self.method = method
        self.tol = tol
        self._solver = None
        self._pattern = None
        if method == "interior-point":
            from scipy import sparse

            sign = np.array([1.0 if s == "<=" else -1.0 for s in p.sense])
            self._P = sparse.triu(sparse.csc_matrix(p.H)).tocsc()
            self._Aeq = sparse.csr_matrix(p.Aeq)
            self._Gin = sparse.csr_matrix(p.Ain * sign[:, None])
            self._hin = p.bin * sign
            self._H = sparse.csr_matrix(p.H)

    def solve(self, lb=None, ub=None, max_iter: int | None = None) -> QpResult:
        p = self.problem
        lb = p.lb if lb is None else np.asarray(lb, float)
        ub = p.ub if ub is None else np.asarray(ub, float)
        if np.any(lb > ub + 1e-12):
            return QpResult(None, np.nan, INFEASIBLE)
        if self.method == "active-set":
            q = QpProblem(p.H, p.g, p.Aeq, p.beq, p.Ain, p.bin, p.sense, lb, ub)
            return _solve_active_set(q, self.tol, max_iter)
        return self._solve_ip(lb, ub, max_iter)

    def _solve_ip(self, lb, ub, max_iter):
        import clarabel
        from scipy import sparse

        p = self.problem
        up, lo = np.isfinite(ub), np.isfinite(lb)
        pattern = (up.tobytes(), lo.tobytes())
        eye = sparse.identity(p.n, format="csr")
        b = np.concatenate([p.beq, self._hin, ub[up], -lb[lo]])
        if pattern != self._pattern or self._solver is None:
            G = sparse.vstack([self._Gin, eye[up], -eye[lo]]).tocsr()
            self._G = G
            A = sparse.vstack([self._Aeq, G]).tocsc()
            cones = []
            if p.Aeq.shape[0]:
                cones.append(clarabel.ZeroConeT(p.Aeq.shape[0]))
            if G.shape[0]:
                cones.append(clarabel.NonnegativeConeT(G.shape[0]))
            settings = clarabel.DefaultSettings()
            settings.verbose = False
            settings.presolve_enable = False
            settings.tol_gap_abs = min(1e-8, self.tol)
            settings.tol_gap_rel = min(1e-8, self.tol)
            settings.tol_feas = min(1e-8, self.tol)
            if max_iter:
                settings.max_iter = max_iter
            self._solver = clarabel.DefaultSolver(self._P, p.g, A, b, cones, settings)
            self._pattern = pattern
        else:
            self._solver.update(b=b)
        sol = self._solver.solve()
        status = str(sol.status)
        if status in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
            return QpResult(None, np.nan, INFEASIBLE, sol.iterations)
        if status in ("DualInfeasible", "AlmostDualInfeasible"):
            raise QpUnboundedError("QP objective is unbounded below")
        if status not in ("Solved", "AlmostSolved"):
            return QpResult(None, np.nan, MAX_ITER, sol.iterations)
        x = np.array(sol.x)
        z = np.array(sol.z)
        m_eq = p.Aeq.shape[0]
        lam_eq, lam_in = z[:m_eq], np.maximum(z[m_eq:], 0.0)
        G = self._G
        h = b[m_eq:]
        slack = G @ x - h
        stat = self._H @ x + p.g + self._Aeq.T @ lam_eq + G.T @ lam_in
        eq_res = self._Aeq @ x - p.beq
        residual = max(
            float(np.max(np.abs(stat), initial=0.0)),
            max(0.0, float(np.max(slack, initial=0.0))),
            float(np.max(np.abs(eq_res), initial=0.0)),
            float(np.max(np.abs(lam_in * slack), initial=0.0)),
        )
        obj = p.objective(x)
        dual = obj + float(lam_in @ slack) + float(lam_eq @ eq_res)
        return QpResult(x, obj, OPTIMAL, sol.iterations, lam_eq, lam_in, residual, dual)


def _solve_interior_point(p: QpProblem, tol: float, max_iter: int | None) -> QpResult:
    return QpWorkspace(p, "interior-point", tol, check_psd=False).solve(max_iter=max_iter)
