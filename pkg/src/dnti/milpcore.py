"""Generic mixed-integer linear programming kernel.

Dense bounded-variable revised simplex (two-phase primal plus dual simplex
for warm re-solves) inside a best-bound branch-and-bound over binary
variables. Inequality rows that involve binary variables are activated
lazily: they enter the working LP only once violated, which keeps the big-M
indicator rows of switching models out of the hot loop until a branching
decision makes them relevant. Activated rows are valid for every node, so
the working LP only ever grows.

The kernel knows nothing about power networks; problem structure arrives
only through the model (rows, bounds, optional binary fix hints).
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np

INF = math.inf

CONTINUOUS = "continuous"
BINARY = "binary"

LE, EQ, GE = "<=", "=", ">="


class ModelError(ValueError):
    """Raised for malformed models."""


class NumericalError(RuntimeError):
    """Raised when the simplex exceeds its pivot budget or loses the basis."""


@dataclass
class Variable:
    id: int
    name: str
    kind: str = CONTINUOUS
    lower: float = -INF
    upper: float = INF


@dataclass
class Constraint:
    coefficients: dict
    sense: str
    rhs: float
    name: str = ""


@dataclass
class MilpModel:
    name: str = "model"
    variables: list = field(default_factory=list)
    constraints: list = field(default_factory=list)
    objective: dict = field(default_factory=dict)
    # optional (binary var id, value) fixings a builder has proven safe
    binary_fix_hints: list = field(default_factory=list)

    def add_variable(self, name, kind=CONTINUOUS, lower=-INF, upper=INF) -> int:
        if kind == BINARY:
            lower, upper = 0.0, 1.0
        vid = len(self.variables)
        self.variables.append(Variable(vid, name, kind, lower, upper))
        return vid

    def add_continuous(self, name, lower=-INF, upper=INF) -> int:
        return self.add_variable(name, CONTINUOUS, lower, upper)

    def add_binary(self, name) -> int:
        return self.add_variable(name, BINARY)

    def add_constraint(self, coefficients, sense, rhs, name="") -> int:
        self.constraints.append(Constraint(dict(coefficients), sense, float(rhs), name))
        return len(self.constraints) - 1

    @property
    def binary_ids(self) -> list:
        return [v.id for v in self.variables if v.kind == BINARY]

    def validate(self) -> None:
        n = len(self.variables)
        for v in self.variables:
            if v.kind == BINARY and (v.lower, v.upper) != (0.0, 1.0):
                raise ModelError(f"binary variable {v.name} must have bounds [0, 1]")
            if v.lower > v.upper:
                raise ModelError(f"variable {v.name} has empty bound interval")
        for k, con in enumerate(self.constraints):
            if con.sense not in (LE, EQ, GE):
                raise ModelError(f"constraint {k}: bad sense {con.sense!r}")
            if not math.isfinite(con.rhs):
                raise ModelError(f"constraint {k}: non-finite rhs")
            for j, coef in con.coefficients.items():
                if not 0 <= j < n:
                    raise ModelError(f"constraint {k}: unknown variable id {j}")
                if not math.isfinite(coef):
                    raise ModelError(f"constraint {k}: non-finite coefficient")
        for j, coef in self.objective.items():
            if not 0 <= j < n:
                raise ModelError(f"objective references unknown variable id {j}")
            if not math.isfinite(coef):
                raise ModelError("objective has non-finite coefficient")


@dataclass
class SolveOptions:
    integrality_tol: float = 1e-6
    feasibility_tol: float = 1e-7
    relative_gap: float = 1e-6
    node_limit: int = 200_000
    time_limit_seconds: float = 120.0
    branching: str = "most-fractional"
    node_order: str = "best-bound"
    deterministic_tiebreak: str = "lowest-id"
    # larger value = branched earlier; unset variables default to 0
    branch_priority: dict = None
    # coarse early-stop gap; None disables the gap_limit status
    gap_limit: float = None
    enable_dive: bool = True

    def __post_init__(self):
        for name in ("integrality_tol", "feasibility_tol", "relative_gap"):
            if getattr(self, name) <= 0:
                raise ModelError(f"{name} must be positive")


@dataclass
class MilpSolution:
    status: str  # optimal | infeasible | gap_limit | node_limit | time_limit
    values: dict
    objective: float
    gap: float
    nodes_explored: int


@dataclass
class LpResult:
    status: str  # optimal | infeasible | unbounded
    values: dict
    objective: float


# ---------------------------------------------------------------------------
# Simplex engine

_NB_LB, _NB_UB, _BASIC, _NB_FREE = 0, 1, 2, 3


class _Simplex:
    """Bounded-variable revised simplex over a row-activation working set.

    Columns ``0..n-1`` are the structural variables; one slack column is
    appended per activated row, and artificial columns are appended during
    cold starts then frozen to [0, 0]. The explicit basis inverse is
    maintained by eta updates with periodic refactorization.
    """

    REFACTOR_EVERY = 120

    def __init__(self, A_all, senses_all, rhs_all, c, lb, ub, feas_tol=1e-7):
        self.A_all = A_all  # (M, n) dense, every model row
        self.senses_all = senses_all
        self.rhs_all = rhs_all
        self.n = A_all.shape[1]
        self.feas_tol = feas_tol
        self.c_struct = c.copy()

        self.active = []  # model row index per active (local) row
        self.A = np.zeros((0, self.n))
        self.rhs = np.zeros(0)
        # tail columns (slack or artificial): column = tail_sign * e_{tail_row}
        self.tail_row = np.zeros(0, dtype=int)
        self.tail_sign = np.zeros(0)
        self.tail_art = np.zeros(0, dtype=bool)

        self.lb = lb.astype(float).copy()
        self.ub = ub.astype(float).copy()
        self.cost = c.copy()
        self.stat = np.array(
            [self._default_stat(self.lb[j], self.ub[j]) for j in range(self.n)], dtype=np.int8
        )
        self.basis = np.zeros(0, dtype=int)
        self.Binv = np.zeros((0, 0))
        self.xB = np.zeros(0)
        self.etas = 0
        self.pivots = 0

    # -- geometry ------------------------------------------------------------

    @staticmethod
    def _default_stat(lo, hi):
        if lo == -INF and hi == INF:
            return _NB_FREE
        if lo > -INF and (hi == INF or abs(lo) <= abs(hi)):
            return _NB_LB
        return _NB_UB

    @property
    def m(self):
        return len(self.active)

    @property
    def width(self):
        return self.n + len(self.tail_row)

    def col(self, j):
        if j < self.n:
            return self.A[:, j]
        k = j - self.n
        e = np.zeros(self.m)
        e[self.tail_row[k]] = self.tail_sign[k]
        return e

    def _nb_values(self):
        """Values of all columns assuming nonbasic-at-bound (basic slots garbage)."""
        v = np.where(self.stat == _NB_UB, self.ub, np.where(self.stat == _NB_LB, self.lb, 0.0))
        return v

    def nb_value(self, j):
        s = self.stat[j]
        if s == _NB_LB:
            return self.lb[j]
        if s == _NB_UB:
            return self.ub[j]
        return 0.0

    @staticmethod
    def _slack_bounds(sense):
        if sense == LE:
            return 0.0, INF
        if sense == GE:
            return -INF, 0.0
        return 0.0, 0.0

    def add_rows(self, model_rows):
        """Activate model rows; their slacks enter the basis."""
        if not model_rows:
            return
        k0 = self.m
        new_A = self.A_all[model_rows]
        self.A = np.vstack([self.A, new_A]) if k0 else new_A.copy()
        self.rhs = np.concatenate([self.rhs, self.rhs_all[model_rows]])
        old_basis = self.basis.copy()
        for i, row in enumerate(model_rows):
            lo, hi = self._slack_bounds(self.senses_all[row])
            self.active.append(row)
            self.tail_row = np.append(self.tail_row, k0 + i)
            self.tail_sign = np.append(self.tail_sign, 1.0)
            self.tail_art = np.append(self.tail_art, False)
            self.lb = np.append(self.lb, lo)
            self.ub = np.append(self.ub, hi)
            self.cost = np.append(self.cost, 0.0)
            self.stat = np.append(self.stat, _BASIC)
            self.basis = np.append(self.basis, self.n + len(self.tail_row) - 1)
        mA = self.m
        newB = np.zeros((mA, mA))
        newB[:k0, :k0] = self.Binv
        for i in range(len(model_rows)):
            rowvec = np.zeros(k0)
            for pos, b in enumerate(old_basis):
                if b < self.n:
                    rowvec[pos] = new_A[i, b]
                # old slack/artificial columns have no entry in new rows
            if k0:
                newB[k0 + i, :k0] = -rowvec @ self.Binv
            newB[k0 + i, k0 + i] = 1.0
        self.Binv = newB
        self._recompute_xB()

    # -- state ---------------------------------------------------------------

    def _effective_rhs(self):
        v = self._nb_values()
        v[self.stat == _BASIC] = 0.0
        b = self.rhs - self.A @ v[: self.n]
        tail_vals = v[self.n:]
        if len(tail_vals):
            np.subtract.at(b, self.tail_row, self.tail_sign * tail_vals)
        return b

    def _recompute_xB(self):
        self.xB = self.Binv @ self._effective_rhs()

    def refactor(self):
        m = self.m
        B = np.zeros((m, m))
        for k, j in enumerate(self.basis):
            B[:, k] = self.col(j)
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("singular basis during refactorization") from exc
        if not np.isfinite(self.Binv).all():
            raise NumericalError("non-finite basis inverse")
        self.etas = 0
        self._recompute_xB()

    def _maybe_refactor(self):
        if self.etas >= self.REFACTOR_EVERY:
            self.refactor()

    def set_bound(self, j, lo, hi):
        self.lb[j], self.ub[j] = lo, hi
        if self.stat[j] != _BASIC:
            self.stat[j] = self._default_stat(lo, hi) if lo < hi else _NB_LB
            if lo < hi:
                # keep the variable parked where it was when still legal
                pass

    def values(self):
        x = self._nb_values()[: self.n]
        basic_struct = self.basis < self.n
        x[self.basis[basic_struct]] = self.xB[basic_struct]
        return x

    def objective_value(self):
        return float(self.c_struct @ self.values())

    # -- pricing -------------------------------------------------------------

    def _reduced_costs(self, cost):
        y = cost[self.basis] @ self.Binv
        d = np.empty(self.width)
        d[: self.n] = cost[: self.n] - y @ self.A
        if len(self.tail_row):
            d[self.n:] = cost[self.n:] - y[self.tail_row] * self.tail_sign
        return d

    def _movable(self):
        """Columns allowed to enter: not basic, not frozen (lb==ub), not artificial."""
        movable = (self.stat != _BASIC) & (self.ub - self.lb > 1e-12)
        if self.tail_art.any():
            movable[self.n:] &= ~self.tail_art
        return movable

    def _apply_pivot(self, leave_pos, leave_stat, enter_j, w, enter_value):
        leave_j = self.basis[leave_pos]
        br = self.Binv[leave_pos] / w[leave_pos]
        self.Binv -= np.outer(w, br)
        self.Binv[leave_pos] = br
        self.basis[leave_pos] = enter_j
        self.stat[leave_j] = leave_stat
        self.stat[enter_j] = _BASIC
        self.xB[leave_pos] = enter_value
        self.etas += 1
        self.pivots += 1
        self._maybe_refactor()

    # -- primal simplex --------------------------------------------------------

    def primal(self, cost, max_pivots=None):
        """Minimize ``cost`` from the current primal-feasible basis.

        Dantzig pricing, Bland's rule after 10*(rows+cols) degenerate pivots.
        Returns 'optimal' or 'unbounded'.
        """
        tol = 1e-9
        bland_after = 10 * (self.m + self.width)
        degenerate = 0
        bland = False
        if max_pivots is None:
            max_pivots = 100 * (self.m + self.width) + 5000
        for _ in range(max_pivots):
            d = self._reduced_costs(cost)
            movable = self._movable()
            stat = self.stat
            cand = movable & (
                ((stat == _NB_LB) & (d < -tol))
                | ((stat == _NB_UB) & (d > tol))
                | ((stat == _NB_FREE) & (np.abs(d) > tol))
            )
            idx = np.flatnonzero(cand)
            if idx.size == 0:
                return "optimal"
            enter = int(idx[0]) if bland else int(idx[np.argmax(np.abs(d[idx]))])
            dirn = 1.0
            if self.stat[enter] == _NB_UB or (self.stat[enter] == _NB_FREE and d[enter] > 0):
                dirn = -1.0
            w = self.Binv @ self.col(enter)
            rate = -dirn * w
            t_best, leave_pos, leave_stat = INF, -1, _NB_LB
            lbB = self.lb[self.basis]
            ubB = self.ub[self.basis]
            for i in range(self.m):
                r = rate[i]
                if r > 1e-11:
                    if ubB[i] == INF:
                        continue
                    t = (ubB[i] - self.xB[i]) / r
                    hit = _NB_UB
                elif r < -1e-11:
                    if lbB[i] == -INF:
                        continue
                    t = (lbB[i] - self.xB[i]) / r
                    hit = _NB_LB
                else:
                    continue
                if t < -1e-9:
                    t = 0.0
                if t < t_best - 1e-12 or (
                    t <= t_best + 1e-12
                    and leave_pos >= 0
                    and self.basis[i] < self.basis[leave_pos]
                ):
                    t_best, leave_pos, leave_stat = t, i, hit
            span = self.ub[enter] - self.lb[enter]
            if span < t_best:  # bound flip, no basis change
                if span == INF:
                    return "unbounded"
                self.stat[enter] = _NB_UB if self.stat[enter] == _NB_LB else _NB_LB
                self.xB = self.xB - dirn * span * w
                self.pivots += 1
                continue
            if leave_pos < 0:
                return "unbounded"
            if t_best <= 1e-10:
                degenerate += 1
                if degenerate > bland_after:
                    bland = True
            enter_value = self.nb_value(enter) + dirn * max(t_best, 0.0)
            self.xB = self.xB - dirn * t_best * w
            self._apply_pivot(leave_pos, leave_stat, enter, w, enter_value)
        raise NumericalError("primal simplex exceeded pivot budget")

    # -- dual simplex ----------------------------------------------------------

    def dual(self, max_pivots=None):
        """Restore primal feasibility, keeping optimality when the start basis
        is dual feasible. Returns 'optimal' (primal feasible) or 'infeasible'.

        The infeasibility certificate (a violated row with no eligible
        entering column) is valid regardless of dual feasibility.
        """
        tol = self.feas_tol
        if max_pivots is None:
            max_pivots = 100 * (self.m + self.width) + 5000
        for _ in range(max_pivots):
            lbB = self.lb[self.basis]
            ubB = self.ub[self.basis]
            viol_lo = np.where(lbB > -INF, lbB - self.xB, -INF)
            viol_hi = np.where(ubB < INF, self.xB - ubB, -INF)
            worst = np.maximum(viol_lo, viol_hi)
            r = int(np.argmax(worst))
            if worst[r] <= tol:
                return "optimal"
            below = viol_lo[r] > viol_hi[r]  # basic below its lower bound
            ebr = self.Binv[r]
            alpha = np.empty(self.width)
            alpha[: self.n] = ebr @ self.A
            if len(self.tail_row):
                alpha[self.n:] = ebr[self.tail_row] * self.tail_sign
            movable = self._movable()
            stat = self.stat
            if below:  # x_B[r] must increase: dx_B[r] = -alpha_j * dx_j
                cand = movable & (
                    ((stat == _NB_LB) & (alpha < -1e-9))
                    | ((stat == _NB_UB) & (alpha > 1e-9))
                    | ((stat == _NB_FREE) & (np.abs(alpha) > 1e-9))
                )
            else:
                cand = movable & (
                    ((stat == _NB_LB) & (alpha > 1e-9))
                    | ((stat == _NB_UB) & (alpha < -1e-9))
                    | ((stat == _NB_FREE) & (np.abs(alpha) > 1e-9))
                )
            idx = np.flatnonzero(cand)
            if idx.size == 0:
                return "infeasible"
            d = self._reduced_costs(self.cost)
            ratios = np.abs(d[idx]) / np.abs(alpha[idx])
            pick = idx[ratios <= ratios.min() + 1e-10]
            enter = int(pick[0])
            w = self.Binv @ self.col(enter)
            leave_stat = _NB_LB if below else _NB_UB
            # entering value: solve row r for the entering variable
            target = lbB[r] if below else ubB[r]
            t = (self.xB[r] - target) / w[r]
            enter_value = self.nb_value(enter) - t
            self.xB = self.xB + t * w
            self._apply_pivot(r, leave_stat, enter, w, enter_value)
            self._recompute_xB()
        raise NumericalError("dual simplex exceeded pivot budget")

    # -- two-phase cold start ----------------------------------------------------

    def _compact_artificials(self):
        if not self.tail_art.any():
            return
        keep_cols = np.concatenate([np.ones(self.n, dtype=bool), ~self.tail_art])
        self.lb = self.lb[keep_cols]
        self.ub = self.ub[keep_cols]
        self.cost = self.cost[keep_cols]
        self.stat = self.stat[keep_cols]
        keep = ~self.tail_art
        self.tail_row = self.tail_row[keep]
        self.tail_sign = self.tail_sign[keep]
        self.tail_art = self.tail_art[keep]

    def cold_start(self):
        """All-slack basis, artificials on violated rows, then two phases.

        Returns 'optimal', 'infeasible' or 'unbounded'.
        """
        self._compact_artificials()
        m = self.m
        for j in range(self.n):
            self.stat[j] = self._default_stat(self.lb[j], self.ub[j]) if self.lb[j] < self.ub[j] else _NB_LB
        # slack for local row i is tail index i (slacks precede any artificials)
        self.stat[self.n:] = _BASIC
        self.basis = np.arange(self.n, self.n + m, dtype=int)
        self.Binv = np.eye(m)
        self.etas = 0
        self._recompute_xB()

        n_art = 0
        for i in range(m):
            j = int(self.basis[i])
            v = self.xB[i]
            lo, hi = self.lb[j], self.ub[j]
            if v < lo - self.feas_tol or v > hi + self.feas_tol:
                nearest = lo if v < lo else hi
                self.stat[j] = _NB_LB if nearest == lo else _NB_UB
                resid = v - nearest
                self.tail_row = np.append(self.tail_row, i)
                self.tail_sign = np.append(self.tail_sign, 1.0 if resid > 0 else -1.0)
                self.tail_art = np.append(self.tail_art, True)
                self.lb = np.append(self.lb, 0.0)
                self.ub = np.append(self.ub, INF)
                self.cost = np.append(self.cost, 0.0)
                self.stat = np.append(self.stat, _BASIC)
                self.basis[i] = self.n + len(self.tail_row) - 1
                n_art += 1
        if n_art:
            self.refactor()  # artificial columns changed the basis matrix
        else:
            self._recompute_xB()

        if n_art:
            phase1 = np.zeros(self.width)
            phase1[self.n:][self.tail_art] = 1.0
            status = self.primal(phase1)
            if status == "unbounded":
                raise NumericalError("phase 1 unbounded")
            scale = max(1.0, float(np.abs(self.rhs).max()) if m else 1.0)
            if self._objective_of(phase1) > 1e-7 * scale:
                return "infeasible"
            self._freeze_artificials()
        return self.primal(self.cost)

    def _objective_of(self, cost):
        v = self._nb_values()
        v[self.stat == _BASIC] = 0.0
        total = float(cost @ v)
        total += float(cost[self.basis] @ self.xB)
        return total

    def _freeze_artificials(self):
        mask = np.zeros(self.width, dtype=bool)
        mask[self.n:][self.tail_art] = True
        self.ub[mask] = 0.0
        self.lb[mask] = 0.0
        nonbasic_art = mask & (self.stat != _BASIC)
        self.stat[nonbasic_art] = _NB_LB
        self._recompute_xB()


# ---------------------------------------------------------------------------
# model -> arrays


def _model_arrays(model: MilpModel):
    n = len(model.variables)
    M = len(model.constraints)
    A = np.zeros((M, n))
    rhs = np.zeros(M)
    senses = []
    for i, con in enumerate(model.constraints):
        for j, coef in con.coefficients.items():
            A[i, j] += coef
        rhs[i] = con.rhs
        senses.append(con.sense)
    c = np.zeros(n)
    for j, coef in model.objective.items():
        c[j] += coef
    lb = np.array([v.lower for v in model.variables], dtype=float)
    ub = np.array([v.upper for v in model.variables], dtype=float)
    return A, senses, rhs, c, lb, ub


def lp_solve(model: MilpModel, fixings: dict | None = None) -> LpResult:
    """Solve the LP relaxation (binaries relaxed to [0, 1]) with all rows active.

    ``fixings`` pins variables to values before the solve.
    """
    model.validate()
    A, senses, rhs, c, lb, ub = _model_arrays(model)
    if fixings:
        for j, val in fixings.items():
            lb[j] = ub[j] = float(val)
    eng = _Simplex(A, senses, rhs, c, lb, ub)
    eng.add_rows(list(range(len(model.constraints))))
    status = eng.cold_start()
    if status == "infeasible":
        return LpResult("infeasible", {}, INF)
    if status == "unbounded":
        return LpResult("unbounded", {}, -INF)
    x = eng.values()
    return LpResult("optimal", {j: float(x[j]) for j in range(eng.n)}, float(c @ x))


# ---------------------------------------------------------------------------
# branch and bound


def _detect_implications(model: MilpModel):
    """Pairs (a, b) meaning a=1 => b=1, from rows x_a - x_b <= 0 over binaries."""
    binset = set(model.binary_ids)
    pairs = []
    for con in model.constraints:
        if con.sense != LE or con.rhs != 0.0 or len(con.coefficients) != 2:
            continue
        items = sorted(con.coefficients.items(), key=lambda kv: kv[1])
        (jneg, cneg), (jpos, cpos) = items
        if cneg == -1.0 and cpos == 1.0 and jneg in binset and jpos in binset:
            pairs.append((jpos, jneg))
    return pairs


class _Propagator:
    def __init__(self, implications):
        self.up = {}
        self.down = {}
        for a, b in implications:  # a=1 => b=1, equivalently b=0 => a=0
            self.up.setdefault(a, []).append(b)
            self.down.setdefault(b, []).append(a)

    def closure(self, fixes: dict):
        """Transitively close binary fixings; None on contradiction."""
        out = dict(fixes)
        stack = list(fixes.items())
        while stack:
            var, val = stack.pop()
            for other in (self.up.get(var, []) if val == 1 else self.down.get(var, [])):
                have = out.get(other)
                if have is None:
                    out[other] = val
                    stack.append((other, val))
                elif have != val:
                    return None
        return out


class _BnB:
    def __init__(self, model: MilpModel, opts: SolveOptions):
        model.validate()
        self.model = model
        self.opts = opts
        self.A, self.senses, self.rhs, self.c, self.lb0, self.ub0 = _model_arrays(model)
        self.binaries = np.array(model.binary_ids, dtype=int)
        self.binset = set(model.binary_ids)
        self.prop = _Propagator(_detect_implications(model))
        self.n = len(model.variables)
        self.core_rows = []
        self.lazy_rows = []
        for i, con in enumerate(model.constraints):
            if con.sense == EQ or not (set(con.coefficients) & self.binset):
                self.core_rows.append(i)
            else:
                self.lazy_rows.append(i)
        self.lazy_idx = np.array(self.lazy_rows, dtype=int)
        self.incumbent = None
        self.incumbent_obj = INF
        self.nodes = 0
        self.start = time.monotonic()
        self.root_fixes = {}
        self.current_fixes = {}
        self.eng: _Simplex = None

    # -- engine state -----------------------------------------------------------

    def _root_bounds(self, var):
        if var in self.root_fixes:
            v = float(self.root_fixes[var])
            return v, v
        return self.lb0[var], self.ub0[var]

    def _build_engine(self, keep_rows=None):
        lb = self.lb0.copy()
        ub = self.ub0.copy()
        for var, val in self.root_fixes.items():
            lb[var] = ub[var] = float(val)
        eng = _Simplex(self.A, self.senses, self.rhs, self.c, lb, ub,
                       feas_tol=self.opts.feasibility_tol)
        eng.add_rows(keep_rows if keep_rows is not None else list(self.core_rows))
        self.eng = eng
        self.current_fixes = {}

    def _apply_fixes(self, fixes: dict):
        """Move the resident engine to a node's fix set (diff vs current)."""
        eng = self.eng
        for var in self.current_fixes:
            if var not in fixes:
                lo, hi = self._root_bounds(var)
                eng.set_bound(var, lo, hi)
        for var, val in fixes.items():
            eng.set_bound(var, float(val), float(val))
        self.current_fixes = dict(fixes)
        eng._recompute_xB()

    def _warm_solve(self):
        """Re-optimize after bound edits: dual pass then primal cleanup.

        Bound relaxations can leave the basis dual infeasible, so a primal
        pass with the true costs follows the dual feasibility restoration.
        """
        eng = self.eng
        status = eng.dual()
        if status == "infeasible":
            return "infeasible"
        status = eng.primal(eng.cost)
        if status == "unbounded":
            raise NumericalError("node LP unbounded; model bounds are inconsistent")
        return "optimal"

    def _node_lp(self):
        """Warm solve plus lazy-row activation loop; cold restart as fallback."""
        try:
            status = self._warm_solve()
            while status == "optimal":
                if not self._activate_violated(self.eng.values()):
                    return "optimal"
                status = self._warm_solve()
            return status
        except NumericalError:
            return self._cold_node()

    def _cold_node(self):
        fixes = dict(self.current_fixes)
        active_rows = list(self.eng.active) if self.eng is not None else None
        self._build_engine(keep_rows=active_rows)
        for var, val in fixes.items():
            self.eng.set_bound(var, float(val), float(val))
        self.current_fixes = fixes
        status = self.eng.cold_start()
        if status == "unbounded":
            raise NumericalError("LP relaxation unbounded")
        while status == "optimal":
            if not self._activate_violated(self.eng.values()):
                return "optimal"
            status = self.eng.dual()
            if status == "infeasible":
                return "infeasible"
            status = "optimal" if self.eng.primal(self.eng.cost) == "optimal" else "unbounded"
        return status

    def _activate_violated(self, x) -> bool:
        if not self.lazy_rows:
            return False
        acts = self.A[self.lazy_idx] @ x
        rhs = self.rhs[self.lazy_idx]
        tol = self.opts.feasibility_tol
        active = set(self.eng.active)
        out = []
        for k, row in enumerate(self.lazy_rows):
            if row in active:
                continue
            sense = self.senses[row]
            if (sense == LE and acts[k] > rhs[k] + tol) or (
                sense == GE and acts[k] < rhs[k] - tol
            ):
                out.append(row)
        if not out:
            return False
        self.eng.add_rows(out)
        return True

    # -- incumbent ---------------------------------------------------------------

    def _fractional(self, x):
        if len(self.binaries) == 0:
            return np.empty(0, dtype=int)
        vals = x[self.binaries]
        frac = np.minimum(vals, 1.0 - vals)
        return self.binaries[frac > self.opts.integrality_tol]

    def _full_violation(self, x) -> float:
        acts = self.A @ x
        worst = 0.0
        for i, sense in enumerate(self.senses):
            if sense == LE:
                worst = max(worst, acts[i] - self.rhs[i])
            elif sense == GE:
                worst = max(worst, self.rhs[i] - acts[i])
            else:
                worst = max(worst, abs(acts[i] - self.rhs[i]))
        return worst

    def _try_incumbent(self, x, obj) -> bool:
        if obj >= self.incumbent_obj - 1e-12:
            return False
        if self._full_violation(x) > 1e-6:
            return False
        self.incumbent = x.copy()
        self.incumbent_obj = obj
        return True

    def _dive(self):
        """LP-guided rounding dive from the solved root; leaves state restored."""
        saved = dict(self.current_fixes)
        fixes = dict(self.current_fixes)
        budget = 2 * len(self.binaries) + len(self.lazy_rows) + 50
        for _ in range(budget):
            x = self.eng.values()
            fracs = self._fractional(x)
            if fracs.size == 0:
                if self._activate_violated(x):
                    if self._node_lp() != "optimal":
                        break
                    continue
                self._try_incumbent(x, float(self.c @ x))
                break
            vals = x[fracs]
            pick = int(np.argmax(np.abs(vals - 0.5)))
            var, val = int(fracs[pick]), int(round(float(vals[pick])))
            step = self.prop.closure({var: val})
            if step is None:
                break
            trial = {**fixes, **step}
            self._apply_fixes(trial)
            if self._node_lp() != "optimal":
                flipped = self.prop.closure({var: 1 - val})
                if flipped is None:
                    break
                trial = {**fixes, **flipped}
                self._apply_fixes(trial)
                if self._node_lp() != "optimal":
                    break
            fixes = trial
            if float(self.c @ self.eng.values()) >= self.incumbent_obj - 1e-12:
                break
        self._apply_fixes(saved)
        self._node_lp()

    # -- search --------------------------------------------------------------------

    def _branch_var(self, x, fracs):
        if self.opts.branch_priority:
            prios = np.array([self.opts.branch_priority.get(int(v), 0) for v in fracs])
            fracs = fracs[prios == prios.max()]
        vals = x[fracs]
        score = 0.5 - np.abs(vals - 0.5)  # larger = more fractional
        pick = fracs[score >= score.max() - 1e-12]
        return int(pick.min())

    def _gap_abs(self):
        ref = max(1.0, abs(self.incumbent_obj)) if self.incumbent is not None else 1.0
        return max(1e-9, self.opts.relative_gap * ref)

    def solve(self) -> MilpSolution:
        opts = self.opts
        hints = self.prop.closure(dict(self.model.binary_fix_hints))
        if hints is None:
            return MilpSolution("infeasible", {}, INF, INF, 0)
        self.root_fixes = hints
        self._build_engine()
        status = self.eng.cold_start()
        if status == "infeasible":
            return MilpSolution("infeasible", {}, INF, INF, 1)
        if status == "unbounded":
            raise NumericalError("LP relaxation unbounded; add variable bounds")
        while True:
            if not self._activate_violated(self.eng.values()):
                break
            if self._node_lp() != "optimal":
                return MilpSolution("infeasible", {}, INF, INF, 1)

        root_bound = float(self.c @ self.eng.values())
        if opts.enable_dive and len(self.binaries):
            self._dive()

        heap = [(root_bound, 0, {})]
        seq = 0
        self.nodes = 1  # the root LP counts as the first explored node
        limit_status = None
        while heap:
            if self.nodes >= opts.node_limit:
                limit_status = "node_limit"
                break
            if time.monotonic() - self.start > opts.time_limit_seconds:
                limit_status = "time_limit"
                break
            bound, _, fixes = heapq.heappop(heap)
            if bound >= self.incumbent_obj - self._gap_abs():
                continue
            if (
                opts.gap_limit is not None
                and self.incumbent is not None
                and (self.incumbent_obj - bound) / max(1.0, abs(self.incumbent_obj)) <= opts.gap_limit
            ):
                limit_status = "gap_limit"
                break
            self.nodes += 1
            self._apply_fixes(fixes)
            if self._node_lp() != "optimal":
                continue
            x = self.eng.values()
            obj = float(self.c @ x)
            if obj >= self.incumbent_obj - self._gap_abs():
                continue
            fracs = self._fractional(x)
            if fracs.size == 0:
                self._try_incumbent(x, obj)
                continue
            var = self._branch_var(x, fracs)
            lean = int(round(float(x[var])))
            for val in (lean, 1 - lean):
                child = self.prop.closure({var: val})
                if child is None:
                    continue
                seq += 1
                heapq.heappush(heap, (obj, seq, {**fixes, **child}))

        open_bounds = [b for b, _, _ in heap]
        best_bound = min(open_bounds + [self.incumbent_obj])
        if self.incumbent is None:
            status = limit_status or "infeasible"
            return MilpSolution(status, {}, INF, INF, self.nodes)
        gap = max(0.0, self.incumbent_obj - best_bound) / max(1.0, abs(self.incumbent_obj))
        values = {j: float(self.incumbent[j]) for j in range(self.n)}
        status = limit_status if (limit_status and heap) else "optimal"
        return MilpSolution(status, values, float(self.incumbent_obj), gap, self.nodes)


def solve(model: MilpModel, opts: SolveOptions | None = None) -> MilpSolution:
    """Prove-optimal best-bound branch-and-bound over the binary variables."""
    return _BnB(model, opts or SolveOptions()).solve()
