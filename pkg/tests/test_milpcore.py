import itertools

import numpy as np
import pytest
from scipy.optimize import linprog

from dnti import milpcore as mc
from dnti.milpcore import GE, LE, EQ, MilpModel, SolveOptions


def scipy_lp(model, fixings=None):
    """Reference LP optimum via scipy's HiGHS (binaries relaxed)."""
    n = len(model.variables)
    c = np.zeros(n)
    for j, coef in model.objective.items():
        c[j] += coef
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for con in model.constraints:
        row = np.zeros(n)
        for j, coef in con.coefficients.items():
            row[j] += coef
        if con.sense == LE:
            A_ub.append(row); b_ub.append(con.rhs)
        elif con.sense == GE:
            A_ub.append(-row); b_ub.append(-con.rhs)
        else:
            A_eq.append(row); b_eq.append(con.rhs)
    bounds = []
    for v in model.variables:
        lo = None if v.lower == -np.inf else v.lower
        hi = None if v.upper == np.inf else v.upper
        bounds.append((lo, hi))
    if fixings:
        for j, val in fixings.items():
            bounds[j] = (val, val)
    res = linprog(
        c,
        A_ub=np.array(A_ub) if A_ub else None,
        b_ub=np.array(b_ub) if b_ub else None,
        A_eq=np.array(A_eq) if A_eq else None,
        b_eq=np.array(b_eq) if b_eq else None,
        bounds=bounds,
        method="highs",
    )
    return res


def enumerate_milp(model):
    """Brute-force MILP optimum: scipy LP for every binary assignment."""
    bins = model.binary_ids
    best_obj, best_svec = np.inf, None
    count_near = 0
    for bits in itertools.product((0.0, 1.0), repeat=len(bins)):
        res = scipy_lp(model, fixings=dict(zip(bins, bits)))
        if res.status == 0 and res.fun < best_obj - 1e-9:
            best_obj = res.fun
            best_svec = bits
    for bits in itertools.product((0.0, 1.0), repeat=len(bins)):
        res = scipy_lp(model, fixings=dict(zip(bins, bits)))
        if res.status == 0 and res.fun < best_obj + 1e-7:
            count_near += 1
    return best_obj, best_svec, count_near


class TestLpSolve:
    def test_vertex_optimum(self):
        m = MilpModel()
        x = m.add_continuous("x", 0.0)
        y = m.add_continuous("y", 0.0)
        m.add_constraint({x: 1, y: 1}, LE, 1.0)
        m.objective = {x: -1, y: -1}
        res = mc.lp_solve(m)
        assert res.status == "optimal"
        assert res.objective == pytest.approx(-1.0, abs=1e-9)
        # basic solution: a vertex of the optimal face
        assert (res.values[x], res.values[y]) in [(1.0, 0.0), (0.0, 1.0)] or (
            abs(res.values[x] + res.values[y] - 1) < 1e-9
            and (min(res.values[x], res.values[y]) < 1e-9)
        )

    def test_infeasible_pair(self):
        m = MilpModel()
        x = m.add_continuous("x", 0.0)
        m.add_constraint({x: 1}, LE, -1.0)
        res = mc.lp_solve(m)
        assert res.status == "infeasible"

    def test_unbounded(self):
        m = MilpModel()
        x = m.add_continuous("x", 0.0)
        m.objective = {x: -1}
        res = mc.lp_solve(m)
        assert res.status == "unbounded"

    def test_equality_and_free_vars(self):
        m = MilpModel()
        x = m.add_continuous("x")  # free
        y = m.add_continuous("y", 0.0, 10.0)
        m.add_constraint({x: 1, y: 2}, EQ, 4.0)
        m.add_constraint({x: 1}, GE, -3.0)
        m.objective = {x: 1, y: 1}
        res = mc.lp_solve(m)
        ref = scipy_lp(m)
        assert res.status == "optimal"
        assert res.objective == pytest.approx(ref.fun, abs=1e-8)

    def test_fixings(self):
        m = MilpModel()
        x = m.add_continuous("x", 0.0, 5.0)
        y = m.add_continuous("y", 0.0, 5.0)
        m.add_constraint({x: 1, y: 1}, GE, 3.0)
        m.objective = {x: 2, y: 1}
        res = mc.lp_solve(m, fixings={x: 2.0})
        assert res.status == "optimal"
        assert res.values[x] == pytest.approx(2.0)
        assert res.objective == pytest.approx(5.0, abs=1e-9)

    def test_random_lps_match_scipy(self):
        rng = np.random.default_rng(2024)
        solved = 0
        for trial in range(20):
            n = int(rng.integers(3, 12))
            k = int(rng.integers(2, 30))
            m = MilpModel()
            lows = rng.choice([-np.inf, 0.0, -5.0], size=n, p=[0.2, 0.5, 0.3])
            for j in range(n):
                hi = rng.choice([np.inf, 10.0])
                m.add_continuous(f"x{j}", lows[j], hi)
            x0 = rng.uniform(0, 3, size=n)
            A = rng.normal(size=(k, n))
            for i in range(k):
                sense = rng.choice([LE, GE, EQ], p=[0.45, 0.45, 0.1])
                margin = 0.0 if sense == EQ else float(rng.uniform(0.1, 2.0))
                rhs = float(A[i] @ x0) + (margin if sense == LE else -margin)
                m.add_constraint({j: float(A[i, j]) for j in range(n)}, sense, rhs)
            m.objective = {j: float(rng.normal()) for j in range(n)}
            res = mc.lp_solve(m)
            ref = scipy_lp(m)
            if ref.status == 3:  # unbounded
                assert res.status == "unbounded"
                continue
            assert ref.status == 0
            assert res.status == "optimal"
            assert res.objective == pytest.approx(ref.fun, abs=1e-7, rel=1e-7)
            solved += 1
        assert solved >= 12  # most random instances should be bounded


def small_random_milp(rng, n_bin=6, n_cont=4, rows=12):
    """Feasible-by-construction mixed binary/continuous model."""
    m = MilpModel()
    bins = [m.add_binary(f"b{i}") for i in range(n_bin)]
    conts = [m.add_continuous(f"x{i}", 0.0, 10.0) for i in range(n_cont)]
    allv = bins + conts
    x0 = np.concatenate([rng.integers(0, 2, n_bin).astype(float), rng.uniform(0, 5, n_cont)])
    for _ in range(rows):
        support = rng.choice(len(allv), size=int(rng.integers(2, 5)), replace=False)
        coefs = {allv[int(s)]: float(rng.normal()) for s in support}
        act = sum(c * x0[allv.index(j)] for j, c in coefs.items())
        sense = rng.choice([LE, GE])
        margin = float(rng.uniform(0.05, 1.5))
        m.add_constraint(coefs, sense, act + margin if sense == LE else act - margin)
    m.objective = {v: float(rng.normal()) for v in allv}
    return m, bins


class TestSolve:
    def test_all_binaries_forced_solves_at_root(self):
        m = MilpModel()
        b1 = m.add_binary("b1")
        b2 = m.add_binary("b2")
        m.add_constraint({b1: 1}, EQ, 1.0)
        m.add_constraint({b2: 1}, EQ, 0.0)
        m.objective = {b1: 1, b2: 1}
        sol = mc.solve(m)
        assert sol.status == "optimal"
        assert sol.nodes_explored == 1
        assert sol.values[b1] == pytest.approx(1.0, abs=1e-6)
        assert sol.values[b2] == pytest.approx(0.0, abs=1e-6)

    def test_infeasible_model(self):
        m = MilpModel()
        b = m.add_binary("b")
        m.add_constraint({b: 1}, GE, 2.0)
        sol = mc.solve(m)
        assert sol.status == "infeasible"

    def test_knapsack(self):
        # max 5a+4b+3c st 2a+3b+c <= 4  -> min form; optimum picks a and c
        m = MilpModel()
        a, b, c = (m.add_binary(s) for s in "abc")
        m.add_constraint({a: 2, b: 3, c: 1}, LE, 4.0)
        m.objective = {a: -5, b: -4, c: -3}
        sol = mc.solve(m)
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(-8.0, abs=1e-9)
        assert round(sol.values[a]) == 1 and round(sol.values[c]) == 1

    @pytest.mark.parametrize("seed", range(12))
    def test_oracle_equivalence_random(self, seed):
        rng = np.random.default_rng(1000 + seed)
        m, bins = small_random_milp(rng)
        best_obj, best_svec, near = enumerate_milp(m)
        sol = mc.solve(m)
        if best_obj == np.inf:
            assert sol.status == "infeasible"
            return
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(best_obj, abs=1e-6, rel=1e-6)
        if near == 1:  # unique optimum: decisions must match exactly
            got = tuple(round(sol.values[v]) for v in bins)
            assert got == tuple(int(b) for b in best_svec)

    def test_determinism(self):
        rng = np.random.default_rng(77)
        m, _ = small_random_milp(rng, n_bin=8, rows=16)
        s1 = mc.solve(m)
        s2 = mc.solve(m)
        assert s1.status == s2.status
        assert s1.nodes_explored == s2.nodes_explored
        assert s1.objective == s2.objective
        assert s1.values == s2.values

    def test_solution_satisfies_all_rows(self):
        rng = np.random.default_rng(5)
        for _ in range(5):
            m, _ = small_random_milp(rng)
            sol = mc.solve(m)
            if sol.status != "optimal":
                continue
            x = np.array([sol.values[j] for j in range(len(m.variables))])
            for con in m.constraints:
                act = sum(c * x[j] for j, c in con.coefficients.items())
                if con.sense == LE:
                    assert act <= con.rhs + 1e-6
                elif con.sense == GE:
                    assert act >= con.rhs - 1e-6
                else:
                    assert abs(act - con.rhs) <= 1e-6
            for v in m.variables:
                if v.kind == mc.BINARY:
                    assert min(abs(x[v.id]), abs(x[v.id] - 1)) <= 1e-6

    def test_binary_fix_hints_respected(self):
        m = MilpModel()
        a, b = m.add_binary("a"), m.add_binary("b")
        m.add_constraint({a: 1, b: 1}, LE, 1.0)
        m.objective = {a: -2, b: -1}
        m.binary_fix_hints = [(a, 0)]
        sol = mc.solve(m)
        assert sol.status == "optimal"
        assert round(sol.values[a]) == 0
        assert round(sol.values[b]) == 1

    def test_implication_detection(self):
        m = MilpModel()
        a, b = m.add_binary("a"), m.add_binary("b")
        m.add_constraint({a: 1, b: -1}, LE, 0.0)  # a <= b
        assert mc._detect_implications(m) == [(a, b)]

    def test_node_limit_status(self):
        rng = np.random.default_rng(3)
        m, _ = small_random_milp(rng, n_bin=10, rows=18)
        sol = mc.solve(m, SolveOptions(node_limit=1, enable_dive=False))
        assert sol.status in ("node_limit", "optimal", "infeasible")
        if sol.status == "node_limit":
            assert sol.nodes_explored <= 1

    def test_time_limit_status(self):
        rng = np.random.default_rng(4)
        m, _ = small_random_milp(rng, n_bin=12, rows=20)
        sol = mc.solve(m, SolveOptions(time_limit_seconds=0.0, enable_dive=False))
        assert sol.status in ("time_limit", "optimal", "infeasible")


def test_model_validation():
    m = MilpModel()
    x = m.add_continuous("x", 0.0, 1.0)
    m.add_constraint({x: 1}, "<", 1.0)
    with pytest.raises(mc.ModelError, match="sense"):
        m.validate()

    m2 = MilpModel()
    x2 = m2.add_continuous("x", 0.0, 1.0)
    m2.add_constraint({x2 + 7: 1.0}, LE, 1.0)
    with pytest.raises(mc.ModelError, match="unknown variable"):
        m2.validate()
