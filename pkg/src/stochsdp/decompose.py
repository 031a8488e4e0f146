"""Scenario decomposition: cutting planes on the recourse and B&B for V@R."""

from __future__ import annotations

import enum
import heapq
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import ProblemData, ScenarioSet, SymMatrix, frobenius_pair
from .extensive import ExtensiveError, build_risk_neutral, build_var, compute_big_M, extract
from .recourse import RecourseOracle
from .risk import DiscreteDist, Kind, RiskSpec, cvar_tail_weights, evaluate, var
from .sdp import SdpBuilder, SolverOptions, Status, solve

log = logging.getLogger(__name__)

CHUNK = 8  # scenarios per batched subproblem call; fixed so results do not depend on thread count


class RunStatus(str, enum.Enum):
    CONVERGED = "Converged"
    NOT_CONVERGED = "NotConverged"
    INFEASIBLE = "Infeasible"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Cut:
    """``θ >= g • x + offset`` for the epigraph variable of ``origin``."""

    g: SymMatrix
    offset: float
    origin: int | str
    iteration: int

    def __call__(self, x) -> float:
        return self.g.inner(x) + self.offset

    def to_line(self) -> str:
        iu = np.triu_indices(self.g.dim)
        coef = " ".join(f"{v + 0.0:.17g}" for v in self.g.array[iu])
        return f"{self.iteration} {self.origin} {self.offset:.17g} {coef}"


@dataclass
class BendersOptions:
    tol: float = 1e-7
    max_iter: int = 300
    multi_cut: bool = True
    threads: int = 1
    solver: SolverOptions | None = None


@dataclass
class BendersResult:
    status: RunStatus
    value: float
    lower: float
    x: np.ndarray
    cuts: list[Cut]
    history: list[tuple[float, float]]
    iterations: int

    def cut_log(self) -> str:
        head = "# iteration origin offset g_upper_triangle(row-major)"
        return "\n".join([head] + [c.to_line() for c in self.cuts]) + "\n"

    def write_cut_log(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.cut_log())


def _risk_parts(spec: RiskSpec):
    """``(kind, rho, param)`` for the specs handled by the cutting-plane solver."""
    if spec.kind == Kind.EXPECTATION:
        return "E", 0.0, None
    if spec.kind == Kind.MEAN_RISK and spec.base.kind == Kind.EXPECTED_EXCESS:
        return "EE", spec.rho, spec.base.eta
    if spec.kind == Kind.MEAN_RISK and spec.base.kind == Kind.CVAR:
        return "CVaR", spec.rho, spec.base.alpha
    if spec.kind == Kind.MEAN_RISK and spec.base.kind == Kind.EXPECTATION:
        return "E", 0.0, None
    raise ValueError(f"cutting planes support E, E+rho*EE and E+rho*CVaR, not {spec}")


def _scenario_duals(oracle: RecourseOracle, ts: np.ndarray, threads: int):
    chunks = [ts[i : i + CHUNK] for i in range(0, ts.shape[0], CHUNK)]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(oracle._duals, chunks))
    else:
        parts = [oracle._duals(c) for c in chunks]
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def _start_point(p: ProblemData, opts) -> np.ndarray:
    b = SdpBuilder()
    x = b.psd_block(p.n, cost=np.eye(p.n) if not p.X.is_compact else p.c.array)
    _x_rows(b, x, p)
    sol = solve(b.build(), opts)
    if not sol.status.solved:
        b = SdpBuilder()
        x = b.psd_block(p.n, cost=np.eye(p.n))
        _x_rows(b, x, p)
        sol = solve(b.build(), opts)
    if sol.status == Status.PRIMAL_INFEASIBLE:
        raise ExtensiveError("first-stage set is empty")
    return sol.X[0]


def _x_rows(b: SdpBuilder, x: int, p: ProblemData) -> None:
    for G, g in p.X.eq:
        b.row(g, psd={x: G.array})
    for H, h in p.X.ineq:
        b.row(h, psd={x: H.array}, nonneg={b.nonneg(): 1.0})
    if p.X.trace_cap is not None:
        b.row(p.X.trace_cap, psd={x: np.eye(p.n)}, nonneg={b.nonneg(): 1.0})


def objective_at(oracle: RecourseOracle, scen: ScenarioSet, spec: RiskSpec, x) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean-risk value of the total cost at ``x``, the per-scenario costs and recourse duals."""
    p = oracle.problem
    ts = scen.z - frobenius_pair(p.T, np.asarray(x, dtype=float))
    vals, us = oracle._duals(ts)
    f = p.c.inner(x) + vals
    return evaluate(spec, DiscreteDist(scen.probs, f)), f, us


def benders_solve(
    p: ProblemData,
    scen: ScenarioSet,
    spec: RiskSpec,
    opts: BendersOptions | None = None,
    oracle: RecourseOracle | None = None,
) -> BendersResult:
    """Kelley cutting planes with one epigraph variable per scenario (or one aggregate).

    Multi-cut: ``θ_i >= u_i^T (z_i - T • x)`` for recourse duals ``u_i``, with
    the risk rows of the extensive form written over ``θ_i`` instead of
    ``q • y_i``. Aggregate: a single cut on the full objective using the
    risk-adjusted scenario weights (tail weights for CV@R, excess indicator
    for EE).
    """
    opts = opts or BendersOptions()
    kind, rho, param = _risk_parts(spec)
    if rho == 0.0:
        kind = "E"
    oracle = oracle or RecourseOracle.verified(p, opts.solver)
    oracle._require()
    S = scen.S
    TT = p.T.stack

    def make_cuts(x, it):
        ts = scen.z - frobenius_pair(p.T, x)
        vals, us = _scenario_duals(oracle, ts, opts.threads)
        f = p.c.inner(x) + vals
        value = evaluate(spec, DiscreteDist(scen.probs, f))
        if opts.multi_cut:
            cuts = [
                Cut(SymMatrix.symmetrize(-np.tensordot(us[i], TT, 1)), float(us[i] @ scen.z[i]), i, it) for i in range(S)
            ]
        else:
            if kind == "E":
                w = scen.probs
            elif kind == "EE":
                w = scen.probs * (1.0 + rho * (f > param))
            else:
                w = scen.probs + rho * cvar_tail_weights(DiscreteDist(scen.probs, f), param)
            G = math.fsum(w) * p.c.array - np.tensordot(w @ us, TT, 1)
            cuts = [Cut(SymMatrix.symmetrize(G), value - float(np.vdot(G, x)), "aggregate", it)]
        return value, cuts

    x = _start_point(p, opts.solver)
    ub, cuts = make_cuts(x, 0)
    best_x = x
    history = []
    lower = -math.inf
    status = RunStatus.NOT_CONVERGED
    it = 0
    for it in range(1, opts.max_iter + 1):
        b = SdpBuilder()
        xb = b.psd_block(p.n, cost=p.c.array if opts.multi_cut else None)
        _x_rows(b, xb, p)
        if opts.multi_cut:
            th = [b.free(pi) for pi in scen.probs]
            if kind == "EE":
                for i in range(S):
                    v = b.nonneg(rho * scen.probs[i])
                    b.row(param, psd={xb: p.c.array}, free={th[i]: 1.0}, nonneg={v: -1.0, b.nonneg(): 1.0})
            elif kind == "CVaR":
                eta = b.free(rho)
                for i in range(S):
                    v = b.nonneg(rho * scen.probs[i] / (1.0 - param))
                    b.row(0.0, psd={xb: p.c.array}, free={th[i]: 1.0, eta: -1.0}, nonneg={v: -1.0, b.nonneg(): 1.0})
        else:
            th = [b.free(1.0)]
        for c in cuts:
            k = th[c.origin] if opts.multi_cut else th[0]
            b.row(c.offset, psd={xb: -c.g.array}, free={k: 1.0}, nonneg={b.nonneg(): -1.0})
        sol = solve(b.build(), opts.solver)
        if sol.status == Status.PRIMAL_INFEASIBLE:
            status = RunStatus.INFEASIBLE
            break
        if not sol.status.solved:
            log.warning("master problem ended with %s at iteration %d", sol.status, it)
            break
        raw = min(sol.pobj, sol.dobj)
        lower = max(lower, raw)
        x = sol.X[0]
        val, new = make_cuts(x, it)
        if val < ub:
            ub, best_x = val, x
        cuts.extend(new)
        history.append((raw, ub))
        if ub - lower <= opts.tol * (1.0 + abs(ub)):
            status = RunStatus.CONVERGED
            break
    return BendersResult(status, ub, lower, best_x, cuts, history, it)


# ---------------------------------------------------------------- V@R B&B


@dataclass(order=True)
class BnBNode:
    bound: float
    neg_depth: int
    seq: int
    fixed: dict = field(compare=False)
    delta: np.ndarray | None = field(compare=False, default=None)
    x: np.ndarray | None = field(compare=False, default=None)

    @property
    def depth(self) -> int:
        return -self.neg_depth


@dataclass
class BnBResult:
    status: RunStatus
    value: float
    x: np.ndarray | None
    delta: np.ndarray | None
    eta: float | None
    nodes: int
    big_M: float
    bounds: list[tuple[float, float, int]]


def var_objective(oracle: RecourseOracle, scen: ScenarioSet, x, alpha: float, rho: float):
    """``(1+ρ) c • x + E[φ_i] + ρ V@R_α(φ_i)`` with the indicator pattern it induces."""
    p = oracle.problem
    phi = oracle.costs(scen, x)
    eta = var(DiscreteDist(scen.probs, phi), alpha)
    val = (1.0 + rho) * p.c.inner(x) + float(scen.probs @ phi) + rho * eta
    return val, eta, (phi <= eta).astype(float)


def bnb_solve_var(
    p: ProblemData,
    scen: ScenarioSet,
    alpha: float,
    rho: float,
    opts: SolverOptions | None = None,
    big_M: float | None = None,
    node_cap: int = 5000,
    tol: float = 1e-7,
    int_tol: float = 1e-6,
    literal: bool = False,
    oracle: RecourseOracle | None = None,
) -> BnBResult:
    """Best-bound-first branch-and-bound over the V@R indicators.

    Relaxations keep ``δ`` in ``[0, 1]``; fixed indicators are substituted
    out. Ties in the bound go to the deeper node. Each relaxation point is
    rounded to a feasible incumbent through the exact V@R of its recourse
    costs.
    """
    if not p.X.is_compact:
        raise ExtensiveError("the V@R model needs a compact first-stage set (trace cap)")
    oracle = oracle or RecourseOracle(p, opts, override=True)
    if rho == 0.0:
        # the V@R term carries no weight: any feasible pattern is optimal
        sol = solve(build_risk_neutral(p, scen).sdp, opts)
        if not sol.status.solved:
            return BnBResult(RunStatus.INFEASIBLE, math.inf, None, None, None, 1, math.nan, [])
        val, eta, d = var_objective(oracle, scen, sol.X[0], alpha, rho)
        return BnBResult(RunStatus.CONVERGED, val, sol.X[0], d, eta, 1, math.nan, [])
    if big_M is None:
        big_M = compute_big_M(p, scen, lipschitz=oracle.lipschitz_bound(), opts=opts).M
    S = scen.S
    seq = itertools.count()
    best = (math.inf, None, None, None)
    bounds = []
    nodes = 0

    def relax(fixed):
        nonlocal nodes
        mass = sum(scen.probs[i] for i, v in fixed.items() if v) + sum(scen.probs[i] for i in range(S) if i not in fixed)
        if mass < alpha - 1e-12:
            return None
        # an indicator whose removal drops the mass below alpha is forced to 1
        fixed = dict(fixed)
        fixed.update({i: 1 for i in range(S) if i not in fixed and mass - scen.probs[i] < alpha - 1e-12})
        nodes += 1
        ef = build_var(p, scen, alpha, rho, big_M=big_M, fixed=fixed, literal=literal)
        sol = solve(ef.sdp, opts)
        if not sol.status.solved:
            if sol.status not in (Status.PRIMAL_INFEASIBLE,):
                log.warning("node relaxation ended with %s", sol.status)
            return None
        r = extract(ef, sol)
        return min(sol.pobj, sol.dobj), r, fixed

    def consider(x):
        nonlocal best
        val, eta, d = var_objective(oracle, scen, x, alpha, rho)
        if val < best[0]:
            best = (val, x, d, eta)

    root = relax({})
    if root is None:
        return BnBResult(RunStatus.INFEASIBLE, math.inf, None, None, None, nodes, big_M, bounds)
    heap = [BnBNode(root[0], 0, next(seq), root[2], root[1].delta, root[1].x)]
    consider(root[1].x)
    status = RunStatus.CONVERGED
    while heap:
        node = heapq.heappop(heap)
        bounds.append((node.bound, best[0], node.depth))
        if node.bound >= best[0] - tol * (1.0 + abs(best[0])):
            continue
        frac = np.minimum(node.delta, 1.0 - node.delta)
        frac[list(node.fixed)] = -1.0
        j = int(np.argmax(frac))  # argmax picks the lowest index on ties
        if frac[j] <= int_tol:
            continue  # integral relaxation: already offered as incumbent
        if nodes >= node_cap:
            status = RunStatus.NOT_CONVERGED
            heapq.heappush(heap, node)
            break
        for v in (1, 0):
            fixed = dict(node.fixed)
            fixed[j] = v
            child = relax(fixed)
            if child is None:
                continue
            bnd, r, fixed = child
            consider(r.x)
            bnd = max(bnd, node.bound)
            if bnd < best[0] - tol * (1.0 + abs(best[0])):
                heapq.heappush(heap, BnBNode(bnd, -(node.depth + 1), next(seq), fixed, r.delta, r.x))
    val, x, d, eta = best
    return BnBResult(status, val, x, d, eta, nodes, big_M, bounds)


@dataclass
class BruteForceResult:
    value: float
    x: np.ndarray
    delta: np.ndarray
    eta: float
    costs: np.ndarray
    patterns: int


def brute_force_var(p: ProblemData, scen: ScenarioSet, alpha: float, rho: float, opts: SolverOptions | None = None) -> BruteForceResult:
    """Enumerate every indicator pattern with ``sum π_i δ_i >= α``; each is a plain SDP.

    For a pattern, ``η`` is a free variable bounded below by ``q • y_i`` on
    the selected scenarios, so it equals their maximum at the optimum.
    """
    S = scen.S
    best = None
    count = 0
    for bits in itertools.product((0, 1), repeat=S):
        d = np.array(bits, dtype=float)
        if scen.probs @ d < alpha - 1e-12:
            continue
        count += 1
        b = SdpBuilder()
        xb = b.psd_block(p.n, cost=(1.0 + rho) * p.c.array)
        ys = [b.psd_block(p.m, cost=pi * p.q.array) for pi in scen.probs]
        _x_rows(b, xb, p)
        for i, z in enumerate(scen.z):
            for j in range(p.s):
                b.row(z[j], psd={xb: p.T.blocks[j].array, ys[i]: p.W.blocks[j].array})
        if rho > 0:
            eta = b.free(rho)
            for i in np.nonzero(d)[0]:
                b.row(0.0, psd={ys[i]: p.q.array}, free={eta: -1.0}, nonneg={b.nonneg(): 1.0})
        sol = solve(b.build(), opts)
        if not sol.status.solved:
            continue
        costs = np.array([p.q.inner(sol.X[1 + i]) for i in range(S)])
        eta_v = float(sol.free[0]) if rho > 0 else float(costs[d > 0].max())
        if best is None or sol.pobj < best.value:
            best = BruteForceResult(sol.pobj, sol.X[0], d, eta_v, costs, 0)
    if best is None:
        raise ExtensiveError("no indicator pattern is feasible")
    best.patterns = count
    return best
