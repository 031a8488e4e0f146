"""Deterministic equivalents of mean-risk stochastic SDPs.

Every builder returns an :class:`ExtensiveForm`: a :class:`BlockSdp` over
``x`` (one PSD block of size n), one PSD block ``y_i`` of size m per
scenario, and scalar auxiliaries. Inequalities become equalities with
nonnegative slacks. Row conventions for the risk auxiliaries:

* excess rows      ``c • x + q • y_i - η - v_i + s_i = 0``
* V@R big-M rows   ``q • y_i - η + M δ_i + s_i = M``  (``δ_i = 1 ⇒ q • y_i <= η``)
* semideviation    ``q • y_i - sum_j π_j q • y_j - v_i + s_i = 0``

``literal=True`` switches the last two to the printed variants
``η - q • y_i >= (1 - δ_i) M`` and ``v_i >= c • x + q • y_i - sum_j π_j q • y_j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ProblemData, ScenarioSet, frobenius_pair, validate_problem
from .risk import Kind, RiskSpec
from .sdp import BlockSdp, SdpBuilder, SdpSolution, SolverOptions, Status, solve


class ExtensiveError(ValueError):
    """Invalid input for an extensive formulation."""


@dataclass
class ExtensiveForm:
    sdp: BlockSdp
    var_map: dict
    binary_indices: list[int]
    problem: ProblemData
    scen: ScenarioSet
    kind: str
    params: dict = field(default_factory=dict)
    big_M: float | None = None
    fixed: dict = field(default_factory=dict)

    def loc(self, role, idx=None):
        return self.var_map[(role, idx)]

    def has(self, role, idx=None) -> bool:
        return (role, idx) in self.var_map

    def assemble(self, x, ys, eta=None, delta=None):
        """Complete ``(x, y_1..y_S)`` to a feasible point with the tightest auxiliaries.

        Returns ``(X_blocks, free, nonneg)`` in the layout of :attr:`sdp`.
        """
        return _assemble(self, np.asarray(x, dtype=float), [np.asarray(y, dtype=float) for y in ys], eta, delta)


@dataclass
class ExtensiveResult:
    status: Status
    value: float
    x: np.ndarray
    ys: list[np.ndarray]
    costs: np.ndarray
    eta: float | None
    delta: np.ndarray | None
    solution: SdpSolution


@dataclass
class BigMReport:
    M: float
    lower: np.ndarray
    upper: np.ndarray
    upper_eta: float
    lipschitz: float
    trace: list[str]


class _Model:
    def __init__(self, p: ProblemData, scen: ScenarioSet, mean_weight: float = 1.0):
        rep = validate_problem(p, scen)
        if not rep.ok:
            raise ExtensiveError("; ".join(rep.errors))
        self.p, self.scen = p, scen
        self.b = SdpBuilder()
        self.var_map: dict = {}
        b = self.b
        self.x = b.psd_block(p.n, cost=mean_weight * p.c.array)
        self.var_map[("x", None)] = ("psd", self.x)
        self.y = []
        for i, pi in enumerate(scen.probs):
            yi = b.psd_block(p.m, cost=mean_weight * pi * p.q.array)
            self.y.append(yi)
            self.var_map[("y", i)] = ("psd", yi)
        for k, (G, g) in enumerate(p.X.eq):
            b.row(g, psd={self.x: G.array})
        for k, (H, h) in enumerate(p.X.ineq):
            s = self.nonneg(("sX", k))
            b.row(h, psd={self.x: H.array}, nonneg={s: 1.0})
        if p.X.trace_cap is not None:
            s = self.nonneg(("sX", "trace"))
            b.row(p.X.trace_cap, psd={self.x: np.eye(p.n)}, nonneg={s: 1.0})
        for i, z in enumerate(scen.z):
            for j in range(p.s):
                b.row(z[j], psd={self.x: p.T.blocks[j].array, self.y[i]: p.W.blocks[j].array})

    def nonneg(self, role, cost=0.0) -> int:
        k = self.b.nonneg(cost)
        self.var_map[role] = ("nonneg", k)
        return k

    def free(self, role, cost=0.0) -> int:
        k = self.b.free(cost)
        self.var_map[role] = ("free", k)
        return k

    def cost_terms(self, i, with_c=True) -> dict:
        terms = {self.y[i]: self.p.q.array}
        if with_c:
            terms[self.x] = self.p.c.array
        return terms

    def excess_rows(self, tag, weights, eta_var=None, eta_value=0.0):
        """``v_i >= c • x + q • y_i - η`` with cost ``weights[i]`` on ``v_i``."""
        vs = []
        for i in range(self.scen.S):
            v = self.nonneg((f"v{tag}", i), weights[i])
            s = self.nonneg((f"sv{tag}", i))
            free = {eta_var: -1.0} if eta_var is not None else {}
            self.b.row(eta_value if eta_var is None else 0.0, psd=self.cost_terms(i), free=free, nonneg={v: -1.0, s: 1.0})
            vs.append(v)
        return vs

    def form(self, kind, params, binaries=(), big_M=None, fixed=None) -> ExtensiveForm:
        return ExtensiveForm(
            sdp=self.b.build(),
            var_map=dict(self.var_map),
            binary_indices=list(binaries),
            problem=self.p,
            scen=self.scen,
            kind=kind,
            params=params,
            big_M=big_M,
            fixed=dict(fixed or {}),
        )


def build_risk_neutral(p: ProblemData, scen: ScenarioSet) -> ExtensiveForm:
    return _Model(p, scen).form("E", {})


def build_ee(p: ProblemData, scen: ScenarioSet, eta: float, rho: float, mean_weight: float = 1.0) -> ExtensiveForm:
    if rho < 0:
        raise ExtensiveError("rho must be nonnegative")
    M = _Model(p, scen, mean_weight)
    if rho > 0:
        # zero-weight auxiliaries would leave an unbounded optimal face
        M.excess_rows("", rho * scen.probs, eta_value=float(eta))
    return M.form("EE", {"eta": float(eta), "rho": float(rho), "mean_weight": mean_weight})


def build_cvar(p: ProblemData, scen: ScenarioSet, alpha: float, rho: float) -> ExtensiveForm:
    if not 0.0 < alpha < 1.0:
        raise ExtensiveError("alpha must lie in (0, 1)")
    if rho < 0:
        raise ExtensiveError("rho must be nonnegative")
    return build_cvar_mixture(p, scen, [(rho, alpha)], mean_weight=1.0, kind="CVaR")


def build_cvar_mixture(p: ProblemData, scen: ScenarioSet, pairs, mean_weight: float = 0.0, kind: str = "Mix") -> ExtensiveForm:
    """``mean_weight * E + sum_j w_j CVaR_{α_j}`` with one free threshold per level."""
    mean = mean_weight + sum(w for w, a in pairs if a == 0.0)
    M = _Model(p, scen, mean)
    comps = []
    for j, (w, a) in enumerate(pairs):
        if a == 0.0 or w == 0.0:
            continue
        eta = M.free(("eta", j if kind == "Mix" else None), w)
        M.excess_rows("" if kind != "Mix" else j, w / (1.0 - a) * scen.probs, eta_var=eta)
        comps.append((w, a))
    params = {"pairs": [(float(w), float(a)) for w, a in pairs], "mean_weight": mean_weight}
    if kind == "CVaR":
        params.update(alpha=float(pairs[0][1]), rho=float(pairs[0][0]))
    return M.form(kind, params)


def build_mad(p: ProblemData, scen: ScenarioSet, pp: int, rho: float, literal: bool = False) -> ExtensiveForm:
    if pp not in (1, 2):
        raise ExtensiveError(f"semideviation order must be 1 or 2, got {pp}")
    if rho < 0:
        raise ExtensiveError("rho must be nonnegative")
    M = _Model(p, scen)
    S = scen.S
    if rho == 0:
        return M.form("Mad", {"p": pp, "rho": 0.0, "literal": literal})
    cost = rho * scen.probs if pp == 1 else np.zeros(S)
    vs = []
    for i in range(S):
        v = M.nonneg(("v", i), cost[i])
        s = M.nonneg(("sv", i))
        psd = {M.y[j]: -scen.probs[j] * p.q.array for j in range(S)}
        psd[M.y[i]] = psd[M.y[i]] + p.q.array
        if literal:
            psd[M.x] = p.c.array
        M.b.row(0.0, psd=psd, nonneg={v: -1.0, s: 1.0})
        vs.append(v)
    if pp == 2:
        w = M.free(("w", None), rho)
        A = M.b.psd_block(S + 1)
        M.var_map[("arrow", None)] = ("psd", A)

        def E(i, j):
            e = np.zeros((S + 1, S + 1))
            e[i, j] = e[j, i] = 1.0 if i == j else 0.5
            return e

        M.b.row(0.0, psd={A: E(0, 0)}, free={w: -1.0})
        for i in range(1, S + 1):
            M.b.row(0.0, psd={A: E(i, i)}, free={w: -1.0})
            M.b.row(0.0, psd={A: E(0, i)}, nonneg={vs[i - 1]: -math.sqrt(scen.probs[i - 1])})
        for i in range(1, S + 1):
            for j in range(i + 1, S + 1):
                M.b.row(0.0, psd={A: E(i, j)})
    return M.form("Mad", {"p": pp, "rho": float(rho), "literal": literal})


def build_var(
    p: ProblemData,
    scen: ScenarioSet,
    alpha: float,
    rho: float,
    big_M: float | None = None,
    fixed: dict | None = None,
    literal: bool = False,
    opts: SolverOptions | None = None,
) -> ExtensiveForm:
    """Mixed-binary V@R model; ``δ`` appear relaxed to ``[0, 1]`` in :attr:`ExtensiveForm.sdp`.

    ``fixed`` maps scenario indices to 0/1; fixed indicators are substituted
    out of the SDP (used by branch-and-bound nodes).
    """
    if not 0.0 < alpha < 1.0:
        raise ExtensiveError("alpha must lie in (0, 1)")
    if rho < 0:
        raise ExtensiveError("rho must be nonnegative")
    if not p.X.is_compact:
        raise ExtensiveError("the V@R model needs a compact first-stage set (trace cap)")
    fixed = dict(fixed or {})
    if big_M is None:
        big_M = compute_big_M(p, scen, opts=opts).M
    M = _Model(p, scen)
    M.b.add_cost(M.x, rho * p.c.array)
    eta = M.free(("eta", None), rho)
    deltas = []
    knap = {}
    fixed_mass = 0.0
    for i in range(scen.S):
        s = M.nonneg(("sM", i))
        q = p.q.array
        sgn = -1.0 if literal else 1.0
        psd = {M.y[i]: sgn * q}
        free = {eta: -sgn}
        slack = -1.0 if literal else 1.0
        if i in fixed:
            rhs = 0.0 if fixed[i] else big_M
            M.b.row(rhs, psd=psd, free=free, nonneg={s: slack})
            fixed_mass += scen.probs[i] if fixed[i] else 0.0
            continue
        d = M.nonneg(("delta", i))
        r = M.nonneg(("sdelta", i))
        M.b.row(1.0, nonneg={d: 1.0, r: 1.0})
        M.b.row(big_M, psd=psd, free=free, nonneg={s: slack, d: big_M})
        deltas.append(d)
        knap[d] = scen.probs[i]
    if knap:
        k = M.nonneg(("sknap", None))
        knap[k] = -1.0
        M.b.row(alpha - fixed_mass, nonneg=knap)
    elif fixed_mass < alpha - 1e-12:
        raise ExtensiveError("fixed indicators cannot reach the probability level")
    return M.form(
        "VaR",
        {"alpha": float(alpha), "rho": float(rho), "literal": literal},
        binaries=deltas,
        big_M=big_M,
        fixed=fixed,
    )


def build_for_spec(p: ProblemData, scen: ScenarioSet, spec: RiskSpec, literal: bool = False, **kw) -> ExtensiveForm:
    """Dispatch a risk specification to its deterministic equivalent."""
    k = spec.kind
    if k == Kind.EXPECTATION:
        return build_risk_neutral(p, scen)
    if k == Kind.CVAR:
        return build_cvar_mixture(p, scen, [(1.0, spec.alpha)], mean_weight=0.0)
    if k == Kind.CVAR_MIXTURE:
        return build_cvar_mixture(p, scen, spec.mixture, mean_weight=0.0)
    if k == Kind.EXPECTED_EXCESS:
        return build_ee(p, scen, spec.eta, 1.0, mean_weight=0.0)
    if k == Kind.MEAN_UPPER_SEMIDEV:
        return build_mad(p, scen, spec.p, spec.rho, literal=literal)
    if k == Kind.MEAN_RISK:
        base, rho = spec.base, spec.rho
        if base.kind == Kind.EXPECTATION:
            return build_cvar_mixture(p, scen, [], mean_weight=1.0 + rho, kind="E")
        if base.kind == Kind.EXPECTED_EXCESS:
            return build_ee(p, scen, base.eta, rho)
        if base.kind == Kind.CVAR:
            return build_cvar(p, scen, base.alpha, rho)
        if base.kind == Kind.VAR:
            return build_var(p, scen, base.alpha, rho, literal=literal, **kw)
        if base.kind == Kind.CVAR_MIXTURE:
            return build_cvar_mixture(p, scen, [(rho * w, a) for w, a in base.mixture], mean_weight=1.0)
    raise ExtensiveError(f"no extensive formulation for {spec}")


def _get(sol: SdpSolution, loc):
    kind, idx = loc
    if kind == "psd":
        return sol.X[idx]
    if kind == "free":
        return float(sol.free[idx])
    return float(sol.nonneg[idx])


def extract(ef: ExtensiveForm, sol: SdpSolution) -> ExtensiveResult:
    S = ef.scen.S
    x = sol.X[ef.loc("x")[1]]
    ys = [sol.X[ef.loc("y", i)[1]] for i in range(S)]
    costs = np.array([ef.problem.q.inner(y) for y in ys])
    eta = _get(sol, ef.loc("eta")) if ef.has("eta") else None
    delta = None
    if ef.kind == "VaR":
        delta = np.array(
            [ef.fixed[i] if i in ef.fixed else _get(sol, ef.loc("delta", i)) for i in range(S)], dtype=float
        )
    return ExtensiveResult(sol.status, sol.pobj, x, ys, costs, eta, delta, sol)


def solve_extensive(ef: ExtensiveForm, opts: SolverOptions | None = None, relax: bool = False) -> ExtensiveResult:
    """Solve a continuous extensive form (or the relaxation of a mixed-binary one)."""
    if ef.binary_indices and not relax:
        raise ExtensiveError("form has binary variables; use branch-and-bound or pass relax=True")
    return extract(ef, solve(ef.sdp, opts))


def compute_big_M(p: ProblemData, scen: ScenarioSet, lipschitz: float | None = None, opts: SolverOptions | None = None) -> BigMReport:
    """Conservative big-M for the V@R rows.

    ``LB_i = min q • y_i`` over the coupled feasible set (one SDP each) and
    ``UB_η = max_i L (||z_i|| + ||T|| R_X)`` with ``L`` the recourse
    Lipschitz bound and ``R_X`` the trace cap; ``M = UB_η - min_i LB_i + 1``.
    """
    from .recourse import RecourseOracle

    if not p.X.is_compact:
        raise ExtensiveError("big-M needs a bounded first-stage set (trace cap)")
    trace = []
    if lipschitz is None:
        lipschitz = RecourseOracle(p, opts, override=True).lipschitz_bound()
        trace.append(f"lipschitz bound {lipschitz:.6g} from coordinate dual maximizations")
    R = p.X.radius_bound()
    tn = p.T.norm()
    upper = np.array([lipschitz * (float(np.linalg.norm(z)) + tn * R) for z in scen.z])
    ub = float(upper.max())
    trace.append(f"UB_eta = max_i L(||z_i|| + ||T|| R_X) = {ub:.6g} with ||T|| = {tn:.6g}, R_X = {R:.6g}")
    lower = []
    zero_c = p.with_(c=np.zeros((p.n, p.n)))
    for i, (pi, z) in enumerate(scen):
        sub = build_risk_neutral(zero_c, ScenarioSet([1.0], np.asarray(z)[None, :]))
        sol = solve(sub.sdp, opts)
        if not sol.status.solved:
            raise ExtensiveError(f"lower-bound SDP for scenario {i} ended with {sol.status}")
        lower.append(min(sol.dobj, sol.pobj))
    lower = np.array(lower)
    trace.append(f"LB_i = {np.array2string(lower, precision=6)}")
    M = ub - float(lower.min()) + 1.0
    return BigMReport(M=M, lower=lower, upper=upper, upper_eta=ub, lipschitz=lipschitz, trace=trace)


def export_sdpa(ef: ExtensiveForm, path) -> tuple[str, str]:
    """Write ``path`` in SDPA format and ``path.sidecar.json`` with binaries and big-M."""
    import json

    from .sdp import write_sdpa

    path = str(path)
    write_sdpa(ef.sdp, path)
    side = path + ".sidecar.json"
    info = {
        "format_version": 1,
        "kind": ef.kind,
        "binary_nonneg_indices": list(ef.binary_indices),
        "big_M": ef.big_M,
        "n_nonneg": ef.sdp.n_nonneg,
        "n_free": ef.sdp.n_free,
        "psd_dims": list(ef.sdp.block_dims),
        "params": ef.params,
    }
    with open(side, "w") as fh:
        json.dump(info, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path, side


def _assemble(ef: ExtensiveForm, x, ys, eta, delta):
    sdp = ef.sdp
    p, scen = ef.problem, ef.scen
    X = [np.zeros((k, k)) for k in sdp.block_dims]
    free = np.zeros(sdp.n_free)
    nonneg = np.zeros(sdp.n_nonneg)

    def put(role, idx, val):
        kind, k = ef.var_map[(role, idx)]
        if kind == "psd":
            X[k] = val
        elif kind == "free":
            free[k] = val
        else:
            nonneg[k] = val

    put("x", None, x)
    for i, y in enumerate(ys):
        put("y", i, y)
    for k_, (H, h) in enumerate(p.X.ineq):
        put("sX", k_, h - H.inner(x))
    if p.X.trace_cap is not None:
        put("sX", "trace", p.X.trace_cap - float(np.trace(x)))
    cx = p.c.inner(x)
    qy = np.array([p.q.inner(y) for y in ys])
    f = cx + qy
    if ef.kind == "EE" and ef.has("v", 0):
        e = ef.params["eta"]
        for i in range(scen.S):
            put("v", i, max(f[i] - e, 0.0))
            put("sv", i, max(f[i] - e, 0.0) - (f[i] - e))
    elif ef.kind in ("CVaR", "Mix"):
        from .risk import DiscreteDist, var as _var

        d = DiscreteDist(scen.probs, f)
        for j, (w, a) in enumerate(ef.params["pairs"]):
            if a == 0.0 or w == 0.0:
                continue
            tag = "" if ef.kind == "CVaR" else j
            e = _var(d, a) if eta is None else (eta if ef.kind == "CVaR" else eta[j])
            put("eta", None if ef.kind == "CVaR" else j, e)
            for i in range(scen.S):
                put(f"v{tag}", i, max(f[i] - e, 0.0))
                put(f"sv{tag}", i, max(f[i] - e, 0.0) - (f[i] - e))
    elif ef.kind == "Mad" and ef.has("v", 0):
        mean = float(scen.probs @ qy)
        lit = ef.params["literal"]
        dev = qy - mean + (cx if lit else 0.0)
        v = np.maximum(dev, 0.0)
        for i in range(scen.S):
            put("v", i, v[i])
            put("sv", i, v[i] - dev[i])
        if ef.params["p"] == 2:
            a = np.sqrt(scen.probs) * v
            w = float(np.linalg.norm(a))
            put("w", None, w)
            A = w * np.eye(scen.S + 1)
            A[0, 1:] = a
            A[1:, 0] = a
            put("arrow", None, A)
    elif ef.kind == "VaR":
        M = ef.big_M
        lit = ef.params["literal"]
        put("eta", None, eta)
        free_mass = 0.0
        for i in range(scen.S):
            di = ef.fixed.get(i, None if delta is None else delta[i])
            if lit:
                put("sM", i, eta - qy[i] - (1 - di) * M)
            else:
                put("sM", i, (1 - di) * M - (qy[i] - eta))
            if i not in ef.fixed:
                put("delta", i, di)
                put("sdelta", i, 1.0 - di)
                free_mass += scen.probs[i] * di
        if ef.has("sknap"):
            fixed_mass = sum(scen.probs[i] for i, v in ef.fixed.items() if v)
            put("sknap", None, free_mass - (ef.params["alpha"] - fixed_mass))
    return X, free, nonneg
