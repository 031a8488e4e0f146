"""Second-stage value function and assumption checks.

``phi(t) = min{q • y : W • y = t, y ⪰ 0}`` is evaluated through its dual
``max{t^T u : q - W^T u ⪰ 0}``; the dual value is attained whenever the
dual feasible set ``M_D`` is nonempty and compact, even when the primal
infimum is not.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .core import MatrixTuple, ProblemData, ScenarioSet, SymMatrix, frobenius_pair
from .sdp import BlockSdp, SdpBuilder, SolverOptions, Status, solve, strict_feasibility_margin
from .sdp.batch import solve_rhs_batch

log = logging.getLogger(__name__)

A2_TOL = 1e-8
A1_TOL = 1e-7
UNIQUE_EPS = 1e-6
UNIQUE_THRESHOLD = 1e-5


class RecourseError(RuntimeError):
    """A recourse subproblem could not be solved."""


class AssumptionError(RuntimeError):
    """Evaluation requested before A1/A2 were verified."""


@dataclass
class A2Result:
    holds: bool
    margin: float
    witness: np.ndarray | None


@dataclass
class A1Result:
    holds: bool
    certificate: str
    direction: np.ndarray | None = None
    optima: list[float] = field(default_factory=list)


@dataclass
class SubgradientInfo:
    u: np.ndarray
    unique: bool
    certificate: float


def recourse_sdp(q, W: MatrixTuple, t) -> BlockSdp:
    b = SdpBuilder()
    y = b.psd_block(W.dim, cost=np.asarray(q))
    for Wj, tj in zip(W.blocks, np.asarray(t, dtype=float).reshape(-1)):
        b.row(float(tj), psd={y: Wj.array})
    return b.build()


def _recession_sdp(W: MatrixTuple, i: int, sign: float) -> BlockSdp:
    # dual: max sign*v_i  s.t.  -W^T v ⪰ 0,  -1 <= v <= 1
    s = W.count
    b = SdpBuilder()
    y = b.psd_block(W.dim)
    up = [b.nonneg(1.0) for _ in range(s)]
    dn = [b.nonneg(1.0) for _ in range(s)]
    for j in range(s):
        b.row(sign if j == i else 0.0, psd={y: W.blocks[j].array}, nonneg={up[j]: 1.0, dn[j]: -1.0})
    return b.build()


def check_A2(p: ProblemData, opts: SolverOptions | None = None) -> A2Result:
    """Strict dual feasibility: is there ``u`` with ``q - W^T u`` positive definite?"""
    res = strict_feasibility_margin(recourse_sdp(p.q.array, p.W, np.zeros(p.s)), "dual", opts)
    return A2Result(res.margin > A2_TOL, res.margin, res.witness)


def check_A1(p: ProblemData, opts: SolverOptions | None = None, a2: A2Result | None = None, force: bool = False) -> A1Result:
    """Complete recourse via compactness of ``M_D`` (valid once A2 holds).

    For each coordinate the program ``max ±v_i s.t. -W^T v ⪰ 0, |v| <= 1`` is
    solved; the recession cone of ``M_D`` is trivial iff every optimum is 0.
    ``force=True`` runs the cone test even when A2 fails; the verdict then
    only describes boundedness of ``M_D``.
    """
    if not force:
        a2 = a2 or check_A2(p, opts)
    if not force and not a2.holds:
        raise AssumptionError("A1 is checked through compactness of M_D, which needs A2 first")
    optima = []
    for i in range(p.s):
        for sign in (1.0, -1.0):
            sol = solve(_recession_sdp(p.W, i, sign), opts)
            if not sol.status.solved:
                raise RecourseError(f"recession-cone program failed: {sol.status} {sol.message}")
            val = sol.dobj
            optima.append(val)
            if val > A1_TOL:
                v = sol.u.copy()
                v[np.abs(v) < A1_TOL] = 0.0
                return A1Result(False, f"nonzero recession direction of M_D (coordinate {i}, sign {sign:+g})", v, optima)
    return A1Result(True, "all direction optima 0", None, optima)


class RecourseOracle:
    """Evaluates ``phi`` and derived quantities for one problem.

    Evaluation is refused until :meth:`verify` confirmed A1 and A2, unless
    the oracle was created with ``override=True``. ``batch_tol`` is the
    relative accuracy asked of the vectorized solver.
    """

    def __init__(
        self,
        problem: ProblemData,
        opts: SolverOptions | None = None,
        override: bool = False,
        seed: int = 0,
        batch_tol: float = 1e-9,
    ):
        self.problem = problem
        self.opts = opts
        self.override = override
        self.batch_tol = batch_tol
        self.a2: A2Result | None = None
        self.a1: A1Result | None = None
        self._lipschitz: float | None = None
        rng = np.random.default_rng(seed)
        r = rng.standard_normal(problem.s)
        self._probe = r / np.linalg.norm(r)
        Wst = problem.W.stack.reshape(problem.s, -1)
        # the batched path needs a nonsingular Schur matrix, i.e. independent W_j
        self._batchable = np.linalg.matrix_rank(Wst @ Wst.T) == problem.s

    @classmethod
    def verified(cls, problem: ProblemData, opts: SolverOptions | None = None, **kw) -> "RecourseOracle":
        o = cls(problem, opts, **kw)
        o.verify()
        return o

    def verify(self) -> bool:
        self.a2 = check_A2(self.problem, self.opts)
        if self.a2.holds:
            self.a1 = check_A1(self.problem, self.opts, self.a2)
        return self.ready

    @property
    def ready(self) -> bool:
        return bool(self.a2 and self.a2.holds and self.a1 and self.a1.holds)

    def _require(self):
        if not (self.ready or self.override):
            raise AssumptionError("A1/A2 not verified; call verify() or pass override=True")

    def _dual_solve(self, t):
        sol = solve(recourse_sdp(self.problem.q.array, self.problem.W, t), self.opts)
        if not sol.status.solved:
            raise RecourseError(f"recourse problem at t={np.asarray(t).tolist()} ended with {sol.status}: {sol.message}")
        return sol

    def _duals(self, ts) -> tuple[np.ndarray, np.ndarray]:
        """Dual values and multipliers for each row of ``ts``.

        Tries the vectorized solver first; items it cannot finish are
        re-solved one by one with the general engine.
        """
        self._require()
        ts = np.atleast_2d(np.asarray(ts, dtype=float))
        vals = np.empty(ts.shape[0])
        us = np.empty(ts.shape)
        todo = np.arange(ts.shape[0])
        if self._batchable and ts.shape[0]:
            r = solve_rhs_batch(self.problem.q.array, self.problem.W.stack, ts, tol=self.batch_tol)
            vals[r.converged] = r.dobj[r.converged]
            us[r.converged] = r.u[r.converged]
            todo = np.nonzero(~r.converged)[0]
        for k in todo:
            sol = self._dual_solve(ts[k])
            vals[k] = sol.dobj
            us[k] = sol.u
        return vals, us

    def value(self, t) -> float:
        """``phi(t)`` without the uniqueness probe."""
        return float(self.values(np.asarray(t, dtype=float).reshape(1, -1))[0])

    def values(self, ts) -> np.ndarray:
        """``phi`` at every row of ``ts`` (shape (K, s))."""
        self._require()
        return self._duals(ts)[0]

    def phi(self, t, detect_unique: bool = True) -> tuple[float, SubgradientInfo]:
        self._require()
        t = np.asarray(t, dtype=float).reshape(-1)
        if detect_unique:
            d = UNIQUE_EPS * self._probe
            _, us = self._duals(np.stack([t, t + d, t - d]))
            u = us[0]
            cert = float(np.linalg.norm(us[1] - us[2]))
            unique = cert <= UNIQUE_THRESHOLD
        else:
            u = self._duals(t[None, :])[1][0]
            unique, cert = False, math.nan
        return float(t @ u), SubgradientInfo(u, unique, cert)

    def lipschitz_bound(self) -> float:
        """``sqrt(s) * max_i max{|u_i| : u ∈ M_D}``, an upper bound on ``max ||u||``."""
        if self._lipschitz is None:
            self._require()
            s = self.problem.s
            E = np.eye(s)
            best = float(self.values(np.vstack([E, -E])).max())
            self._lipschitz = math.sqrt(s) * max(best, 0.0)
        return self._lipschitz

    def f(self, x, z) -> float:
        p = self.problem
        x = np.asarray(x, dtype=float)
        return p.c.inner(x) + self.value(np.asarray(z, dtype=float) - frobenius_pair(p.T, x))

    def costs(self, scen: ScenarioSet, x) -> np.ndarray:
        """Second-stage values ``phi(z_i - T • x)`` for all scenarios."""
        tx = frobenius_pair(self.problem.T, np.asarray(x, dtype=float))
        return self.values(scen.z - tx)

    def costs_grid(self, scen: ScenarioSet, xs) -> np.ndarray:
        """Second-stage values for many first-stage points; returns (len(xs), S)."""
        p = self.problem
        xs = np.asarray(xs, dtype=float)
        tx = np.einsum("jab,kab->kj", p.T.stack, xs)
        ts = (scen.z[None, :, :] - tx[:, None, :]).reshape(-1, p.s)
        return self.values(ts).reshape(xs.shape[0], scen.S)

    def subgrad_QE(self, scen: ScenarioSet, x, detect_unique: bool = False):
        """Subgradient ``c - sum_i π_i sum_j (u_i)_j T_j`` of the expected cost at ``x``.

        Returns the subgradient matrix and the per-scenario dual selections.
        """
        p = self.problem
        ts = scen.z - frobenius_pair(p.T, np.asarray(x, dtype=float))
        S = scen.S
        if detect_unique:
            d = UNIQUE_EPS * self._probe
            _, us = self._duals(np.vstack([ts, ts + d, ts - d]))
            certs = np.linalg.norm(us[S : 2 * S] - us[2 * S :], axis=1)
            infos = [SubgradientInfo(us[i], bool(certs[i] <= UNIQUE_THRESHOLD), float(certs[i])) for i in range(S)]
        else:
            _, us = self._duals(ts)
            infos = [SubgradientInfo(us[i], False, math.nan) for i in range(S)]
        g = p.c.array - p.T.adjoint(scen.probs @ us[:S])
        return SymMatrix.symmetrize(g), infos


def eval_phi(o: RecourseOracle, t) -> tuple[float, SubgradientInfo]:
    return o.phi(t)


def lipschitz_bound(o: RecourseOracle) -> float:
    return o.lipschitz_bound()


def eval_f(o: RecourseOracle, x, z) -> float:
    return o.f(x, z)


def subgrad_QE(o: RecourseOracle, scen: ScenarioSet, x) -> SymMatrix:
    return o.subgrad_QE(scen, x)[0]


def dual_slack(p: ProblemData, u) -> np.ndarray:
    return p.q.array - p.W.adjoint(u)
