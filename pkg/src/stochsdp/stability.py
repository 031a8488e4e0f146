"""Perturb the scenario distribution and track optimal values and solutions."""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import ProblemData, ScenarioSet
from .extensive import build_for_spec, solve_extensive
from .recourse import RecourseOracle
from .risk import Kind, RiskSpec
from .sdp import SolverOptions

log = logging.getLogger(__name__)

MODES = ("weight-dirichlet-jitter", "support-gaussian-jitter", "atom-merge-split")
CSV_HEADER = ("mode", "epsilon", "rep", "value", "value_dist", "x_dist", "status")


@dataclass(frozen=True)
class PerturbationPlan:
    mode: str
    magnitudes: tuple[float, ...]
    replications: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown perturbation mode {self.mode!r}; choose from {', '.join(MODES)}")
        mags = tuple(float(e) for e in self.magnitudes)
        if any(e < 0 for e in mags):
            raise ValueError("magnitudes must be nonnegative")
        object.__setattr__(self, "magnitudes", tuple(sorted(mags)))
        if self.replications < 1:
            raise ValueError("need at least one replication")


def perturb(scen: ScenarioSet, mode: str, eps: float, seed) -> ScenarioSet:
    """Random distribution within ``eps`` of ``scen``.

    * support jitter moves every atom by a Gaussian step clipped to norm ``eps``;
    * weight jitter mixes in a Dirichlet draw with weight ``eps``, so the
      total variation distance is at most ``eps``;
    * merge-split splits one atom into two at distance ``eps`` from it and
      merges atom pairs closer than ``eps`` at their weighted mean.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if eps == 0:
        return scen
    rng = np.random.default_rng(seed)
    S, s = scen.S, scen.dim
    if mode == "support-gaussian-jitter":
        d = rng.standard_normal((S, s)) * eps / math.sqrt(s)
        n = np.linalg.norm(d, axis=1, keepdims=True)
        d *= np.minimum(1.0, eps / np.maximum(n, 1e-300))
        return ScenarioSet(scen.probs.copy(), scen.z + d)
    if mode == "weight-dirichlet-jitter":
        t = min(eps, 1.0)
        mix = rng.dirichlet(np.ones(S))
        p = (1.0 - t) * scen.probs + t * mix
        return ScenarioSet(p / p.sum(), scen.z.copy())
    if mode == "atom-merge-split":
        probs = list(scen.probs)
        zs = [z.copy() for z in scen.z]
        i = int(rng.integers(S))
        d = rng.standard_normal(s)
        d *= eps / max(np.linalg.norm(d), 1e-300)
        half = probs[i] / 2.0
        probs[i] = half
        probs.append(half)
        zs.append(zs[i] - d)
        zs[i] = zs[i] + d
        merged = True
        while merged and len(probs) > 1:
            merged = False
            for a in range(len(probs)):
                for b in range(a + 1, len(probs)):
                    if a != i and b != len(probs) - 1 and np.linalg.norm(zs[a] - zs[b]) < eps:
                        w = probs[a] + probs[b]
                        zs[a] = (probs[a] * zs[a] + probs[b] * zs[b]) / w
                        probs[a] = w
                        del probs[b], zs[b]
                        merged = True
                        break
                if merged:
                    break
        p = np.array(probs)
        return ScenarioSet(p / p.sum(), np.stack(zs))
    raise ValueError(f"unknown perturbation mode {mode!r}")


@dataclass
class StabilityRow:
    mode: str
    epsilon: float
    rep: int
    value: float
    value_dist: float
    x_dist: float
    status: str


@dataclass
class StabilityReport:
    base_value: float
    base_x: np.ndarray
    rows: list[StabilityRow]
    lipschitz: float | None = None
    risk_modulus: float | None = None
    warnings: list[str] = field(default_factory=list)

    def max_value_dist(self) -> dict[float, float]:
        out: dict[float, float] = {}
        for r in self.rows:
            if math.isfinite(r.value_dist):
                out[r.epsilon] = max(out.get(r.epsilon, 0.0), r.value_dist)
        return out

    def max_x_dist(self) -> dict[float, float]:
        out: dict[float, float] = {}
        for r in self.rows:
            if math.isfinite(r.x_dist):
                out[r.epsilon] = max(out.get(r.epsilon, 0.0), r.x_dist)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow([r.mode, f"{r.epsilon:.17g}", r.rep, f"{r.value:.17g}", f"{r.value_dist:.17g}", f"{r.x_dist:.17g}", r.status])
        return buf.getvalue()


def risk_modulus(spec: RiskSpec) -> float | None:
    """Sup-norm Lipschitz modulus of the risk functional, where one is known."""
    k = spec.kind
    if k in (Kind.EXPECTATION, Kind.CVAR, Kind.CVAR_MIXTURE, Kind.VAR):
        return 1.0
    if k == Kind.MEAN_RISK and spec.base.kind in (Kind.EXPECTATION, Kind.CVAR, Kind.EXPECTED_EXCESS, Kind.CVAR_MIXTURE, Kind.VAR):
        return 1.0 + spec.rho
    if k == Kind.MEAN_UPPER_SEMIDEV:
        return 1.0 + 2.0 * spec.rho
    return None


def _solve(p, scen, spec, opts):
    if spec.kind == Kind.MEAN_RISK and spec.base.kind == Kind.VAR:
        from .decompose import bnb_solve_var

        r = bnb_solve_var(p, scen, spec.base.alpha, spec.rho, opts)
        return r.value, r.x, str(r.status)
    r = solve_extensive(build_for_spec(p, scen, spec), opts)
    return r.value, r.x, str(r.status)


def stability_sweep(
    p: ProblemData,
    scen: ScenarioSet,
    spec: RiskSpec,
    plan: PerturbationPlan,
    opts: SolverOptions | None = None,
    threads: int = 1,
) -> StabilityReport:
    """Solve the model under every (magnitude, replication) perturbation of ``scen``.

    Cell seeds derive from ``plan.seed`` and the cell position only, so the
    report is the same for any thread count. For support jitter the bound
    ``modulus * L * eps`` on the value distance is checked softly (warnings).
    """
    v0, x0, st0 = _solve(p, scen, spec, opts)
    if not math.isfinite(v0):
        raise RuntimeError(f"base model not solvable ({st0})")
    cells = [(k, e, r) for k, e in enumerate(plan.magnitudes) for r in range(plan.replications)]

    def run(cell):
        k, e, r = cell
        ss = np.random.SeedSequence([plan.seed, k, r])
        sc = perturb(scen, plan.mode, e, ss)
        try:
            v, x, st = _solve(p, sc, spec, opts)
        except Exception as exc:  # recorded per cell, never fatal
            return StabilityRow(plan.mode, e, r, math.nan, math.nan, math.nan, f"error: {exc}")
        if x is None or not math.isfinite(v):
            return StabilityRow(plan.mode, e, r, v, math.nan, math.nan, st)
        return StabilityRow(plan.mode, e, r, v, abs(v - v0), float(np.linalg.norm(x - x0)), st)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(run, cells))
    else:
        rows = [run(c) for c in cells]
    rep = StabilityReport(v0, x0, rows)
    mod = risk_modulus(spec)
    rep.risk_modulus = mod
    if plan.mode == "support-gaussian-jitter" and mod is not None:
        try:
            L = RecourseOracle(p, opts, override=True).lipschitz_bound()
        except Exception as exc:
            rep.warnings.append(f"no Lipschitz bound available: {exc}")
        else:
            rep.lipschitz = L
            for e, d in rep.max_value_dist().items():
                if d > mod * L * e + 1e-6:
                    msg = f"value moved by {d:.3g} at eps={e:g}, above the Lipschitz estimate {mod * L * e:.3g}"
                    rep.warnings.append(msg)
                    log.warning(msg)
    return rep
