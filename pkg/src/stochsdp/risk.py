"""Risk measures on finite scalar distributions.

All measures act on the law of a random cost, so atoms are canonicalized
(sorted by value, equal values merged) before evaluation.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field

import numpy as np

PROB_TOL = 1e-12


class DiscreteDist:
    """Atoms ``(π_i, v_i)`` of a finite distribution."""

    __slots__ = ("probs", "values")

    def __init__(self, probs, values):
        p = np.asarray(probs, dtype=float).reshape(-1)
        v = np.asarray(values, dtype=float).reshape(-1)
        if p.shape != v.shape or p.size == 0:
            raise ValueError("need one probability per atom and at least one atom")
        if np.any(p <= 0):
            raise ValueError("atom probabilities must be positive")
        total = math.fsum(p.tolist())
        if abs(total - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities sum to {total:.12g}")
        self.probs = p
        self.values = v

    @classmethod
    def from_atoms(cls, atoms) -> "DiscreteDist":
        atoms = list(atoms)
        return cls([a[0] for a in atoms], [a[1] for a in atoms])

    @classmethod
    def unnormalized(cls, probs, values) -> "DiscreteDist":
        p = np.asarray(probs, dtype=float)
        return cls(p / math.fsum(p.tolist()), values)

    def __len__(self) -> int:
        return self.probs.size

    def __repr__(self) -> str:
        return f"DiscreteDist({list(zip(self.probs.tolist(), self.values.tolist()))!r})"

    def shifted(self, c: float) -> "DiscreteDist":
        return DiscreteDist(self.probs, self.values + c)

    def scaled(self, lam: float) -> "DiscreteDist":
        return DiscreteDist(self.probs, self.values * lam)

    def canonical(self) -> tuple[np.ndarray, np.ndarray]:
        """Sorted distinct values and their merged probabilities."""
        order = np.argsort(self.values, kind="stable")
        v = self.values[order]
        p = self.probs[order]
        vals, starts = np.unique(v, return_index=True)
        bounds = list(starts) + [v.size]
        probs = np.array([math.fsum(p[bounds[i] : bounds[i + 1]].tolist()) for i in range(vals.size)])
        return vals, probs


def expectation(d: DiscreteDist) -> float:
    vals, probs = d.canonical()
    return math.fsum((probs * vals).tolist())


def expected_excess(d: DiscreteDist, eta: float) -> float:
    vals, probs = d.canonical()
    return math.fsum((probs * np.maximum(vals - eta, 0.0)).tolist())


def var(d: DiscreteDist, alpha: float) -> float:
    """Lower α-quantile ``inf{t : P(Y <= t) >= α}``; always an atom value."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    vals, probs = d.canonical()
    cum = 0.0
    for v, p in zip(vals, probs):
        cum += p
        if cum >= alpha - PROB_TOL:
            return float(v)
    return float(vals[-1])


def cvar(d: DiscreteDist, alpha: float) -> tuple[float, float]:
    """Conditional value-at-risk and the minimizing threshold (the α-quantile).

    Uses the tail formula ``(E[Y; Y > η] + (F(η) - α) η) / (1 - α)``.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    vals, probs = d.canonical()
    eta = var(d, alpha)
    below = vals <= eta
    F = math.fsum(probs[below].tolist())
    tail = math.fsum((probs[~below] * vals[~below]).tolist())
    value = (tail + (F - alpha) * eta) / (1.0 - alpha)
    return value, eta


def cvar_variational(d: DiscreteDist, alpha: float, eta: float) -> float:
    """Objective ``η + EE_η(Y)/(1-α)`` of the variational formula."""
    return eta + expected_excess(d, eta) / (1.0 - alpha)


def cvar_tail_weights(d: DiscreteDist, alpha: float) -> np.ndarray:
    """Weights ``w_i`` (in the given atom order) with ``CVaR = sum w_i v_i``.

    ``w_i = π_i/(1-α)`` above the quantile, the fractional remainder at the
    quantile atom(s), zero below; they sum to one and give a subgradient of
    CVaR with respect to the atom values.
    """
    eta = var(d, alpha)
    v, p = d.values, d.probs
    w = np.where(v > eta, p / (1.0 - alpha), 0.0)
    at = v == eta
    rest = 1.0 - math.fsum(w.tolist())
    mass = math.fsum(p[at].tolist())
    w[at] = rest * p[at] / mass
    return w


def upper_semidev(d: DiscreteDist, p: int) -> float:
    if p not in (1, 2):
        raise ValueError(f"only orders p=1 and p=2 are supported, got {p}")
    vals, probs = d.canonical()
    mean = expectation(d)
    dev = np.maximum(vals - mean, 0.0) ** p
    return math.fsum((probs * dev).tolist()) ** (1.0 / p)


class Kind(str, enum.Enum):
    EXPECTATION = "Expectation"
    EXPECTED_EXCESS = "ExpectedExcess"
    CVAR = "CVaR"
    VAR = "VaR"
    MEAN_UPPER_SEMIDEV = "MeanUpperSemidev"
    MEAN_RISK = "MeanRisk"
    CVAR_MIXTURE = "CVaRMixture"


@dataclass(frozen=True)
class RiskSpec:
    kind: Kind
    eta: float | None = None
    alpha: float | None = None
    p: int | None = None
    rho: float | None = None
    base: "RiskSpec | None" = None
    mixture: tuple[tuple[float, float], ...] = field(default=())

    def __post_init__(self):
        k = self.kind
        if k in (Kind.CVAR, Kind.VAR) and not (self.alpha is not None and 0.0 < self.alpha < 1.0):
            raise ValueError("alpha must lie in (0, 1)")
        if k == Kind.EXPECTED_EXCESS and self.eta is None:
            raise ValueError("expected excess needs a threshold eta")
        if k in (Kind.MEAN_UPPER_SEMIDEV, Kind.MEAN_RISK) and (self.rho is None or self.rho < 0):
            raise ValueError("rho must be nonnegative")
        if k == Kind.MEAN_UPPER_SEMIDEV and self.p not in (1, 2):
            raise ValueError("semideviation order must be 1 or 2")
        if k == Kind.MEAN_RISK:
            if self.base is None or self.base.kind in (Kind.MEAN_RISK, Kind.MEAN_UPPER_SEMIDEV):
                raise ValueError("MeanRisk needs a plain base measure")
        if k == Kind.CVAR_MIXTURE:
            if not self.mixture:
                raise ValueError("empty CVaR mixture")
            ws = [w for w, _ in self.mixture]
            if any(w <= 0 for w in ws) or abs(math.fsum(ws) - 1.0) > 1e-12:
                raise ValueError("mixture weights must be positive and sum to one")
            if any(not 0.0 <= a < 1.0 for _, a in self.mixture):
                raise ValueError("mixture levels must lie in [0, 1)")

    # constructors mirroring the textual grammar
    @classmethod
    def expectation(cls) -> "RiskSpec":
        return cls(Kind.EXPECTATION)

    @classmethod
    def excess(cls, eta: float) -> "RiskSpec":
        return cls(Kind.EXPECTED_EXCESS, eta=float(eta))

    @classmethod
    def cvar(cls, alpha: float) -> "RiskSpec":
        return cls(Kind.CVAR, alpha=float(alpha))

    @classmethod
    def var(cls, alpha: float) -> "RiskSpec":
        return cls(Kind.VAR, alpha=float(alpha))

    @classmethod
    def semidev(cls, p: int, rho: float) -> "RiskSpec":
        return cls(Kind.MEAN_UPPER_SEMIDEV, p=int(p), rho=float(rho))

    @classmethod
    def mean_risk(cls, base: "RiskSpec", rho: float) -> "RiskSpec":
        return cls(Kind.MEAN_RISK, base=base, rho=float(rho))

    @classmethod
    def cvar_mixture(cls, pairs) -> "RiskSpec":
        return cls(Kind.CVAR_MIXTURE, mixture=tuple((float(w), float(a)) for w, a in pairs))

    def __str__(self) -> str:
        k = self.kind
        if k == Kind.EXPECTATION:
            return "E"
        if k == Kind.EXPECTED_EXCESS:
            return f"EE({self.eta:g})"
        if k == Kind.CVAR:
            return f"CVaR({self.alpha:g})"
        if k == Kind.VAR:
            return f"VaR({self.alpha:g})"
        if k == Kind.MEAN_UPPER_SEMIDEV:
            return f"E+{self.rho:g}*Mad({self.p})"
        if k == Kind.MEAN_RISK:
            return f"E+{self.rho:g}*{self.base}"
        return "Mix[" + ",".join(f"{w:g}@{a:g}" for w, a in self.mixture) + "]"


_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_GRAMMAR = re.compile(rf"^E(?:\+({_NUM})\*(EE|CVaR|VaR|Mad)\(({_NUM})\))?$")


def parse_risk(text: str) -> RiskSpec:
    """Parse ``E``, ``E+rho*EE(eta)``, ``E+rho*CVaR(alpha)``, ``E+rho*VaR(alpha)`` or ``E+rho*Mad(p)``."""
    m = _GRAMMAR.match(text.replace(" ", ""))
    if not m:
        raise ValueError(f"cannot parse risk specification {text!r}")
    if m.group(1) is None:
        return RiskSpec.expectation()
    rho = float(m.group(1))
    name, arg = m.group(2), float(m.group(3))
    if name == "Mad":
        if arg not in (1.0, 2.0):
            raise ValueError("Mad order must be 1 or 2")
        return RiskSpec.semidev(int(arg), rho)
    base = {"EE": RiskSpec.excess, "CVaR": RiskSpec.cvar, "VaR": RiskSpec.var}[name](arg)
    return RiskSpec.mean_risk(base, rho)


def evaluate(spec: RiskSpec, d: DiscreteDist) -> float:
    k = spec.kind
    if k == Kind.EXPECTATION:
        return expectation(d)
    if k == Kind.EXPECTED_EXCESS:
        return expected_excess(d, spec.eta)
    if k == Kind.CVAR:
        return cvar(d, spec.alpha)[0]
    if k == Kind.VAR:
        return var(d, spec.alpha)
    if k == Kind.MEAN_UPPER_SEMIDEV:
        return expectation(d) + spec.rho * upper_semidev(d, spec.p)
    if k == Kind.MEAN_RISK:
        return expectation(d) + spec.rho * evaluate(spec.base, d)
    if k == Kind.CVAR_MIXTURE:
        parts = [w * (expectation(d) if a == 0.0 else cvar(d, a)[0]) for w, a in spec.mixture]
        return math.fsum(parts)
    raise ValueError(f"unknown risk kind {k}")
