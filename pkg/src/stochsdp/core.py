"""Algebraic types and problem containers for two-stage stochastic SDPs.

The parametric problem handled throughout the package is

    min  c • x + q • y
    s.t. T • x + W • y = z,  x ∈ X,  y ⪰ 0

where ``T • x = (tr(T_1 x), ..., tr(T_s x))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

SYM_TOL = 1e-10
PROB_TOL = 1e-12


class DimensionError(ValueError):
    """Raised when array shapes do not line up."""


class SymMatrix:
    """Immutable dense symmetric matrix.

    Construction rejects arrays whose relative asymmetry exceeds ``1e-10``.
    Arrays within that tolerance are symmetrized as ``(A + A^T)/2`` and the
    fact is remembered in :attr:`was_symmetrized`. Use :meth:`symmetrize` to
    build from an arbitrary square array on purpose.
    """

    __slots__ = ("_a", "was_symmetrized")

    def __init__(self, entries):
        a = np.array(entries, dtype=float)
        if a.ndim == 0:
            a = a.reshape(1, 1)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise DimensionError(f"expected a square matrix, got shape {a.shape}")
        asym = np.max(np.abs(a - a.T)) if a.size else 0.0
        scale = max(1.0, float(np.max(np.abs(a))))
        if asym > SYM_TOL * scale:
            raise ValueError(f"matrix is not symmetric (max |a_ij - a_ji| = {asym:.3g})")
        self.was_symmetrized = bool(asym > 0.0)
        if self.was_symmetrized:
            a = 0.5 * (a + a.T)
        a.setflags(write=False)
        self._a = a

    @classmethod
    def symmetrize(cls, entries) -> "SymMatrix":
        a = np.asarray(entries, dtype=float)
        return cls(0.5 * (a + a.T))

    @classmethod
    def identity(cls, k: int, scale: float = 1.0) -> "SymMatrix":
        return cls(scale * np.eye(k))

    @classmethod
    def zeros(cls, k: int) -> "SymMatrix":
        return cls(np.zeros((k, k)))

    @property
    def dim(self) -> int:
        return self._a.shape[0]

    @property
    def array(self) -> np.ndarray:
        """Read-only view of the entries."""
        return self._a

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._a.copy() if copy else self._a
        return self._a.astype(dtype)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SymMatrix):
            return NotImplemented
        return self.dim == other.dim and bool(np.array_equal(self._a, other._a))

    def __hash__(self):
        return hash(self._a.tobytes())

    def __repr__(self) -> str:
        return f"SymMatrix({self._a.tolist()!r})"

    def __add__(self, other: "SymMatrix") -> "SymMatrix":
        return SymMatrix(self._a + np.asarray(other))

    def __sub__(self, other: "SymMatrix") -> "SymMatrix":
        return SymMatrix(self._a - np.asarray(other))

    def __mul__(self, alpha: float) -> "SymMatrix":
        return SymMatrix(float(alpha) * self._a)

    __rmul__ = __mul__

    def inner(self, other) -> float:
        """Frobenius product ``tr(self @ other)``."""
        return float(np.vdot(self._a, np.asarray(other, dtype=float)))

    def min_eig(self) -> float:
        return float(np.linalg.eigvalsh(self._a)[0])


def _as_sym(m) -> SymMatrix:
    return m if isinstance(m, SymMatrix) else SymMatrix(m)


class MatrixTuple:
    """A tuple ``(a_1, ..., a_s)`` of symmetric matrices of one size."""

    __slots__ = ("blocks", "_stack")

    def __init__(self, blocks: Iterable):
        blocks = tuple(_as_sym(b) for b in blocks)
        if not blocks:
            raise DimensionError("a matrix tuple needs at least one block")
        k = blocks[0].dim
        if any(b.dim != k for b in blocks):
            raise DimensionError("all blocks of a matrix tuple must share one dimension")
        self.blocks = blocks
        stack = np.stack([b.array for b in blocks])
        stack.setflags(write=False)
        self._stack = stack

    @property
    def count(self) -> int:
        return len(self.blocks)

    @property
    def dim(self) -> int:
        return self.blocks[0].dim

    @property
    def stack(self) -> np.ndarray:
        """Entries as a read-only ``(s, k, k)`` array."""
        return self._stack

    def __len__(self) -> int:
        return len(self.blocks)

    def __getitem__(self, j: int) -> SymMatrix:
        return self.blocks[j]

    def __eq__(self, other) -> bool:
        if not isinstance(other, MatrixTuple):
            return NotImplemented
        return self.blocks == other.blocks

    def adjoint(self, u) -> np.ndarray:
        """``A^T u = sum_j u_j a_j`` as a dense array."""
        u = np.asarray(u, dtype=float).reshape(-1)
        if u.shape[0] != self.count:
            raise DimensionError(f"expected a vector of length {self.count}, got {u.shape[0]}")
        return np.tensordot(u, self._stack, axes=(0, 0))

    def norm(self) -> float:
        """``sqrt(sum_j ||a_j||^2)``, an upper bound on the operator norm of ``x -> A • x``."""
        return float(np.sqrt(np.sum(self._stack**2)))


def frobenius_pair(A: MatrixTuple, x) -> np.ndarray:
    """Return ``(tr(a_1 x), ..., tr(a_s x))``."""
    xa = np.asarray(x, dtype=float)
    if xa.ndim != 2 or xa.shape != (A.dim, A.dim):
        raise DimensionError(f"tuple blocks are {A.dim}x{A.dim} but x has shape {xa.shape}")
    return np.tensordot(A.stack, xa, axes=((1, 2), (0, 1)))


def frobenius_norm(x) -> float:
    xa = np.asarray(x, dtype=float)
    return float(math.sqrt(float(np.vdot(xa, xa))))


@dataclass(frozen=True)
class Spectrahedron:
    """Feasible first-stage set ``X ⊆ S^n_+``.

    ``eq`` holds pairs ``(G, g)`` meaning ``G • x = g``; ``ineq`` holds pairs
    ``(H, h)`` meaning ``H • x <= h``; ``trace_cap`` adds ``tr(x) <= tau``.
    """

    dim: int
    eq: tuple = ()
    ineq: tuple = ()
    trace_cap: float | None = None
    compact: bool = False

    def __post_init__(self):
        object.__setattr__(self, "eq", tuple((_as_sym(G), float(g)) for G, g in self.eq))
        object.__setattr__(self, "ineq", tuple((_as_sym(H), float(h)) for H, h in self.ineq))
        if self.trace_cap is not None:
            object.__setattr__(self, "trace_cap", float(self.trace_cap))
        for G, _ in self.eq + self.ineq:
            if G.dim != self.dim:
                raise DimensionError(f"constraint matrix of size {G.dim} in a spectrahedron of dim {self.dim}")
        if self.compact and self.trace_cap is None:
            raise ValueError("a spectrahedron flagged compact needs a trace cap")

    @classmethod
    def psd_cone(cls, n: int) -> "Spectrahedron":
        return cls(dim=n)

    @classmethod
    def trace_ball(cls, n: int, tau: float) -> "Spectrahedron":
        return cls(dim=n, trace_cap=tau, compact=True)

    @property
    def is_compact(self) -> bool:
        return self.trace_cap is not None

    def radius_bound(self) -> float:
        """Bound on ``||x||`` over X; ``||x|| <= tr(x)`` holds for ``x ⪰ 0``."""
        if self.trace_cap is None:
            raise ValueError("X is not known to be bounded (no trace cap)")
        return max(self.trace_cap, 0.0)

    def contains(self, x, tol: float = 1e-7) -> bool:
        xa = np.asarray(x, dtype=float)
        if np.linalg.eigvalsh(0.5 * (xa + xa.T))[0] < -tol:
            return False
        for G, g in self.eq:
            if abs(G.inner(xa) - g) > tol * (1 + abs(g)):
                return False
        for H, h in self.ineq:
            if H.inner(xa) > h + tol * (1 + abs(h)):
                return False
        if self.trace_cap is not None and np.trace(xa) > self.trace_cap + tol * (1 + abs(self.trace_cap)):
            return False
        return True


@dataclass(frozen=True)
class ProblemData:
    c: SymMatrix
    q: SymMatrix
    T: MatrixTuple
    W: MatrixTuple
    X: Spectrahedron

    def __post_init__(self):
        object.__setattr__(self, "c", _as_sym(self.c))
        object.__setattr__(self, "q", _as_sym(self.q))
        if not isinstance(self.T, MatrixTuple):
            object.__setattr__(self, "T", MatrixTuple(self.T))
        if not isinstance(self.W, MatrixTuple):
            object.__setattr__(self, "W", MatrixTuple(self.W))

    @property
    def n(self) -> int:
        return self.c.dim

    @property
    def m(self) -> int:
        return self.q.dim

    @property
    def s(self) -> int:
        return self.W.count

    def with_(self, **changes) -> "ProblemData":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True)
class ScenarioSet:
    """Finite distribution of the right-hand side ``z``."""

    probs: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float).reshape(-1)
        z = np.array(self.z, dtype=float)
        if z.ndim == 1:
            # one entry per scenario reads as s = 1; a lone scenario may be given flat
            z = z.reshape(-1, 1) if z.shape[0] == p.shape[0] else z.reshape(1, -1)
        if z.ndim != 2 or z.shape[0] != p.shape[0]:
            raise DimensionError(f"{p.shape[0]} probabilities but z has shape {z.shape}")
        p.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "z", z)

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[float, Sequence[float]]]) -> "ScenarioSet":
        probs = [p for p, _ in pairs]
        z = [np.atleast_1d(np.asarray(v, dtype=float)) for _, v in pairs]
        return cls(probs, np.stack(z))

    @property
    def S(self) -> int:
        return self.probs.shape[0]

    @property
    def dim(self) -> int:
        return self.z.shape[1]

    def __len__(self) -> int:
        return self.S

    def __iter__(self):
        return iter(zip(self.probs.tolist(), self.z))

    def __eq__(self, other) -> bool:
        if not isinstance(other, ScenarioSet):
            return NotImplemented
        return np.array_equal(self.probs, other.probs) and np.array_equal(self.z, other.z)

    def renormalized(self) -> "ScenarioSet":
        return ScenarioSet(self.probs / math.fsum(self.probs.tolist()), self.z)


@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        lines = [f"error: {e}" for e in self.errors] + [f"warning: {w}" for w in self.warnings]
        return "\n".join(lines) if lines else "ok"


def validate_problem(p: ProblemData, scen: ScenarioSet | None = None) -> ValidationReport:
    """Collect every structural defect of a problem and scenario set."""
    rep = ValidationReport()
    n, m = p.c.dim, p.q.dim
    if p.T.dim != n:
        rep.errors.append(f"dimension mismatch: T blocks are {p.T.dim}x{p.T.dim}, expected n={n}")
    if p.W.dim != m:
        rep.errors.append(f"dimension mismatch: W blocks are {p.W.dim}x{p.W.dim}, expected m={m}")
    if p.T.count != p.W.count:
        rep.errors.append(f"dimension mismatch: T has {p.T.count} blocks but W has {p.W.count}")
    if p.X.dim != n:
        rep.errors.append(f"dimension mismatch: X lives in S^{p.X.dim}, expected n={n}")
    for name, arr in (("c", p.c.array), ("q", p.q.array), ("T", p.T.stack), ("W", p.W.stack)):
        if not np.all(np.isfinite(arr)):
            rep.errors.append(f"{name} has non-finite entries")
    sym_inputs = [("c", p.c), ("q", p.q)]
    sym_inputs += [(f"T[{j}]", b) for j, b in enumerate(p.T.blocks)]
    sym_inputs += [(f"W[{j}]", b) for j, b in enumerate(p.W.blocks)]
    for name, b in sym_inputs:
        if b.was_symmetrized:
            rep.warnings.append(f"{name} was slightly asymmetric and has been symmetrized")
    if scen is not None:
        if np.any(scen.probs <= 0):
            rep.errors.append("probabilities must be strictly positive")
        total = math.fsum(scen.probs.tolist())
        if abs(total - 1.0) > PROB_TOL:
            rep.errors.append(f"probabilities sum to {total:.12g}")
        if scen.dim != p.W.count:
            rep.errors.append(f"dimension mismatch: scenarios have length {scen.dim}, expected s={p.W.count}")
        if not np.all(np.isfinite(scen.z)):
            rep.errors.append("scenario vectors have non-finite entries")
    return rep
