"""Standard-form block SDPs and their solutions.

A :class:`BlockSdp` is the primal problem

    minimize    sum_b C_b • X_b + d_free^T f + d_nonneg^T s
    subject to  sum_b A_jb • X_b + e_j,free^T f + e_j,nonneg^T s = b_j
                X_b ⪰ 0,  s >= 0,  f free

with dual

    maximize    b^T u
    subject to  C_b - sum_j u_j A_jb = Z_b ⪰ 0
                d_nonneg - E_nonneg^T u >= 0
                d_free - E_free^T u = 0.

Constraint matrices are stored block-sparse: for every PSD block only the
rows that touch it carry a matrix.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    NEAR_OPTIMAL = "NearOptimal"
    PRIMAL_INFEASIBLE = "PrimalInfeasible"
    DUAL_INFEASIBLE = "DualInfeasible"
    DIVERGING = "DivergingIterates"
    ITER_LIMIT = "IterLimit"
    NUMERICAL_FAILURE = "NumericalFailure"

    def __str__(self) -> str:
        return self.value

    @property
    def solved(self) -> bool:
        return self in (Status.OPTIMAL, Status.NEAR_OPTIMAL)


@dataclass(frozen=True)
class BlockRows:
    """Constraint matrices touching one PSD block: ``mats[r]`` sits in row ``rows[r]``."""

    rows: np.ndarray
    mats: np.ndarray

    def __eq__(self, other) -> bool:
        if not isinstance(other, BlockRows):
            return NotImplemented
        return np.array_equal(self.rows, other.rows) and np.array_equal(self.mats, other.mats)


@dataclass(frozen=True, eq=False)
class BlockSdp:
    block_dims: tuple[int, ...]
    c_blocks: tuple[np.ndarray, ...]
    a_blocks: tuple[BlockRows, ...]
    c_free: np.ndarray
    a_free: np.ndarray
    c_nonneg: np.ndarray
    a_nonneg: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        m = self.b.shape[0]
        if len(self.c_blocks) != len(self.block_dims) or len(self.a_blocks) != len(self.block_dims):
            raise ValueError("one objective matrix and one row set per PSD block required")
        for k, C, rows in zip(self.block_dims, self.c_blocks, self.a_blocks):
            if C.shape != (k, k):
                raise ValueError(f"objective block has shape {C.shape}, declared {k}")
            if rows.mats.shape[1:] != (k, k) or rows.mats.shape[0] != rows.rows.shape[0]:
                raise ValueError(f"constraint matrices do not match declared block dim {k}")
            if rows.rows.size and (rows.rows.min() < 0 or rows.rows.max() >= m):
                raise ValueError("row index out of range")
            if not np.all(np.isfinite(rows.mats)):
                raise ValueError("constraint rows must be finite")
        if self.a_free.shape != (m, self.c_free.shape[0]):
            raise ValueError("free-variable coefficient matrix has the wrong shape")
        if self.a_nonneg.shape != (m, self.c_nonneg.shape[0]):
            raise ValueError("nonnegative-variable coefficient matrix has the wrong shape")
        for arr in (self.a_free, self.a_nonneg, self.b, self.c_free, self.c_nonneg):
            if not np.all(np.isfinite(arr)):
                raise ValueError("constraint rows must be finite")

    @property
    def n_rows(self) -> int:
        return self.b.shape[0]

    @property
    def n_free(self) -> int:
        return self.c_free.shape[0]

    @property
    def n_nonneg(self) -> int:
        return self.c_nonneg.shape[0]

    def row_matrix(self, j: int, block: int) -> np.ndarray:
        """Dense ``A_{j,block}`` (zero if the row does not touch the block)."""
        br = self.a_blocks[block]
        k = self.block_dims[block]
        hit = np.nonzero(br.rows == j)[0]
        out = np.zeros((k, k))
        for h in hit:
            out += br.mats[h]
        return out

    def apply(self, X, f=None, s=None) -> np.ndarray:
        """Constraint map ``A(X) + E_free f + E_nonneg s``."""
        out = np.zeros(self.n_rows)
        for br, Xb in zip(self.a_blocks, X):
            if br.rows.size:
                np.add.at(out, br.rows, np.einsum("rij,ij->r", br.mats, Xb))
        if f is not None and self.n_free:
            out += self.a_free @ f
        if s is not None and self.n_nonneg:
            out += self.a_nonneg @ s
        return out

    def objective(self, X, f=None, s=None) -> float:
        val = sum(float(np.vdot(C, Xb)) for C, Xb in zip(self.c_blocks, X))
        if f is not None and self.n_free:
            val += float(self.c_free @ f)
        if s is not None and self.n_nonneg:
            val += float(self.c_nonneg @ s)
        return val

    def structurally_equal(self, other: "BlockSdp") -> bool:
        return (
            self.block_dims == other.block_dims
            and all(np.array_equal(a, b) for a, b in zip(self.c_blocks, other.c_blocks))
            and all(a == b for a, b in zip(self.a_blocks, other.a_blocks))
            and np.array_equal(self.c_free, other.c_free)
            and np.array_equal(self.a_free, other.a_free)
            and np.array_equal(self.c_nonneg, other.c_nonneg)
            and np.array_equal(self.a_nonneg, other.a_nonneg)
            and np.array_equal(self.b, other.b)
        )

    def data_norm(self) -> float:
        parts = [np.linalg.norm(self.b), np.linalg.norm(self.c_free), np.linalg.norm(self.c_nonneg)]
        parts += [np.linalg.norm(C) for C in self.c_blocks]
        parts += [np.linalg.norm(br.mats) for br in self.a_blocks]
        parts += [np.linalg.norm(self.a_free), np.linalg.norm(self.a_nonneg)]
        return float(max(parts)) if parts else 0.0


class SdpBuilder:
    """Incremental construction of a :class:`BlockSdp`.

    Variables are addressed by the integer index returned when they are
    declared; rows take dictionaries mapping those indices to coefficients.
    """

    def __init__(self):
        self._dims: list[int] = []
        self._costs: list[np.ndarray] = []
        self._free_cost: list[float] = []
        self._nonneg_cost: list[float] = []
        self._rows: list[tuple[dict, dict, dict, float]] = []

    def psd_block(self, k: int, cost=None) -> int:
        self._dims.append(int(k))
        self._costs.append(np.zeros((k, k)) if cost is None else np.array(cost, dtype=float))
        return len(self._dims) - 1

    def free(self, cost: float = 0.0) -> int:
        self._free_cost.append(float(cost))
        return len(self._free_cost) - 1

    def nonneg(self, cost: float = 0.0) -> int:
        self._nonneg_cost.append(float(cost))
        return len(self._nonneg_cost) - 1

    def add_cost(self, block: int, mat) -> None:
        self._costs[block] = self._costs[block] + np.asarray(mat, dtype=float)

    def row(self, rhs: float, psd: dict | None = None, free: dict | None = None, nonneg: dict | None = None) -> int:
        self._rows.append((dict(psd or {}), dict(free or {}), dict(nonneg or {}), float(rhs)))
        return len(self._rows) - 1

    @property
    def n_rows(self) -> int:
        return len(self._rows)

    def build(self) -> BlockSdp:
        m = len(self._rows)
        per_block: list[tuple[list[int], list[np.ndarray]]] = [([], []) for _ in self._dims]
        a_free = np.zeros((m, len(self._free_cost)))
        a_nonneg = np.zeros((m, len(self._nonneg_cost)))
        b = np.zeros(m)
        for j, (psd, fr, nn, rhs) in enumerate(self._rows):
            for blk, mat in psd.items():
                mat = np.asarray(mat, dtype=float)
                if not np.any(mat):
                    continue
                per_block[blk][0].append(j)
                per_block[blk][1].append(0.5 * (mat + mat.T))
            for i, v in fr.items():
                a_free[j, i] += v
            for i, v in nn.items():
                a_nonneg[j, i] += v
            b[j] = rhs
        a_blocks = []
        for k, (rows, mats) in zip(self._dims, per_block):
            a_blocks.append(
                BlockRows(
                    np.asarray(rows, dtype=np.int64),
                    np.stack(mats) if mats else np.zeros((0, k, k)),
                )
            )
        return BlockSdp(
            block_dims=tuple(self._dims),
            c_blocks=tuple(0.5 * (C + C.T) for C in self._costs),
            a_blocks=tuple(a_blocks),
            c_free=np.asarray(self._free_cost, dtype=float),
            a_free=a_free,
            c_nonneg=np.asarray(self._nonneg_cost, dtype=float),
            a_nonneg=a_nonneg,
            b=b,
        )


@dataclass
class SdpSolution:
    status: Status
    X: list[np.ndarray]
    free: np.ndarray
    nonneg: np.ndarray
    u: np.ndarray
    Z: list[np.ndarray]
    z_nonneg: np.ndarray
    pobj: float
    dobj: float
    iterations: int
    pinf: float = float("nan")
    dinf: float = float("nan")
    primal_norm_warning: bool = False
    message: str = ""
    history: list[dict] = field(default_factory=list, repr=False)

    @property
    def gap(self) -> float:
        return abs(self.pobj - self.dobj)

    @property
    def dual(self) -> np.ndarray:
        return self.u

    @property
    def value(self) -> float:
        return self.pobj

    def primal_norm(self) -> float:
        sq = sum(float(np.vdot(Xb, Xb)) for Xb in self.X)
        sq += float(self.free @ self.free) + float(self.nonneg @ self.nonneg)
        return float(np.sqrt(sq))
