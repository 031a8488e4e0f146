"""Strict-feasibility margins of a block SDP.

The dual margin is ``max λ`` such that every dual slack (PSD blocks and
nonnegative scalars) stays above ``λ I``. It is computed as the optimal
value of the primal problem

    min  C • Y + d^T y   s.t.  A(Y) + E y = 0,  tr(Y) + sum(y_nonneg) = 1,

whose dual is exactly the margin program. The primal margin shifts every
conic variable by ``λ I`` and maximizes ``λ`` over a free scalar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ipm import SolverOptions, solve
from .problem import BlockRows, BlockSdp, SdpSolution, Status


class MarginFailure(RuntimeError):
    """The margin program could not be solved."""


@dataclass
class MarginResult:
    margin: float
    witness: object
    solution: SdpSolution

    @property
    def strictly_feasible(self) -> bool:
        return self.margin > 1e-8


def _dual_margin_sdp(sdp: BlockSdp) -> BlockSdp:
    m = sdp.n_rows
    a_blocks = []
    for k, br in zip(sdp.block_dims, sdp.a_blocks):
        a_blocks.append(BlockRows(np.append(br.rows, m).astype(np.int64), np.concatenate([br.mats, np.eye(k)[None]])))
    a_free = np.vstack([sdp.a_free, np.zeros((1, sdp.n_free))])
    a_nonneg = np.vstack([sdp.a_nonneg, np.ones((1, sdp.n_nonneg))])
    return BlockSdp(
        block_dims=sdp.block_dims,
        c_blocks=sdp.c_blocks,
        a_blocks=tuple(a_blocks),
        c_free=sdp.c_free,
        a_free=a_free,
        c_nonneg=sdp.c_nonneg,
        a_nonneg=a_nonneg,
        b=np.append(np.zeros(m), 1.0),
    )


def _primal_margin_sdp(sdp: BlockSdp) -> BlockSdp:
    shift = sdp.apply([np.eye(k) for k in sdp.block_dims], None, np.ones(sdp.n_nonneg))
    return BlockSdp(
        block_dims=sdp.block_dims,
        c_blocks=tuple(np.zeros((k, k)) for k in sdp.block_dims),
        a_blocks=sdp.a_blocks,
        c_free=np.append(np.zeros(sdp.n_free), -1.0),
        a_free=np.hstack([sdp.a_free, shift[:, None]]),
        c_nonneg=np.zeros(sdp.n_nonneg),
        a_nonneg=sdp.a_nonneg,
        b=sdp.b,
    )


def strict_feasibility_margin(sdp: BlockSdp, side: str = "dual", opts: SolverOptions | None = None) -> MarginResult:
    """Largest ``λ`` with a feasible point whose conic part is ``⪰ λ I``.

    Returns ``+inf`` when the margin is unbounded and ``-inf`` when the
    feasible set is empty. For the dual side the witness is the dual vector
    ``u``; for the primal side it is the primal solution.
    """
    if side == "dual":
        sol = solve(_dual_margin_sdp(sdp), opts)
        if sol.status == Status.PRIMAL_INFEASIBLE:
            return MarginResult(math.inf, None, sol)
        if sol.status == Status.DUAL_INFEASIBLE:
            return MarginResult(-math.inf, None, sol)
        if not sol.status.solved:
            raise MarginFailure(f"dual margin program ended with status {sol.status}: {sol.message}")
        return MarginResult(float(sol.u[-1]), sol.u[:-1].copy(), sol)
    if side == "primal":
        sol = solve(_primal_margin_sdp(sdp), opts)
        if sol.status == Status.PRIMAL_INFEASIBLE:
            return MarginResult(-math.inf, None, sol)
        if sol.status == Status.DUAL_INFEASIBLE:
            return MarginResult(math.inf, None, sol)
        if not sol.status.solved:
            raise MarginFailure(f"primal margin program ended with status {sol.status}: {sol.message}")
        lam = float(sol.free[-1])
        return MarginResult(lam, sol, sol)
    raise ValueError(f"side must be 'primal' or 'dual', got {side!r}")
