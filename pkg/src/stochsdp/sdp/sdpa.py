"""SDPA sparse format (``.dat-s``) export and import.

SDPA solves ``max F0 • Y s.t. Fi • Y = ci, Y ⪰ 0`` in its dual form, so a
:class:`BlockSdp` is written with ``F0 = -C``, ``Fi = A_i`` and ``c = b``.
Nonnegative scalars become one diagonal block (negative size). SDPA has no
free variables; each free variable is split into a ``+``/``-`` pair inside
the diagonal block and a ``* stochsdp`` header records the layout so that
:func:`read_sdpa` can fold the pairs back.
"""

from __future__ import annotations

import io
import re
from pathlib import Path

import numpy as np

from .problem import BlockRows, BlockSdp

FMT = "{:.17g}"
_HEADER = re.compile(r"^\*\s*stochsdp\s+psd=(\S*)\s+nonneg=(\d+)\s+free=(\d+)")


def dumps(sdp: BlockSdp, comment: str = "stochsdp export") -> str:
    out = io.StringIO()
    nn, nf = sdp.n_nonneg, sdp.n_free
    ndiag = nn + 2 * nf
    dims = list(sdp.block_dims)
    out.write(f'"{comment}\n')
    out.write(f"* stochsdp psd={','.join(map(str, dims))} nonneg={nn} free={nf}\n")
    nblocks = len(dims) + (1 if ndiag else 0)
    out.write(f"{sdp.n_rows}\n{nblocks}\n")
    out.write(" ".join([str(k) for k in dims] + ([str(-ndiag)] if ndiag else [])) + "\n")
    out.write(" ".join(FMT.format(v) for v in sdp.b) + "\n")

    entries: list[tuple[int, int, int, int, float]] = []

    def add_dense(mat_no, blk, A, sign=1.0):
        k = A.shape[0]
        iu, ju = np.triu_indices(k)
        vals = A[iu, ju]
        for i, j, v in zip(iu, ju, vals):
            if v != 0.0:
                entries.append((mat_no, blk, int(i) + 1, int(j) + 1, sign * float(v)))

    def add_diag(mat_no, vec_nn, vec_f, sign):
        blk = len(dims) + 1
        diag = np.concatenate([vec_nn, vec_f, -vec_f])
        for i, v in enumerate(diag):
            if v != 0.0:
                entries.append((mat_no, blk, i + 1, i + 1, sign * float(v)))

    for bi, C in enumerate(sdp.c_blocks):
        add_dense(0, bi + 1, C, -1.0)
    if ndiag:
        add_diag(0, sdp.c_nonneg, sdp.c_free, -1.0)
    for bi, br in enumerate(sdp.a_blocks):
        for r, A in zip(br.rows, br.mats):
            add_dense(int(r) + 1, bi + 1, A)
    if ndiag:
        for j in range(sdp.n_rows):
            add_diag(j + 1, sdp.a_nonneg[j], sdp.a_free[j], 1.0)
    entries.sort(key=lambda e: (e[0], e[1], e[2], e[3]))
    for mat_no, blk, i, j, v in entries:
        out.write(f"{mat_no} {blk} {i} {j} {FMT.format(v)}\n")
    return out.getvalue()


def write_sdpa(sdp: BlockSdp, path, comment: str = "stochsdp export") -> None:
    Path(path).write_text(dumps(sdp, comment))


def loads(text: str) -> BlockSdp:
    """Parse SDPA sparse text; malformed or truncated input raises ValueError."""
    try:
        return _loads(text)
    except (StopIteration, IndexError) as exc:
        raise ValueError("truncated or malformed SDPA data") from exc


def _loads(text: str) -> BlockSdp:
    layout = None
    body = []
    for line in text.splitlines():
        s = line.strip()
        if not s:
            continue
        if s[0] in "\"*":
            m = _HEADER.match(s)
            if m:
                psd = [int(v) for v in m.group(1).split(",") if v]
                layout = (psd, int(m.group(2)), int(m.group(3)))
            continue
        body.append(s)
    tokens = re.sub(r"[{}(),]", " ", "\n".join(body)).split("\n")
    it = iter(tokens)

    def nums(line):
        return line.split()

    m = int(nums(next(it))[0])
    nblocks = int(nums(next(it))[0])
    dims: list[int] = []
    while len(dims) < nblocks:
        dims += [int(float(v)) for v in nums(next(it))]
    bvals: list[float] = []
    while len(bvals) < m:
        bvals += [float(v) for v in nums(next(it))]

    psd_pos = [i for i, d in enumerate(dims) if d > 0]
    diag_pos = [i for i, d in enumerate(dims) if d < 0]
    ndiag = sum(-dims[i] for i in diag_pos)
    if layout is not None:
        _, nn, nf = layout
        if nn + 2 * nf != ndiag:
            raise ValueError("stochsdp header does not match the diagonal block size")
    else:
        nn, nf = ndiag, 0
    diag_offset = {}
    off = 0
    for i in diag_pos:
        diag_offset[i] = off
        off += -dims[i]

    k_of = {i: dims[i] for i in psd_pos}
    C = {i: np.zeros((k_of[i], k_of[i])) for i in psd_pos}
    A: dict[int, dict[int, np.ndarray]] = {i: {} for i in psd_pos}
    cdiag = np.zeros(ndiag)
    adiag = np.zeros((m, ndiag))
    for line in it:
        parts = line.split()
        if not parts:
            continue
        mat_no, blk, i, j = (int(p) for p in parts[:4])
        v = float(parts[4])
        bidx = blk - 1
        if dims[bidx] > 0:
            target = C[bidx] if mat_no == 0 else A[bidx].setdefault(mat_no - 1, np.zeros((k_of[bidx],) * 2))
            if mat_no == 0:
                v = -v
            target[i - 1, j - 1] = v
            target[j - 1, i - 1] = v
        else:
            if i != j:
                raise ValueError("off-diagonal entry in a diagonal block")
            pos = diag_offset[bidx] + i - 1
            if mat_no == 0:
                cdiag[pos] = -v
            else:
                adiag[mat_no - 1, pos] = v

    a_blocks = []
    for i in psd_pos:
        rows = sorted(A[i])
        a_blocks.append(
            BlockRows(
                np.asarray(rows, dtype=np.int64),
                np.stack([A[i][r] for r in rows]) if rows else np.zeros((0, k_of[i], k_of[i])),
            )
        )
    return BlockSdp(
        block_dims=tuple(k_of[i] for i in psd_pos),
        c_blocks=tuple(C[i] for i in psd_pos),
        a_blocks=tuple(a_blocks),
        c_free=cdiag[nn : nn + nf].copy(),
        a_free=adiag[:, nn : nn + nf].copy(),
        c_nonneg=cdiag[:nn].copy(),
        a_nonneg=adiag[:, :nn].copy(),
        b=np.asarray(bvals, dtype=float),
    )


def read_sdpa(path) -> BlockSdp:
    return loads(Path(path).read_text())
