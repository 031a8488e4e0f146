"""Primal-dual interior-point method for :class:`BlockSdp`.

Infeasible-start Mehrotra predictor-corrector with Nesterov-Todd scaling.
PSD blocks of equal size are processed as stacked arrays so that the
per-iteration linear algebra (Cholesky, SVD, eigenvalues) is batched.
Free variables enter the Newton system directly through the augmented
matrix ``[[M, E_free], [E_free^T, 0]]``.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import kernels
from .problem import BlockSdp, SdpSolution, Status

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverOptions:
    feas_tol: float = 1e-8
    gap_tol: float = 1e-8
    max_iter: int = 200
    reg: float = 1e-12
    reg_retry: float = 1e-8
    # ratio below which an iterate is accepted as an infeasibility certificate
    infeas_tol: float = 1e-8
    divergence_factor: float = 1e8
    warn_factor: float = 1e6
    kernel: str | None = None
    keep_history: bool = True

    @classmethod
    def from_env(cls, **overrides) -> "SolverOptions":
        """Defaults overridden by ``STOCHSDP_FEAS_TOL``, ``STOCHSDP_GAP_TOL``, ``STOCHSDP_MAX_ITER``."""
        env = {}
        for key, name, conv in (
            ("feas_tol", "STOCHSDP_FEAS_TOL", float),
            ("gap_tol", "STOCHSDP_GAP_TOL", float),
            ("max_iter", "STOCHSDP_MAX_ITER", int),
        ):
            if os.environ.get(name):
                env[key] = conv(os.environ[name])
        env.update(overrides)
        return cls(**env)


DEFAULT_OPTIONS = SolverOptions()

# loose thresholds under which a stalled run is still reported as NearOptimal
_NEAR_FEAS = 1e-6
_REFINE_PASSES = 2
# iterations without a better merit before giving up
_NO_PROGRESS = 8
# primal norm growth that flags an unattained optimum: the norm rose
# _GROWTH_NORM-fold while complementarity fell _GROWTH_MU-fold
_GROWTH_MU = 100.0
_GROWTH_NORM = 10.0
_GROWTH_FLOOR = 100.0
_NEAR_GAP = 1e-5


class _Group:
    """PSD blocks of one dimension, stacked."""

    def __init__(self, k, block_ids, C, mats, offsets, rows):
        self.k = k
        self.block_ids = block_ids
        self.nb = len(block_ids)
        self.C = C
        self.mats = mats
        self.offsets = offsets
        self.rows = rows
        self.owner = np.repeat(np.arange(self.nb), np.diff(offsets))
        starts = offsets[:-1]
        self._nonempty = offsets[1:] > starts
        self._starts = starts[self._nonempty]

    def apply(self, X, m):
        if not self.rows.size:
            return np.zeros(m)
        vals = np.einsum("rij,rij->r", self.mats, X[self.owner])
        return np.bincount(self.rows, weights=vals, minlength=m)

    def adjoint(self, u):
        out = np.zeros((self.nb, self.k, self.k))
        if self.rows.size:
            vals = self.mats * u[self.rows][:, None, None]
            out[self._nonempty] = np.add.reduceat(vals, self._starts, axis=0)
        return out


class _Prepared:
    """Row-scaled, dependency-free copy of a BlockSdp in grouped layout."""

    def __init__(self, sdp: BlockSdp, kernel):
        self.sdp = sdp
        m0 = sdp.n_rows
        sq = np.zeros(m0)
        for br in sdp.a_blocks:
            if br.rows.size:
                np.add.at(sq, br.rows, np.einsum("rij,rij->r", br.mats, br.mats))
        sq += np.sum(sdp.a_free**2, axis=1) + np.sum(sdp.a_nonneg**2, axis=1)
        norms = np.sqrt(sq)
        self.infeasible_rows = []
        self.dropped = []
        empty = norms == 0.0
        for j in np.nonzero(empty)[0]:
            if abs(sdp.b[j]) > 0.0:
                self.infeasible_rows.append(int(j))
        scale = np.where(empty, 0.0, 1.0 / np.where(empty, 1.0, norms))

        keep = np.nonzero(~empty)[0]
        keep = self._independent_rows(sdp, keep, scale, kernel)
        self.keep = keep
        self.scale = scale[keep]
        self.m = keep.size
        remap = -np.ones(m0, dtype=np.int64)
        remap[keep] = np.arange(self.m)
        self.b = sdp.b[keep] * self.scale
        self.a_free = sdp.a_free[keep] * self.scale[:, None]
        self.a_nonneg = sdp.a_nonneg[keep] * self.scale[:, None]
        self.c_free = sdp.c_free
        self.c_nonneg = sdp.c_nonneg

        by_dim: dict[int, list[int]] = {}
        for bi, k in enumerate(sdp.block_dims):
            by_dim.setdefault(k, []).append(bi)
        self.groups = []
        for k, ids in sorted(by_dim.items()):
            mats, rows, offsets = [], [], [0]
            for bi in ids:
                br = sdp.a_blocks[bi]
                sel = remap[br.rows] >= 0 if br.rows.size else np.zeros(0, bool)
                r = remap[br.rows[sel]]
                mats.append(br.mats[sel] * scale[br.rows[sel]][:, None, None])
                rows.append(r)
                offsets.append(offsets[-1] + r.size)
            C = np.stack([sdp.c_blocks[bi] for bi in ids])
            self.groups.append(
                _Group(
                    k,
                    ids,
                    C,
                    np.ascontiguousarray(np.concatenate(mats)) if mats else np.zeros((0, k, k)),
                    np.asarray(offsets, dtype=np.int64),
                    np.ascontiguousarray(np.concatenate(rows)).astype(np.int64),
                )
            )
        self.nu = sum(sdp.block_dims) + sdp.n_nonneg

    def _independent_rows(self, sdp, keep, scale, kernel):
        if keep.size <= 1:
            return keep
        m0 = sdp.n_rows
        G = np.zeros((m0, m0))
        for k, br in zip(sdp.block_dims, sdp.a_blocks):
            if br.rows.size:
                mats = np.ascontiguousarray(br.mats * scale[br.rows][:, None, None])
                kernel(G, np.eye(k)[None], mats, np.array([0, br.rows.size], dtype=np.int64), br.rows)
        af = sdp.a_free * scale[:, None]
        an = sdp.a_nonneg * scale[:, None]
        G += af @ af.T + an @ an.T
        G = G[np.ix_(keep, keep)]
        _, R, piv = sla.qr(G, pivoting=True)
        d = np.abs(np.diag(R))
        rank = int(np.sum(d > 1e-11 * max(d[0], 1.0)))
        if rank == keep.size:
            return keep
        ind = np.sort(piv[:rank])
        dep = np.sort(piv[rank:])
        bs = sdp.b[keep] * scale[keep]
        lam = np.linalg.lstsq(G[np.ix_(ind, ind)], G[np.ix_(ind, dep)], rcond=None)[0]
        resid = bs[dep] - lam.T @ bs[ind]
        for j, r in zip(dep, resid):
            if abs(r) > 1e-8 * (1.0 + abs(bs[j])):
                self.infeasible_rows.append(int(keep[j]))
        self.dropped = [int(keep[j]) for j in dep]
        log.warning("removed %d linearly dependent constraint rows", len(dep))
        return keep[ind]


def _sym(A):
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def _tr(A):
    return np.swapaxes(A, -1, -2)


def _psd_step(lam, dT):
    """Largest step keeping ``diag(lam) + a * dT`` PSD (inf if unbounded)."""
    if dT.shape[0] == 0:
        return math.inf
    s = 1.0 / np.sqrt(lam)
    Ms = dT * s[:, :, None] * s[:, None, :]
    e = np.linalg.eigvalsh(_sym(Ms))[:, 0]
    emin = float(e.min())
    return -1.0 / emin if emin < 0 else math.inf


def _lp_step(x, dx):
    neg = dx < 0
    if not np.any(neg):
        return math.inf
    return float(np.min(-x[neg] / dx[neg]))


class _Kkt:
    def __init__(self, M, Af, reg, retry):
        self.M = M
        self.Af = Af
        m, nf = Af.shape
        self.m, self.nf = m, nf
        scale = max(1.0, float(np.max(np.abs(np.diag(M)))) if m else 1.0)
        self.ok = False
        for r in (reg, retry):
            delta = r * scale
            try:
                if nf == 0:
                    self._fac = ("chol", sla.cho_factor(M + delta * np.eye(m), lower=True, check_finite=True))
                else:
                    K = np.block([[M + delta * np.eye(m), Af], [Af.T, -delta * np.eye(nf)]])
                    lu = sla.lu_factor(K, check_finite=True)
                    if not np.all(np.isfinite(lu[0])) or np.min(np.abs(np.diag(lu[0]))) == 0.0:
                        raise np.linalg.LinAlgError("singular KKT matrix")
                    self._fac = ("lu", lu)
                self.ok = True
                self.delta = delta
                break
            except (np.linalg.LinAlgError, ValueError):
                continue

    def _raw(self, r):
        kind, fac = self._fac
        if kind == "chol":
            return sla.cho_solve(fac, r, check_finite=False)
        return sla.lu_solve(fac, r, check_finite=False)

    def _mul(self, x):
        if self.nf == 0:
            return self.M @ x
        du, df = x[: self.m], x[self.m :]
        return np.concatenate([self.M @ du + self.Af @ df, self.Af.T @ du])

    def solve(self, r1, r2):
        r = r1 if self.nf == 0 else np.concatenate([r1, r2])
        x = self._raw(r)
        x = x + self._raw(r - self._mul(x))
        return x[: self.m], x[self.m :]


def solve(sdp: BlockSdp, opts: SolverOptions | None = None) -> SdpSolution:
    """Solve a block SDP; the outcome is always reported through ``status``."""
    opts = opts or DEFAULT_OPTIONS
    kernel = kernels.KERNELS[opts.kernel] if opts.kernel else kernels.schur_accumulate
    P = _Prepared(sdp, kernel)
    if P.infeasible_rows:
        return _trivial(sdp, Status.PRIMAL_INFEASIBLE, f"inconsistent constraint rows {P.infeasible_rows}")
    return _Ipm(P, opts, kernel).run()


def _trivial(sdp: BlockSdp, status: Status, msg: str) -> SdpSolution:
    return SdpSolution(
        status=status,
        X=[np.zeros((k, k)) for k in sdp.block_dims],
        free=np.zeros(sdp.n_free),
        nonneg=np.zeros(sdp.n_nonneg),
        u=np.zeros(sdp.n_rows),
        Z=[np.zeros((k, k)) for k in sdp.block_dims],
        z_nonneg=np.zeros(sdp.n_nonneg),
        pobj=math.nan,
        dobj=math.nan,
        iterations=0,
        message=msg,
    )


class _Ipm:
    def __init__(self, P: _Prepared, opts: SolverOptions, kernel):
        self.P = P
        self.opts = opts
        self.kernel = kernel
        sdp = P.sdp
        self.data_norm = sdp.data_norm()
        self.norm_b = float(np.linalg.norm(sdp.b))
        cn = [np.linalg.norm(C) for C in sdp.c_blocks] + [np.linalg.norm(sdp.c_free), np.linalg.norm(sdp.c_nonneg)]
        self.norm_c = float(np.sqrt(sum(v * v for v in cn)))

    def _initial_point(self):
        P = self.P
        X, Z = [], []
        for g in P.groups:
            xi = np.full(g.nb, max(10.0, math.sqrt(g.k)))
            zeta = np.full(g.nb, max(10.0, math.sqrt(g.k)))
            for b in range(g.nb):
                lo, hi = g.offsets[b], g.offsets[b + 1]
                if hi > lo:
                    an = np.sqrt(np.einsum("rij,rij->r", g.mats[lo:hi], g.mats[lo:hi]))
                    bb = np.abs(P.b[g.rows[lo:hi]])
                    xi[b] = max(xi[b], g.k * float(np.max((1.0 + bb) / (1.0 + an))))
                    zeta[b] = max(zeta[b], float(np.max(an)))
                zeta[b] = max(zeta[b], float(np.linalg.norm(g.C[b])))
            eye = np.eye(g.k)
            X.append(xi[:, None, None] * eye)
            Z.append(zeta[:, None, None] * eye)
        nn = P.a_nonneg.shape[1]
        if nn:
            an = np.abs(P.a_nonneg)
            xi = max(10.0, float(np.max((1.0 + np.abs(P.b)[:, None]) / (1.0 + an)))) if P.m else 10.0
            zeta = max(10.0, float(np.max(an)) if an.size else 0.0, float(np.max(np.abs(P.c_nonneg))))
            xn = np.full(nn, xi)
            zn = np.full(nn, zeta)
        else:
            xn = np.zeros(0)
            zn = np.zeros(0)
        f = np.zeros(P.a_free.shape[1])
        u = np.zeros(P.m)
        return X, Z, xn, zn, f, u

    def _A(self, X, xn, f):
        P = self.P
        out = np.zeros(P.m)
        for g, Xg in zip(P.groups, X):
            out += g.apply(Xg, P.m)
        if xn.size:
            out += P.a_nonneg @ xn
        if f.size:
            out += P.a_free @ f
        return out

    def _At(self, u):
        return [g.adjoint(u) for g in self.P.groups]

    def run(self) -> SdpSolution:
        P, opts = self.P, self.opts
        X, Z, xn, zn, f, u = self._initial_point()
        history = []
        status = Status.ITER_LIMIT
        message = ""
        step_p = step_d = 1.0
        prev_gap = math.inf
        stall = 0
        it = 0
        best = None
        trail = []
        for it in range(opts.max_iter + 1):
            Ax = self._A(X, xn, f)
            rp = P.b - Ax
            AtU = self._At(u)
            Rd = [g.C - a - Zg for g, a, Zg in zip(P.groups, AtU, Z)]
            rdn = P.c_nonneg - P.a_nonneg.T @ u - zn if xn.size else np.zeros(0)
            rdf = P.c_free - P.a_free.T @ u if f.size else np.zeros(0)
            pobj = sum(float(np.vdot(g.C, Xg)) for g, Xg in zip(P.groups, X))
            pobj += float(P.c_nonneg @ xn) + float(P.c_free @ f)
            dobj = float(P.b @ u)
            compl = sum(float(np.vdot(Xg, Zg)) for Xg, Zg in zip(X, Z)) + float(xn @ zn)
            mu = compl / P.nu if P.nu else 0.0
            pinf = float(np.linalg.norm(rp / P.scale)) / (1.0 + self.norm_b) if P.m else 0.0
            dsq = sum(float(np.vdot(R, R)) for R in Rd) + float(rdn @ rdn) + float(rdf @ rdf)
            dinf = math.sqrt(dsq) / (1.0 + self.norm_c)
            gap = pobj - dobj
            pnorm = math.sqrt(sum(float(np.vdot(Xg, Xg)) for Xg in X) + float(xn @ xn) + float(f @ f))
            if opts.keep_history:
                history.append(dict(it=it, pobj=pobj, dobj=dobj, pinf=pinf, dinf=dinf, mu=mu, pnorm=pnorm))
            trail.append((abs(compl), pnorm))
            gap_ok = max(abs(gap), abs(compl)) <= opts.gap_tol * (1.0 + abs(pobj))
            merit = max(pinf, dinf, max(abs(gap), abs(compl)) / (1.0 + abs(pobj)))
            if best is None or merit < best[0]:
                best = (merit, X, Z, xn, zn, f, u, pobj, dobj, pinf, dinf, gap, pnorm)
                best_it = it
            if pinf <= opts.feas_tol and dinf <= opts.feas_tol and gap_ok:
                status = Status.OPTIMAL
                break
            # infeasibility certificates from diverging iterates
            if dobj > 0:
                ray = math.sqrt(sum(float(np.vdot(C, C)) for C in (g.C - R for g, R in zip(P.groups, Rd)))
                                + float(np.sum((P.c_nonneg - rdn) ** 2 if xn.size else 0.0))
                                + float(np.sum((P.c_free - rdf) ** 2) if f.size else 0.0))
                if ray <= opts.infeas_tol * dobj and dobj > 1.0 / opts.infeas_tol ** 0.5:
                    status, message = Status.PRIMAL_INFEASIBLE, "dual ray found"
                    break
            if pobj < 0:
                ray = float(np.linalg.norm(Ax / P.scale)) if P.m else 0.0
                if ray <= opts.infeas_tol * (-pobj) and -pobj > 1.0 / opts.infeas_tol ** 0.5:
                    status, message = Status.DUAL_INFEASIBLE, "primal ray found"
                    break
            if pnorm > opts.divergence_factor * (1.0 + self.data_norm) and abs(gap) < prev_gap:
                status, message = Status.DIVERGING, "primal iterates diverge while the gap closes"
                break
            prev_gap = abs(gap)
            if it == opts.max_iter:
                break
            # a stuck residual with complementarity already at tolerance
            stuck = it - best_it >= _NO_PROGRESS and abs(compl) <= opts.gap_tol * (1.0 + abs(pobj))
            if stall >= 3 or stuck:
                status, message = Status.NUMERICAL_FAILURE, "no progress"
                break

            try:
                step = self._step(X, Z, xn, zn, f, u, rp, Rd, rdn, rdf, mu, step_p, step_d)
            except np.linalg.LinAlgError as exc:
                status, message = Status.NUMERICAL_FAILURE, f"linear algebra breakdown: {exc}"
                break
            if step is None:
                status, message = Status.NUMERICAL_FAILURE, "KKT factorization failed after regularization retry"
                break
            dX, dZ, dxn, dzn, df, du, ap, ad = step
            X = [Xg + ap * d for Xg, d in zip(X, dX)]
            Z = [Zg + ad * d for Zg, d in zip(Z, dZ)]
            xn = xn + ap * dxn
            zn = zn + ad * dzn
            f = f + ap * df
            u = u + ad * du
            step_p, step_d = ap, ad
            stall = stall + 1 if max(ap, ad) < 1e-10 else 0

        if status in (Status.ITER_LIMIT, Status.NUMERICAL_FAILURE) and best is not None:
            # rounding can spoil the last iterates near a degenerate optimum
            _, X, Z, xn, zn, f, u, pobj, dobj, pinf, dinf, gap, pnorm = best
        near = pinf <= _NEAR_FEAS and dinf <= _NEAR_FEAS and abs(gap) <= _NEAR_GAP * (1.0 + abs(pobj))
        if status in (Status.ITER_LIMIT, Status.NUMERICAL_FAILURE) and near:
            message = f"{message or 'iteration limit'}; tolerances met only loosely"
            status = Status.NEAR_OPTIMAL
        warn = pnorm > opts.warn_factor * (1.0 + self.data_norm) or self._norm_grows(trail, pnorm)
        if status == Status.OPTIMAL and warn:
            status = Status.NEAR_OPTIMAL
            message = "primal norm is large relative to the data; optimum may not be attained"
        return self._unpack(status, message, X, Z, xn, zn, f, u, pobj, dobj, it, pinf, dinf, warn, history)

    def _norm_grows(self, trail, pnorm) -> bool:
        if not trail or pnorm <= _GROWTH_FLOOR * (1.0 + self.data_norm):
            return False
        last = trail[-1][0]
        earlier = [n for c, n in trail if c >= _GROWTH_MU * last]
        return bool(earlier) and pnorm >= _GROWTH_NORM * earlier[-1]

    def _step(self, X, Z, xn, zn, f, u, rp, Rd, rdn, rdf, mu, step_p, step_d):
        P = self.P
        scal = []
        M = np.zeros((P.m, P.m))
        for g, Xg, Zg in zip(P.groups, X, Z):
            L = np.linalg.cholesky(_sym(Xg))
            R = np.linalg.cholesky(_sym(Zg))
            _, sv, Vt = np.linalg.svd(_tr(R) @ L)
            Linv = np.linalg.inv(L)
            G = (L @ _tr(Vt)) / np.sqrt(sv)[:, None, :]
            Ginv = np.sqrt(sv)[:, :, None] * (Vt @ Linv)
            W = _sym(G @ _tr(G))
            scal.append((G, Ginv, W, sv))
            if g.rows.size:
                self.kernel(M, np.ascontiguousarray(W), g.mats, g.offsets, g.rows)
        wn = xn / zn if xn.size else xn
        if xn.size:
            M += (P.a_nonneg * wn) @ P.a_nonneg.T
        kkt = _Kkt(M, P.a_free, self.opts.reg, self.opts.reg_retry)
        if not kkt.ok:
            return None

        def direction(Rc, rcn):
            WRW = [s[2] @ Rd_g @ s[2] for s, Rd_g in zip(scal, Rd)]
            t = [Rc_g - x for Rc_g, x in zip(Rc, WRW)]
            r1 = rp - self._A(t, rcn - wn * rdn, np.zeros(f.size))
            du, df = kkt.solve(r1, rdf)
            # refine against the operator itself: the assembled Schur matrix
            # carries rounding of order eps * ||W||^2, which grows as mu -> 0
            for _ in range(_REFINE_PASSES):
                WAW = [s[2] @ a @ s[2] for s, a in zip(scal, self._At(du))]
                lhs = self._A(WAW, wn * (P.a_nonneg.T @ du) if xn.size else xn, df)
                e1 = r1 - lhs
                e2 = rdf - P.a_free.T @ du if f.size else rdf
                if np.linalg.norm(e1) <= 1e-15 * (1.0 + np.linalg.norm(r1)):
                    break
                c1, c2 = kkt.solve(e1, e2)
                du, df = du + c1, df + c2
            dZ = [Rd_g - a for Rd_g, a in zip(Rd, self._At(du))]
            dX = [Rc_g - s[2] @ d @ s[2] for Rc_g, s, d in zip(Rc, scal, dZ)]
            dX = [_sym(d) for d in dX]
            dZ = [_sym(d) for d in dZ]
            dzn = rdn - P.a_nonneg.T @ du if xn.size else xn
            dxn = rcn - wn * dzn if xn.size else xn
            return dX, dZ, dxn, dzn, df, du

        def scaled(dX, dZ):
            dXt = [s[1] @ d @ _tr(s[1]) for s, d in zip(scal, dX)]
            dZt = [_tr(s[0]) @ d @ s[0] for s, d in zip(scal, dZ)]
            return dXt, dZt

        def max_steps(dXt, dZt, dxn, dzn):
            ap = min([_psd_step(s[3], d) for s, d in zip(scal, dXt)] + [_lp_step(xn, dxn)])
            ad = min([_psd_step(s[3], d) for s, d in zip(scal, dZt)] + [_lp_step(zn, dzn)])
            return ap, ad

        # predictor
        dX, dZ, dxn, dzn, df, du = direction([-Xg for Xg in X], -xn)
        dXt, dZt = scaled(dX, dZ)
        ap, ad = max_steps(dXt, dZt, dxn, dzn)
        ap, ad = min(1.0, ap), min(1.0, ad)
        if P.nu:
            c_aff = sum(float(np.vdot(Xg + ap * a, Zg + ad * b)) for Xg, Zg, a, b in zip(X, Z, dX, dZ))
            c_aff += float((xn + ap * dxn) @ (zn + ad * dzn))
            mu_aff = c_aff / P.nu
            sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3 if mu > 0 else 0.0
        else:
            sigma = 0.0

        # corrector
        Rc = []
        for s, a, b in zip(scal, dXt, dZt):
            G, _, _, lam = s
            k = lam.shape[1]
            K = sigma * mu * np.eye(k) - lam[:, :, None] * np.eye(k) * lam[:, None, :]
            K -= _sym(a @ b)
            H = 2.0 * K / (lam[:, :, None] + lam[:, None, :])
            Rc.append(G @ H @ _tr(G))
        rcn = (sigma * mu - xn * zn - dxn * dzn) / zn if xn.size else xn
        dX, dZ, dxn, dzn, df, du = direction(Rc, rcn)
        dXt, dZt = scaled(dX, dZ)
        ap, ad = max_steps(dXt, dZt, dxn, dzn)
        gamma = 0.9 + 0.09 * min(step_p, step_d)
        ap = min(1.0, gamma * ap)
        ad = min(1.0, gamma * ad)
        return dX, dZ, dxn, dzn, df, du, ap, ad

    def _unpack(self, status, message, X, Z, xn, zn, f, u, pobj, dobj, it, pinf, dinf, warn, history):
        P = self.P
        sdp = P.sdp
        Xo = [None] * len(sdp.block_dims)
        Zo = [None] * len(sdp.block_dims)
        for g, Xg, Zg in zip(P.groups, X, Z):
            for local, bi in enumerate(g.block_ids):
                Xo[bi] = _sym(Xg[local])
                Zo[bi] = _sym(Zg[local])
        u_full = np.zeros(sdp.n_rows)
        u_full[P.keep] = u * P.scale
        return SdpSolution(
            status=status,
            X=Xo,
            free=f,
            nonneg=xn,
            u=u_full,
            Z=Zo,
            z_nonneg=zn,
            pobj=pobj,
            dobj=dobj,
            iterations=it,
            pinf=pinf,
            dinf=dinf,
            primal_norm_warning=warn,
            message=message,
            history=history,
        )
