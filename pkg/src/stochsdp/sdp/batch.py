"""Vectorized solver for many SDPs that differ only in the right-hand side.

Solves ``min C • X  s.t.  A_j • X = b_kj, X ⪰ 0`` for ``k = 1..K`` at once
with a predictor-corrector method on the HKM direction. All arrays carry a
leading batch axis, so per-iteration cost is a handful of numpy calls
regardless of K. Items that do not reach the tolerances are reported as
unconverged; callers fall back to :func:`stochsdp.sdp.solve` for those.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class BatchResult:
    pobj: np.ndarray
    dobj: np.ndarray
    u: np.ndarray
    X: np.ndarray
    converged: np.ndarray
    iterations: int


def _sym(a):
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def _max_step(X, dX, frac=0.98):
    w, V = np.linalg.eigh(X)
    R = V / np.sqrt(np.maximum(w, 1e-300))[:, None, :]
    lam = np.linalg.eigvalsh(_sym(np.swapaxes(R, -1, -2) @ dX @ R))[:, 0]
    step = np.where(lam < 0, -frac / np.minimum(lam, -1e-300), 1.0)
    return np.minimum(step, 1.0)


def solve_rhs_batch(C, A, B, tol: float = 1e-9, max_iter: int = 80) -> BatchResult:
    """Solve the batch; ``C`` is (m, m), ``A`` is (s, m, m), ``B`` is (K, s)."""
    C = _sym(np.asarray(C, dtype=float))
    A = _sym(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    K, s = B.shape
    m = C.shape[0]
    normA = np.sqrt(np.einsum("jab,jab->j", A, A))
    # per-item scale so that an item's iterates do not depend on its batch mates
    xi = np.maximum(max(10.0, np.sqrt(m)), np.sqrt(m) * np.max((1 + np.abs(B)) / (1 + normA), axis=1, initial=0.0))
    eta = max(10.0, np.sqrt(m), float(np.linalg.norm(C)), float(normA.max(initial=0.0)))
    X = xi[:, None, None] * np.eye(m)
    Z = np.broadcast_to(eta * np.eye(m), (K, m, m)).copy()
    u = np.zeros((K, s))
    active = np.ones(K, dtype=bool)
    converged = np.zeros(K, dtype=bool)
    bn = 1 + np.linalg.norm(B, axis=1)
    cn = 1 + np.linalg.norm(C)
    it = 0
    for it in range(1, max_iter + 1):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        Xa, Za, ua, Ba = X[idx], Z[idx], u[idx], B[idx]
        AX = np.einsum("jab,kab->kj", A, Xa)
        rp = Ba - AX
        Rd = C - Za - np.einsum("kj,jab->kab", ua, A)
        pobj = np.einsum("ab,kab->k", C, Xa)
        dobj = np.einsum("kj,kj->k", Ba, ua)
        mu = np.einsum("kab,kab->k", Xa, Za) / m
        done = (
            (np.linalg.norm(rp, axis=1) / bn[idx] <= tol)
            & (np.linalg.norm(Rd, axis=(1, 2)) / cn <= tol)
            & (np.abs(pobj - dobj) <= tol * (1 + np.abs(pobj) + np.abs(dobj)))
        )
        active[idx[done]] = False
        converged[idx[done]] = True
        keep = ~done
        if not keep.any():
            break
        idx = idx[keep]
        Xa, Za, ua, rp, Rd, mu = Xa[keep], Za[keep], ua[keep], rp[keep], Rd[keep], mu[keep]
        # items whose iterates lost definiteness stop here (reported unconverged)
        ok = (np.linalg.eigvalsh(Za)[:, 0] > 0) & (np.linalg.eigvalsh(Xa)[:, 0] > 0)
        if not ok.all():
            active[idx[~ok]] = False
            idx = idx[ok]
            if idx.size == 0:
                break
            Xa, Za, ua, rp, Rd, mu = Xa[ok], Za[ok], ua[ok], rp[ok], Rd[ok], mu[ok]
        try:
            Zi = np.linalg.inv(Za)
            AX = np.einsum("jab,kbc->kjac", A, Xa)
            AZi = np.einsum("jab,kbc->kjac", A, Zi)
            M = np.einsum("kiab,kjba->kij", AX, AZi)
            M += 1e-14 * np.trace(M, axis1=1, axis2=2)[:, None, None] * np.eye(s)
            XRZ = Xa @ Rd @ Zi

            def direction(Rc):
                rhs = rp - np.einsum("jab,kab->kj", A, Rc) + np.einsum("jab,kab->kj", A, XRZ)
                du = np.linalg.solve(M, rhs[..., None])[..., 0]
                dZ = Rd - np.einsum("kj,jab->kab", du, A)
                dX = _sym(Rc - Xa @ dZ @ Zi)
                return dX, du, dZ

            dXa, dua, dZa = direction(-Xa)
            ap = _max_step(Xa, dXa, 1.0)
            ad = _max_step(Za, dZa, 1.0)
            mu_aff = np.einsum("kab,kab->k", Xa + ap[:, None, None] * dXa, Za + ad[:, None, None] * dZa) / m
            sigma = np.clip((mu_aff / mu) ** 3, 0.0, 1.0)
            Rc = sigma[:, None, None] * mu[:, None, None] * Zi - Xa - _sym(dXa @ dZa @ Zi)
            dX, du, dZ = direction(Rc)
            ap = _max_step(Xa, dX)
            ad = _max_step(Za, dZ)
        except np.linalg.LinAlgError:
            break
        X[idx] = Xa + ap[:, None, None] * dX
        Z[idx] = Za + ad[:, None, None] * dZ
        u[idx] = ua + ad[:, None] * du
    pobj = np.einsum("ab,kab->k", C, X)
    dobj = np.einsum("kj,kj->k", B, u)
    return BatchResult(pobj, dobj, u, X, converged, it)
