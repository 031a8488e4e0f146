"""Small reference instances and random generators."""

from __future__ import annotations

import numpy as np

from .core import ProblemData, ScenarioSet, Spectrahedron


def diag_instance(tau: float = 3.0) -> tuple[ProblemData, ScenarioSet]:
    """``phi(t) = |t|`` recourse with ``x`` in a trace ball; optimum at ``tr x = 1.5``.

    Cost of ``x`` is ``c • x + E|z - tr x|`` with ``c = diag(1/4, 1/2)``.
    """
    p = ProblemData(
        c=np.diag([0.25, 0.5]),
        q=np.eye(2),
        T=[np.eye(2)],
        W=[np.diag([1.0, -1.0])],
        X=Spectrahedron.trace_ball(2, tau),
    )
    scen = ScenarioSet([0.3, 0.4, 0.3], [[0.5], [1.5], [2.5]])
    return p, scen


def abs_recourse(n: int = 1, tau: float | None = 0.0) -> ProblemData:
    """``phi(t) = |t|`` with zero first-stage data; ``tau = 0`` pins ``x = 0``."""
    X = Spectrahedron.trace_ball(n, tau) if tau is not None else Spectrahedron.psd_cone(n)
    return ProblemData(
        c=np.zeros((n, n)),
        q=np.eye(2),
        T=[np.zeros((n, n))],
        W=[np.diag([1.0, -1.0])],
        X=X,
    )


def nonattainment_instance() -> ProblemData:
    """``phi(t) = inf{y_11 : y_12 = t, y ⪰ 0}``: value 0, attained only at ``t = 0``."""
    return ProblemData(
        c=np.zeros((1, 1)),
        q=np.diag([1.0, 0.0]),
        T=[np.zeros((1, 1))],
        W=[[[0.0, 0.5], [0.5, 0.0]]],
        X=Spectrahedron.psd_cone(1),
    )


def diag_family(rng: np.random.Generator, m: int, s: int) -> ProblemData:
    """Diagonal recourse whose ``M_D`` is bounded; needs ``m >= s + 1``.

    With diagonal ``W_j`` the set ``M_D`` is ``{u : sum_j u_j d_jk <= q_k}``
    over the diagonal positions ``k``; it is bounded when the vectors
    ``(d_1k, ..., d_sk)`` positively span ``R^s``. The first ``s + 1``
    positions carry scaled copies of ``e_1, ..., e_s`` and ``-(1, ..., 1)``.
    """
    if m < s + 1:
        raise ValueError("a bounded diagonal family needs m >= s + 1")
    D = rng.uniform(-2.0, 2.0, (s, m))
    D[:, :s] = np.diag(rng.uniform(0.5, 2.0, s))
    D[:, s] = -rng.uniform(0.5, 2.0, s)
    D = D[:, rng.permutation(m)]
    return ProblemData(
        c=np.zeros((1, 1)),
        q=np.diag(rng.uniform(0.5, 2.0, m)),
        T=[np.zeros((1, 1))] * s,
        W=[np.diag(D[j]) for j in range(s)],
        X=Spectrahedron.psd_cone(1),
    )


def single_block_family(rng: np.random.Generator, m: int) -> ProblemData:
    """One PSD recourse matrix: ``W • y >= 0`` so ``M_D`` contains the ray ``u -> -inf``."""
    B = rng.standard_normal((m, m))
    return ProblemData(
        c=np.zeros((1, 1)),
        q=np.diag(rng.uniform(0.5, 2.0, m)),
        T=[np.zeros((1, 1))],
        W=[B @ B.T + 0.1 * np.eye(m)],
        X=Spectrahedron.psd_cone(1),
    )


def _rand_sym(rng, k, scale=1.0):
    a = rng.standard_normal((k, k)) * scale
    return 0.5 * (a + a.T)


def random_instance(
    rng: np.random.Generator,
    n: int | None = None,
    m: int | None = None,
    s: int | None = None,
    S: int = 3,
    tau: float = 2.0,
    zero_T: bool = False,
) -> tuple[ProblemData, ScenarioSet]:
    """Random instance satisfying complete recourse and strict dual feasibility.

    ``q`` is positive definite, so ``u = 0`` is strictly dual feasible. Each
    ``W_j`` is projected to be orthogonal to a random positive definite
    ``Y0``; with linearly independent ``W_j`` the map ``W`` sends a
    neighbourhood of ``Y0`` onto a neighbourhood of 0, hence onto ``R^s``.
    """
    n = n or int(rng.integers(1, 4))
    m = m or int(rng.integers(2, 4))
    s_max = m * (m + 1) // 2 - 1
    s = min(s or int(rng.integers(1, 4)), s_max)
    B = rng.standard_normal((m, m))
    Y0 = B @ B.T + m * np.eye(m)
    Y0 /= np.linalg.norm(Y0)
    W = []
    for _ in range(s):
        Wj = _rand_sym(rng, m)
        Wj -= np.vdot(Wj, Y0) * Y0
        W.append(Wj)
    Q = rng.standard_normal((m, m))
    q = Q @ Q.T / m + 0.5 * np.eye(m)
    c = _rand_sym(rng, n, 0.3) + 0.5 * np.eye(n)
    T = [np.zeros((n, n)) if zero_T else _rand_sym(rng, n, 0.7) for _ in range(s)]
    p = ProblemData(c=c, q=q, T=T, W=W, X=Spectrahedron.trace_ball(n, tau))
    probs = rng.dirichlet(np.ones(S) * 2.0)
    z = rng.normal(0.0, 1.5, (S, s))
    return p, ScenarioSet(probs, z)
