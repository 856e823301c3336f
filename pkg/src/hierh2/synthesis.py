"""Hierarchical H2 synthesis via the convex Youla-domain reformulation.

Under projected stabilizability/detectability, the constrained problem over
K = P_u^T K~ P_y reduces to an unconstrained two-Riccati design on the
projected channels: X over (A, B2 P_u^T, C1) and Y over the dual, with the
optimal reduced controller in observer form.  The exact backend solves both
AREs through the full Hamiltonian subspace; the approximate backend swaps in
kappa-truncated solutions and certifies stability before assembly.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import (ApproxNotStabilizing, HypothesisFailure, IllConditionedR,
                     NotHurwitz, NotStabilizingGains)
from .hamiltonian import approx_are, build_hamiltonian
from .linalg import (_quasi_triangular_eigvals, detectable, h2_norm,
                     solve_are, spectral_abscissa, stabilizable, symmetrize)
from .plant import GeneralizedPlant, lft_lower
from .projection import ClusterPartition, ProjectionPair
from .statespace import StateSpace, lft_lower_partitioned

__all__ = [
    "YoulaData", "SynthesisResult", "HierarchicalController", "LinkCount",
    "youla_data", "lft_controller", "synthesize_hierarchical",
    "synthesize_unconstrained", "communication_links",
]


@dataclass
class HierarchicalController:
    """Triple (P_u, K~, P_y) realizing K = P_u^T K~ P_y."""

    p_u: np.ndarray
    k_tilde: StateSpace
    p_y: np.ndarray

    def expand(self) -> StateSpace:
        """Full controller realization (A_K~, B_K~ P_y, P_u^T C_K~, P_u^T D_K~ P_y)."""
        k = self.k_tilde
        return StateSpace(k.a, k.b @ self.p_y, self.p_u.T @ k.c,
                          self.p_u.T @ k.d @ self.p_y)


@dataclass
class YoulaData:
    """Nominal stabilizing gains with the closed-loop parameterization data.

    K_nom maps [y; v] -> [u; e] and T is the 2n-state four-block system with
    f(G, f(K_nom, Q)) = T11 + T12 Q T21 for every stable Q; T22 vanishes
    identically by the block-triangular structure of A_hat.
    """

    f: np.ndarray
    l: np.ndarray
    k_nom: StateSpace
    t: StateSpace
    a_hat: np.ndarray
    b1_hat: np.ndarray
    b2_hat: np.ndarray
    c1_hat: np.ndarray
    c2_hat: np.ndarray
    dims: tuple[int, int, int, int]  # (p1, n_y, m1, n_u) output/input partitions of T

    @property
    def t11(self) -> StateSpace:
        p1, _, m1, _ = self.dims
        return StateSpace(self.a_hat, self.b1_hat, self.c1_hat,
                          np.zeros((p1, m1)))

    @property
    def t12(self) -> StateSpace:
        p1, _, _, n_u = self.dims
        return StateSpace(self.a_hat, self.b2_hat, self.c1_hat, self.t_d12)

    @property
    def t21(self) -> StateSpace:
        _, n_y, m1, _ = self.dims
        return StateSpace(self.a_hat, self.b1_hat, self.c2_hat, self.t_d21)

    @property
    def t22(self) -> StateSpace:
        _, n_y, _, n_u = self.dims
        return StateSpace(self.a_hat, self.b2_hat, self.c2_hat,
                          np.zeros((n_y, n_u)))

    @property
    def t_d12(self) -> np.ndarray:
        p1, ny, m1, nu = self.dims
        return self.t.d[:p1, m1:]

    @property
    def t_d21(self) -> np.ndarray:
        p1, ny, m1, nu = self.dims
        return self.t.d[p1:, :m1]


def youla_data(g: GeneralizedPlant, f=None, l=None,
               tol: Tolerances = DEFAULT_TOLERANCES) -> YoulaData:
    """Assemble K_nom and the closed-loop parameterization system T.

    Any stabilizing pair (F, L) is admissible; by default the unconstrained
    H2 gains are used.  Raises NotStabilizingGains when A + B2 F or A + L C2
    fails to be Hurwitz.
    """
    n, m1, nu, p1, ny = g.n, g.m1, g.n_u, g.p1, g.n_y
    if f is None or l is None:
        base = synthesize_unconstrained(g, tol=tol)
        f = base.p_u_t_f2() if f is None else f
        l = base.l2_p_y() if l is None else l
    f = np.asarray(f, float)
    l = np.asarray(l, float)
    if f.shape != (nu, n) or l.shape != (n, ny):
        raise HypothesisFailure(
            f"gain shapes {f.shape}, {l.shape} do not match plant dims")
    a_f = g.a + g.b2 @ f
    a_l = g.a + l @ g.c2
    if spectral_abscissa(a_f) >= -tol.hurwitz_margin:
        raise NotStabilizingGains("A + B2 F is not Hurwitz")
    if spectral_abscissa(a_l) >= -tol.hurwitz_margin:
        raise NotStabilizingGains("A + L C2 is not Hurwitz")

    k_nom = StateSpace(
        a=g.a + g.b2 @ f + l @ g.c2,
        b=np.hstack([-l, g.b2]),
        c=np.vstack([f, -g.c2]),
        d=np.block([[np.zeros((nu, ny)), np.eye(nu)],
                    [np.eye(ny), np.zeros((ny, nu))]]),
    )

    a_hat = np.block([[a_f, -g.b2 @ f], [np.zeros((n, n)), a_l]])
    b1_hat = np.vstack([g.b1, g.b1 + l @ g.d21])
    b2_hat = np.vstack([g.b2, np.zeros((n, nu))])
    c1_hat = np.hstack([g.c1 + g.d12 @ f, -g.d12 @ f])
    c2_hat = np.hstack([np.zeros((ny, n)), g.c2])
    t = StateSpace(
        a=a_hat,
        b=np.hstack([b1_hat, b2_hat]),
        c=np.vstack([c1_hat, c2_hat]),
        d=np.block([[np.zeros((p1, m1)), g.d12],
                    [g.d21, np.zeros((ny, nu))]]),
    )
    return YoulaData(f=f, l=l, k_nom=k_nom, t=t, a_hat=a_hat, b1_hat=b1_hat,
                     b2_hat=b2_hat, c1_hat=c1_hat, c2_hat=c2_hat,
                     dims=(p1, ny, m1, nu))


def lft_controller(yd: YoulaData, q: StateSpace) -> StateSpace:
    """Controller K = f(K_nom, Q) for a stable Youla parameter Q."""
    _, ny, _, nu = yd.dims
    return lft_lower_partitioned(yd.k_nom, nu, ny, ny, nu, q)


# ---------------------------------------------------------------------------
# Synthesis
# ---------------------------------------------------------------------------

@dataclass
class SynthesisResult:
    controller: HierarchicalController
    x: np.ndarray
    y: np.ndarray
    f2: np.ndarray
    l2: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    closed_loop: StateSpace
    h2_value: float
    solve_time: float
    x_solution: object = None     # AreSolution or ApproxAreSolution
    y_solution: object = None

    def p_u_t_f2(self) -> np.ndarray:
        """Projection-structured state feedback P_u^T F2 (stabilizes A)."""
        return self.controller.p_u.T @ self.f2

    def l2_p_y(self) -> np.ndarray:
        """Projection-structured output injection L2 P_y (stabilizes A)."""
        return self.l2 @ self.controller.p_y


def _spd_solve(r: np.ndarray, rhs: np.ndarray, what: str,
               tol: Tolerances) -> np.ndarray:
    if np.linalg.cond(r) > tol.cond_max:
        raise IllConditionedR(f"{what} condition number exceeds {tol.cond_max:.1e}")
    return sla.cho_solve(sla.cho_factor(symmetrize(r)), rhs)


def _check_hypotheses(g: GeneralizedPlant, p: ProjectionPair, tol: Tolerances):
    if p.n_u != g.n_u or p.n_y != g.n_y:
        raise HypothesisFailure("projection dimensions do not match the plant")
    if not stabilizable(g.a, g.b2 @ p.p_u.T, tol):
        raise HypothesisFailure("(A, B2 P_u^T) is not stabilizable")
    if not detectable(g.a, p.p_y @ g.c2, tol):
        raise HypothesisFailure("(P_y C2, A) is not detectable")
    w12 = np.linalg.eigvalsh(g.d12.T @ g.d12)
    w21 = np.linalg.eigvalsh(g.d21 @ g.d21.T)
    if (w12.size and w12.min() <= 0.0) or (w21.size and w21.min() <= 0.0):
        raise HypothesisFailure("assumption A2 fails (D12/D21 weights singular)")
    if (np.linalg.norm(g.d12.T @ g.c1, "fro") > 1e-12
            or np.linalg.norm(g.b1 @ g.d21.T, "fro") > 1e-12):
        raise HypothesisFailure("assumption A4 fails (cross terms non-zero)")


def _observer_closed_loop_h2(g: GeneralizedPlant, p: ProjectionPair,
                             f2: np.ndarray, l2: np.ndarray,
                             tol: Tolerances) -> tuple[float, float]:
    """(H2 value, closed-loop abscissa) using the observer separation.

    In (x, e = x - xhat) coordinates the closed loop is block triangular
    with diagonal blocks A + B2 Pu' F2 and A + L2 Py C2, so the Gramian
    splits into one Lyapunov solve per block plus one Sylvester coupling;
    this matches h2_norm(lft_lower(G, K)) and avoids Schur on the 2n matrix.
    """
    a11 = g.a + g.b2 @ (p.p_u.T @ f2)
    a22 = g.a + (l2 @ p.p_y) @ g.c2
    a12 = -g.b2 @ (p.p_u.T @ f2)
    b_top = g.b1
    b_bot = g.b1 + (l2 @ p.p_y) @ g.d21
    c_left = g.c1 + g.d12 @ (p.p_u.T @ f2)
    c_right = -g.d12 @ (p.p_u.T @ f2)

    t1, u1 = sla.schur(a11, output="real")
    t2, u2 = sla.schur(a22, output="real")
    absc = max(np.max(_quasi_triangular_eigvals(t1).real),
               np.max(_quasi_triangular_eigvals(t2).real))
    if absc >= 0.0:
        return np.inf, float(absc)

    trsyl = sla.get_lapack_funcs(("trsyl",), (t1,))[0]

    def sylvester(rhs):
        # solves T1 X + X T2' = -rhs in the Schur bases of (a11, a22)
        x, scale, info = trsyl(t1, t2, -(u1.T @ rhs @ u2), tranb="T")
        if info < 0:
            raise RuntimeError("trsyl failed")
        return u1 @ (x / scale) @ u2.T

    def lyap(t, u, rhs):
        x, scale, info = trsyl(t, t, -(u.T @ rhs @ u), tranb="T")
        if info < 0:
            raise RuntimeError("trsyl failed")
        return u @ (x / scale) @ u.T

    phi22 = symmetrize(lyap(t2, u2, b_bot @ b_bot.T))
    phi12 = sylvester(b_top @ b_bot.T + a12 @ phi22)
    q11 = b_top @ b_top.T + a12 @ phi12.T + phi12 @ a12.T
    phi11 = symmetrize(lyap(t1, u1, q11))
    val = (np.trace(c_left @ phi11 @ c_left.T)
           + 2.0 * np.trace(c_left @ phi12 @ c_right.T)
           + np.trace(c_right @ phi22 @ c_right.T))
    return float(np.sqrt(max(val, 0.0))), float(absc)


def synthesize_hierarchical(g: GeneralizedPlant, p: ProjectionPair,
                            are_backend: str = "exact", kappa: int | None = None,
                            method: str = "dense",
                            tol: Tolerances = DEFAULT_TOLERANCES,
                            progress=None) -> SynthesisResult:
    """Optimal hierarchical controller K = P_u^T K~ P_y for the given pair.

    With ``are_backend='exact'`` both Riccati equations are solved through
    the full stable Hamiltonian subspace.  With ``'approx'`` they are
    replaced by kappa-truncated solutions; the residue-based stability test
    runs first and, if it fails, a direct eigenvalue check of the two
    closed-loop blocks decides between acceptance and
    :class:`ApproxNotStabilizing` (raise kappa in that case).

    ``solve_time`` measures Riccati solves plus gain assembly; closed-loop
    evaluation is excluded.
    """
    _check_hypotheses(g, p, tol)
    if are_backend not in ("exact", "approx"):
        raise ValueError(f"unknown are_backend {are_backend!r}")
    if are_backend == "approx" and kappa is None:
        raise ValueError("approx backend requires kappa")

    def report(msg):
        if progress is not None:
            progress(msg)

    r1 = symmetrize(p.p_u @ g.d12.T @ g.d12 @ p.p_u.T)
    r2 = symmetrize(p.p_y @ g.d21 @ g.d21.T @ p.p_y.T)
    b2pu = g.b2 @ p.p_u.T
    c2py = (p.p_y @ g.c2).T

    t0 = time.perf_counter()
    x_sol = y_sol = None
    if are_backend == "exact":
        report("solving control ARE")
        x_sol = solve_are(g.a, b2pu, g.c1, r1, tol, check_stabilizable=False)
        report("solving filter ARE")
        y_sol = solve_are(g.a.T, c2py, g.b1.T, r2, tol, check_stabilizable=False)
        x, y = x_sol.x, y_sol.x
    else:
        report(f"approximating control ARE at kappa={kappa}")
        hs_x = build_hamiltonian(g.a, b2pu, g.c1, r1, tol)
        x_sol = approx_are(hs_x, kappa, method=method, tol=tol)
        report(f"approximating filter ARE at kappa={kappa}")
        hs_y = build_hamiltonian(g.a.T, c2py, g.b1.T, r2, tol)
        y_sol = approx_are(hs_y, kappa, method=method, tol=tol)
        x, y = x_sol.xbar, y_sol.xbar

    f2 = -_spd_solve(r1, p.p_u @ g.b2.T @ x, "R1", tol)
    l2 = -_spd_solve(r2, p.p_y @ g.c2 @ y, "R2", tol).T
    elapsed = time.perf_counter() - t0

    if are_backend == "approx":
        # sufficient test first; fall back to the direct eigenvalue check
        for sol, acl, side in [
            (x_sol, g.a + g.b2 @ (p.p_u.T @ f2), "control"),
            (y_sol, g.a + (l2 @ p.p_y) @ g.c2, "filter"),
        ]:
            if not sol.stabilizing and spectral_abscissa(acl) >= 0.0:
                raise ApproxNotStabilizing(
                    f"kappa={kappa} does not stabilize the {side} loop")

    k_tilde = StateSpace(
        a=g.a + g.b2 @ p.p_u.T @ f2 + l2 @ p.p_y @ g.c2,
        b=-l2, c=f2, d=np.zeros((f2.shape[0], l2.shape[1])))
    controller = HierarchicalController(p_u=p.p_u, k_tilde=k_tilde, p_y=p.p_y)
    closed = lft_lower(g, controller.expand())
    report("evaluating closed loop")
    try:
        if g.n >= 250:
            h2, absc = _observer_closed_loop_h2(g, p, f2, l2, tol)
            if not np.isfinite(h2):
                raise NotHurwitz(f"closed-loop abscissa {absc:.3e}")
        else:
            h2 = h2_norm(closed, tol)
    except NotHurwitz as e:
        if are_backend == "approx":
            # the residue test is sufficient only; a marginal loop that
            # slipped past it is still a truncation failure
            raise ApproxNotStabilizing(
                f"kappa={kappa} leaves the closed loop marginal ({e})") from e
        raise
    return SynthesisResult(
        controller=controller, x=x, y=y, f2=f2, l2=l2, r1=r1, r2=r2,
        closed_loop=closed, h2_value=h2, solve_time=elapsed,
        x_solution=x_sol, y_solution=y_sol)


def synthesize_unconstrained(g: GeneralizedPlant, are_backend: str = "exact",
                             kappa: int | None = None, method: str = "dense",
                             tol: Tolerances = DEFAULT_TOLERANCES,
                             progress=None) -> SynthesisResult:
    """Standard two-Riccati H2 design: identity projections on both sides."""
    p = ProjectionPair(np.eye(g.n_u), np.eye(g.n_y))
    return synthesize_hierarchical(g, p, are_backend=are_backend, kappa=kappa,
                                   method=method, tol=tol, progress=progress)


@dataclass(frozen=True)
class LinkCount:
    hierarchical: int
    dense: int


def communication_links(partition: ClusterPartition) -> LinkCount:
    """n_s + r(r-1)/2 subsystem-coordinator plus coordinator-pair links,
    against the all-to-all baseline n_s(n_s-1)/2."""
    n_s = partition.n_s
    r = partition.r
    return LinkCount(hierarchical=n_s + r * (r - 1) // 2,
                     dense=n_s * (n_s - 1) // 2)
