"""Truncated Riccati solutions from Hamiltonian eigenspaces.

The stabilizing ARE solution is X = Z2 Z1^{-1} over the full stable
invariant subspace of H = [[A, -M], [-C1'C1, -A']].  Retaining only the
kappa smallest-magnitude stable eigenvalues gives the truncated
X~ = Z2k (Z2k' Z1k)^{-1} Z2k', whose weighted error admits the computable
bound eps * ||E_k||_F with eps read off a Cauchy-structured Gramian in the
eigenbasis.  A residue factorization supplies a cheap sufficient stability
test that avoids eigenvalue checks on A - M X~.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import (ArnoldiNoConvergence, DimensionMismatch,
                     ImaginaryAxisEigenvalue, NotHurwitz, SingularPencil,
                     SingularR, SingularZ1)
from .linalg import (StableSubspace, _check_imag_axis, _group_conjugates,
                     _realify_sorted, solve_lyapunov, spectral_abscissa,
                     sqrt_psd, stable_eigenspace, symmetrize)
from .statespace import as_matrix

__all__ = [
    "HamiltonianSystem", "ApproxAreSolution", "build_hamiltonian",
    "approx_are", "error_bound", "exact_error_norm", "stability_test",
    "cauchy_coefficients",
]


@dataclass
class HamiltonianSystem:
    """Hamiltonian data for one Riccati equation, kept in factored form.

    `a` may be dense or scipy-sparse; `n_gain` is the effective input matrix
    (B2 P_u^T for the projected design), `r1` the positive definite weight,
    and `c1` the performance output.  M = n_gain R1^{-1} n_gain' is formed
    on demand; the Krylov path never densifies H.
    """

    a: object
    n_gain: np.ndarray
    c1: np.ndarray
    r1: np.ndarray
    _r1_chol: object = field(repr=False, default=None)
    _full: StableSubspace | None = field(repr=False, default=None)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def a_dense(self) -> np.ndarray:
        return self.a.toarray() if sp.issparse(self.a) else self.a

    @property
    def c1_dense(self) -> np.ndarray:
        return self.c1.toarray() if sp.issparse(self.c1) else self.c1

    @property
    def m(self) -> np.ndarray:
        return self.n_gain @ sla.cho_solve(self._r1_chol, self.n_gain.T)

    @property
    def ctc(self) -> np.ndarray:
        c1 = self.c1_dense
        return c1.T @ c1

    @property
    def h(self) -> np.ndarray:
        a = self.a_dense
        return np.block([[a, -self.m], [-self.ctc, -a.T]])

    def full_subspace(self, tol: Tolerances = DEFAULT_TOLERANCES) -> StableSubspace:
        """Full realified stable subspace (cached; dense computation)."""
        if self._full is None:
            self._full = stable_eigenspace(self.h, k=None, method="dense", tol=tol)
        return self._full


def build_hamiltonian(a, b2pu, c1, r1,
                      tol: Tolerances = DEFAULT_TOLERANCES) -> HamiltonianSystem:
    """Assemble the Hamiltonian system for A'X + XA + C1'C1 - X M X = 0
    with M = b2pu R1^{-1} b2pu'.
    """
    if not sp.issparse(a):
        a = as_matrix(a, "A")
    b2pu = as_matrix(b2pu, "B2Pu")
    if not sp.issparse(c1):
        c1 = as_matrix(c1, "C1")
    r1 = symmetrize(as_matrix(r1, "R1"))
    n = a.shape[0]
    if a.shape != (n, n) or b2pu.shape[0] != n or c1.shape[1] != n:
        raise DimensionMismatch("build_hamiltonian: incompatible shapes")
    if r1.shape != (b2pu.shape[1],) * 2:
        raise DimensionMismatch("R1 must be r x r for the effective input")
    try:
        chol = sla.cho_factor(r1)
    except sla.LinAlgError as e:
        raise SingularR(f"R1 is not positive definite: {e}") from e
    return HamiltonianSystem(a=a, n_gain=b2pu, c1=c1, r1=r1, _r1_chol=chol)


@dataclass
class ApproxAreSolution:
    """kappa-truncated Riccati solution with diagnostics.

    epsilon and e_kappa_norm require the complement subspace and are None on
    the Krylov path; `stabilizing` records the residue-based sufficient test.
    """

    xbar: np.ndarray
    kappa: int
    lambda_kappa: np.ndarray
    z1k: np.ndarray
    z2k: np.ndarray
    residue_factor: np.ndarray
    stabilizing: bool
    epsilon: float | None = None
    e_kappa_norm: float | None = None
    subspace_full: StableSubspace | None = None
    method: str = "dense"


def _truncated_solution(sub_k: StableSubspace, tol: Tolerances):
    """X~ and the pencil solve shared by the truncated formulas."""
    z1k, z2k = sub_k.z1, sub_k.z2
    gram = symmetrize(z2k.T @ z1k)
    if np.linalg.cond(gram) > tol.cond_max:
        raise SingularPencil(f"cond(Z2k' Z1k) = {np.linalg.cond(gram):.3e}")
    w = sla.solve(gram, z2k.T, assume_a="sym")
    xbar = symmetrize(z2k @ w)
    return xbar, gram


def approx_are(hs: HamiltonianSystem, kappa: int, method: str = "dense",
               b1=None, tol: Tolerances = DEFAULT_TOLERANCES) -> ApproxAreSolution:
    """Truncated stabilizing-solution approximation X~ from kappa eigenpairs.

    Retains the kappa smallest-magnitude stable eigenvalues of H (conjugate
    pairs kept atomic, bumping kappa by one with a warning when split).  The
    dense method also reports the truncation factor E_k and, when `b1` is
    given, the error-bound scalar epsilon; the Krylov method leaves both
    unavailable.  The residue factor C1bar and the sufficient stability test
    are always computed.

    Raises
    ------
    SingularPencil : Z2k' Z1k too ill conditioned.
    ImaginaryAxisEigenvalue : H has eigenvalues numerically on jR.
    ArnoldiNoConvergence : Krylov path failed; caller may fall back to dense.
    """
    n = hs.n
    if not 1 <= kappa <= n:
        raise ValueError(f"kappa must be in [1, {n}], got {kappa}")
    if method not in ("dense", "krylov"):
        raise ValueError(f"unknown method {method!r}")

    if method == "dense":
        full = hs.full_subspace(tol)
        sub_k = full.head(kappa)
        xbar, gram = _truncated_solution(sub_k, tol)
        kcols = sub_k.k
        tail = full.tail_from(kcols)
        if tail.k:
            e_k = tail.z2 - sub_k.z2 @ sla.solve(gram, sub_k.z2.T @ tail.z1,
                                                 assume_a="sym")
            e_norm = float(np.linalg.norm(e_k, "fro"))
        else:
            e_norm = 0.0
        sol = ApproxAreSolution(
            xbar=xbar, kappa=kcols, lambda_kappa=sub_k.eigenvalues,
            z1k=sub_k.z1, z2k=sub_k.z2,
            residue_factor=_residue_factor(hs.c1_dense, sub_k, gram),
            stabilizing=False, e_kappa_norm=e_norm, subspace_full=full,
            method="dense")
        if b1 is not None:
            eps, _ = error_bound(sol, full.z1, full, b1, tol)
            sol.epsilon = eps
        elif tail.k == 0:
            sol.epsilon = 0.0
    else:
        sub_k = _krylov_stable_blocks(hs, kappa, tol)
        xbar, gram = _truncated_solution(sub_k, tol)
        sol = ApproxAreSolution(
            xbar=xbar, kappa=sub_k.k, lambda_kappa=sub_k.eigenvalues,
            z1k=sub_k.z1, z2k=sub_k.z2,
            residue_factor=_residue_factor(hs.c1_dense, sub_k, gram),
            stabilizing=False, method="krylov")
    sol.stabilizing = stability_test(sol, hs.a_dense, hs.c1_dense, tol)
    return sol


def _residue_factor(c1: np.ndarray, sub_k: StableSubspace, gram: np.ndarray) -> np.ndarray:
    """C1bar = C1 [I - Z1k (Z1k' Z2k)^{-1} Z2k'] from the residue identity."""
    inner = sub_k.z1 @ sla.solve(gram, sub_k.z2.T, assume_a="sym")
    return c1 - (c1 @ inner)


# ---------------------------------------------------------------------------
# Error bound (Cauchy-structured eigenbasis Gramian)
# ---------------------------------------------------------------------------

def cauchy_coefficients(z1: np.ndarray, sub: StableSubspace, b1: np.ndarray,
                        tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """Gramian coefficients C with Phi = Z1 C Z1' for the closed loop.

    Solves Lambda C + C Lambda' = -(Z1^{-1} B1)(Z1^{-1} B1)' blockwise in the
    realified eigenbasis; for real simple eigenvalues this reduces to the
    Cauchy form C_ij = -[Z1^{-1} B1 B1' Z1^{-T}]_ij / (lambda_i + lambda_j).
    """
    n = z1.shape[0]
    if z1.shape != (n, n):
        raise SingularZ1("cauchy_coefficients needs the full square Z1")
    if np.linalg.cond(z1) > tol.cond_max:
        raise SingularZ1(f"cond(Z1) = {np.linalg.cond(z1):.3e}")
    g = sla.solve(z1, as_matrix(b1, "B1"))
    rhs = g @ g.T
    lam = sub.lambda_real()
    starts, blocks = [], []
    pos = 0
    for size in sub.block_sizes:
        blocks.append(lam[pos:pos + size, pos:pos + size])
        starts.append(pos)
        pos += size
    c = np.zeros((n, n))
    for bi, li in zip(starts, blocks):
        si = li.shape[0]
        for bj, lj in zip(starts, blocks):
            sj = lj.shape[0]
            rhs_ij = rhs[bi:bi + si, bj:bj + sj]
            if si == 1 and sj == 1:
                c[bi, bj] = -rhs_ij[0, 0] / (li[0, 0] + lj[0, 0])
            else:
                op = np.kron(np.eye(sj), li) + np.kron(lj, np.eye(si))
                c[bi:bi + si, bj:bj + sj] = np.linalg.solve(
                    op, -rhs_ij.reshape(-1, order="F")).reshape((si, sj), order="F")
    return symmetrize(c)


def error_bound(sol: ApproxAreSolution, z1_full: np.ndarray,
                lambda_full: StableSubspace, b1,
                tol: Tolerances = DEFAULT_TOLERANCES) -> tuple[float, float]:
    """(epsilon, epsilon * ||E_k||_F) for the truncation at sol.kappa.

    epsilon = sqrt(sum of the complement diagonal of the eigenbasis
    Gramian); tiny negative diagonal entries are clipped at zero, with a
    warning above psd_floor magnitude.  Requires the full stable subspace.
    """
    if sol.e_kappa_norm is None:
        raise ValueError("error_bound requires the complement subspace "
                         "(dense approximation path)")
    c = cauchy_coefficients(z1_full, lambda_full, b1, tol)
    diag_tail = np.diag(c)[sol.kappa:]
    bad = diag_tail[diag_tail < -tol.psd_floor]
    if bad.size:
        warnings.warn(
            f"clipped {bad.size} negative Gramian diagonal entries "
            f"(min {bad.min():.3e})")
    eps = float(np.sqrt(np.clip(diag_tail, 0.0, None).sum()))
    return eps, eps * sol.e_kappa_norm


def exact_error_norm(x: np.ndarray, xbar: np.ndarray, a, m, b1,
                     tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """Closed-loop-weighted error ||(X - X~) Phi^{1/2}||_F with
    Phi = LYAP(A - M X, B1); equals the H2 norm of the weighted error system.
    """
    a = as_matrix(a, "A")
    acl = a - as_matrix(m, "M") @ x
    if spectral_abscissa(acl) >= -tol.hurwitz_margin:
        raise NotHurwitz("A - M X is not Hurwitz")
    phi = solve_lyapunov(acl, b1, tol, check_hurwitz=False)
    return float(np.linalg.norm((x - xbar) @ sqrt_psd(phi, tol), "fro"))


def stability_test(sol: ApproxAreSolution, a, c1,
                   tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
    """Sufficient residue-based test that X~ is stabilizing.

    True iff lambda_min(C1'C1 - C1bar'C1bar) >= -floor and the pair has no
    unobservable imaginary-axis modes of A.  Sufficient only: a False result
    should trigger a direct eigenvalue check of A - M X~ before declaring
    failure.
    """
    a = as_matrix(a, "A")
    c1 = as_matrix(c1, "C1")
    cbar = sol.residue_factor
    d = symmetrize(c1.T @ c1 - cbar.T @ cbar)
    if np.linalg.eigvalsh(d).min() < -tol.stability_test_floor:
        return False
    n = a.shape[0]
    scale = max(1.0, np.linalg.norm(a, "fro"), np.linalg.norm(d, "fro"))
    for lam in np.linalg.eigvals(a):
        if abs(lam.real) > tol.imag_axis * max(1.0, abs(lam)):
            continue
        pencil = np.vstack([a - lam * np.eye(n), d]).astype(complex)
        if np.linalg.svd(pencil, compute_uv=False)[-1] <= tol.pbh_rel * scale:
            return False
    return True


# ---------------------------------------------------------------------------
# Structured shift-invert Arnoldi
# ---------------------------------------------------------------------------

def _smw_shift_invert(hs: HamiltonianSystem, sigma: complex):
    """Solver for (H - sigma I)^{-1} exploiting H = S + low-rank.

    S = [[A, 0], [-C1'C1, -A']] is block triangular, so the shifted solve
    needs only sparse LU factors of (A - sigma I) and (-A' - sigma I); the
    rank-r correction [[0, -M], [0, 0]] enters through a Woodbury update.
    """
    n = hs.n
    r = hs.n_gain.shape[1]
    a_sp = sp.csc_matrix(hs.a)
    c1_sp = sp.csc_matrix(hs.c1)
    eye = sp.identity(n, format="csc")
    complex_shift = bool(np.iscomplex(sigma))
    dtype = complex if complex_shift else float
    lu1 = spla.splu((a_sp - sigma * eye).astype(dtype).tocsc())
    lu2 = spla.splu((-a_sp.T - sigma * eye).astype(dtype).tocsc())

    def s_solve(b):
        z1 = lu1.solve(b[:n])
        z2 = lu2.solve(b[n:] + c1_sp.T @ (c1_sp @ z1))
        return np.concatenate([z1, z2])

    u = np.zeros((2 * n, r), dtype=dtype)
    u[:n] = hs.n_gain
    su = np.column_stack([s_solve(u[:, j]) for j in range(r)])

    def v_t(x):
        return -sla.cho_solve(hs._r1_chol, hs.n_gain.T @ x[n:])

    cap = np.eye(r, dtype=dtype) + np.column_stack([v_t(su[:, j]) for j in range(r)])
    cap_lu = sla.lu_factor(cap)

    def apply(b):
        t = s_solve(np.asarray(b, dtype=dtype))
        return t - su @ sla.lu_solve(cap_lu, v_t(t))

    return apply, dtype


def _h_matvec(hs: HamiltonianSystem):
    n = hs.n
    a_sp = sp.csc_matrix(hs.a)
    c1_sp = sp.csc_matrix(hs.c1)

    def apply(x):
        x1, x2 = x[:n], x[n:]
        top = a_sp @ x1 - hs.n_gain @ sla.cho_solve(hs._r1_chol, hs.n_gain.T @ x2)
        bot = -(c1_sp.T @ (c1_sp @ x1)) - a_sp.T @ x2
        return np.concatenate([top, bot])

    return apply


def _krylov_stable_blocks(hs: HamiltonianSystem, kappa: int,
                          tol: Tolerances) -> StableSubspace:
    """kappa smallest-magnitude stable eigenpairs via structured shift-invert."""
    n = hs.n
    h_apply = _h_matvec(hs)
    scale = max(1.0, abs(hs.a).sum() / n if sp.issparse(hs.a)
                else np.abs(hs.a).sum() / n)
    shifts = [-0.02 * scale, -0.2 * scale, 0.02j * scale, -2.0 * scale]
    k_req = min(2 * kappa + 10, 2 * n - 2)
    last_err: Exception | None = None
    for attempt in range(4):
        sigma = shifts[min(attempt, len(shifts) - 1)]
        try:
            op_inv, dtype = _smw_shift_invert(hs, sigma)
        except Exception as e:
            last_err = e
            continue
        lin_h = spla.LinearOperator((2 * n, 2 * n), matvec=h_apply, dtype=float)
        lin_inv = spla.LinearOperator((2 * n, 2 * n), matvec=op_inv, dtype=dtype)
        try:
            vals, vecs = spla.eigs(lin_h, k=k_req, sigma=sigma, OPinv=lin_inv,
                                   which="LM")
        except Exception as e:
            last_err = e
            k_req = min(2 * k_req, 2 * n - 2)
            continue
        # keep eigenpairs whose exact residual is small
        good = []
        for i, lam in enumerate(vals):
            v = vecs[:, i]
            res = np.linalg.norm(h_apply(v.real) + 1j * h_apply(v.imag) - lam * v)
            if res <= 1e-7 * max(1.0, abs(lam)) * np.linalg.norm(v):
                good.append(i)
        vals, vecs = vals[good], vecs[:, good]
        if vals.size:
            _check_imag_axis(vals, tol, ImaginaryAxisEigenvalue)
        sel = vals.real < 0
        reps = _group_conjugates(vals[sel], vecs[:, sel])
        ncols = sum(2 if p else 1 for _, _, p in reps)
        if ncols >= kappa:
            sub = _realify_sorted(reps, n).head(kappa)
            z = np.vstack([sub.z1, sub.z2])
            hz = np.column_stack([h_apply(z[:, j]) for j in range(z.shape[1])])
            res = np.linalg.norm(hz - z @ sub.lambda_real(), "fro")
            if res <= 1e-6 * max(1.0, float(np.linalg.norm(hz, "fro"))):
                return sub
            last_err = ArnoldiNoConvergence(f"block residual {res:.3e}")
        k_req = min(2 * k_req, 2 * n - 2)
    raise ArnoldiNoConvergence(
        f"structured shift-invert failed for kappa={kappa} (last: {last_err})")
