"""Dense matrix-equation solvers, system norms, and Hamiltonian eigenspaces.

The Riccati solver works through the stable invariant subspace of the
associated 2n x 2n Hamiltonian (ordered real Schur form), so the same code
path underpins both the exact solutions and the truncated approximations
built elsewhere.  Lyapunov equations are delegated to LAPACK's
Bartels-Stewart via SciPy behind the module's residual contract.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import (ArnoldiNoConvergence, ConjugatePairSplitWarning,
                     DimensionMismatch, HamiltonianImaginaryAxis,
                     ImaginaryAxisEigenvalue, NotHurwitz, NotPSD,
                     NotStabilizable, NotStrictlyProper, NumericalError,
                     SingularR, SingularZ1)
from .statespace import StateSpace, as_matrix

__all__ = [
    "AreSolution", "StableSubspace", "Spectrum",
    "solve_lyapunov", "solve_are", "riccati_from_hamiltonian",
    "h2_norm", "hinf_norm", "stable_eigenspace", "unstable_spectrum",
    "sqrt_psd", "spectral_abscissa", "is_hurwitz", "stabilizable",
    "detectable", "symmetrize",
]


def symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def spectral_abscissa(a: np.ndarray) -> float:
    """max Re(lambda) over eigenvalues of a (dense)."""
    a = as_matrix(a, "A")
    if a.shape[0] == 0:
        return -np.inf
    return float(np.max(np.linalg.eigvals(a).real))


def is_hurwitz(a: np.ndarray, margin: float = DEFAULT_TOLERANCES.hurwitz_margin) -> bool:
    return spectral_abscissa(a) < -margin


def _require_hurwitz(a, margin, what="A"):
    alpha = spectral_abscissa(a)
    if alpha >= -margin:
        raise NotHurwitz(f"{what} has spectral abscissa {alpha:.3e} >= {-margin:.1e}")


def _pbh_modes(a: np.ndarray, b: np.ndarray, cut: float, rel: float):
    """Eigenvalues of `a` with Re >= -cut that fail rank [A - lambda I, B] = n."""
    a = as_matrix(a, "A")
    b = as_matrix(b, "B")
    n = a.shape[0]
    scale = max(1.0, np.linalg.norm(a, "fro"), np.linalg.norm(b, "fro"))
    bad = []
    for lam in np.linalg.eigvals(a):
        if lam.real < -cut:
            continue
        pencil = np.hstack([a - lam * np.eye(n), b]).astype(complex)
        smin = np.linalg.svd(pencil, compute_uv=False)[-1]
        if smin <= rel * scale:
            bad.append(lam)
    return bad


def stabilizable(a, b, tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
    """PBH test: every eigenvalue with Re >= -cut must be controllable."""
    return not _pbh_modes(a, b, tol.unstable_cut, tol.pbh_rel)


def detectable(a, c, tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
    return stabilizable(np.asarray(a, float).T, np.asarray(c, float).T, tol)


# ---------------------------------------------------------------------------
# Lyapunov
# ---------------------------------------------------------------------------

def solve_lyapunov(a, b, tol: Tolerances = DEFAULT_TOLERANCES,
                   check_hurwitz: bool = True) -> np.ndarray:
    """Solve A Phi + Phi A^T + B B^T = 0 for the symmetric PSD Phi.

    Parameters
    ----------
    a : (n, n) array, Hurwitz
    b : (n, m) array
    check_hurwitz : skip the eigenvalue precheck when the caller has already
        certified stability (the residual check still runs).

    Raises
    ------
    NotHurwitz : some eigenvalue of `a` has real part >= -hurwitz_margin.
    NumericalError : the residual contract could not be met after refinement.
    """
    a = as_matrix(a, "A")
    b = as_matrix(b, "B")
    if b.shape[0] != a.shape[0]:
        raise DimensionMismatch("solve_lyapunov: B rows must match A")
    if check_hurwitz:
        _require_hurwitz(a, tol.hurwitz_margin)
    q = b @ b.T
    phi = symmetrize(sla.solve_continuous_lyapunov(a, -q))
    bound = tol.lyap_residual * max(1.0, np.linalg.norm(q, "fro"))
    for _ in range(2):
        res = a @ phi + phi @ a.T + q
        if np.linalg.norm(res, "fro") <= bound:
            return phi
        phi = symmetrize(phi + sla.solve_continuous_lyapunov(a, -res))
    res = np.linalg.norm(a @ phi + phi @ a.T + q, "fro")
    if res > bound:
        raise NumericalError(
            f"Lyapunov residual {res:.3e} exceeds bound {bound:.3e}")
    return phi


# ---------------------------------------------------------------------------
# Riccati via the Hamiltonian stable subspace
# ---------------------------------------------------------------------------

@dataclass
class AreSolution:
    """Stabilizing Riccati solution with diagnostics."""

    x: np.ndarray
    residual: float
    closed_loop_abscissa: float

    @property
    def stable(self) -> bool:
        return self.closed_loop_abscissa < 0.0


def _quasi_triangular_eigvals(t: np.ndarray) -> np.ndarray:
    """Eigenvalues of a real quasi upper-triangular (Schur) matrix."""
    n = t.shape[0]
    vals = []
    i = 0
    while i < n:
        if i + 1 < n and abs(t[i + 1, i]) > 0.0:
            vals.extend(np.linalg.eigvals(t[i:i + 2, i:i + 2]))
            i += 2
        else:
            vals.append(complex(t[i, i]))
            i += 1
    return np.array(vals)


def _check_imag_axis(eigvals: np.ndarray, tol: Tolerances, exc=HamiltonianImaginaryAxis):
    dist = np.abs(eigvals.real)
    guard = tol.imag_axis * np.maximum(1.0, np.abs(eigvals))
    if np.any(dist <= guard):
        worst = eigvals[np.argmin(dist - guard)]
        raise exc(f"eigenvalue {worst:.6e} is within tolerance of the imaginary axis")


def riccati_from_hamiltonian(a, m, q, tol: Tolerances = DEFAULT_TOLERANCES) -> AreSolution:
    """Stabilizing solution of A'X + XA + Q - XMX = 0 with M, Q given PSD.

    Computed from the full stable invariant subspace of
    H = [[A, -M], [-Q, -A']] via an ordered real Schur decomposition and
    X = Z2 Z1^{-1}, with one Newton refinement pass if the residual bound
    is not already met.
    """
    a = as_matrix(a, "A")
    m = symmetrize(as_matrix(m, "M"))
    q = symmetrize(as_matrix(q, "Q"))
    n = a.shape[0]
    h = np.block([[a, -m], [-q, -a.T]])
    t, z, sdim = sla.schur(h, output="real", sort="lhp")
    _check_imag_axis(_quasi_triangular_eigvals(t), tol)
    if sdim != n:
        raise HamiltonianImaginaryAxis(
            f"stable subspace has dimension {sdim}, expected {n}")
    z1 = z[:n, :n]
    z2 = z[n:, :n]
    if np.linalg.cond(z1) > tol.cond_max:
        raise SingularZ1(f"cond(Z1) = {np.linalg.cond(z1):.3e}")
    x = symmetrize(sla.solve(z1.T, z2.T).T)
    bound = tol.are_residual * max(1.0, np.linalg.norm(q, "fro"))

    def residual(xx):
        return a.T @ xx + xx @ a + q - xx @ m @ xx

    # Newton refinement, keeping the best iterate (steps can overshoot on
    # ill-conditioned instances)
    best_x, best_norm = x, np.linalg.norm(residual(x), "fro")
    for _ in range(5):
        if best_norm <= bound:
            break
        acl = a - m @ best_x
        try:
            step = sla.solve_continuous_lyapunov(acl.T, -residual(best_x))
        except Exception:
            break
        cand = symmetrize(best_x + step)
        cand_norm = np.linalg.norm(residual(cand), "fro")
        if cand_norm >= best_norm:
            break
        best_x, best_norm = cand, cand_norm
    x, res_norm = best_x, float(best_norm)
    if res_norm > bound:
        raise NumericalError(
            f"ARE residual {res_norm:.3e} exceeds bound {bound:.3e}")
    abscissa = spectral_abscissa(a - m @ x)
    if abscissa >= 0.0:
        raise NumericalError(
            f"Riccati closed loop not Hurwitz (abscissa {abscissa:.3e})")
    return AreSolution(x=x, residual=res_norm, closed_loop_abscissa=abscissa)


def solve_are(a, b, c, r, tol: Tolerances = DEFAULT_TOLERANCES,
              check_stabilizable: bool = True) -> AreSolution:
    """Stabilizing solution of A'X + XA + C'C - X B R^{-1} B' X = 0.

    Preconditions: (A, B) stabilizable, (C, A) free of unobservable
    imaginary-axis modes, R symmetric positive definite.

    Raises
    ------
    NotStabilizable : PBH test on (A, B) fails.
    HamiltonianImaginaryAxis : H has an eigenvalue on jR (signals the
        imaginary-axis observability assumption is violated).
    SingularZ1 : the stable subspace is not complementary to the graph axis.
    SingularR : R is not positive definite.
    """
    a = as_matrix(a, "A")
    b = as_matrix(b, "B")
    c = as_matrix(c, "C")
    r = symmetrize(as_matrix(r, "R"))
    if b.shape[0] != a.shape[0] or c.shape[1] != a.shape[0]:
        raise DimensionMismatch("solve_are: incompatible shapes")
    if r.shape != (b.shape[1], b.shape[1]):
        raise DimensionMismatch("solve_are: R must be m x m")
    try:
        r_chol = sla.cho_factor(r)
    except sla.LinAlgError as e:
        raise SingularR(f"R is not positive definite: {e}") from e
    if check_stabilizable and not stabilizable(a, b, tol):
        raise NotStabilizable("PBH stabilizability test failed for (A, B)")
    m = b @ sla.cho_solve(r_chol, b.T)
    return riccati_from_hamiltonian(a, m, c.T @ c, tol)


# ---------------------------------------------------------------------------
# System norms
# ---------------------------------------------------------------------------

def h2_norm(sys: StateSpace, tol: Tolerances = DEFAULT_TOLERANCES,
            check_hurwitz: bool = True) -> float:
    """H2 norm sqrt(tr(C Phi C')) with Phi the controllability Gramian.

    Requires a strictly proper (D = 0), internally stable realization.
    """
    scale = max(1.0, np.linalg.norm(sys.c, "fro"), np.linalg.norm(sys.b, "fro"))
    if sys.d.size and np.max(np.abs(sys.d)) > tol.strictly_proper * scale:
        raise NotStrictlyProper("h2_norm requires D = 0")
    if sys.n_states == 0:
        return 0.0
    phi = solve_lyapunov(sys.a, sys.b, tol, check_hurwitz=check_hurwitz)
    val = float(np.trace(sys.c @ phi @ sys.c.T))
    return float(np.sqrt(max(val, 0.0)))


def _sigma_max(mat: np.ndarray) -> float:
    if mat.size == 0:
        return 0.0
    return float(np.linalg.norm(mat, 2))


def _hinf_hamiltonian(sys: StateSpace, gamma: float) -> np.ndarray:
    a, b, c, d = sys.a, sys.b, sys.c, sys.d
    m = sys.n_inputs
    r = gamma ** 2 * np.eye(m) - d.T @ d
    r_inv = sla.inv(r)
    abr = a + b @ r_inv @ d.T @ c
    return np.block([
        [abr, b @ r_inv @ b.T],
        [-c.T @ (np.eye(sys.n_outputs) + d @ r_inv @ d.T) @ c, -abr.T],
    ])


def hinf_norm(sys: StateSpace, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """H-infinity norm of a stable proper system.

    Bisection on gamma driven by the imaginary-axis eigenvalues of the
    gamma-dependent Hamiltonian, with lower bounds refined at the level-set
    midpoint frequencies (Bruinsma-Steinbuch); relative accuracy hinf_rel.
    """
    if sys.n_states == 0:
        return _sigma_max(sys.d)
    _require_hurwitz(sys.a, tol.hurwitz_margin)

    def sv_at(w):
        return _sigma_max(sys.eval(1j * w))

    eigs = np.linalg.eigvals(sys.a)
    probes = [0.0] + [abs(lam) for lam in eigs] + [abs(lam.imag) for lam in eigs
                      if abs(lam.imag) > 0]
    glo = max(_sigma_max(sys.d), max(sv_at(w) for w in probes))
    if glo == 0.0:
        return 0.0

    def crossings(gamma):
        """Positive frequencies where sigma_max crosses gamma (or None)."""
        h = _hinf_hamiltonian(sys, gamma)
        vals = np.linalg.eigvals(h)
        on_axis = [v.imag for v in vals
                   if abs(v.real) <= 1e-8 * max(1.0, abs(v))]
        ws = sorted(w for w in on_axis if w > 0)
        return ws

    # establish an upper bound
    gup = glo * (1.0 + 1e-3)
    for _ in range(60):
        if gup <= _sigma_max(sys.d) * (1 + 1e-12):
            gup = _sigma_max(sys.d) * (1 + 1e-9) + 1e-300
        if not crossings(gup):
            break
        gup *= 2.0
    else:
        raise NumericalError("hinf_norm: failed to bracket the norm from above")

    for _ in range(200):
        if gup - glo <= tol.hinf_rel * glo:
            break
        gmid = np.sqrt(glo * gup) if glo > 0 else 0.5 * (glo + gup)
        ws = crossings(gmid)
        if not ws:
            gup = gmid
            continue
        # refine the lower bound from midpoint frequencies of the level set
        cand = [np.sqrt(ws[i] * ws[i + 1]) for i in range(len(ws) - 1)]
        cand = cand or ws
        new_lo = max(sv_at(w) for w in cand)
        glo = max(new_lo, gmid) if new_lo > glo else gmid
    return 0.5 * (glo + gup)


# ---------------------------------------------------------------------------
# Eigenspaces
# ---------------------------------------------------------------------------

@dataclass
class StableSubspace:
    """Realified basis of a stable invariant subspace of a Hamiltonian.

    Columns of the stacked [Z1; Z2] have unit 2-norm.  Complex conjugate
    pairs occupy two adjacent real columns (orthonormalized within the
    pair); `eigenvalues` lists the pair as (a + ib, a - ib) in matching
    positions and `lam` is the block-diagonal real matrix with
    H [Z1; Z2] = [Z1; Z2] lam.
    """

    z1: np.ndarray
    z2: np.ndarray
    eigenvalues: np.ndarray           # complex, length k, pairs adjacent
    block_sizes: tuple[int, ...]      # 1 for real eigenvalues, 2 for pairs
    lam: np.ndarray                   # k x k real, block diagonal

    @property
    def k(self) -> int:
        return self.z1.shape[1]

    def lambda_real(self) -> np.ndarray:
        """Block-diagonal real form satisfying H [Z1; Z2] = [Z1; Z2] L."""
        return self.lam

    def head(self, k: int) -> "StableSubspace":
        """First blocks covering at least k columns (conjugate pairs intact)."""
        count, blocks = 0, []
        for size in self.block_sizes:
            if count >= k:
                break
            blocks.append(size)
            count += size
        if count > k:
            warnings.warn(
                f"requested subspace dimension {k} splits a conjugate pair; "
                f"returning {count} columns", ConjugatePairSplitWarning)
        return StableSubspace(
            z1=self.z1[:, :count], z2=self.z2[:, :count],
            eigenvalues=self.eigenvalues[:count],
            block_sizes=tuple(blocks), lam=self.lam[:count, :count])

    def tail_from(self, k_cols: int) -> "StableSubspace":
        """Complement blocks starting at column k_cols (a block boundary)."""
        sizes, count = [], 0
        for size in self.block_sizes:
            if count >= k_cols:
                sizes.append(size)
            count += size
        return StableSubspace(
            z1=self.z1[:, k_cols:], z2=self.z2[:, k_cols:],
            eigenvalues=self.eigenvalues[k_cols:], block_sizes=tuple(sizes),
            lam=self.lam[k_cols:, k_cols:])


def _order_key(lam: complex):
    # magnitude first; ties by ascending real part, then ascending |imag|
    return (abs(lam), lam.real, abs(lam.imag))


def _realify_sorted(pairs, n) -> StableSubspace:
    """pairs: list of (lambda, vector(2n complex), is_pair) sorted already.

    A conjugate pair contributes the orthonormalized span of
    [Re v, Im v]; the matching 2x2 block of lam is the similarity
    R [[a, b], [-b, a]] R^{-1} from the QR factor, so H Z = Z lam holds
    exactly with unit columns.
    """
    cols, lam_blocks, eigs, sizes = [], [], [], []
    for lam, vec, is_pair in pairs:
        if is_pair:
            raw = np.column_stack([vec.real, vec.imag])
            q, r_fac = np.linalg.qr(raw)
            if abs(np.linalg.det(r_fac)) < 1e-14 * np.linalg.norm(raw):
                raise NumericalError("degenerate conjugate-pair realification")
            a_, b_ = lam.real, lam.imag
            base = np.array([[a_, b_], [-b_, a_]])
            lam_blocks.append(r_fac @ base @ np.linalg.inv(r_fac))
            cols.append(q)
            eigs.extend([lam, lam.conjugate()])
            sizes.append(2)
        else:
            # strip the arbitrary complex phase before taking the real part
            pivot = vec[np.argmax(np.abs(vec))]
            if abs(pivot) > 0:
                vec = vec * (pivot.conjugate() / abs(pivot))
            col = vec.real[:, None]
            nrm = np.linalg.norm(col)
            if nrm == 0:
                raise NumericalError("zero eigenvector column during realification")
            cols.append(col / nrm)
            lam_blocks.append(np.array([[lam.real]]))
            eigs.extend([complex(lam.real)])
            sizes.append(1)
    z = np.hstack(cols) if cols else np.zeros((2 * n, 0))
    k = z.shape[1]
    lam_mat = np.zeros((k, k))
    pos = 0
    for blk in lam_blocks:
        s = blk.shape[0]
        lam_mat[pos:pos + s, pos:pos + s] = blk
        pos += s
    return StableSubspace(z1=z[:n], z2=z[n:], eigenvalues=np.array(eigs, complex),
                          block_sizes=tuple(sizes), lam=lam_mat)


def _group_conjugates(vals, vecs, tol_match=1e-8):
    """Group eigenpairs into conjugate classes, keeping one representative."""
    used = np.zeros(len(vals), bool)
    reps = []
    idx_sorted = sorted(range(len(vals)), key=lambda i: _order_key(vals[i]))
    for i in idx_sorted:
        if used[i]:
            continue
        lam = vals[i]
        used[i] = True
        if abs(lam.imag) <= tol_match * max(1.0, abs(lam)):
            reps.append((complex(lam.real), vecs[:, i], False))
            continue
        # find and consume the conjugate partner if present
        best, best_d = None, np.inf
        for j in range(len(vals)):
            if used[j]:
                continue
            d = abs(vals[j] - lam.conjugate())
            if d < best_d:
                best, best_d = j, d
        if best is not None and best_d <= 1e-6 * max(1.0, abs(lam)):
            used[best] = True
        rep = lam if lam.imag > 0 else lam.conjugate()
        vec = vecs[:, i] if lam.imag > 0 else vecs[:, i].conjugate()
        reps.append((rep, vec, True))
    reps.sort(key=lambda t: _order_key(t[0]))
    return reps


def stable_eigenspace(h, k: int | None = None, method: str = "auto",
                      tol: Tolerances = DEFAULT_TOLERANCES) -> StableSubspace:
    """Stable invariant subspace of a Hamiltonian matrix.

    Returns the k stable eigenvalues of smallest magnitude (ordered by
    magnitude, ties by ascending real then imaginary part) together with a
    realified basis.  A request that would split a conjugate pair is bumped
    to k+1 with a :class:`ConjugatePairSplitWarning`.  With ``k=None`` (all)
    a dense eigendecomposition is used; otherwise shift-invert Arnoldi at
    the origin, falling back to dense on non-convergence only if
    ``method='auto'``.

    Raises
    ------
    ImaginaryAxisEigenvalue : some eigenvalue is numerically on jR.
    ArnoldiNoConvergence : the Krylov path failed (method='arnoldi').
    """
    if sp.issparse(h):
        h_for_dense = None
        n2 = h.shape[0]
    else:
        h = np.asarray(h, float)
        h_for_dense = h
        n2 = h.shape[0]
    if n2 % 2:
        raise DimensionMismatch("Hamiltonian must be 2n x 2n")
    n = n2 // 2
    if k is None:
        k = n
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")

    want_dense = method == "dense" or (method == "auto" and (k == n or n2 <= 600))
    if method not in ("auto", "dense", "arnoldi"):
        raise ValueError(f"unknown method {method!r}")

    if want_dense or method == "dense":
        hd = h_for_dense if h_for_dense is not None else np.asarray(h.todense())
        vals, vecs = np.linalg.eig(hd)
        _check_imag_axis(vals, tol, ImaginaryAxisEigenvalue)
        sel = vals.real < 0
        reps = _group_conjugates(vals[sel], vecs[:, sel])
        sub = _realify_sorted(reps, n)
        full_norm = np.linalg.norm(hd, "fro")
        out = sub if k == n else sub.head(k)
        _check_subspace_residual(hd, out, full_norm, tol)
        return out

    try:
        out = _arnoldi_stable(h, n, k, tol)
    except ArnoldiNoConvergence:
        if method == "arnoldi":
            raise
        return stable_eigenspace(h, k, "dense", tol)
    return out


def _check_subspace_residual(h_apply, sub: StableSubspace, h_norm, tol):
    if sub.k == 0:
        return
    z = np.vstack([sub.z1, sub.z2])
    if callable(h_apply):
        hz = h_apply(z)
    else:
        hz = h_apply @ z
    res = np.linalg.norm(hz - z @ sub.lambda_real(), "fro")
    if res > tol.subspace_residual * max(1.0, h_norm):
        raise NumericalError(
            f"invariant subspace residual {res:.3e} exceeds "
            f"{tol.subspace_residual:.1e} * ||H||")


def _arnoldi_stable(h, n, k, tol: Tolerances) -> StableSubspace:
    """Shift-invert Arnoldi at the origin on a general (sparse) Hamiltonian."""
    h_csc = sp.csc_matrix(h)
    h_norm = spla.norm(h_csc, "fro")
    k_req = min(2 * k + 8, 2 * n - 2)
    last_err = None
    for _ in range(3):
        try:
            vals, vecs = spla.eigs(h_csc, k=k_req, sigma=0.0, which="LM")
        except Exception as e:  # ArpackNoConvergence and factorization issues
            last_err = e
            k_req = min(2 * k_req, 2 * n - 2)
            continue
        _check_imag_axis(vals, tol, ImaginaryAxisEigenvalue)
        sel = vals.real < 0
        reps = _group_conjugates(vals[sel], vecs[:, sel])
        ncols = sum(2 if p else 1 for _, _, p in reps)
        if ncols >= k:
            sub = _realify_sorted(reps, n).head(k)
            _check_subspace_residual(lambda zz: h_csc @ zz, sub, h_norm, tol)
            return sub
        k_req = min(2 * k_req, 2 * n - 2)
    raise ArnoldiNoConvergence(
        f"could not converge {k} stable eigenpairs (last error: {last_err})")


# ---------------------------------------------------------------------------
# Unstable spectrum and PSD square root
# ---------------------------------------------------------------------------

@dataclass
class Spectrum:
    """Unstable eigenvalues with matched left/right eigenvector matrices."""

    eigenvalues: np.ndarray     # complex, possibly empty
    v_left: np.ndarray          # n x q, columns satisfy A' V = V Lambda
    v_right: np.ndarray         # n x q, columns satisfy A V = V Lambda

    @property
    def q(self) -> int:
        return self.eigenvalues.shape[0]


def unstable_spectrum(a, tol: Tolerances = DEFAULT_TOLERANCES) -> Spectrum:
    """All eigenvalues with Re >= -unstable_cut plus left/right eigenvectors.

    Left eigenvectors are right eigenvectors of A^T, matched to the same
    eigenvalue ordering; an empty spectrum is allowed.
    """
    a = as_matrix(a, "A")
    n = a.shape[0]
    vals_r, vecs_r = np.linalg.eig(a)
    vals_l, vecs_l = np.linalg.eig(a.T)
    sel = np.where(vals_r.real >= -tol.unstable_cut)[0]
    sel = sorted(sel, key=lambda i: _order_key(vals_r[i]))
    if not sel:
        return Spectrum(np.zeros(0, complex), np.zeros((n, 0)), np.zeros((n, 0)))
    taken = np.zeros(len(vals_l), bool)
    lefts = []
    for i in sel:
        diffs = np.abs(vals_l - vals_r[i]) + np.where(taken, np.inf, 0.0)
        j = int(np.argmin(diffs))
        if not np.isfinite(diffs[j]) or diffs[j] > 1e-6 * max(1.0, abs(vals_r[i])):
            raise NumericalError("left/right eigenvalue matching failed")
        taken[j] = True
        lefts.append(vecs_l[:, j])
    return Spectrum(
        eigenvalues=vals_r[sel],
        v_left=np.column_stack(lefts),
        v_right=vecs_r[:, sel],
    )


def realify_eigvecs(vals: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    """Replace conjugate-pair columns by their real/imaginary parts."""
    cols, skip = [], set()
    for i, lam in enumerate(vals):
        if i in skip:
            continue
        if abs(lam.imag) <= 1e-10 * max(1.0, abs(lam)):
            cols.append(vecs[:, i].real)
            continue
        for j in range(i + 1, len(vals)):
            if j not in skip and abs(vals[j] - lam.conjugate()) <= 1e-8 * max(1.0, abs(lam)):
                skip.add(j)
                break
        cols.append(vecs[:, i].real)
        cols.append(vecs[:, i].imag)
    out = np.column_stack(cols) if cols else np.zeros((vecs.shape[0], 0))
    return out


def sqrt_psd(m, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """Symmetric square root S with S S^T = M; eigenvalues clipped at 0.

    Raises NotPSD when lambda_min < -psd_reject * ||M||_2.
    """
    m = symmetrize(as_matrix(m, "M"))
    if m.shape[0] == 0:
        return m.copy()
    w, v = np.linalg.eigh(m)
    scale = max(np.abs(w).max(), 0.0)
    if w.min() < -tol.psd_reject * max(scale, 1e-300):
        raise NotPSD(f"lambda_min = {w.min():.3e} for scale {scale:.3e}")
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T
