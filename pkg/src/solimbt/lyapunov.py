"""Generalized Lyapunov solvers with low-rank LDL^T factor handling.

The workhorse is a matrix-sign-function iteration that solves the pair

    calA X1 calE^T + calE X1 calA^T + G_c S_c G_c^T = 0,
    calA^T X2 calE + calE^T X2 calA + G_o S_o G_o^T = 0

simultaneously (both equations share the same iteration matrices, so one
stream of LU factorizations serves both).  Right-hand sides are kept in
factored indefinite form ``G S G^T``, which is exactly what the limited
balancing variants produce.  A dense Kronecker solver acts as an independent
reference at small sizes, and a rational-Krylov projection solver covers
problems where dense sign iteration is too expensive.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as spla

from . import matfun
from .errors import (
    DimensionMismatch,
    InvalidParams,
    NotConverged,
    SingularOperator,
    TooLarge,
    UnstablePencil,
    UnstableProjection,
)
from .system import GENERIC, STRICTLY_DISSIPATIVE, FirstOrderRealization


@dataclass
class GramianFactor:
    """Low-rank representation ``X = Z Y Z^T`` with symmetric core ``Y``.

    After compression ``Z`` has orthonormal columns and ``Y`` is diagonal.
    The represented Gramians are positive semidefinite in exact arithmetic,
    but the core may carry tiny negative eigenvalues from rounding; these are
    dropped when a Cholesky-like factor is requested.
    """

    Z: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        if self.Y.ndim == 1:
            self.Y = np.diag(self.Y)
        if self.Z.shape[1] != self.Y.shape[0]:
            raise DimensionMismatch("factor core size must match column count")

    @property
    def rank(self):
        return self.Z.shape[1]

    def matrix(self):
        return self.Z @ self.Y @ self.Z.T

    def trace(self):
        return float(np.einsum("ij,ji->", self.Y, self.Z.T @ self.Z))

    def compressed(self, tol=1e-14):
        Z, Y = ldl_compress(self.Z, self.Y, tol=tol)
        return GramianFactor(Z, Y)

    def cholesky_like(self):
        """Plain factor ``R`` with ``X ~= R R^T`` (negative core part dropped)."""
        Z, Y = ldl_compress(self.Z, self.Y, tol=0.0)
        w = np.diag(Y)
        keep = w > 0.0
        return Z[:, keep] * np.sqrt(w[keep])


@dataclass
class IndefiniteRhs:
    """Factored symmetric right-hand side ``G S G^T``."""

    G: np.ndarray
    S: np.ndarray

    @classmethod
    def definite(cls, G):
        return cls(G, np.eye(G.shape[1]))

    def dense(self):
        return self.G @ self.S @ self.G.T


def ldl_compress(Z, Y, tol=1e-14):
    """Rank-revealing compression of ``Z Y Z^T``.

    Economy QR of ``Z`` followed by an eigendecomposition of the projected
    core; eigenvalues with ``|w| <= tol * max |w|`` are discarded.  Returns an
    orthonormal ``Z`` and a diagonal ``Y`` representing the same matrix up to
    the drop tolerance.
    """
    if Z.shape[1] == 0:
        return Z, np.zeros((0, 0))
    Q, R = spla.qr(Z, mode="economic")
    core = R @ Y @ R.T
    core = 0.5 * (core + core.T)
    w, V = spla.eigh(core)
    wmax = np.max(np.abs(w)) if w.size else 0.0
    keep = np.abs(w) > tol * wmax
    if not np.any(keep):
        return np.zeros((Z.shape[0], 0)), np.zeros((0, 0))
    return Q @ V[:, keep], np.diag(w[keep])


def solve_lyap_sign_dual(calE, calA, rhs_c, rhs_o, tol=1e-12, maxiter=100,
                         compress_tol=1e-14):
    """Sign-function iteration for the dual pair of generalized Lyapunov
    equations with factored indefinite right-hand sides.

    Parameters
    ----------
    calE, calA
        Pencil matrices; the pencil must be c-stable for convergence.
    rhs_c, rhs_o
        :class:`IndefiniteRhs` factors of the controllability
        (``G_c S_c G_c^T``) and observability (``G_o S_o G_o^T``) right-hand
        sides.
    tol
        Relative stopping tolerance on ``||A_k + calE||_F / ||calE||_F``
        (Frobenius norms throughout).
    compress_tol
        Column compression tolerance applied to both factor streams each
        iteration.

    Returns
    -------
    (P, Q, info)
        :class:`GramianFactor` solutions of the two equations and a dict
        with ``num_iter`` and the final relative error.

    Raises
    ------
    UnstablePencil
        If an iterate becomes singular or the iteration diverges.
    NotConverged
        If the cap of ``maxiter`` iterations is hit.
    """
    A = np.array(calA, dtype=float)
    E = np.asarray(calE, dtype=float)
    N = A.shape[0]
    if A.shape != (N, N) or E.shape != (N, N):
        raise DimensionMismatch("calA and calE must be square and equal-sized")
    B, Yc = rhs_c.G.copy(), rhs_c.S.copy()
    Ct, Yo = rhs_o.G.copy(), rhs_o.S.copy()
    if B.shape[0] != N or Ct.shape[0] != N:
        raise DimensionMismatch("right-hand side factors must have N rows")

    normE = spla.norm(E)
    norm_scale = max(spla.norm(A), normE)
    rel_err = spla.norm(A + E) / normE
    num_iter = 0
    while rel_err > tol and num_iter < maxiter:
        try:
            lu, piv = spla.lu_factor(A)
        except spla.LinAlgError as exc:
            raise UnstablePencil("singular iterate; pencil eigenvalue at the origin") from exc
        EAinvE = E @ spla.lu_solve((lu, piv), E)
        if not np.all(np.isfinite(EAinvE)):
            raise UnstablePencil("sign iteration produced non-finite values")
        # determinantal scaling, skipped close to convergence where it
        # would perturb the quadratic phase
        if rel_err > 1e-2:
            c = np.sqrt(spla.norm(A) / spla.norm(EAinvE))
        else:
            c = 1.0
        half_c, half_inv = 0.5 * c, 0.5 / c

        B = np.hstack([B, E @ spla.lu_solve((lu, piv), B)])
        Yc = spla.block_diag(half_inv * Yc, half_c * Yc)
        Ct = np.hstack([Ct, E.T @ spla.lu_solve((lu, piv), Ct, trans=1)])
        Yo = spla.block_diag(half_inv * Yo, half_c * Yo)
        B, Yc = ldl_compress(B, Yc, tol=compress_tol)
        Ct, Yo = ldl_compress(Ct, Yo, tol=compress_tol)

        A = half_inv * A + half_c * EAinvE
        num_iter += 1
        rel_err = spla.norm(A + E) / normE
        if spla.norm(A) > 1e8 * norm_scale:
            raise UnstablePencil("sign iteration diverged; pencil is not c-stable")
    if rel_err > tol:
        raise NotConverged(
            f"sign iteration: rel error {rel_err:.3e} > {tol:.1e} after {num_iter} steps")

    Z1 = spla.solve(E, B) / np.sqrt(2.0)
    Z2 = spla.solve(E.T, Ct) / np.sqrt(2.0)
    info = {"num_iter": num_iter, "rel_err": rel_err}
    return GramianFactor(Z1, Yc), GramianFactor(Z2, Yo), info


def solve_lyap_dense_oracle(calA, calE, rhs, max_dim=60):
    """Dense Kronecker-product reference solver.

    Solves ``calA X calE^T + calE X calA^T + rhs = 0`` by forming the
    ``N^2 x N^2`` operator explicitly.  Deliberately naive and independent of
    the factored solvers; intended for cross-checks only.

    Raises
    ------
    TooLarge
        For ``N > max_dim``.
    SingularOperator
        If the operator is singular (pencil eigenvalues mirrored across the
        imaginary axis).
    """
    A = np.asarray(calA, dtype=float)
    E = np.asarray(calE, dtype=float)
    R = np.asarray(rhs, dtype=float)
    N = A.shape[0]
    if N > max_dim:
        raise TooLarge(f"dense oracle limited to N <= {max_dim}, got {N}")
    if A.shape != (N, N) or E.shape != (N, N) or R.shape != (N, N):
        raise DimensionMismatch("oracle operands must be square and equal-sized")
    L = np.kron(E, A) + np.kron(A, E)
    # scipy's structured fast paths can warn and return inf/nan on an exactly
    # singular operator instead of raising, so judge by the residual either way
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"), \
            warnings.catch_warnings():
        warnings.simplefilter("ignore", spla.LinAlgWarning)
        try:
            x = spla.solve(L, -R.flatten(order="F"))
        except spla.LinAlgError as exc:
            raise SingularOperator("Lyapunov operator is singular") from exc
        resid = np.linalg.norm(L @ x + R.flatten(order="F"))
    if not np.isfinite(resid) or resid > 1e-6 * max(np.linalg.norm(R), 1.0):
        raise SingularOperator("Lyapunov operator is numerically singular")
    X = x.reshape((N, N), order="F")
    return 0.5 * (X + X.T)


@dataclass
class _StandardSpace:
    """First-order realization mapped to standard state-space coordinates."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    back_contr: object
    back_obs: object


def _to_standard(real):
    if real.kind == STRICTLY_DISSIPATIVE:
        Lf = spla.cholesky(0.5 * (real.calE + real.calE.T), lower=True)
        Atil = spla.solve_triangular(Lf, real.calA, lower=True)
        Atil = spla.solve_triangular(Lf, Atil.T, lower=True).T
        Btil = spla.solve_triangular(Lf, real.calB, lower=True)
        Ctil = spla.solve_triangular(Lf, real.calC.T, lower=True).T
        back = lambda Z: spla.solve_triangular(Lf.T, Z, lower=False)
        return _StandardSpace(Atil, Btil, Ctil, back, back)
    Atil = spla.solve(real.calE, real.calA)
    Btil = spla.solve(real.calE, real.calB)
    return _StandardSpace(Atil, Btil, real.calC,
                          lambda Z: Z,
                          lambda Z: spla.solve(real.calE.T, Z))


def _default_shifts(flavor, band, window, N, A):
    if flavor == "band":
        lo, hi = band.hull
        if lo <= 0.0:
            lo = hi * 1e-4
        return None, (lo, hi)
    if flavor == "window":
        tf = window.tf
        return None, (1.0 / tf, 10.0 * N / tf)
    scale = spla.norm(A) / np.sqrt(N)
    return None, (1e-3 * scale, 1e3 * scale)


def _small_rhs(T, G, flavor, band, window):
    if flavor == "infinite":
        return G @ G.T
    if flavor == "band":
        small = FirstOrderRealization(np.eye(T.shape[0]), T, G,
                                      np.zeros((1, T.shape[0])), kind=GENERIC)
        F = matfun.band_selector(small, band)
        GF = F @ G
        return GF @ G.T + G @ GF.T
    Gt0 = G if window.t0 == 0.0 else matfun.expm(T * window.t0) @ G
    Gtf = matfun.expm(T * window.tf) @ G
    return Gt0 @ Gt0.T - Gtf @ Gtf.T


def solve_lyap_projection(real, flavor="infinite", side="controllability",
                          band=None, window=None, shifts=None, num_shifts=40,
                          batch=8, tol=1e-8, max_dim=None):
    """Rational-Krylov projection solver for one Gramian.

    Builds an orthonormal basis ``V`` from solves ``(s_k I - A)^{-1} G`` in
    standard coordinates (Cholesky-transformed for the strictly dissipative
    realization, ``calE``-inverted otherwise), Galerkin-projects the
    equation, evaluates the limited right-hand side on the projected
    matrices, and solves the small equation densely.  The subspace grows in
    batches of shifts until the trace of the represented Gramian changes by
    at most ``tol`` relatively.

    Parameters
    ----------
    flavor
        ``"infinite"``, ``"band"`` (requires ``band``) or ``"window"``
        (requires ``window``).
    shifts
        Optional explicit array of shift frequencies (rad/s, positive);
        defaults to a logarithmic spread derived from the band, the window
        length, or the operator norm.

    Raises
    ------
    UnstableProjection
        If the projected matrix is not c-stable (retry with the strictly
        dissipative realization).
    NotConverged
        If the shift budget is exhausted before the trace settles.
    """
    if flavor not in ("infinite", "band", "window"):
        raise InvalidParams(f"unknown flavor {flavor!r}")
    if flavor == "band" and band is None:
        raise InvalidParams("band flavor needs a band")
    if flavor == "window" and window is None:
        raise InvalidParams("window flavor needs a window")
    if side not in ("controllability", "observability"):
        raise InvalidParams(f"unknown side {side!r}")

    space = _to_standard(real)
    if side == "controllability":
        A, G, back = space.A, space.B, space.back_contr
    else:
        A, G, back = space.A.T, space.C.T, space.back_obs
    N = A.shape[0]
    max_dim = N if max_dim is None else min(max_dim, N)

    if shifts is None:
        _, (lo, hi) = _default_shifts(flavor, band, window, N, A)
        shifts = np.logspace(np.log10(lo), np.log10(hi), num_shifts)
    shifts = np.asarray(shifts, dtype=float)

    ident = np.eye(N)
    raw = []
    V = None
    last_trace = None
    trace_history = []
    converged = False
    for start in range(0, shifts.size, batch):
        for w in shifts[start:start + batch]:
            D = spla.solve(1j * w * ident - A, G.astype(complex))
            raw.append(D.real)
            raw.append(D.imag)
        V = spla.orth(np.hstack(raw))
        if V.shape[1] > max_dim:
            V = V[:, :max_dim]
        T = V.T @ A @ V
        lam = np.linalg.eigvals(T)
        if np.max(lam.real) >= 0.0:
            raise UnstableProjection(
                "projected matrix not c-stable; retry with the strictly "
                "dissipative realization")
        Gs = V.T @ G
        rhs = _small_rhs(T, Gs, flavor, band, window)
        Xs = spla.solve_continuous_lyapunov(T, -rhs)
        Xs = 0.5 * (Xs + Xs.T)
        tr = float(np.trace(Xs))
        trace_history.append(tr)
        if last_trace is not None and abs(tr - last_trace) <= tol * max(abs(tr), 1e-300):
            converged = True
            break
        last_trace = tr
        if V.shape[1] >= max_dim:
            converged = True
            break
    if not converged:
        raise NotConverged("projection subspace exhausted before the trace settled")

    w, U = spla.eigh(Xs)
    wmax = np.max(np.abs(w)) if w.size else 0.0
    keep = np.abs(w) > 1e-14 * wmax
    Z = back(V @ U[:, keep])
    info = {"dim": V.shape[1], "trace_history": trace_history}
    return GramianFactor(Z, np.diag(w[keep])), info
