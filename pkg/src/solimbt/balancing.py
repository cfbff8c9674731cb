"""Square-root balancing: order selection, projector recipes, truncation.

Eight structure-preserving formulas build projection matrices from the
partitioned Gramian factors.  Each one balances a different pairing of the
position/velocity blocks; ``"so"`` keeps two separate pairs and recovers a
second-order model through a similarity transform of the projected
first-order system.

========= ================================ =========================================
formula   singular values of               projectors
========= ================================ =========================================
``v``     ``L_v^T M R_v``                  ``W = L_v U S^-1/2``, ``T = R_v V S^-1/2``
``fv``    ``L_p^T J R_p``                  ``T = R_p V S^-1/2``, ``W = T``
``vpm``   ``L_p^T J R_v``                  ``W = M^-T J^T L_p U S^-1/2``, ``T = R_v V S^-1/2``
``pm``    ``L_p^T J R_p``                  ``W = M^-T J^T L_p U S^-1/2``, ``T = R_p V S^-1/2``
``pv``    ``L_v^T M R_p``                  ``W = L_v U S^-1/2``, ``T = R_p V S^-1/2``
``vp``    ``L_p^T J R_v`` (S, V)           ``W = L_v U S^-1/2`` with U from
          ``L_v^T M R_p`` (U)              the second product, ``T = R_v V S^-1/2``
``p``     ``L_p^T J R_p`` (S, V)           ``W = L_v U S^-1/2`` with U from
          ``L_v^T M R_v`` (U)              the second product, ``T = R_p V S^-1/2``
``so``    both diagonal products           separate pairs ``(W_p, T_p)``, ``(W_v, T_v)``
========= ================================ =========================================
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as spla

from .errors import (
    EmptySpectrum,
    InvalidParams,
    RankDeficient,
    SingularM,
    SingularS,
)
from .lyapunov import IndefiniteRhs, solve_lyap_sign_dual
from .system import GENERIC, FirstOrderRealization, SecondOrderSystem, make_second_order

FORMULAS = ("v", "fv", "vpm", "pm", "pv", "vp", "p", "so")

# characteristic-value kind driving order selection, per formula
SELECTION_KIND = {
    "v": "velocity",
    "fv": "position",
    "vpm": "velocity_position",
    "pm": "position",
    "pv": "position_velocity",
    "vp": "velocity_position",
    "p": "position",
    "so": "position",
}


@dataclass
class BalancingResult:
    """Projector set for one formula at one order."""

    formula: str
    r: int
    sigma: np.ndarray
    W: np.ndarray | None = None
    T: np.ndarray | None = None
    W_p: np.ndarray | None = None
    T_p: np.ndarray | None = None
    W_v: np.ndarray | None = None
    T_v: np.ndarray | None = None

    @property
    def truncated_tail(self):
        return float(np.sum(self.sigma[self.r:]))


def select_order(sigma, tol=1e-4, fixed_r=None):
    """Smallest order whose truncated tail satisfies
    ``sum_{k > r} sigma_k <= tol * sigma_1``; ``fixed_r`` overrides.

    Raises
    ------
    EmptySpectrum
        If no characteristic values are available.
    """
    sigma = np.asarray(sigma, dtype=float)
    if sigma.size == 0:
        raise EmptySpectrum("no characteristic values to select from")
    if fixed_r is not None:
        if not (1 <= fixed_r <= sigma.size):
            raise InvalidParams(f"fixed order {fixed_r} outside [1, {sigma.size}]")
        return int(fixed_r)
    tails = np.concatenate([np.cumsum(sigma[::-1])[::-1][1:], [0.0]])
    ok = np.nonzero(tails <= tol * sigma[0])[0]
    return int(ok[0]) + 1 if ok.size else sigma.size


def _truncated_svd(prod, r):
    U, s, Vh = spla.svd(prod, full_matrices=False)
    if r > s.size or s[r - 1] < 1e-14 * s[0]:
        raise RankDeficient(
            f"requested order {r} exceeds the numerical rank of the balancing product")
    return U[:, :r], s, Vh[:r].T


def second_order_projectors(parts, J, M, formula, order_tol=1e-4, fixed_r=None):
    """Build the projector set of one balancing formula.

    Parameters
    ----------
    parts
        :class:`~solimbt.gramians.PartitionedFactors`.
    J, M
        Coupling block of the companion form the Gramians belong to, and the
        mass matrix (needed by the ``vpm``/``pm`` variants).
    formula
        One of :data:`FORMULAS`.

    Raises
    ------
    RankDeficient
        If the requested order exceeds the numerical rank.
    SingularM
        If the mass inverse required by ``vpm``/``pm`` fails.
    """
    if formula not in FORMULAS:
        raise InvalidParams(f"unknown balancing formula {formula!r}")
    Rp, Rv, Lp, Lv = parts.R_p, parts.R_v, parts.L_p, parts.L_v

    def minvt(X):
        # scipy's structured solve paths hand back inf/nan for an exactly
        # singular M instead of raising
        with np.errstate(invalid="ignore", divide="ignore"), \
                warnings.catch_warnings():
            warnings.simplefilter("ignore", spla.LinAlgWarning)
            try:
                out = spla.solve(M.T, X)
            except spla.LinAlgError as exc:
                raise SingularM(
                    "mass matrix solve failed in projector assembly") from exc
        if not np.all(np.isfinite(out)):
            raise SingularM("mass matrix solve failed in projector assembly")
        return out

    if formula == "so":
        sp = spla.svdvals(Lp.T @ J @ Rp)
        sv = spla.svdvals(Lv.T @ M @ Rv)
        r = select_order(sp, tol=order_tol, fixed_r=fixed_r)
        Up, _, Vp = _truncated_svd(Lp.T @ J @ Rp, r)
        Uv, _, Vv = _truncated_svd(Lv.T @ M @ Rv, r)
        sqp = 1.0 / np.sqrt(sp[:r])
        sqv = 1.0 / np.sqrt(sv[:r])
        return BalancingResult(
            formula=formula, r=r, sigma=sp,
            W_p=(Lp @ Up) * sqp, T_p=(Rp @ Vp) * sqp,
            W_v=(Lv @ Uv) * sqv, T_v=(Rv @ Vv) * sqv)

    products = {
        "v": (Lv.T @ M @ Rv,),
        "fv": (Lp.T @ J @ Rp,),
        "vpm": (Lp.T @ J @ Rv,),
        "pm": (Lp.T @ J @ Rp,),
        "pv": (Lv.T @ M @ Rp,),
        "vp": (Lp.T @ J @ Rv, Lv.T @ M @ Rp),
        "p": (Lp.T @ J @ Rp, Lv.T @ M @ Rv),
    }[formula]
    sigma = spla.svdvals(products[0])
    r = select_order(sigma, tol=order_tol, fixed_r=fixed_r)
    U, _, V = _truncated_svd(products[0], r)
    if len(products) == 2:
        U, _, _ = _truncated_svd(products[1], r)
    sq = 1.0 / np.sqrt(sigma[:r])

    if formula == "v":
        W, T = (Lv @ U) * sq, (Rv @ V) * sq
    elif formula == "fv":
        T = (Rp @ V) * sq
        W = T
    elif formula == "vpm":
        W, T = minvt(J.T @ (Lp @ U)) * sq, (Rv @ V) * sq
    elif formula == "pm":
        W, T = minvt(J.T @ (Lp @ U)) * sq, (Rp @ V) * sq
    elif formula == "pv":
        W, T = (Lv @ U) * sq, (Rp @ V) * sq
    elif formula == "vp":
        W, T = (Lv @ U) * sq, (Rv @ V) * sq
    else:  # "p"
        W, T = (Lv @ U) * sq, (Rp @ V) * sq
    return BalancingResult(formula=formula, r=r, sigma=sigma, W=W, T=T)


def apply_projection(sys, W, T):
    """Petrov-Galerkin truncation of a second-order system."""
    return make_second_order(
        W.T @ sys.M @ T, W.T @ sys.E @ T, W.T @ sys.K @ T,
        W.T @ sys.B_u, sys.C_p @ T, sys.C_v @ T)


def so_reconstruct(sys, J, res):
    """Second-order model from the two-pair (``"so"``) projection.

    The projected companion system has coupling block ``S = W_p^T J T_v``;
    a similarity transform with ``S`` turns it back into second-order form:

        M^ = S (W_v^T M T_v) S^-1,   E^ = S (W_v^T E T_v) S^-1,
        K^ = S (W_v^T K T_p),        B^ = S (W_v^T B_u),
        C_p^ = C_p T_p,              C_v^ = C_v T_v S^-1.

    Raises
    ------
    SingularS
        If ``S`` has condition number above 1e12.
    """
    S = res.W_p.T @ J @ res.T_v
    sv = spla.svdvals(S)
    if sv[-1] <= 0.0 or sv[0] > 1e12 * sv[-1]:
        raise SingularS("coupling matrix numerically singular "
                        f"(extreme singular values {sv[0]:.3e}, {sv[-1]:.3e})")

    def rdiv(X):  # X S^{-1}
        return spla.solve(S.T, X.T).T

    Wv, Tv, Tp = res.W_v, res.T_v, res.T_p
    Mh = S @ rdiv(Wv.T @ sys.M @ Tv)
    Eh = S @ rdiv(Wv.T @ sys.E @ Tv)
    Kh = S @ (Wv.T @ sys.K @ Tp)
    Bh = S @ (Wv.T @ sys.B_u)
    Cph = sys.C_p @ Tp
    Cvh = rdiv(sys.C_v @ Tv)
    return make_second_order(Mh, Eh, Kh, Bh, Cph, Cvh)


@dataclass
class FirstOrderRom:
    """Classical balanced truncation result on a first-order realization."""

    realization: FirstOrderRealization
    r: int
    sigma: np.ndarray
    error_bound: float


def first_order_bt(real, order_tol=1e-4, fixed_r=None, solver_options=None):
    """Classical square-root balanced truncation of a first-order realization.

    Solves the infinite Gramian pair, takes the SVD of ``L^T calE R`` and
    truncates.  The reported bound is twice the truncated tail of the
    (Hankel) singular values; the worst-case transfer error over the whole
    frequency axis stays below it.
    """
    opts = dict(solver_options or {})
    P, Q, _ = solve_lyap_sign_dual(real.calE, real.calA,
                                   IndefiniteRhs.definite(real.calB),
                                   IndefiniteRhs.definite(real.calC.T), **opts)
    R = P.cholesky_like()
    L = Q.cholesky_like()
    prod = L.T @ real.calE @ R
    sigma = spla.svdvals(prod)
    r = select_order(sigma, tol=order_tol, fixed_r=fixed_r)
    U, _, V = _truncated_svd(prod, r)
    sq = 1.0 / np.sqrt(sigma[:r])
    W = (L @ U) * sq
    T = (R @ V) * sq
    rom = FirstOrderRealization(
        W.T @ real.calE @ T, W.T @ real.calA @ T, W.T @ real.calB,
        real.calC @ T, kind=GENERIC)
    bound = 2.0 * float(np.sum(sigma[r:]))
    return FirstOrderRom(realization=rom, r=r, sigma=sigma, error_bound=bound)
