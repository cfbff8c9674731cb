"""System Gramians: classical, band-limited, window-limited and modified.

All flavors reduce to a pair of generalized Lyapunov equations whose
right-hand sides differ:

======== ==========================================================
infinite ``calB calB^T``                      (definite)
band     ``B_lim calB^T + calB B_lim^T``      (indefinite, rank 2m)
window   ``B_t0 B_t0^T - B_tf B_tf^T``        (indefinite, rank 2m)
modified eigenvalue-split definite surrogate of a limited right-hand
         side; dominates the limited Gramian from above
======== ==========================================================

(observability analogously with ``calC``).  The indefinite cases are passed
to the solvers in factored ``G S G^T`` form with the natural 2x2 block
signature.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as spla

from . import lyapunov, matfun
from .errors import DimensionMismatch, InvalidParams
from .lyapunov import GramianFactor, IndefiniteRhs


@dataclass
class GramianPair:
    """Controllability/observability factors plus provenance."""

    controllability: GramianFactor
    observability: GramianFactor
    flavor: str
    band: matfun.FrequencyBand | None = None
    window: matfun.TimeWindow | None = None
    info: dict = field(default_factory=dict)


@dataclass
class PartitionedFactors:
    """Cholesky-like Gramian factors split at the position/velocity boundary.

    ``[R_p; R_v]`` stacks back to the controllability factor and
    ``[L_p; L_v]`` to the observability factor.
    """

    R_p: np.ndarray
    R_v: np.ndarray
    L_p: np.ndarray
    L_v: np.ndarray


@dataclass
class CharacteristicValues:
    kind: str
    values: np.ndarray


# Products whose singular values generalize Hankel singular values to the
# second-order setting: factor of P against factor of Q, paired through J
# (position observability block) or M (velocity observability block).
KINDS = ("position", "position_velocity", "velocity_position", "velocity")


def _solve_pair(real, rhs_c, rhs_o, flavor, band=None, window=None,
                solver="sign", solver_options=None):
    opts = dict(solver_options or {})
    if solver == "sign":
        P, Q, info = lyapunov.solve_lyap_sign_dual(real.calE, real.calA,
                                                   rhs_c, rhs_o, **opts)
    elif solver == "projection":
        fl = {"infinite": "infinite", "band": "band", "window": "window"}[flavor]
        P, ic = lyapunov.solve_lyap_projection(real, flavor=fl,
                                               side="controllability",
                                               band=band, window=window, **opts)
        Q, io = lyapunov.solve_lyap_projection(real, flavor=fl,
                                               side="observability",
                                               band=band, window=window, **opts)
        info = {"controllability": ic, "observability": io}
    else:
        raise InvalidParams(f"unknown solver {solver!r}")
    return GramianPair(P, Q, flavor, band=band, window=window, info=info)


def infinite_gramians(real, solver="sign", solver_options=None):
    """Classical Gramian pair of a c-stable realization."""
    rhs_c = IndefiniteRhs.definite(real.calB)
    rhs_o = IndefiniteRhs.definite(real.calC.T)
    return _solve_pair(real, rhs_c, rhs_o, "infinite",
                       solver=solver, solver_options=solver_options)


def _swap_signature(m):
    Z = np.zeros((m, m))
    ident = np.eye(m)
    return np.block([[Z, ident], [ident, Z]])


def frequency_limited_gramians(real, band, variant="left", solver="sign",
                               solver_options=None):
    """Band-limited Gramian pair.

    The right-hand sides couple the band-limited maps with the plain ones:
    ``[B_lim, calB]`` against the swap signature ``[[0, I], [I, 0]]`` (and the
    transposed analogue for the outputs).
    """
    rhs = matfun.freq_limited_rhs(real, band, variant=variant)
    rhs_c = IndefiniteRhs(np.hstack([rhs.B_lim, real.calB]),
                          _swap_signature(real.m))
    rhs_o = IndefiniteRhs(np.hstack([rhs.C_lim.T, real.calC.T]),
                          _swap_signature(real.p))
    return _solve_pair(real, rhs_c, rhs_o, "band", band=band,
                       solver=solver, solver_options=solver_options)


def time_limited_gramians(real, window, solver="sign", solver_options=None):
    """Window-limited Gramian pair.

    Right-hand sides are differences of propagated maps at the window
    endpoints, ``[B_t0, B_tf]`` against ``diag(I, -I)``.
    """
    rhs = matfun.time_limited_rhs(real, window)
    m, p = real.m, real.p
    sig_c = np.diag(np.concatenate([np.ones(m), -np.ones(m)]))
    sig_o = np.diag(np.concatenate([np.ones(p), -np.ones(p)]))
    rhs_c = IndefiniteRhs(np.hstack([rhs.B_t0, rhs.B_tf]), sig_c)
    rhs_o = IndefiniteRhs(np.hstack([rhs.C_t0.T, rhs.C_tf.T]), sig_o)
    return _solve_pair(real, rhs_c, rhs_o, "window", window=window,
                       solver=solver, solver_options=solver_options)


def definite_surrogate(rhs, cutoff=1e-12):
    """Definite replacement of an indefinite factored right-hand side.

    Eigendecomposes ``G S G^T`` through its thin factor, keeps the
    nonzero-eigenvalue directions ``U_1`` and returns
    ``U_1 diag(|eta|)^{1/2}``, so the surrogate is
    ``U_1 |diag(eta)| U_1^T >= G S G^T``.
    """
    Q, R = spla.qr(rhs.G, mode="economic")
    core = R @ rhs.S @ R.T
    core = 0.5 * (core + core.T)
    eta, V = spla.eigh(core)
    emax = np.max(np.abs(eta)) if eta.size else 0.0
    keep = np.abs(eta) > cutoff * emax
    return (Q @ V[:, keep]) * np.sqrt(np.abs(eta[keep]))


def modified_gramians(real, band=None, window=None, variant="left",
                      solver_options=None):
    """Definite-right-hand-side surrogates of the limited Gramians.

    The modified pair dominates the corresponding limited pair in the
    semidefinite order, restoring the stability guarantees of classical
    balancing while staying band/window aware.
    """
    if (band is None) == (window is None):
        raise InvalidParams("pass exactly one of band or window")
    if band is not None:
        rhs = matfun.freq_limited_rhs(real, band, variant=variant)
        rc = IndefiniteRhs(np.hstack([rhs.B_lim, real.calB]),
                           _swap_signature(real.m))
        ro = IndefiniteRhs(np.hstack([rhs.C_lim.T, real.calC.T]),
                           _swap_signature(real.p))
        flavor = "band_modified"
    else:
        rhs = matfun.time_limited_rhs(real, window)
        m, p = real.m, real.p
        rc = IndefiniteRhs(np.hstack([rhs.B_t0, rhs.B_tf]),
                           np.diag(np.concatenate([np.ones(m), -np.ones(m)])))
        ro = IndefiniteRhs(np.hstack([rhs.C_t0.T, rhs.C_tf.T]),
                           np.diag(np.concatenate([np.ones(p), -np.ones(p)])))
        flavor = "window_modified"
    rhs_c = IndefiniteRhs.definite(definite_surrogate(rc))
    rhs_o = IndefiniteRhs.definite(definite_surrogate(ro))
    pair = _solve_pair(real, rhs_c, rhs_o, flavor, band=band, window=window,
                       solver="sign", solver_options=solver_options)
    return pair


def partition(pair, n):
    """Split Cholesky-like Gramian factors at the position/velocity boundary."""
    R = pair.controllability.cholesky_like()
    L = pair.observability.cholesky_like()
    if R.shape[0] != 2 * n or L.shape[0] != 2 * n:
        raise DimensionMismatch("factors do not match a 2n-dimensional realization")
    return PartitionedFactors(R_p=R[:n], R_v=R[n:], L_p=L[:n], L_v=L[n:])


def characteristic_values(parts, J, M):
    """Second-order characteristic values of all four kinds.

    Computed as singular values of the small factored products (the Gramian
    products themselves are never formed):

    =================== =================
    position            ``L_p^T J R_p``
    position_velocity   ``L_v^T M R_p``
    velocity_position   ``L_p^T J R_v``
    velocity            ``L_v^T M R_v``
    =================== =================
    """
    prods = {
        "position": parts.L_p.T @ J @ parts.R_p,
        "position_velocity": parts.L_v.T @ M @ parts.R_p,
        "velocity_position": parts.L_p.T @ J @ parts.R_v,
        "velocity": parts.L_v.T @ M @ parts.R_v,
    }
    return {kind: CharacteristicValues(kind, spla.svdvals(prod))
            for kind, prod in prods.items()}
