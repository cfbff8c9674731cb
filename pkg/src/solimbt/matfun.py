"""Matrix-function machinery for limited Gramians.

Frequency-limited balancing needs

    F_Omega = Re((i/pi) * log(prod_k (calA + i w_{2k-1} calE)^{-1}
                                     (calA + i w_{2k} calE))) calE^{-1},

time-limited balancing needs propagated input/output maps
``B_t = exp(calA calE^{-1} t) calB`` and ``C_t = calC exp(calE^{-1} calA t)``.
Both enter indefinite right-hand sides of generalized Lyapunov equations.
A frequency-domain quadrature of the Gramian integral is provided as an
independent cross-check of the matrix-function route.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as spla

from .errors import (
    BranchCutViolation,
    DimensionMismatch,
    InvalidParams,
    NonFinite,
    UnstableRealization,
)

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class FrequencyBand:
    """Union of closed intervals on the nonnegative frequency axis, in rad/s.

    The band is implicitly symmetric: ``[a, b]`` stands for
    ``[-b, -a] union [a, b]``.  Intervals must be sorted, non-overlapping and
    have nonnegative endpoints.
    """

    intervals: tuple

    def __init__(self, intervals):
        ivs = tuple((float(a), float(b)) for a, b in intervals)
        if not ivs:
            raise InvalidParams("band needs at least one interval")
        last = -np.inf
        for a, b in ivs:
            if a < 0 or b <= a:
                raise InvalidParams(f"bad band interval [{a}, {b}]")
            if a < last:
                raise InvalidParams("band intervals must be sorted and non-overlapping")
            last = b
        object.__setattr__(self, "intervals", ivs)

    @classmethod
    def from_hz(cls, intervals):
        return cls([(TWO_PI * a, TWO_PI * b) for a, b in intervals])

    @property
    def hull(self):
        return (self.intervals[0][0], self.intervals[-1][1])

    def mask(self, omega):
        """Boolean mask of grid points (rad/s) inside the band."""
        omega = np.asarray(omega, dtype=float)
        m = np.zeros(omega.shape, dtype=bool)
        for a, b in self.intervals:
            m |= (omega >= a) & (omega <= b)
        return m


@dataclass(frozen=True)
class TimeWindow:
    """Time interval ``[t0, tf]`` with ``0 <= t0 < tf``."""

    t0: float
    tf: float

    def __post_init__(self):
        if not (0.0 <= self.t0 < self.tf):
            raise InvalidParams(f"bad time window [{self.t0}, {self.tf}]")

    @classmethod
    def from_intervals(cls, intervals):
        """Collapse a union of windows to its hull [min t0, max tf]."""
        if not intervals:
            raise InvalidParams("window union is empty")
        t0 = min(a for a, _ in intervals)
        tf = max(b for _, b in intervals)
        return cls(float(t0), float(tf))


# Pade-13 coefficients and 1-norm threshold for the scaling-and-squaring
# exponential (Higham's double precision parameters).
_PADE13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0, 670442572800.0,
    33522128640.0, 1323241920.0, 40840800.0, 960960.0, 16380.0, 182.0, 1.0,
)
_THETA13 = 5.371920351148152


def expm(A):
    """Matrix exponential by scaling and squaring with a diagonal Pade(13,13)
    approximant; the squaring count comes from the 1-norm of the input.

    Raises
    ------
    NonFinite
        On non-finite input, or when the result overflows (extreme
        ``t * spectral radius``; rescale the argument).
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch("expm needs a square matrix")
    if not np.all(np.isfinite(A)):
        raise NonFinite("expm input has non-finite entries")
    norm1 = np.linalg.norm(A, 1)
    s = 0
    if norm1 > _THETA13:
        s = int(np.ceil(np.log2(norm1 / _THETA13)))
        if s > 64:
            raise NonFinite("expm argument norm too large; rescale")
        A = A / (2.0 ** s)
    b = _PADE13
    n = A.shape[0]
    ident = np.eye(n, dtype=A.dtype)
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A2 @ A4
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
             + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
    V = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
         + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident)
    R = spla.solve(V - U, V + U)
    for _ in range(s):
        R = R @ R
    if not np.all(np.isfinite(R)):
        raise NonFinite("expm overflowed; rescale the argument")
    return R


def logm_principal(A, branch_tol=1e-12):
    """Principal matrix logarithm (inverse scaling and squaring).

    Checks the spectrum first and refuses arguments with an eigenvalue on the
    closed negative real axis, where the principal branch is not defined.

    Raises
    ------
    BranchCutViolation
        If an eigenvalue lies on ``(-inf, 0]`` within ``branch_tol``.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch("logm needs a square matrix")
    if not np.all(np.isfinite(A)):
        raise NonFinite("logm input has non-finite entries")
    lam = np.linalg.eigvals(A)
    scale = np.max(np.abs(lam))
    if scale == 0.0:
        raise BranchCutViolation("zero matrix has no logarithm")
    on_cut = (np.abs(lam.imag) <= branch_tol * np.abs(lam)) & (lam.real <= 0.0)
    if np.any(on_cut | (np.abs(lam) <= branch_tol * scale)):
        raise BranchCutViolation("eigenvalue on the closed negative real axis")
    # scipy warns at 1000*eps regardless of dimension; judge the returned
    # error estimate ourselves instead
    L, errest = spla.logm(A, disp=False)
    if not np.all(np.isfinite(L)):
        raise NonFinite("logm produced non-finite entries")
    if not np.isfinite(errest) or errest > 1e-8:
        warnings.warn(f"matrix logarithm may be inaccurate "
                      f"(estimated error {errest:.2e})", stacklevel=2)
    return L


def _require_stable(real):
    lam = real.pencil_eigenvalues()
    lam = lam[np.isfinite(lam)]
    if lam.size == 0 or np.max(lam.real) >= 0.0:
        raise UnstableRealization("band-limited right-hand side needs a c-stable pencil")


def band_selector(real, band, variant="left"):
    """The matrix ``F_Omega`` that localizes the Gramian integrals to a band.

    For a single interval starting at zero the symmetric-band simplification
    ``F = Re((i/pi) log(-calE^{-1} calA - i w I)) calE^{-1}`` is used; the
    general case accumulates the interval product before taking one
    logarithm.  The ``"left"`` and ``"right"`` variants apply ``calE^{-1}``
    on different sides and agree mathematically.
    """
    if variant not in ("left", "right"):
        raise InvalidParams(f"unknown variant {variant!r}")
    _require_stable(real)
    calE, calA = real.calE, real.calA
    N = calE.shape[0]
    ivs = band.intervals
    if len(ivs) == 1 and ivs[0][0] == 0.0:
        w = ivs[0][1]
        if variant == "left":
            arg = -spla.solve(calE, calA).astype(complex) - 1j * w * np.eye(N)
            L = np.real((1j / np.pi) * logm_principal(arg))
            return spla.solve(calE.T, L.T).T
        arg = -spla.solve(calE.T, calA.T).T.astype(complex) - 1j * w * np.eye(N)
        return spla.solve(calE, np.real((1j / np.pi) * logm_principal(arg)))
    G = np.eye(N, dtype=complex)
    for a, b in ivs:
        lo = calA + 1j * a * calE
        hi = calA + 1j * b * calE
        if variant == "left":
            G = G @ spla.solve(lo, hi)
        else:
            G = G @ spla.solve(lo.T, hi.T).T
    L = np.real((1j / np.pi) * logm_principal(G))
    if variant == "left":
        return spla.solve(calE.T, L.T).T
    return spla.solve(calE, L)


@dataclass
class BandLimitedRhs:
    """Band-limited input/output maps entering the Lyapunov right-hand sides.

    The controllability equation uses ``B_lim calB^T + calB B_lim^T`` and the
    observability equation ``C_lim^T calC + calC^T C_lim``.
    """

    B_lim: np.ndarray
    C_lim: np.ndarray
    band: FrequencyBand


def freq_limited_rhs(real, band, variant="left"):
    """Band-limited maps ``B_lim = calE F_Omega calB`` and
    ``C_lim = calC F_Omega calE``.

    Raises
    ------
    UnstableRealization
        If the pencil is not c-stable.
    BranchCutViolation
        Propagated from the matrix logarithm.
    """
    F = band_selector(real, band, variant=variant)
    return BandLimitedRhs(B_lim=real.calE @ F @ real.calB,
                          C_lim=real.calC @ F @ real.calE,
                          band=band)


@dataclass
class TimeLimitedRhs:
    """Propagated maps at the window endpoints.

    The controllability right-hand side is ``B_t0 B_t0^T - B_tf B_tf^T`` and
    the observability one ``C_t0^T C_t0 - C_tf^T C_tf``.
    """

    B_t0: np.ndarray
    B_tf: np.ndarray
    C_t0: np.ndarray
    C_tf: np.ndarray
    window: TimeWindow


def time_limited_rhs(real, window):
    """Window-limited maps ``B_t = exp(calA calE^{-1} t) calB`` and
    ``C_t = calC exp(calE^{-1} calA t)``.

    A single exponential per endpoint serves both sides through
    ``exp(calA calE^{-1} t) = calE exp(calE^{-1} calA t) calE^{-1}``; the
    left endpoint ``t0 = 0`` short-circuits to the unpropagated maps.
    """
    calE, calA, calB, calC = real.calE, real.calA, real.calB, real.calC
    X = spla.solve(calE, calA)

    def maps(t):
        if t == 0.0:
            return calB.copy(), calC.copy()
        W = expm(X * t)
        Bt = calE @ (W @ spla.solve(calE, calB))
        Ct = calC @ W
        return Bt, Ct

    B_t0, C_t0 = maps(window.t0)
    B_tf, C_tf = maps(window.tf)
    return TimeLimitedRhs(B_t0=B_t0, B_tf=B_tf, C_t0=C_t0, C_tf=C_tf,
                          window=window)


def quadrature_gramian(real, band, points_per_interval=200, side="controllability"):
    """Frequency-domain quadrature of a band-limited Gramian.

    Composite Gauss-Legendre rule per interval applied to

        P_Omega = (1/pi) * integral_Omega Re(R(w) R(w)^H) dw,
        R(w) = (i w calE - calA)^{-1} calB,

    (the symmetric negative half of the band is folded into the weights).
    Returns a factor ``Z`` with ``P_Omega ~= Z Z^T``; the observability side
    uses conjugate-transposed solves against ``calC^T``.  Independent of the
    matrix-logarithm route, so it serves as a cross-check oracle.
    """
    if side not in ("controllability", "observability"):
        raise InvalidParams(f"unknown side {side!r}")
    _require_stable(real)
    calE, calA = real.calE, real.calA
    if side == "controllability":
        G = real.calB.astype(complex)
    else:
        G = real.calC.conj().T.astype(complex)
    cols = []
    x, w = np.polynomial.legendre.leggauss(points_per_interval)
    for a, b in band.intervals:
        nodes = 0.5 * (b - a) * x + 0.5 * (b + a)
        weights = 0.5 * (b - a) * w
        for wk, gk in zip(nodes, weights):
            S = 1j * wk * calE - calA
            if side == "controllability":
                R = spla.solve(S, G)
            else:
                R = spla.solve(S.conj().T, G)
            scale = np.sqrt(gk / np.pi)
            cols.append(scale * R.real)
            cols.append(scale * R.imag)
    return np.hstack(cols)
