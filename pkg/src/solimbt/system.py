"""Second-order LTI systems and their first-order realizations.

A second-order system is

    M x''(t) + E x'(t) + K x(t) = B_u u(t),
    y(t) = C_p x(t) + C_v x'(t),

with transfer function ``H(s) = (s C_v + C_p) (s^2 M + s E + K)^{-1} B_u``.
Reduction works on equivalent first-order realizations
``calE q' = calA q + calB u``, ``y = calC q`` with state ``q = [x; x']``:
either the first companion form (free invertible coupling block ``J``) or,
for symmetric positive definite ``M, E, K``, a strictly dissipative
realization whose symmetric part is definite.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as spla

from .errors import (
    DimensionMismatch,
    DimensionTooLarge,
    GammaOutOfRange,
    InvalidParams,
    NonFiniteState,
    NotSPD,
    SingularAtFrequency,
    SingularJ,
    SingularMass,
)

COMPANION = "companion"
STRICTLY_DISSIPATIVE = "strictly_dissipative"
GENERIC = "generic"


def _as_matrix(A, name, dtype=float):
    A = np.atleast_2d(np.asarray(A, dtype=dtype))
    if A.ndim != 2:
        raise DimensionMismatch(f"{name} must be a matrix, got ndim={A.ndim}")
    if not np.all(np.isfinite(A)):
        raise InvalidParams(f"{name} contains non-finite entries")
    return A


@dataclass
class SecondOrderSystem:
    """Container for the matrices of a second-order system.

    Treat instances as immutable; all consumers rely on the matrices not
    changing after construction.
    """

    M: np.ndarray
    E: np.ndarray
    K: np.ndarray
    B_u: np.ndarray
    C_p: np.ndarray
    C_v: np.ndarray

    @property
    def n(self):
        return self.M.shape[0]

    @property
    def m(self):
        return self.B_u.shape[1]

    @property
    def p(self):
        return self.C_p.shape[0]


@dataclass
class FirstOrderRealization:
    """First-order pencil realization ``calE q' = calA q + calB u``, ``y = calC q``.

    ``kind`` records how the realization was built (``"companion"``,
    ``"strictly_dissipative"`` or ``"generic"`` for realizations that do not
    come from a second-order system).  For the dissipative kind ``gamma``
    holds the shift used.
    """

    calE: np.ndarray
    calA: np.ndarray
    calB: np.ndarray
    calC: np.ndarray
    kind: str = GENERIC
    gamma: float | None = None
    _eigs: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def N(self):
        return self.calA.shape[0]

    @property
    def m(self):
        return self.calB.shape[1]

    @property
    def p(self):
        return self.calC.shape[0]

    def pencil_eigenvalues(self):
        """Eigenvalues of the pencil ``(calA, calE)``, cached after first use."""
        if self._eigs is None:
            self._eigs = spla.eig(self.calA, self.calE, right=False)
        return self._eigs


@dataclass
class Trajectory:
    """Sampled simulation result: ``outputs[k] = y(times[k])``."""

    times: np.ndarray
    outputs: np.ndarray
    states: np.ndarray | None = None


@dataclass
class StabilityReport:
    is_c_stable: bool
    max_real_part: float
    eigenvalues: np.ndarray
    marginal: np.ndarray


def make_second_order(M, E, K, B_u, C_p, C_v):
    """Validate and assemble a :class:`SecondOrderSystem`.

    Raises
    ------
    DimensionMismatch
        If the shapes are inconsistent.
    SingularMass
        If the smallest singular value of ``M`` is below ``1e-14 ||M||_F``.
    """
    M = _as_matrix(M, "M")
    E = _as_matrix(E, "E")
    K = _as_matrix(K, "K")
    B_u = _as_matrix(B_u, "B_u")
    C_p = _as_matrix(C_p, "C_p")
    C_v = _as_matrix(C_v, "C_v")
    n = M.shape[0]
    for name, A in (("M", M), ("E", E), ("K", K)):
        if A.shape != (n, n):
            raise DimensionMismatch(f"{name} must be {n}x{n}, got {A.shape}")
    if B_u.shape[0] != n:
        raise DimensionMismatch(f"B_u must have {n} rows, got {B_u.shape[0]}")
    if C_p.shape[1] != n or C_v.shape[1] != n:
        raise DimensionMismatch("C_p and C_v must have n columns")
    if C_p.shape[0] != C_v.shape[0]:
        raise DimensionMismatch("C_p and C_v must have the same number of rows")
    smin = spla.svdvals(M)[-1]
    if smin < 1e-14 * spla.norm(M):
        raise SingularMass(f"smallest singular value {smin:.3e} of M below threshold")
    return SecondOrderSystem(M, E, K, B_u, C_p, C_v)


def first_companion(sys, j="identity"):
    """First companion realization of a second-order system.

    The coupling block ``J`` in

        calE = [[J, 0], [0, M]],   calA = [[0, J], [-K, -E]],
        calB = [0; B_u],           calC = [C_p, C_v]

    is a free invertible choice that never changes the transfer function.

    Parameters
    ----------
    sys
        :class:`SecondOrderSystem`.
    j
        ``"identity"``, ``"neg_k"`` (uses ``-K``) or an explicit ``n x n``
        matrix.

    Raises
    ------
    SingularJ
        If the supplied coupling block is singular.
    """
    n = sys.n
    if isinstance(j, str):
        if j == "identity":
            J = np.eye(n)
        elif j == "neg_k":
            J = -sys.K
        else:
            raise InvalidParams(f"unknown companion coupling choice {j!r}")
    else:
        J = _as_matrix(j, "J")
        if J.shape != (n, n):
            raise DimensionMismatch(f"J must be {n}x{n}")
    smin = spla.svdvals(J)[-1]
    if smin < 1e-14 * max(spla.norm(J), 1.0):
        raise SingularJ("companion coupling block is singular")

    calE = np.block([[J, np.zeros((n, n))], [np.zeros((n, n)), sys.M]])
    calA = np.block([[np.zeros((n, n)), J], [-sys.K, -sys.E]])
    calB = np.vstack([np.zeros((n, sys.m)), sys.B_u])
    calC = np.hstack([sys.C_p, sys.C_v])
    return FirstOrderRealization(calE, calA, calB, calC, kind=COMPANION)


def _check_spd(A, name, tol=1e-10):
    if spla.norm(A - A.T) > tol * max(spla.norm(A), 1.0):
        raise NotSPD(f"{name} is not symmetric")
    w = spla.eigvalsh(0.5 * (A + A.T))
    if w[0] <= tol * max(abs(w[-1]), 1.0) * 1e-4:
        raise NotSPD(f"{name} is not positive definite (min eig {w[0]:.3e})")


def dissipativity_shift_bound(sys):
    """Upper bound of the admissible shift for the strictly dissipative form.

    Returns ``lambda_min(E (M + 1/4 E K^{-1} E)^{-1})``; any
    ``0 < gamma < bound`` yields a realization with symmetric positive
    definite ``calE`` and negative definite symmetric part of ``calA``.
    """
    n = sys.n
    inner = sys.M + 0.25 * sys.E @ spla.solve(sys.K, sys.E, assume_a="sym")
    # E and inner are SPD, so the product spectrum matches the symmetric
    # generalized problem E v = lambda inner v.
    w = spla.eigvalsh(0.5 * (sys.E + sys.E.T), 0.5 * (inner + inner.T))
    return float(w[0])


def strictly_dissipative(sys, gamma=None):
    """Strictly dissipative first-order realization.

    Requires symmetric positive definite ``M, E, K``.  Builds

        calE = [[K, g M], [g M, M]],
        calA = [[-g K, K - g E], [-K, -E + g M]],
        calB = [g B_u; B_u],     calC = [C_p, C_v],

    with shift ``g`` strictly inside ``(0, dissipativity_shift_bound(sys))``;
    by default half the bound.  ``calE`` is then SPD and
    ``calA + calA^T`` negative definite, which downstream projection solvers
    exploit.

    Raises
    ------
    NotSPD
        If any of ``M, E, K`` fails the definiteness check.
    GammaOutOfRange
        If an explicit shift lies outside the open admissible interval.
    """
    _check_spd(sys.M, "M")
    _check_spd(sys.E, "E")
    _check_spd(sys.K, "K")
    bound = dissipativity_shift_bound(sys)
    if gamma is None:
        gamma = 0.5 * bound
    if not (0.0 < gamma < bound):
        raise GammaOutOfRange(f"gamma={gamma:.6e} outside (0, {bound:.6e})")
    g = float(gamma)
    M, E, K = sys.M, sys.E, sys.K
    calE = np.block([[K, g * M], [g * M, M]])
    calA = np.block([[-g * K, K - g * E], [-K, -E + g * M]])
    calB = np.vstack([g * sys.B_u, sys.B_u])
    calC = np.hstack([sys.C_p, sys.C_v])
    return FirstOrderRealization(calE, calA, calB, calC,
                                 kind=STRICTLY_DISSIPATIVE, gamma=g)


def dissipative_backtransform_matrix(sys, gamma):
    """State-space transform mapping dissipative-form observability factors
    back to the companion form with identity coupling block.

    If ``Qd`` solves the observability equation for the dissipative
    realization, then ``T^T Qd T`` solves it for the companion form, with
    ``T = [[K, gamma I], [gamma M, I]]``.
    """
    n = sys.n
    return np.block([[sys.K, gamma * np.eye(n)],
                     [gamma * sys.M, np.eye(n)]])


def gramian_backtransform(Z, sys, gamma):
    """Apply the dissipative-to-companion observability transform to a factor.

    For ``Qd = Z Y Z^T`` the companion-form Gramian is
    ``(T^T Z) Y (T^T Z)^T``; this returns ``T^T Z``.
    """
    T = dissipative_backtransform_matrix(sys, gamma)
    if Z.shape[0] != T.shape[0]:
        raise DimensionMismatch("factor rows must equal the realization dimension")
    return T.T @ Z


def eval_transfer(obj, s):
    """Evaluate the transfer function at one or several complex points.

    Parameters
    ----------
    obj
        :class:`SecondOrderSystem` or :class:`FirstOrderRealization`.
    s
        Complex scalar or 1d array of points.

    Returns
    -------
    H
        ``(p, m)`` array for scalar ``s``, else ``(len(s), p, m)``.

    Raises
    ------
    SingularAtFrequency
        If a point coincides with a system pole within solver tolerance.
    """
    pts = np.atleast_1d(np.asarray(s, dtype=complex))
    scalar = np.ndim(s) == 0
    # exactly singular points produce inf/nan instead of LinAlgError on some
    # LAPACK paths; silence the numpy noise and catch them afterwards
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        if isinstance(obj, SecondOrderSystem):
            out = np.empty((pts.size, obj.p, obj.m), dtype=complex)
            for i, sk in enumerate(pts):
                A = sk * sk * obj.M + sk * obj.E + obj.K
                try:
                    X = spla.solve(A, obj.B_u.astype(complex))
                except spla.LinAlgError as exc:
                    raise SingularAtFrequency(f"s={sk} is a pole") from exc
                out[i] = (obj.C_p + sk * obj.C_v) @ X
        else:
            out = np.empty((pts.size, obj.p, obj.m), dtype=complex)
            for i, sk in enumerate(pts):
                try:
                    X = spla.solve(sk * obj.calE - obj.calA,
                                   obj.calB.astype(complex))
                except spla.LinAlgError as exc:
                    raise SingularAtFrequency(f"s={sk} is a pole") from exc
                out[i] = obj.calC @ X
    if not np.all(np.isfinite(out)):
        raise SingularAtFrequency("transfer evaluation overflowed near a pole")
    return out[0] if scalar else out


def generate_chain(n, masses=100.0, ground_stiffness=None, coupling_stiffness=2.0,
                   ground_damping=None, coupling_damping=5.0):
    """Mass-spring-damper chain benchmark.

    ``n`` masses in a row; mass ``i`` is tied to ground by a spring
    ``kappa_i`` and damper ``delta_i`` and to its right neighbour by a
    spring ``k_i`` and damper ``d_i``.  Stiffness assembly is the standard
    tridiagonal one: diagonal ``kappa_i + k_{i-1} + k_i`` (with
    ``k_0 = k_n = 0``), off-diagonal ``-k_i``; damping follows the same
    pattern.  The input is a force on the first mass and the outputs are the
    positions of masses 1, 2 and ``n-1``.

    Scalar parameters are broadcast; ``ground_stiffness``/``ground_damping``
    default to the heavier end-anchoring used throughout the examples
    (``kappa = 4`` and ``delta = 10`` at both ends, ``2`` and ``5`` inside).

    Raises
    ------
    InvalidParams
        For ``n < 2`` or non-positive masses, stiffnesses or dampings.
    """
    if n < 2:
        raise InvalidParams("chain needs at least two masses")

    def expand(val, size, name):
        arr = np.asarray(val, dtype=float)
        if arr.ndim == 0:
            arr = np.full(size, float(arr))
        if arr.shape != (size,):
            raise InvalidParams(f"{name} must be scalar or length {size}")
        if np.any(arr <= 0):
            raise InvalidParams(f"{name} must be positive")
        return arr

    if ground_stiffness is None:
        kappa = np.full(n, 2.0)
        kappa[0] = kappa[-1] = 4.0
    else:
        kappa = expand(ground_stiffness, n, "ground_stiffness")
    if ground_damping is None:
        delta = np.full(n, 5.0)
        delta[0] = delta[-1] = 10.0
    else:
        delta = expand(ground_damping, n, "ground_damping")
    mass = expand(masses, n, "masses")
    k = expand(coupling_stiffness, n - 1, "coupling_stiffness")
    d = expand(coupling_damping, n - 1, "coupling_damping")

    def tridiag(ground, coupling):
        pad = np.concatenate([[0.0], coupling, [0.0]])
        A = np.diag(ground + pad[:-1] + pad[1:])
        A -= np.diag(coupling, 1)
        A -= np.diag(coupling, -1)
        return A

    M = np.diag(mass)
    K = tridiag(kappa, k)
    E = tridiag(delta, d)
    B_u = np.zeros((n, 1))
    B_u[0, 0] = 1.0
    C_p = np.zeros((3, n))
    C_p[0, 0] = 1.0
    C_p[1, 1] = 1.0
    C_p[2, n - 2] = 1.0
    C_v = np.zeros((3, n))
    return SecondOrderSystem(M, E, K, B_u, C_p, C_v)


@dataclass
class StepSignal:
    """u(t) = amplitude * 1[t >= onset], applied to every input channel."""

    amplitude: float = 1.0
    onset: float = 0.0

    def sample(self, t, m):
        u = np.where(t >= self.onset, self.amplitude, 0.0)
        return np.tile(u[:, None], (1, m))


@dataclass
class SineSignal:
    """u(t) = amplitude * (sin(omega t) + offset) * 1[t >= onset]."""

    amplitude: float = 1.0
    omega: float = 1.0
    onset: float = 0.0
    offset: float = 0.0

    def sample(self, t, m):
        u = self.amplitude * (np.sin(self.omega * t) + self.offset)
        u = np.where(t >= self.onset, u, 0.0)
        return np.tile(u[:, None], (1, m))


@dataclass
class CustomSignal:
    """Explicit samples on the simulation grid, shape ``(len(t),)`` or ``(len(t), m)``."""

    samples: np.ndarray

    def sample(self, t, m):
        u = np.asarray(self.samples, dtype=float)
        if u.ndim == 1:
            u = np.tile(u[:, None], (1, m))
        if u.shape != (t.size, m):
            raise DimensionMismatch(f"custom samples must have shape ({t.size}, {m})")
        return u


def simulate(obj, signal, t, return_states=False):
    """Integrate the system response with the trapezoidal rule.

    Zero initial state.  The grid ``t`` must be uniformly spaced; one LU
    factorization of ``calE - h/2 calA`` is reused for all steps, so the run
    is deterministic for fixed inputs.

    Parameters
    ----------
    obj
        :class:`SecondOrderSystem` (simulated through its companion form) or
        :class:`FirstOrderRealization`.
    signal
        Object with ``sample(t, m) -> (len(t), m)``; see :class:`StepSignal`,
        :class:`SineSignal`, :class:`CustomSignal`.
    t
        Increasing, uniformly spaced time grid.

    Raises
    ------
    NonFiniteState
        If the state blows up during integration.
    """
    real = first_companion(obj) if isinstance(obj, SecondOrderSystem) else obj
    t = np.asarray(t, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise InvalidParams("time grid must be a 1d array with at least two points")
    h = t[1] - t[0]
    if h <= 0 or np.max(np.abs(np.diff(t) - h)) > 1e-10 * max(h, 1.0):
        raise InvalidParams("time grid must be uniformly spaced and increasing")

    U = signal.sample(t, real.m)
    N = real.N
    lhs = real.calE - 0.5 * h * real.calA
    rhs_mat = real.calE + 0.5 * h * real.calA
    lu, piv = spla.lu_factor(lhs)

    q = np.zeros(N)
    Y = np.empty((t.size, real.p))
    Y[0] = real.calC @ q
    states = np.empty((t.size, N)) if return_states else None
    if return_states:
        states[0] = q
    hB = 0.5 * h * real.calB
    # a blowing-up state overflows in the matmul first; keep that quiet and
    # report it as a typed error instead
    with np.errstate(over="ignore", invalid="ignore"):
        for kk in range(t.size - 1):
            b = rhs_mat @ q + hB @ (U[kk] + U[kk + 1])
            if not np.all(np.isfinite(b)):
                raise NonFiniteState(
                    f"state became non-finite at t={t[kk + 1]:.6g}")
            q = spla.lu_solve((lu, piv), b)
            if not np.all(np.isfinite(q)):
                raise NonFiniteState(
                    f"state became non-finite at t={t[kk + 1]:.6g}")
            Y[kk + 1] = real.calC @ q
            if return_states:
                states[kk + 1] = q
    return Trajectory(times=t, outputs=Y, states=states)


def check_stability(obj, guard=5000):
    """Dense eigenvalue-based stability check of the realization pencil.

    Second-order systems are checked through their companion form.  A report
    lists the pencil eigenvalues, the largest real part, strict c-stability,
    and the numerically marginal eigenvalues
    (``|Re| <= 1e-12 * max |lambda|``).

    Raises
    ------
    DimensionTooLarge
        If the realization dimension exceeds ``guard``.
    """
    real = first_companion(obj) if isinstance(obj, SecondOrderSystem) else obj
    if real.N > guard:
        raise DimensionTooLarge(f"dense eigensolve guard: N={real.N} > {guard}")
    lam = real.pencil_eigenvalues()
    finite = lam[np.isfinite(lam)]
    if finite.size < lam.size or finite.size == 0:
        return StabilityReport(False, np.inf, lam, np.array([]))
    scale = np.max(np.abs(finite))
    marginal = finite[np.abs(finite.real) <= 1e-12 * scale]
    max_re = float(np.max(finite.real))
    return StabilityReport(max_re < 0.0, max_re, finite, marginal)
