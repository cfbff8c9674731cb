"""End-to-end reduction pipeline and error reporting.

``reduce`` wires the stages together: optional spectral shift (for marginally
stable models), optional rational-interpolation pre-reduction (for scales
where dense Gramians are unaffordable), realization choice, Gramian flavor,
partitioning, one of the eight balancing formulas, truncation, and
back-substitution.  Error reports compare original and reduced models over a
frequency grid or a simulated trajectory, with separate maxima over a band
or window of interest.
"""

import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as spla

from . import balancing, gramians
from .errors import InvalidParams, SingularAtFrequency, SingularShiftedSystem
from .lyapunov import GramianFactor
from .matfun import FrequencyBand, TimeWindow
from .system import (
    SecondOrderSystem,
    check_stability,
    eval_transfer,
    first_companion,
    gramian_backtransform,
    make_second_order,
    simulate,
    strictly_dissipative,
)

METHODS = ("bt", "flbt", "tlbt")


def alpha_shift(sys, alpha):
    """Shift the frequency variable by ``alpha > 0``:

        E~ = E + 2 alpha M,  K~ = K + alpha E + alpha^2 M,
        C_p~ = C_p + alpha C_v,

    so the shifted transfer function satisfies ``H~(s) = H(s + alpha)`` and
    every pole moves left by ``alpha``.  Symmetric positive definiteness of
    ``M, E, K`` survives the shift.
    """
    if alpha < 0:
        raise InvalidParams("shift must be nonnegative")
    a = float(alpha)
    return make_second_order(
        sys.M, sys.E + 2 * a * sys.M, sys.K + a * sys.E + a * a * sys.M,
        sys.B_u, sys.C_p + a * sys.C_v, sys.C_v)


def alpha_backsubstitute(sys, alpha):
    """Exact inverse of :func:`alpha_shift` on (reduced) system matrices."""
    a = float(alpha)
    E = sys.E - 2 * a * sys.M
    K = sys.K - a * sys.E + a * a * sys.M
    return make_second_order(sys.M, E, K, sys.B_u,
                             sys.C_p - a * sys.C_v, sys.C_v)


def hybrid_prereduce(sys, omegas, tol=1e-12):
    """One-sided rational-interpolation pre-reduction.

    Collects input directions ``(s^2 M + s E + K)^{-1} B_u`` and dual output
    directions at ``s = i omega`` for every sample frequency, splits them
    into real and imaginary parts (closing the set under conjugation), and
    orthonormalizes with a rank cut at ``tol`` relative.  The congruence
    ``V^T (.) V`` preserves symmetry and definiteness, and the pre-reduced
    model interpolates the original transfer function at every sample point.

    Returns ``(pre_sys, V)``.

    Raises
    ------
    SingularShiftedSystem
        If a sample point coincides with a system pole.
    """
    omegas = np.asarray(omegas, dtype=float)
    if omegas.ndim != 1 or omegas.size == 0:
        raise InvalidParams("need a non-empty 1d array of sample frequencies")
    cols = []
    for w in omegas:
        s = 1j * w
        As = s * s * sys.M + s * sys.E + sys.K
        try:
            lu, piv = spla.lu_factor(As)
        except spla.LinAlgError as exc:
            raise SingularShiftedSystem(f"sample point {s} is a pole") from exc
        X = spla.lu_solve((lu, piv), sys.B_u.astype(complex))
        D = spla.lu_solve((lu, piv), (sys.C_p + s * sys.C_v).conj().T, trans=2)
        for blk in (X, D):
            if not np.all(np.isfinite(blk)):
                raise SingularShiftedSystem(f"sample point {s} is (near) a pole")
            cols.append(blk.real)
            cols.append(blk.imag)
    stack = np.hstack(cols)
    U, sv, _ = spla.svd(stack, full_matrices=False)
    keep = sv > tol * sv[0]
    V = U[:, keep]
    pre = make_second_order(
        V.T @ sys.M @ V, V.T @ sys.E @ V, V.T @ sys.K @ V,
        V.T @ sys.B_u, sys.C_p @ V, sys.C_v @ V)
    return pre, V


@dataclass
class ReductionConfig:
    """Configuration of one reduction run.

    ``method`` selects the Gramian flavor (``"bt"``, ``"flbt"``, ``"tlbt"``),
    ``formula`` one of the eight balancing variants.  ``order_tol`` drives
    adaptive order selection against the characteristic-value tail unless
    ``fixed_order`` is set.  ``realization`` is ``"companion"`` (coupling
    block ``j``: ``"identity"`` or ``"neg_k"``) or ``"dissipative"``
    (optional ``gamma``; the coupling block is then implicitly the
    identity).  ``hybrid`` holds ``(omegas, tol)`` sample frequencies for
    the pre-reduction step, or ``None``.
    """

    method: str = "bt"
    formula: str = "pv"
    band: FrequencyBand | None = None
    window: TimeWindow | None = None
    order_tol: float = 1e-4
    fixed_order: int | None = None
    realization: str = "companion"
    j: str = "identity"
    gamma: float | None = None
    alpha: float = 0.0
    solver: str = "sign"
    solver_options: dict = field(default_factory=dict)
    modified: bool = False
    variant: str = "left"
    hybrid: tuple | None = None

    def validate(self):
        if self.method not in METHODS:
            raise InvalidParams(f"unknown method {self.method!r}")
        if self.formula not in balancing.FORMULAS:
            raise InvalidParams(f"unknown formula {self.formula!r}")
        if self.method == "flbt" and self.band is None:
            raise InvalidParams("flbt needs a band")
        if self.method == "tlbt" and self.window is None:
            raise InvalidParams("tlbt needs a window")
        if self.realization not in ("companion", "dissipative"):
            raise InvalidParams(f"unknown realization {self.realization!r}")
        if self.solver not in ("sign", "projection"):
            raise InvalidParams(f"unknown solver {self.solver!r}")
        if self.modified and self.method == "bt":
            raise InvalidParams("modified Gramians apply to flbt/tlbt only")
        if self.modified and self.solver == "projection":
            raise InvalidParams("modified Gramians need the dense sign solver")


@dataclass
class ReducedModel:
    """Reduced system plus reduction provenance."""

    system: SecondOrderSystem
    r: int
    formula: str
    method: str
    sigma: np.ndarray
    truncated_tail: float
    stable: bool
    details: dict = field(default_factory=dict)


def reduce(sys, config):
    """Run the full reduction pipeline on a second-order system.

    Returns a :class:`ReducedModel`; an unstable reduced model is reported
    through its ``stable`` flag, never repaired or rejected.
    """
    config.validate()
    timings = {}
    t_total = time.perf_counter()

    work = sys
    if config.alpha > 0.0:
        work = alpha_shift(work, config.alpha)
    V_pre = None
    if config.hybrid is not None:
        omegas, pre_tol = config.hybrid
        if config.method == "flbt" and config.band is not None:
            lo, hi = config.band.hull
            om = np.asarray(omegas, dtype=float)
            if om.min() >= lo and om.max() <= hi:
                warnings.warn(
                    "hybrid sample points restricted to the band; "
                    "out-of-band behaviour of the pre-reduced model is "
                    "uncontrolled", stacklevel=2)
        t0 = time.perf_counter()
        work, V_pre = hybrid_prereduce(work, omegas, tol=pre_tol)
        timings["prereduce"] = time.perf_counter() - t0

    if config.realization == "dissipative":
        real = strictly_dissipative(work, gamma=config.gamma)
        J = np.eye(work.n)
    else:
        real = first_companion(work, j=config.j)
        J = np.eye(work.n) if config.j == "identity" else -work.K

    t0 = time.perf_counter()
    if config.modified:
        pair = gramians.modified_gramians(
            real, band=config.band if config.method == "flbt" else None,
            window=config.window if config.method == "tlbt" else None,
            variant=config.variant, solver_options=config.solver_options)
    elif config.method == "bt":
        pair = gramians.infinite_gramians(real, solver=config.solver,
                                          solver_options=config.solver_options)
    elif config.method == "flbt":
        pair = gramians.frequency_limited_gramians(
            real, config.band, variant=config.variant, solver=config.solver,
            solver_options=config.solver_options)
    else:
        pair = gramians.time_limited_gramians(
            real, config.window, solver=config.solver,
            solver_options=config.solver_options)
    timings["gramians"] = time.perf_counter() - t0

    if config.realization == "dissipative":
        obs = pair.observability
        pair.observability = GramianFactor(
            gramian_backtransform(obs.Z, work, real.gamma), obs.Y)

    t0 = time.perf_counter()
    parts = gramians.partition(pair, work.n)
    res = balancing.second_order_projectors(
        parts, J, work.M, config.formula,
        order_tol=config.order_tol, fixed_r=config.fixed_order)
    if config.formula == "so":
        rom_sys = balancing.so_reconstruct(work, J, res)
    else:
        rom_sys = balancing.apply_projection(work, res.W, res.T)
    timings["balancing"] = time.perf_counter() - t0

    if config.alpha > 0.0:
        rom_sys = alpha_backsubstitute(rom_sys, config.alpha)
    report = check_stability(rom_sys)
    timings["total"] = time.perf_counter() - t_total

    details = {
        "timings": timings,
        "gramian_info": pair.info,
        "realization": config.realization,
        "solver": config.solver,
        "alpha": config.alpha,
        "modified": config.modified,
        "max_real_part": report.max_real_part,
        "band": config.band,
        "window": config.window,
    }
    if config.realization == "dissipative":
        details["gamma"] = real.gamma
    if V_pre is not None:
        details["prereduced_order"] = V_pre.shape[1]
    return ReducedModel(
        system=rom_sys, r=res.r, formula=config.formula, method=config.method,
        sigma=res.sigma, truncated_tail=res.truncated_tail,
        stable=report.is_c_stable, details=details)


@dataclass
class ErrorReport:
    """Pointwise and aggregate model errors over a grid.

    Relative entries are NaN where the reference norm falls below
    ``1e-14 x`` its maximum; aggregate relative maxima are ``None`` when no
    valid point exists, and local maxima are ``None`` without a band/window.
    """

    kind: str
    grid: np.ndarray
    orig_norm: np.ndarray
    abs_err: np.ndarray
    rel_err: np.ndarray
    global_max_abs: float
    global_max_rel: float | None
    local_max_abs: float | None
    local_max_rel: float | None
    rom_order: int | None = None
    rom_stable: bool | None = None
    skipped: list = field(default_factory=list)


def _unwrap(model):
    return model.system if isinstance(model, ReducedModel) else model


def _masked_max(values, mask):
    vals = values[mask]
    vals = vals[np.isfinite(vals)]
    return float(np.max(vals)) if vals.size else None


def frequency_error_report(orig, rom, wmin, wmax, points, band=None, threads=None):
    """Spectral-norm transfer-function errors over a logarithmic grid.

    ``threads`` defaults to the ``SOLIMBT_THREADS`` environment variable and
    caps the parallelism of the sweep; results are merged in grid order
    either way.  Points where either model is singular are skipped and
    recorded.
    """
    orig = _unwrap(orig)
    rom_model = rom
    rom = _unwrap(rom)
    omega = np.logspace(np.log10(wmin), np.log10(wmax), points)
    if threads is None:
        threads = int(os.environ.get("SOLIMBT_THREADS", "1"))

    def norms(w):
        try:
            Ho = eval_transfer(orig, 1j * w)
            Hr = eval_transfer(rom, 1j * w)
        except SingularAtFrequency:
            return None
        return (np.linalg.norm(Ho, 2), np.linalg.norm(Ho - Hr, 2))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(norms, omega))
    else:
        results = [norms(w) for w in omega]

    skipped = [i for i, r in enumerate(results) if r is None]
    valid = np.array([r is not None for r in results])
    orig_norm = np.full(omega.shape, np.nan)
    abs_err = np.full(omega.shape, np.nan)
    for i, r in enumerate(results):
        if r is not None:
            orig_norm[i], abs_err[i] = r
    scale = np.nanmax(orig_norm) if valid.any() else 0.0
    with np.errstate(invalid="ignore", divide="ignore"):
        rel_err = np.where(orig_norm >= 1e-14 * scale, abs_err / orig_norm, np.nan)

    in_band = band.mask(omega) if band is not None else None
    report = check_stability(rom)
    return ErrorReport(
        kind="frequency", grid=omega, orig_norm=orig_norm,
        abs_err=abs_err, rel_err=rel_err,
        global_max_abs=_masked_max(abs_err, valid) or 0.0,
        global_max_rel=_masked_max(rel_err, valid),
        local_max_abs=_masked_max(abs_err, valid & in_band) if band is not None else None,
        local_max_rel=_masked_max(rel_err, valid & in_band) if band is not None else None,
        rom_order=getattr(rom_model, "r", None),
        rom_stable=report.is_c_stable, skipped=skipped)


def time_error_report(orig, rom, signal, t, window=None):
    """Output-space errors between simulated trajectories on a shared grid.

    Both models are integrated with the same scheme and step, so the
    comparison isolates the reduction error.  Divergence of either model
    propagates as :class:`~solimbt.errors.NonFiniteState`.
    """
    orig = _unwrap(orig)
    rom_model = rom
    rom = _unwrap(rom)
    traj_o = simulate(orig, signal, t)
    traj_r = simulate(rom, signal, t)
    diff = traj_o.outputs - traj_r.outputs
    abs_err = np.linalg.norm(diff, axis=1)
    orig_norm = np.linalg.norm(traj_o.outputs, axis=1)
    scale = np.max(orig_norm)
    with np.errstate(invalid="ignore", divide="ignore"):
        rel_err = np.where(orig_norm >= 1e-14 * scale, abs_err / orig_norm, np.nan)
    valid = np.ones(t.shape, dtype=bool)
    in_win = None
    if window is not None:
        in_win = (t >= window.t0) & (t <= window.tf)
    report = check_stability(rom)
    return ErrorReport(
        kind="time", grid=np.asarray(t), orig_norm=orig_norm,
        abs_err=abs_err, rel_err=rel_err,
        global_max_abs=float(np.max(abs_err)),
        global_max_rel=_masked_max(rel_err, valid),
        local_max_abs=_masked_max(abs_err, in_win) if window is not None else None,
        local_max_rel=_masked_max(rel_err, valid & in_win) if window is not None else None,
        rom_order=getattr(rom_model, "r", None),
        rom_stable=report.is_c_stable)
