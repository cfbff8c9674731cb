"""Gramian pairs of every flavor, partitioning and characteristic values."""

import numpy as np
import pytest
import scipy.linalg as spla
from numpy.testing import assert_allclose

import solimbt as slt
from solimbt import errors
from solimbt.gramians import definite_surrogate

from helpers import min_eig, stable_generic


def _scalar_so(M=1.0, E=2.0, K=1.0):
    return slt.make_second_order([[M]], [[E]], [[K]], [[1.0]],
                                 [[1.0]], [[0.0]])


def test_scalar_infinite_pair_frozen():
    # M = 1, E = 2, K = 1 (critically damped oscillator), companion form with
    # identity coupling block.  Solving the 2x2 Lyapunov equations by hand:
    #   P = diag(1/4, 1/4),   Q = [[5/4, 1/2], [1/2, 1/4]].
    real = slt.first_companion(_scalar_so())
    pair = slt.infinite_gramians(real)
    assert_allclose(pair.controllability.matrix(), 0.25 * np.eye(2),
                    rtol=0, atol=1e-12)
    assert_allclose(pair.observability.matrix(),
                    np.array([[1.25, 0.5], [0.5, 0.25]]), rtol=0, atol=1e-12)
    assert pair.flavor == "infinite"


def test_scalar_characteristic_values_frozen():
    # Rank-one products: sigma_pos = sqrt(q11 p11) = sqrt(5)/4,
    # sigma_vel = sqrt(q22 p22) = 1/4, and the mixed kinds swap the blocks.
    sys = _scalar_so()
    pair = slt.infinite_gramians(slt.first_companion(sys))
    parts = slt.partition(pair, sys.n)
    vals = slt.characteristic_values(parts, np.eye(1), sys.M)
    assert set(vals) == {"position", "position_velocity",
                         "velocity_position", "velocity"}
    assert vals["position"].values[0] == pytest.approx(np.sqrt(5) / 4, abs=1e-12)
    assert vals["velocity"].values[0] == pytest.approx(0.25, abs=1e-12)
    assert vals["position_velocity"].values[0] == pytest.approx(0.25, abs=1e-12)
    assert vals["velocity_position"].values[0] == pytest.approx(np.sqrt(5) / 4,
                                                                abs=1e-12)
    # anything beyond the first value of a rank-one product is noise
    for cv in vals.values():
        assert np.all(cv.values[1:] < 1e-12)


def test_scalar_unit_triple_frozen():
    # M = E = K = 1: by hand P = I/2 and Q = [[1, 1/2], [1/2, 1/2]]; also
    # cross-checked against the dense reference solver.
    real = slt.first_companion(_scalar_so(E=1.0))
    pair = slt.infinite_gramians(real)
    assert_allclose(pair.controllability.matrix(), 0.5 * np.eye(2),
                    rtol=0, atol=1e-12)
    assert_allclose(pair.observability.matrix(),
                    np.array([[1.0, 0.5], [0.5, 0.5]]), rtol=0, atol=1e-12)
    Pref = slt.solve_lyap_dense_oracle(real.calA, real.calE,
                                       real.calB @ real.calB.T)
    assert_allclose(pair.controllability.matrix(), Pref, atol=1e-12)


def test_band_pair_matches_oracle():
    rng = np.random.default_rng(10)
    real = stable_generic(rng, 10, m=2, p=2)
    band = slt.FrequencyBand([(0.4, 1.2), (2.0, 3.0)])
    pair = slt.frequency_limited_gramians(real, band)
    rhs = slt.freq_limited_rhs(real, band)
    Pref = slt.solve_lyap_dense_oracle(
        real.calA, real.calE,
        rhs.B_lim @ real.calB.T + real.calB @ rhs.B_lim.T)
    Qref = slt.solve_lyap_dense_oracle(
        real.calA.T, real.calE.T,
        rhs.C_lim.T @ real.calC + real.calC.T @ rhs.C_lim)
    assert_allclose(pair.controllability.matrix(), Pref, rtol=1e-8, atol=1e-10)
    assert_allclose(pair.observability.matrix(), Qref, rtol=1e-8, atol=1e-10)
    assert pair.band is band


def test_band_pair_variant_right():
    rng = np.random.default_rng(11)
    real = stable_generic(rng, 8)
    band = slt.FrequencyBand([(0.5, 1.5)])
    left = slt.frequency_limited_gramians(real, band, variant="left")
    right = slt.frequency_limited_gramians(real, band, variant="right")
    assert_allclose(left.controllability.matrix(),
                    right.controllability.matrix(), rtol=1e-8, atol=1e-10)


def test_window_pair_matches_oracle():
    rng = np.random.default_rng(12)
    real = stable_generic(rng, 9, m=1, p=2)
    win = slt.TimeWindow(0.3, 2.0)
    pair = slt.time_limited_gramians(real, win)
    rhs = slt.time_limited_rhs(real, win)
    Pref = slt.solve_lyap_dense_oracle(
        real.calA, real.calE,
        rhs.B_t0 @ rhs.B_t0.T - rhs.B_tf @ rhs.B_tf.T)
    Qref = slt.solve_lyap_dense_oracle(
        real.calA.T, real.calE.T,
        rhs.C_t0.T @ rhs.C_t0 - rhs.C_tf.T @ rhs.C_tf)
    assert_allclose(pair.controllability.matrix(), Pref, rtol=1e-8, atol=1e-10)
    assert_allclose(pair.observability.matrix(), Qref, rtol=1e-8, atol=1e-10)


def test_limits_recover_classical_gramians():
    rng = np.random.default_rng(13)
    real = stable_generic(rng, 10, m=2, p=2)
    full = slt.infinite_gramians(real)
    P = full.controllability.matrix()
    wide = slt.frequency_limited_gramians(real, slt.FrequencyBand([(0.0, 1e6)]))
    assert spla.norm(wide.controllability.matrix() - P) <= 1e-3 * spla.norm(P)
    late = slt.time_limited_gramians(real, slt.TimeWindow(0.0, 50.0))
    assert spla.norm(late.controllability.matrix() - P) <= 1e-10 * spla.norm(P)


def test_definite_surrogate():
    rng = np.random.default_rng(14)
    G = rng.standard_normal((8, 3))
    indef = slt.IndefiniteRhs(G, np.diag([1.0, 1.0, -1.0]))
    R = definite_surrogate(indef)
    D = R @ R.T - indef.dense()
    assert min_eig(D) >= -1e-12 * spla.norm(R @ R.T)
    # a definite right-hand side passes through unchanged
    dfn = slt.IndefiniteRhs.definite(G)
    R = definite_surrogate(dfn)
    assert_allclose(R @ R.T, G @ G.T, rtol=1e-12, atol=1e-12)


def test_modified_dominates_limited():
    sys = slt.generate_chain(6)
    real = slt.first_companion(sys)
    band = slt.FrequencyBand([(0.05, 0.3)])
    lim = slt.frequency_limited_gramians(real, band)
    mod = slt.modified_gramians(real, band=band)
    for attr in ("controllability", "observability"):
        M = getattr(mod, attr).matrix()
        L = getattr(lim, attr).matrix()
        assert min_eig(M - L) >= -1e-10 * spla.norm(M)
    assert mod.flavor == "band_modified"

    win = slt.TimeWindow(0.0, 25.0)
    lim = slt.time_limited_gramians(real, win)
    mod = slt.modified_gramians(real, window=win)
    for attr in ("controllability", "observability"):
        M = getattr(mod, attr).matrix()
        L = getattr(lim, attr).matrix()
        assert min_eig(M - L) >= -1e-10 * spla.norm(M)
    assert mod.flavor == "window_modified"


def test_modified_validation():
    real = slt.first_companion(slt.generate_chain(3))
    with pytest.raises(errors.InvalidParams):
        slt.modified_gramians(real)
    with pytest.raises(errors.InvalidParams):
        slt.modified_gramians(real, band=slt.FrequencyBand([(0.1, 1.0)]),
                              window=slt.TimeWindow(0.0, 1.0))


def test_partition_roundtrip():
    sys = slt.generate_chain(4)
    pair = slt.infinite_gramians(slt.first_companion(sys))
    parts = slt.partition(pair, sys.n)
    R = pair.controllability.cholesky_like()
    L = pair.observability.cholesky_like()
    assert_allclose(np.vstack([parts.R_p, parts.R_v]), R)
    assert_allclose(np.vstack([parts.L_p, parts.L_v]), L)
    with pytest.raises(errors.DimensionMismatch):
        slt.partition(pair, 3)


def test_projection_solver_dispatch():
    sys = slt.generate_chain(5)
    real = slt.strictly_dissipative(sys)
    band = slt.FrequencyBand([(0.05, 0.3)])
    sign = slt.frequency_limited_gramians(real, band)
    proj = slt.frequency_limited_gramians(real, band, solver="projection")
    assert_allclose(proj.controllability.matrix(),
                    sign.controllability.matrix(), rtol=1e-6, atol=1e-10)
    assert set(proj.info) == {"controllability", "observability"}
    assert "dim" in proj.info["controllability"]
    with pytest.raises(errors.InvalidParams):
        slt.infinite_gramians(real, solver="magic")
