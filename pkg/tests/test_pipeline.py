"""Reduction pipeline: shifts, hybrid pre-reduction, reduce(), error reports."""

import warnings

import numpy as np
import pytest
import scipy.linalg as spla
from numpy.testing import assert_allclose

import solimbt as slt
from solimbt import errors

from helpers import random_second_order


def test_alpha_shift_roundtrip():
    rng = np.random.default_rng(0)
    sys = random_second_order(rng, 5, m=2, p=2)
    back = slt.alpha_backsubstitute(slt.alpha_shift(sys, 0.3), 0.3)
    for a, b in ((sys.M, back.M), (sys.E, back.E), (sys.K, back.K),
                 (sys.B_u, back.B_u), (sys.C_p, back.C_p), (sys.C_v, back.C_v)):
        assert spla.norm(a - b) <= 1e-14 * max(spla.norm(a), 1.0)


def test_alpha_shift_moves_the_argument():
    # H_shifted(s) = H(s + alpha)
    rng = np.random.default_rng(1)
    sys = random_second_order(rng, 4, m=1, p=2)
    shifted = slt.alpha_shift(sys, 0.2)
    pts = 1j * np.array([0.1, 1.0, 3.0])
    assert_allclose(slt.eval_transfer(shifted, pts),
                    slt.eval_transfer(sys, pts + 0.2), rtol=1e-11, atol=1e-13)
    with pytest.raises(errors.InvalidParams):
        slt.alpha_shift(sys, -0.1)


def test_hybrid_prereduce_interpolates():
    sys = slt.generate_chain(40)
    omegas = np.array([0.05, 0.1, 0.2, 0.3])
    pre, V = slt.hybrid_prereduce(sys, omegas)
    assert pre.n == V.shape[1] < sys.n
    assert_allclose(V.T @ V, np.eye(pre.n), atol=1e-12)
    H = slt.eval_transfer(sys, 1j * omegas)
    Hp = slt.eval_transfer(pre, 1j * omegas)
    scale = np.max([np.linalg.norm(h, 2) for h in H])
    assert np.max([np.linalg.norm(d, 2) for d in H - Hp]) <= 1e-10 * scale
    # symmetry/definiteness survive the congruence
    assert spla.eigvalsh(pre.M)[0] > 0
    assert spla.norm(pre.K - pre.K.T) <= 1e-12 * spla.norm(pre.K)


def test_hybrid_prereduce_pole_and_validation():
    undamped = slt.make_second_order([[1.0]], [[0.0]], [[1.0]], [[1.0]],
                                     [[1.0]], [[0.0]])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(errors.SingularShiftedSystem):
            slt.hybrid_prereduce(undamped, np.array([1.0]))  # pole at +-i
    with pytest.raises(errors.InvalidParams):
        slt.hybrid_prereduce(undamped, np.array([]))


def test_config_validation():
    band = slt.FrequencyBand([(0.1, 1.0)])
    win = slt.TimeWindow(0.0, 1.0)
    bad = [
        dict(method="nope"),
        dict(formula="nope"),
        dict(method="flbt"),                      # band missing
        dict(method="tlbt"),                      # window missing
        dict(realization="nope"),
        dict(solver="nope"),
        dict(method="bt", modified=True),
        dict(method="flbt", band=band, modified=True, solver="projection"),
    ]
    for kwargs in bad:
        with pytest.raises(errors.InvalidParams):
            slt.ReductionConfig(**kwargs).validate()
    slt.ReductionConfig(method="flbt", band=band).validate()
    slt.ReductionConfig(method="tlbt", window=win).validate()


def test_reduce_bt_basic():
    sys = slt.generate_chain(8)
    rom = slt.reduce(sys, slt.ReductionConfig(method="bt", formula="pv"))
    assert isinstance(rom.system, slt.SecondOrderSystem)
    assert 1 <= rom.r < 8
    assert rom.method == "bt" and rom.formula == "pv"
    assert rom.sigma.size >= rom.r
    assert rom.truncated_tail >= 0.0
    assert rom.stable
    for key in ("timings", "gramian_info", "realization", "solver",
                "max_real_part"):
        assert key in rom.details
    assert "total" in rom.details["timings"]


def test_reduce_band_and_window_methods():
    sys = slt.generate_chain(8)
    band = slt.FrequencyBand([(0.05, 0.3)])
    win = slt.TimeWindow(0.0, 20.0)
    flbt = slt.reduce(sys, slt.ReductionConfig(method="flbt", band=band))
    assert flbt.details["band"] is band
    tlbt = slt.reduce(sys, slt.ReductionConfig(method="tlbt", window=win))
    assert tlbt.details["window"] is win
    assert flbt.r >= 1 and tlbt.r >= 1


def test_reduce_every_formula_runs():
    sys = slt.generate_chain(8)
    band = slt.FrequencyBand([(0.05, 0.3)])
    pts = 1j * np.logspace(-2, 0, 10)
    H = slt.eval_transfer(sys, pts)
    scale = np.max([np.linalg.norm(h, 2) for h in H])
    for formula in slt.FORMULAS:
        rom = slt.reduce(sys, slt.ReductionConfig(
            method="flbt", band=band, formula=formula, fixed_order=4))
        assert rom.r == 4
        assert rom.system.n == 4
        # sanity only: the reduced response stays within an order of
        # magnitude of the original's scale
        Hr = slt.eval_transfer(rom.system, pts)
        assert np.max([np.linalg.norm(h, 2) for h in Hr]) <= 10 * scale


def test_reduce_dissipative_route_matches_companion():
    sys = slt.generate_chain(10)
    band = slt.FrequencyBand([(0.05, 0.3)])
    kw = dict(method="flbt", band=band, formula="pv", fixed_order=3)
    comp = slt.reduce(sys, slt.ReductionConfig(**kw))
    diss = slt.reduce(sys, slt.ReductionConfig(realization="dissipative", **kw))
    assert "gamma" in diss.details
    pts = 1j * np.logspace(-2, 0, 20)
    Hc = slt.eval_transfer(comp.system, pts)
    Hd = slt.eval_transfer(diss.system, pts)
    scale = np.max([np.linalg.norm(h, 2) for h in Hc])
    assert np.max([np.linalg.norm(d, 2) for d in Hc - Hd]) <= 1e-8 * scale


def test_reduce_with_alpha_and_neg_k():
    sys = slt.generate_chain(6)
    rom = slt.reduce(sys, slt.ReductionConfig(method="bt", alpha=0.01,
                                              j="neg_k", fixed_order=3))
    assert rom.details["alpha"] == 0.01
    assert rom.r == 3
    assert np.all(np.isfinite(rom.system.K))


def test_reduce_hybrid_band_warning():
    sys = slt.generate_chain(20)
    band = slt.FrequencyBand([(0.05, 0.3)])
    inside = np.array([0.1, 0.2])
    cfg = slt.ReductionConfig(method="flbt", band=band, fixed_order=2,
                              hybrid=(inside, 1e-12))
    with pytest.warns(UserWarning):
        rom = slt.reduce(sys, cfg)
    assert rom.details["prereduced_order"] < 20

    straddling = np.array([0.01, 0.1, 1.0])
    cfg = slt.ReductionConfig(method="flbt", band=band, fixed_order=2,
                              hybrid=(straddling, 1e-12))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        slt.reduce(sys, cfg)


def test_frequency_report_identical_models():
    sys = slt.generate_chain(5)
    band = slt.FrequencyBand([(0.05, 0.3)])
    rep = slt.frequency_error_report(sys, sys, 0.01, 1.0, 40, band=band)
    assert rep.kind == "frequency"
    assert rep.grid.size == 40
    assert rep.global_max_abs <= 1e-12
    assert rep.global_max_rel <= 1e-12
    assert rep.local_max_abs is not None
    assert rep.skipped == []
    assert rep.rom_order is None  # plain system, no reduction metadata
    assert rep.rom_stable


def test_frequency_report_reduced_model_metadata():
    sys = slt.generate_chain(6)
    rom = slt.reduce(sys, slt.ReductionConfig(method="bt", fixed_order=2))
    rep = slt.frequency_error_report(sys, rom, 0.01, 1.0, 25)
    assert rep.rom_order == 2
    assert rep.local_max_abs is None  # no band given
    assert rep.global_max_abs > 0


def test_frequency_report_skips_poles():
    undamped = slt.make_second_order([[1.0]], [[0.0]], [[1.0]], [[1.0]],
                                     [[1.0]], [[0.0]])
    rep = slt.frequency_error_report(undamped, undamped, 1.0, 10.0, 5)
    assert rep.skipped == [0]  # the first grid point sits on the pole
    assert np.isnan(rep.orig_norm[0])
    assert np.isfinite(rep.orig_norm[1:]).all()


def test_frequency_report_zero_reference():
    silent = slt.make_second_order([[1.0]], [[1.0]], [[1.0]], [[1.0]],
                                   [[0.0]], [[0.0]])
    rep = slt.frequency_error_report(silent, silent, 0.1, 1.0, 10)
    assert rep.global_max_rel is None
    assert np.isnan(rep.rel_err).all()


def test_frequency_report_threads(monkeypatch):
    sys = slt.generate_chain(5)
    rom = slt.reduce(sys, slt.ReductionConfig(method="bt", fixed_order=2))
    serial = slt.frequency_error_report(sys, rom, 0.01, 1.0, 30)
    monkeypatch.setenv("SOLIMBT_THREADS", "4")
    threaded = slt.frequency_error_report(sys, rom, 0.01, 1.0, 30)
    assert np.array_equal(serial.abs_err, threaded.abs_err)
    assert serial.global_max_abs == threaded.global_max_abs


def test_time_report():
    sys = slt.generate_chain(5)
    rom = slt.reduce(sys, slt.ReductionConfig(method="bt", fixed_order=3))
    t = np.linspace(0.0, 40.0, 801)
    win = slt.TimeWindow(0.0, 10.0)
    rep = slt.time_error_report(sys, rom, slt.StepSignal(), t, window=win)
    assert rep.kind == "time"
    assert rep.global_max_abs >= rep.local_max_abs
    assert np.isnan(rep.rel_err[0])  # both trajectories start at rest
    assert rep.rom_order == 3

    same = slt.time_error_report(sys, sys, slt.StepSignal(), t)
    assert same.global_max_abs == 0.0
    assert same.local_max_abs is None


def test_time_report_divergence_propagates():
    stable = slt.generate_chain(2)
    runaway = slt.make_second_order(np.eye(2), -2.0 * np.eye(2), np.eye(2),
                                    np.ones((2, 1)), np.ones((3, 2)),
                                    np.zeros((3, 2)))
    t = np.arange(0.0, 800.0, 0.5)
    with pytest.raises(errors.NonFiniteState):
        slt.time_error_report(stable, runaway, slt.StepSignal(), t)
