import numpy as np
import pytest

from vpfp.errors import ConfigError
from vpfp.evolution import cfl_limit
from vpfp.grid import diff1, integrate, weighted_norm_sq
from vpfp.probes import (TimeSeries, default_decay_datum, default_rough_datum,
                         default_smooth_datum, fit_exponential_rate,
                         fit_loglog_slope, run_decay_probe, run_hypo_probe)


# ---------------------------------------------------------------------------
# fitters on synthetic series (the fitters' own acceptance gate)
# ---------------------------------------------------------------------------

def test_exponential_fit_exact():
    t = np.linspace(0.0, 5.0, 50)
    s = TimeSeries(t, 3.0 * np.exp(-0.7 * t), label="y")
    rate, r2 = fit_exponential_rate(s, (0.0, 5.0))
    assert rate == pytest.approx(0.7, abs=1e-9)
    assert r2 > 1.0 - 1e-12


def test_exponential_fit_constant_series():
    t = np.linspace(0.0, 2.0, 40)
    rate, r2 = fit_exponential_rate(TimeSeries(t, np.full(40, 2.5)), (0.0, 2.0))
    assert rate == pytest.approx(0.0, abs=1e-12)
    assert r2 == 1.0


def test_exponential_fit_tolerates_small_ripple():
    t = np.linspace(0.0, 5.0, 200)
    y = np.exp(-t) * (1.0 + 0.01 * np.sin(t))
    rate, _ = fit_exponential_rate(TimeSeries(t, y), (0.0, 5.0))
    assert rate == pytest.approx(1.0, abs=0.02)


def test_loglog_fit_exact_power_laws():
    t = np.geomspace(0.01, 1.0, 60)
    slope, r2 = fit_loglog_slope(TimeSeries(t, t**-3.0), (0.01, 1.0))
    assert slope == pytest.approx(-3.0, abs=1e-9)
    assert r2 > 1.0 - 1e-12
    slope, _ = fit_loglog_slope(TimeSeries(t, 5.0 / t), (0.01, 1.0))
    assert slope == pytest.approx(-1.0, abs=1e-9)


def test_loglog_fit_with_subleading_correction():
    t = np.geomspace(0.01, 0.1, 40)
    slope, _ = fit_loglog_slope(TimeSeries(t, t**-3.0 * (1.0 + t)), (0.01, 0.1))
    assert -3.05 <= slope <= -2.9


def test_fit_window_needs_ten_samples():
    t = np.linspace(0.0, 1.0, 9)
    with pytest.raises(ConfigError, match="at least 10"):
        fit_exponential_rate(TimeSeries(t, np.exp(-t)), (0.0, 1.0))
    # a wide series still fails if the *window* is too thin
    t = np.linspace(0.0, 10.0, 101)
    with pytest.raises(ConfigError, match="at least 10"):
        fit_exponential_rate(TimeSeries(t, np.exp(-t)), (0.0, 0.5))


def test_fit_rejects_nonpositive_values():
    t = np.linspace(0.0, 1.0, 20)
    y = np.exp(-t)
    y[7] = 0.0
    with pytest.raises(ConfigError, match="positive"):
        fit_exponential_rate(TimeSeries(t, y), (0.0, 1.0))


def test_loglog_fit_needs_positive_times():
    t = np.linspace(-0.5, 1.0, 30)
    with pytest.raises(ConfigError, match="positive times"):
        fit_loglog_slope(TimeSeries(t, np.full(30, 2.0)), (-0.5, 1.0))


def test_timeseries_validation_and_restrict():
    with pytest.raises(ConfigError, match="equal length"):
        TimeSeries(np.arange(3.0), np.arange(4.0))
    with pytest.raises(ConfigError, match="increasing"):
        TimeSeries(np.array([0.0, 2.0, 1.0]), np.ones(3))
    s = TimeSeries(np.linspace(0, 1, 11), np.linspace(1, 2, 11), label="m")
    sub = s.restrict((0.25, 0.65))
    assert sub.label == "m"
    assert sub.times.size == 4
    assert sub.times[0] >= 0.25 and sub.times[-1] <= 0.65


# ---------------------------------------------------------------------------
# default probe data
# ---------------------------------------------------------------------------

def test_default_data_mean_zero_unit_norm(eq64):
    for fn in (default_decay_datum, default_rough_datum, default_smooth_datum):
        hv = fn(eq64)
        assert integrate(eq64.grid, hv * eq64.f_inf) == pytest.approx(0.0, abs=1e-12)
        assert weighted_norm_sq(eq64.grid, hv, eq64.f_inf) == pytest.approx(1.0, rel=1e-12)


def grad_energy(eq, hv, axis):
    step = eq.grid.dx if axis == 0 else eq.grid.dv
    return weighted_norm_sq(eq.grid, diff1(hv, step, axis=axis), eq.f_inf)


def test_rough_datum_gradient_blows_up_under_refinement(eq64, eq128):
    """Operational roughness: unit-norm datum, diverging discrete gradient."""
    gx64 = grad_energy(eq64, default_rough_datum(eq64), axis=0)
    gx128 = grad_energy(eq128, default_rough_datum(eq128), axis=0)
    assert gx128 > 2.0 * gx64


def test_smooth_control_gradients_are_resolution_stable(eq64, eq128):
    gx64 = grad_energy(eq64, default_smooth_datum(eq64), axis=0)
    gx128 = grad_energy(eq128, default_smooth_datum(eq128), axis=0)
    assert gx128 == pytest.approx(gx64, rel=1e-3)
    assert gx64 < 1.0   # bounded, in contrast to the rough datum's ~11


# ---------------------------------------------------------------------------
# decay probe
# ---------------------------------------------------------------------------

def test_decay_probe_report_and_determinism(eq64, params):
    kw = dict(dt=0.02, t_final=3.0, window=(0.5, 3.0))
    rep = run_decay_probe(eq64, params, 0.002, **kw)
    assert rep["schema"] == "decay-probe/1"
    assert rep["lambda_certified"] == 0.002
    assert rep["lambda_effective"] == 0.002
    # the dynamics decays orders of magnitude faster than this tiny rate
    assert rep["lambda_measured"] > 0.1
    assert rep["verdict"] and rep["verdict_rate"] and rep["verdict_pathwise"]
    assert rep["pathwise_max_ratio"] <= 1.01
    assert 0.9 < rep["r2"] <= 1.0
    assert rep["n_samples"] >= 10
    assert rep["h1_final"] >= 0.0
    assert rep == run_decay_probe(eq64, params, 0.002, **kw)


def test_decay_probe_scale_hook_flips_verdict(eq64, params):
    rep = run_decay_probe(eq64, params, 0.002, dt=0.02, t_final=3.0,
                          window=(0.5, 3.0), lambda_scale=1000.0)
    assert rep["lambda_effective"] == pytest.approx(2.0)
    assert not rep["verdict_rate"]
    assert not rep["verdict"]


def test_decay_probe_accepts_certificate_objects(eq64, params):
    class Fake:
        lam = 0.002
        gamma = 2.0
        eps = 0.2

    rep = run_decay_probe(eq64, params, Fake(), dt=0.02, t_final=2.0,
                          window=(0.5, 2.0))
    assert rep["lambda_certified"] == 0.002


def test_decay_probe_input_validation(eq64, params):
    with pytest.raises(ConfigError, match="positive certified rate"):
        run_decay_probe(eq64, params, 0.0)
    with pytest.raises(ConfigError, match="degenerate"):
        run_decay_probe(eq64, params, 0.002, h0=np.zeros(eq64.grid.shape()),
                        dt=0.02, t_final=1.0)
    with pytest.raises(ConfigError, match="shape"):
        run_decay_probe(eq64, params, 0.002, h0=np.ones((3, 3)))


# ---------------------------------------------------------------------------
# short-time regularization probe
# ---------------------------------------------------------------------------

def test_hypo_probe_schema_and_dt_cap(eq64, params):
    rep = run_hypo_probe(eq64, params)
    assert rep["schema"] == "hypo-probe/1"
    assert rep["rough"] is True
    # on this coarse grid the CFL step is looser than t0/20, so the cap binds
    assert rep["dt"] == pytest.approx(min(0.9 * cfl_limit(eq64, params), 0.3 / 20.0))
    assert rep["windows"]["fit"][0] == pytest.approx(5.0 * rep["dt"])
    assert rep["verdicts"]["sups_finite"]
    assert np.isfinite(rep["sups"]["t3_gradx2"])
    assert np.isfinite(rep["sups"]["t_gradv2"])
    # gradients do decay steeply from rough data even at 64 cells
    assert rep["slopes"]["gradx2"] < -0.5
    assert rep["slopes"]["gradv2"] < -0.3
    assert rep == run_hypo_probe(eq64, params)


def test_hypo_probe_smooth_control_slopes_near_zero(eq64, params):
    rep = run_hypo_probe(eq64, params, rough=False)
    assert rep["rough"] is False
    assert abs(rep["slopes"]["gradx2"]) < 0.45
    assert abs(rep["slopes"]["gradv2"]) < 0.45


def test_hypo_probe_custom_datum_is_treated_as_control(eq64, params):
    X, V = eq64.grid.meshes()
    rep = run_hypo_probe(eq64, params, datum=np.cos(np.pi * X / 12.0) * V)
    assert rep["rough"] is False
    assert np.isfinite(rep["slopes"]["gradx2"])
