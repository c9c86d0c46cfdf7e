import numpy as np
import pytest

from conftest import smooth_datum
from vpfp.errors import ConfigError, NumericalError
from vpfp.evolution import (EvolutionConfig, Stepper, Trajectory, apply_K,
                            cfl_limit, evolve, nonlinear_term,
                            picard_short_time, project_mean_zero, step)
from vpfp.grid import field_from_csv, integrate, weighted_norm_sq


def test_config_validation():
    with pytest.raises(ConfigError, match="dt"):
        EvolutionConfig(dt=0.0, t_final=1.0)
    with pytest.raises(ConfigError, match="t_final"):
        EvolutionConfig(dt=0.1, t_final=-1.0)
    with pytest.raises(ConfigError, match="mode"):
        EvolutionConfig(dt=0.1, t_final=1.0, mode="implicit")
    with pytest.raises(ConfigError, match="scheme"):
        EvolutionConfig(dt=0.1, t_final=1.0, scheme="euler")
    with pytest.raises(ConfigError, match="record_every"):
        EvolutionConfig(dt=0.1, t_final=1.0, record_every=0)
    with pytest.raises(ConfigError, match="limiter"):
        EvolutionConfig(dt=0.1, t_final=1.0, limiter="superbee")
    assert EvolutionConfig(dt=0.1, t_final=1.05).n_steps == 10


def test_cfl_limit_formula(eq64, params):
    g = eq64.grid
    expected = min(0.9 * g.dx / np.max(np.abs(g.v)),
                   0.9 * g.dv / np.max(np.abs(eq64.W1)))
    assert cfl_limit(eq64, params) == pytest.approx(expected, rel=1e-12)
    # including a datum's field can only tighten the bound
    h = smooth_datum(eq64)
    assert cfl_limit(eq64, params, h0=h) <= cfl_limit(eq64, params)


def test_cfl_violation_raises_before_stepping(eq64, params):
    h = smooth_datum(eq64)
    cfg = EvolutionConfig(dt=1.0, t_final=2.0)
    with pytest.raises(NumericalError, match="CFL"):
        evolve(h, cfg, eq64, params)


def test_project_mean_zero(eq64):
    rng = np.random.default_rng(0)
    h = rng.normal(size=eq64.grid.shape()) + 0.7
    out = project_mean_zero(h, eq64)
    assert integrate(eq64.grid, out * eq64.f_inf) == pytest.approx(0.0, abs=1e-14)


def test_maxwellian_is_stationary_under_velocity_relaxation(eq64, params):
    """Chang-Cooper keeps the discrete Maxwellian invariant to round-off."""
    cfg = EvolutionConfig(dt=0.05, t_final=1.0, enable_transport=False,
                          functionals=())
    st = Stepper(eq64, params, cfg)
    g = eq64.f_inf.copy()
    for _ in range(20):
        g = st._fokker_planck_step(g)
    assert np.max(np.abs(g - eq64.f_inf)) < 1e-13 * np.max(eq64.f_inf)


def test_velocity_relaxation_rate_analytic(params):
    """h = v is the first Hermite mode with continuum decay rate nu.

    The discrete relaxation rate carries an O(dv^2) bias, so the oracle is
    second-order convergence of the measured rate toward nu.
    """
    from vpfp import build_grid, make_potential, solve_pbe

    def rate(nv):
        grid = build_grid(8, nv, 6.0, 6.0)
        eq = solve_pbe(grid, make_potential("quadratic"), params, coupling=0.0)
        h0 = np.broadcast_to(grid.v[None, :], grid.shape()).copy()
        cfg = EvolutionConfig(dt=0.002, t_final=1.0, enable_transport=False,
                              functionals=("norm2",), coupling=0.0)
        traj = evolve(h0, cfg, eq, params)
        ratio = traj.column("norm2")[-1] / traj.column("norm2")[0]
        return -0.5 * np.log(ratio) / (traj.times[-1] - traj.times[0])

    err64 = abs(rate(64) - params.nu)
    err128 = abs(rate(128) - params.nu)
    assert err64 < 0.01
    assert err64 / err128 == pytest.approx(4.0, rel=0.25)


def test_mass_conservation_linear_and_nonlinear(eq64, params):
    h0 = smooth_datum(eq64, amplitude=0.1)
    norm0 = np.sqrt(weighted_norm_sq(eq64.grid, h0, eq64.f_inf))
    for mode in ("linear", "nonlinear"):
        cfg = EvolutionConfig(dt=0.01, t_final=2.0, mode=mode,
                              functionals=("mass",), record_every=20)
        traj = evolve(h0, cfg, eq64, params)
        drift = np.max(np.abs(traj.column("mass") - traj.column("mass")[0]))
        assert drift <= 1e-13 * norm0


def test_linearity_of_linear_mode(eq64, params):
    h0 = smooth_datum(eq64)
    cfg = EvolutionConfig(dt=0.01, t_final=0.2, functionals=())
    one = evolve(h0, cfg, eq64, params).final.values
    three = evolve(3.0 * h0, cfg, eq64, params).final.values
    np.testing.assert_allclose(three, 3.0 * one, rtol=1e-11, atol=1e-13)


def test_strang_splitting_second_order(eq64, params):
    h0 = smooth_datum(eq64)
    finals = []
    for dt in (0.02, 0.01, 0.005):
        cfg = EvolutionConfig(dt=dt, t_final=0.4, functionals=())
        finals.append(evolve(h0, cfg, eq64, params).final.values)
    e1 = np.max(np.abs(finals[0] - finals[1]))
    e2 = np.max(np.abs(finals[1] - finals[2]))
    order = np.log2(e1 / e2)
    assert 1.7 < order < 2.3


def test_decay_toward_equilibrium(eq64, params):
    h0 = smooth_datum(eq64)
    cfg = EvolutionConfig(dt=0.02, t_final=4.0, functionals=("norm2",),
                          record_every=10)
    traj = evolve(h0, cfg, eq64, params)
    n = traj.column("norm2")
    assert n[-1] < 0.05 * n[0]
    # monotone in the large (no sustained growth along the way)
    assert np.all(n[1:] < n[:-1] * 1.0 + 1e-12)


def test_sampling_times_and_forced_final(eq64, params):
    h0 = smooth_datum(eq64)
    cfg = EvolutionConfig(dt=0.01, t_final=0.25, record_every=7,
                          functionals=("mass",))
    traj = evolve(h0, cfg, eq64, params)
    np.testing.assert_allclose(traj.times[:-1], 0.01 * 7 * np.arange(4),
                               atol=1e-12)
    assert traj.times[-1] == pytest.approx(0.25)
    assert traj.final is not None


def test_snapshots_roundtrip(tmp_path, eq64, params):
    h0 = smooth_datum(eq64)
    cfg = EvolutionConfig(dt=0.01, t_final=0.05, snapshot_every=5,
                          functionals=("mass",))
    traj = evolve(h0, cfg, eq64, params)
    assert len(traj.snapshots) == 2  # t = 0 and t = 0.05
    paths = traj.write_snapshots(tmp_path)
    assert all(p.endswith(".csv") for p in paths)
    back = field_from_csv(paths[0])
    np.testing.assert_array_equal(back.values, traj.snapshots[0][1].values)


def test_trajectory_csv_format(tmp_path, eq64, params):
    h0 = smooth_datum(eq64)
    cfg = EvolutionConfig(dt=0.01, t_final=0.03, functionals=("norm2", "mass"))
    traj = evolve(h0, cfg, eq64, params)
    p = tmp_path / "traj.csv"
    traj.to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "t,norm2,mass"
    assert len(lines) == traj.times.size + 1
    row = np.array([float(tok) for tok in lines[1].split(",")])
    assert row[0] == 0.0
    assert row[1] == pytest.approx(traj.column("norm2")[0], rel=1e-16)


def test_step_wrapper_matches_stepper(eq64, params):
    h0 = smooth_datum(eq64)
    cfg = EvolutionConfig(dt=0.01, t_final=1.0)
    out = step(h0, 0.01, cfg, eq64, params)
    st = Stepper(eq64, params, cfg)
    np.testing.assert_allclose(out.values, st.step_h(h0), rtol=1e-14)


def test_apply_K_kills_equilibrium_direction(eq64, params):
    """K annihilates constants when the field coupling is off."""
    h = np.ones(eq64.grid.shape())
    Kh = apply_K(h, eq64, params, coupling=0.0)
    assert np.max(np.abs(Kh)) < 1e-12


def test_nonlinear_term_quadratic_scaling(eq64, params):
    h = smooth_datum(eq64)
    r1 = nonlinear_term(h, eq64, params)
    r2 = nonlinear_term(2.0 * h, eq64, params)
    np.testing.assert_allclose(r2, 4.0 * r1, rtol=1e-12, atol=1e-15)


def test_picard_validation(eq64, params):
    h0 = smooth_datum(eq64)
    with pytest.raises(ConfigError, match="t_final"):
        picard_short_time(h0, 0.5, 2, eq64, params, dt=1e-3)
    with pytest.raises(ConfigError, match="n_iter"):
        picard_short_time(h0, 0.1, 9, eq64, params, dt=1e-3)


def test_picard_zero_iterations_is_linear_flow(eq64, params):
    h0 = smooth_datum(eq64, amplitude=0.1)
    out, rep = picard_short_time(h0, 0.1, 0, eq64, params, dt=1e-3)
    cfg = EvolutionConfig(dt=1e-3, t_final=0.1, functionals=())
    lin = evolve(h0, cfg, eq64, params).final.values
    np.testing.assert_allclose(out.values, lin, rtol=1e-12, atol=1e-14)
    assert rep.n_iter == 0 and rep.converged


def test_picard_contracts_toward_nonlinear_flow(eq64, params):
    h0 = smooth_datum(eq64, amplitude=0.1)
    out, rep = picard_short_time(h0, 0.1, 3, eq64, params, dt=1e-3)
    assert rep.converged
    assert len(rep.increments) == 3
    # successive corrections shrink: the iteration is a short-time contraction
    assert rep.increments[-1] < rep.increments[0]
    cfg = EvolutionConfig(dt=1e-3, t_final=0.1, mode="nonlinear", functionals=())
    ref = evolve(h0, cfg, eq64, params).final.values
    rel = (np.max(np.abs(out.values - ref))
           / np.max(np.abs(ref)))
    assert rel < 1e-3


def test_trajectory_column_lookup():
    tr = Trajectory(times=np.array([0.0, 1.0]),
                    data={"a": np.array([1.0, 2.0])})
    np.testing.assert_array_equal(tr.column("a"), [1.0, 2.0])
    with pytest.raises(KeyError):
        tr.column("missing")
